//! Inference for the 3–64–64–3 tanh network mapping sorted moment
//! eigenvalues to sorted multipliers.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const MLP_ARCH: [usize; 4] = [3, 64, 64, 3];
pub const MLP_ACTIVATION: &str = "tanh";
/// Largest accepted relative deviation from stored probe outputs on load.
pub const PROBE_TOLERANCE: f64 = 1e-9;

/// Affine layer `y = W x + b`, `W` stored row-major as `[out][in]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weight: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.weight
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).fold(*b, |acc, (w, xi)| acc + w * xi))
            .collect()
    }
}

/// Stored input and the producing network's output for consistency checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub input: [f64; 3],
    pub output: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpProvenance {
    pub b: f64,
    pub dataset_id: String,
    #[serde(default, flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

/// Portable network description with Z-score statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpWeights {
    pub arch: Vec<usize>,
    pub activation: String,
    pub layers: Vec<DenseLayer>,
    pub input_mean: [f64; 3],
    pub input_std: [f64; 3],
    pub output_mean: [f64; 3],
    pub output_std: [f64; 3],
    #[serde(default)]
    pub probes: Vec<Probe>,
    pub provenance: MlpProvenance,
}

fn format_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

impl MlpWeights {
    /// Network with all weights and biases zero.
    pub fn zeros(b: f64, input_mean: [f64; 3], input_std: [f64; 3], output_mean: [f64; 3], output_std: [f64; 3]) -> Self {
        let layers = MLP_ARCH
            .windows(2)
            .map(|w| DenseLayer {
                weight: vec![vec![0.0; w[0]]; w[1]],
                bias: vec![0.0; w[1]],
            })
            .collect();
        Self {
            arch: MLP_ARCH.to_vec(),
            activation: MLP_ACTIVATION.to_string(),
            layers,
            input_mean,
            input_std,
            output_mean,
            output_std,
            probes: Vec::new(),
            provenance: MlpProvenance {
                b,
                dataset_id: "none".to_string(),
                extra: Default::default(),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.arch != MLP_ARCH {
            return Err(format_err(format!("architecture {:?}, expected {MLP_ARCH:?}", self.arch)));
        }
        if self.activation != MLP_ACTIVATION {
            return Err(format_err(format!(
                "activation {:?}, expected {MLP_ACTIVATION:?}",
                self.activation
            )));
        }
        if self.layers.len() != self.arch.len() - 1 {
            return Err(format_err(format!(
                "{} layers for a {}-layer architecture",
                self.layers.len(),
                self.arch.len() - 1
            )));
        }
        for (k, (layer, dims)) in self.layers.iter().zip(self.arch.windows(2)).enumerate() {
            let (n_in, n_out) = (dims[0], dims[1]);
            if layer.weight.len() != n_out || layer.weight.iter().any(|r| r.len() != n_in) {
                return Err(format_err(format!("layer {k}: weight is not {n_out}x{n_in}")));
            }
            if layer.bias.len() != n_out {
                return Err(format_err(format!("layer {k}: bias length {} != {n_out}", layer.bias.len())));
            }
            if layer.weight.iter().flatten().chain(&layer.bias).any(|v| !v.is_finite()) {
                return Err(format_err(format!("layer {k}: non-finite parameter")));
            }
        }
        let stats = [self.input_mean, self.input_std, self.output_mean, self.output_std];
        if stats.iter().flatten().any(|v| !v.is_finite()) {
            return Err(format_err("non-finite normalization statistics"));
        }
        if self.input_std.iter().chain(&self.output_std).any(|&s| s <= 0.0) {
            return Err(format_err("normalization std entries must be positive"));
        }
        Ok(())
    }

    /// Z-score input, two tanh layers, linear output, inverse Z-score.
    pub fn infer(&self, c_sorted: [f64; 3]) -> [f64; 3] {
        let mut x: Vec<f64> = (0..3).map(|k| (c_sorted[k] - self.input_mean[k]) / self.input_std[k]).collect();
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            x = layer.apply(&x);
            if k < last {
                x.iter_mut().for_each(|v| *v = v.tanh());
            }
        }
        [0, 1, 2].map(|k| x[k] * self.output_std[k] + self.output_mean[k])
    }

    /// Largest relative mismatch between `infer` and the stored probe outputs.
    pub fn probe_mismatch(&self) -> f64 {
        self.probes
            .iter()
            .flat_map(|p| {
                let got = self.infer(p.input);
                (0..3).map(move |k| (got[k] - p.output[k]).abs() / p.output[k].abs().max(f64::MIN_POSITIVE))
            })
            .fold(0.0, f64::max)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer_pretty(f, self)?;
        Ok(())
    }
}

/// Reads and validates a weight file, rejecting one whose stored probes
/// this implementation does not reproduce.
pub fn nn_load(path: &Path) -> Result<MlpWeights> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    let w: MlpWeights = serde_json::from_reader(f)?;
    w.validate()?;
    let mismatch = w.probe_mismatch();
    if mismatch > PROBE_TOLERANCE {
        return Err(format_err(format!(
            "probe outputs not reproduced: relative mismatch {mismatch:e} > {PROBE_TOLERANCE:e}"
        )));
    }
    Ok(w)
}

pub fn nn_infer(weights: &MlpWeights, c_sorted: [f64; 3]) -> [f64; 3] {
    weights.infer(c_sorted)
}
