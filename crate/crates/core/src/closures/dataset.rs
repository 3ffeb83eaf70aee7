//! Training pairs `(c, λ)` generated through the forward map.

use super::qe::QeIntegrator;
use crate::error::{invalid, Error, Result};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Latin-hypercube box for multiplier triples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingSpec {
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Samples drawn before filtering.
    pub count: usize,
    pub seed: u64,
    /// Samples with `tr C ≥ 1 − trace_margin` are discarded.
    pub trace_margin: f64,
}

impl Default for SamplingSpec {
    fn default() -> Self {
        Self {
            lambda_min: -10.0,
            lambda_max: 60.0,
            count: 20_000,
            seed: 0,
            trace_margin: 1e-2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QeRecord {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
}

impl QeRecord {
    pub fn c(&self) -> [f64; 3] {
        [self.c1, self.c2, self.c3]
    }

    pub fn lambda(&self) -> [f64; 3] {
        [self.l1, self.l2, self.l3]
    }

    fn is_valid(&self) -> bool {
        let c = self.c();
        let t = c[0] + c[1] + c[2];
        c[0] >= c[1] && c[1] >= c[2] && c[2] > 0.0 && t > 0.0 && t < 1.0 && self.lambda().iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetadata {
    pub b: f64,
    pub sampling: SamplingSpec,
    pub count: usize,
    pub dataset_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QeDataset {
    pub records: Vec<QeRecord>,
    pub metadata: DatasetMetadata,
}

/// Path of the JSON sidecar that accompanies a dataset CSV.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

impl QeDataset {
    pub fn validate(&self) -> Result<()> {
        if let Some((i, _)) = self.records.iter().enumerate().find(|(_, r)| !r.is_valid()) {
            return Err(Error::Format(format!("record {i} is not a sorted admissible triple")));
        }
        if self.records.len() != self.metadata.count {
            return Err(Error::Format(format!(
                "{} records but metadata count {}",
                self.records.len(),
                self.metadata.count
            )));
        }
        Ok(())
    }

    /// Writes the CSV (`c1,c2,c3,l1,l2,l3`) and its sidecar.
    pub fn save(&self, csv_path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(csv_path).map_err(csv_err)?;
        for r in &self.records {
            w.serialize(r).map_err(csv_err)?;
        }
        w.flush()?;
        let f = std::io::BufWriter::new(std::fs::File::create(sidecar_path(csv_path))?);
        serde_json::to_writer_pretty(f, &self.metadata)?;
        Ok(())
    }

    pub fn load(csv_path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(csv_path).map_err(csv_err)?;
        let header = r.headers().map_err(csv_err)?.clone();
        if header.iter().collect::<Vec<_>>() != ["c1", "c2", "c3", "l1", "l2", "l3"] {
            return Err(Error::Format(format!("unexpected dataset header {header:?}")));
        }
        let records = r.deserialize().collect::<std::result::Result<Vec<QeRecord>, _>>().map_err(csv_err)?;
        let f = std::io::BufReader::new(std::fs::File::open(sidecar_path(csv_path))?);
        let metadata: DatasetMetadata = serde_json::from_reader(f)?;
        let ds = Self { records, metadata };
        ds.validate()?;
        Ok(ds)
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format(format!("{other:?}")),
    }
}

/// One Latin-hypercube design of `n` points in `[lo, hi]³`.
pub fn latin_hypercube(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<[f64; 3]> {
    let mut axes: Vec<Vec<f64>> = (0..3)
        .map(|_| {
            let mut strata: Vec<usize> = (0..n).collect();
            strata.shuffle(rng);
            strata
                .into_iter()
                .map(|k| lo + (hi - lo) * (k as f64 + rng.random::<f64>()) / n as f64)
                .collect()
        })
        .collect();
    let (z, rest) = axes.split_at_mut(2);
    let (x, y) = z.split_at_mut(1);
    (0..n).map(|i| [x[0][i], y[0][i], rest[0][i]]).collect()
}

/// Samples sorted multiplier triples, maps them through the forward map and
/// keeps the admissible records.
pub fn gen_dataset(integrator: &QeIntegrator, spec: &SamplingSpec) -> Result<QeDataset> {
    if !(spec.lambda_min < spec.lambda_max && spec.lambda_min.is_finite() && spec.lambda_max.is_finite()) {
        return Err(invalid(format!(
            "sampling box [{}, {}] is empty or unbounded",
            spec.lambda_min, spec.lambda_max
        )));
    }
    if spec.count == 0 || !(0.0..1.0).contains(&spec.trace_margin) {
        return Err(invalid("sampling needs count > 0 and trace_margin in [0, 1)"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut records = Vec::with_capacity(spec.count);
    for mut lam in latin_hypercube(&mut rng, spec.count, spec.lambda_min, spec.lambda_max) {
        lam.sort_by(|a, b| b.total_cmp(a));
        let c = integrator.forward(lam)?;
        if c.iter().sum::<f64>() >= 1.0 - spec.trace_margin {
            continue;
        }
        let mut order = [0usize, 1, 2];
        order.sort_by(|&i, &j| c[j].total_cmp(&c[i]));
        let rec = QeRecord {
            c1: c[order[0]],
            c2: c[order[1]],
            c3: c[order[2]],
            l1: lam[order[0]],
            l2: lam[order[1]],
            l3: lam[order[2]],
        };
        if rec.is_valid() {
            records.push(rec);
        }
    }
    if records.is_empty() {
        return Err(invalid("no admissible samples left after filtering"));
    }
    let metadata = DatasetMetadata {
        b: integrator.b,
        sampling: *spec,
        count: records.len(),
        dataset_id: format!(
            "qe-b{}-lhs[{},{}]-n{}-seed{}",
            integrator.b, spec.lambda_min, spec.lambda_max, spec.count, spec.seed
        ),
    };
    Ok(QeDataset { records, metadata })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn latin_hypercube_hits_every_stratum_once() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts = latin_hypercube(&mut rng, 50, -1.0, 4.0);
        for d in 0..3 {
            let mut seen = vec![false; 50];
            for p in &pts {
                let k = ((p[d] + 1.0) / 5.0 * 50.0).floor() as usize;
                assert!(!seen[k]);
                seen[k] = true;
            }
        }
    }

    #[test]
    fn records_are_sorted_admissible_and_round_trip() {
        let qi = QeIntegrator::new(12.0).unwrap();
        let spec = SamplingSpec {
            count: 300,
            seed: 5,
            ..Default::default()
        };
        let ds = gen_dataset(&qi, &spec).unwrap();
        ds.validate().unwrap();
        assert!(ds.records.len() as f64 >= 0.9 * spec.count as f64, "kept {}", ds.records.len());
        let dir = std::env::temp_dir().join(format!("qe-dataset-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("data.csv");
        ds.save(&path).unwrap();
        let header = std::fs::read_to_string(&path).unwrap();
        assert!(header.starts_with("c1,c2,c3,l1,l2,l3\n"));
        assert_eq!(QeDataset::load(&path).unwrap(), ds);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn zero_multipliers_give_equilibrium() {
        let qi = QeIntegrator::new(12.0).unwrap();
        let spec = SamplingSpec {
            lambda_min: -1e-9,
            lambda_max: 1e-9,
            count: 3,
            ..Default::default()
        };
        let ds = gen_dataset(&qi, &spec).unwrap();
        for r in &ds.records {
            for c in r.c() {
                assert!((c - 1.0 / 17.0).abs() < 1e-9);
            }
        }
    }
}
