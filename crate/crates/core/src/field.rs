//! Reconstruction of the distribution from spectral coefficients, error
//! norms, moments, stresses and sampled slices.

use crate::error::{invalid, Error, Result};
use crate::layout::SpectralLayout;
use crate::radial::RadialBasis;
use crate::solver::AssembledOperator;
use crate::special::{azimuthal, gauss_jacobi_rule, gauss_legendre_rule, real_spherical_harmonic, LegendreTable};
use crate::tensor::{ConformationTensor, Mat3, StressTensor, IDENTITY};
use crate::transform::SphericalGrid;
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

/// Cartesian point to `(r, θ, φ)`.
pub fn to_spherical(q: [f64; 3]) -> (f64, f64, f64) {
    let r = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2]).sqrt();
    if r == 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let theta = (q[2] / r).clamp(-1.0, 1.0).acos();
    let phi = q[1].atan2(q[0]);
    (r, theta, if phi < 0.0 { phi + 2.0 * PI } else { phi })
}

/// `(r, θ, φ)` to a Cartesian point.
pub fn to_cartesian(r: f64, theta: f64, phi: f64) -> [f64; 3] {
    [
        r * theta.sin() * phi.cos(),
        r * theta.sin() * phi.sin(),
        r * theta.cos(),
    ]
}

/// Pointwise evaluation of `h` and `f = (1 − r²)^s h`.
#[derive(Debug, Clone)]
pub struct FieldEvaluator {
    layout: SpectralLayout,
    s: f64,
    bases: Vec<RadialBasis>,
}

impl FieldEvaluator {
    pub fn new(layout: &SpectralLayout, s: f64) -> Result<Self> {
        let bases = layout
            .degrees
            .iter()
            .map(|&l| RadialBasis::with_any_degree(layout.kind, s, l, layout.n_max))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            layout: layout.clone(),
            s,
            bases,
        })
    }

    pub fn for_operator(op: &AssembledOperator) -> Result<Self> {
        Self::new(&op.layout, op.cfg.s)
    }

    /// `h(p, θ, φ)`.
    pub fn h(&self, coeffs: &[f64], p: f64, theta: f64, phi: f64) -> f64 {
        let l_max = self.layout.degrees.iter().copied().max().unwrap_or(0);
        let leg = LegendreTable::new(l_max, theta.cos());
        let radial: Vec<Vec<f64>> = self
            .bases
            .iter()
            .map(|b| {
                let mut v = vec![0.0; b.dim];
                b.eval_all(p, &mut v);
                v
            })
            .collect();
        let mut acc = 0.0;
        for (mi, mode) in self.layout.modes.iter().enumerate() {
            let c = &coeffs[self.layout.block(mi)];
            let rad = &radial[self.layout.degree_slot(mi)];
            let psi: f64 = c.iter().zip(rad).map(|(a, b)| a * b).sum();
            if psi != 0.0 {
                acc += psi * leg.value(mode.l, mode.m) * azimuthal(mode.m, mode.v, phi);
            }
        }
        acc
    }

    /// `f(r, θ, φ)`; rejects points outside the open unit ball.
    pub fn f(&self, coeffs: &[f64], r: f64, theta: f64, phi: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&r) {
            return Err(invalid(format!("point with r = {r} lies outside the open unit ball")));
        }
        let p = 2.0 * r * r - 1.0;
        Ok((1.0 - r * r).powf(self.s) * self.h(coeffs, p, theta, phi))
    }

    /// `f` at a Cartesian point.
    pub fn f_cartesian(&self, coeffs: &[f64], q: [f64; 3]) -> Result<f64> {
        let (r, t, p) = to_spherical(q);
        self.f(coeffs, r, t, p)
    }
}

/// `f` at each `(r, θ, φ)` point.
pub fn evaluate_f(eval: &FieldEvaluator, coeffs: &[f64], points: &[(f64, f64, f64)]) -> Result<Vec<f64>> {
    points.iter().map(|&(r, t, p)| eval.f(coeffs, r, t, p)).collect()
}

/// Relative error `‖h − h_ref‖ / ‖h_ref‖` in the grid's weighted norm. With
/// the weight `(1−p)^s (1+p)^{1/2}` this is the weighted L² error of the
/// manufactured-solution study.
pub fn weighted_l2_error(
    grid: &SphericalGrid,
    coeffs: &[f64],
    h_ref: impl Fn(f64, f64, f64) -> f64,
) -> Result<f64> {
    let num = grid.synthesize(coeffs);
    let exact = grid.sample(h_ref);
    let diff: Vec<f64> = num.iter().zip(&exact).map(|(a, b)| a - b).collect();
    let den = grid.inner(&exact, &exact);
    if !(den > 0.0) {
        return Err(invalid("reference field has zero norm"));
    }
    Ok((grid.inner(&diff, &diff) / den).sqrt())
}

/// Relative unweighted L² distance `‖f_a − f_b‖ / ‖f_b‖` on a grid built
/// with radial weight `(1−p)^0 (1+p)^{1/2}`, which is the volume element of
/// the ball up to a constant.
pub fn relative_l2(grid: &SphericalGrid, fa: &[f64], fb: &[f64]) -> Result<f64> {
    if (grid.spec.alpha, grid.spec.beta) != (0.0, 0.5) {
        return Err(invalid("unweighted ball norm needs a grid with weight (1+p)^(1/2)"));
    }
    let diff: Vec<f64> = fa.iter().zip(fb).map(|(a, b)| a - b).collect();
    let den = grid.inner(fb, fb);
    if !(den > 0.0) {
        return Err(invalid("reference field has zero norm"));
    }
    Ok((grid.inner(&diff, &diff) / den).sqrt())
}

/// `f` sampled on a grid node by node, `f = ((1−p)/2)^s h`.
pub fn density_on_grid(grid: &SphericalGrid, s: f64, coeffs: &[f64]) -> Vec<f64> {
    let mut vals = grid.synthesize(coeffs);
    let per = grid.x.len() * grid.phi.len();
    for (ip, &p) in grid.p.nodes.iter().enumerate() {
        let w = (0.5 * (1.0 - p)).powf(s);
        vals[ip * per..(ip + 1) * per].iter_mut().for_each(|v| *v *= w);
    }
    vals
}

/// Integrals of `r̂_i r̂_j Y` over the sphere for every `l ∈ {0, 2}` mode.
fn quadratic_harmonic_moments(layout: &SpectralLayout) -> Result<Vec<(usize, [f64; 6])>> {
    let x = gauss_legendre_rule(8)?;
    let nphi = 16;
    let mut out = Vec::new();
    for (mi, mode) in layout.modes.iter().enumerate() {
        if mode.l > 2 {
            continue;
        }
        let mut acc = [0.0; 6];
        for (&xj, &wj) in x.nodes.iter().zip(&x.weights) {
            let theta = xj.acos();
            for k in 0..nphi {
                let phi = 2.0 * PI * k as f64 / nphi as f64;
                let u = to_cartesian(1.0, theta, phi);
                let y = real_spherical_harmonic(*mode, theta, phi)?;
                let w = wj * 2.0 * PI / nphi as f64 * y;
                for (a, (i, j)) in acc.iter_mut().zip(SYM_PAIRS) {
                    *a += w * u[i] * u[j];
                }
            }
        }
        out.push((mi, acc));
    }
    Ok(out)
}

const SYM_PAIRS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)];

fn unpack(v: [f64; 6]) -> Mat3 {
    let mut m = [[0.0; 3]; 3];
    for (a, (i, j)) in v.into_iter().zip(SYM_PAIRS) {
        m[i][j] = a;
        m[j][i] = a;
    }
    m
}

/// Linear functionals giving the mass, `∫ qq f dq` and `∫ qq/(1−|q|²) f dq`
/// directly from coefficients. Only `l ≤ 2` modes contribute.
#[derive(Debug, Clone)]
pub struct MomentEvaluator {
    mass: Vec<(usize, f64)>,
    second: Vec<(usize, [f64; 6])>,
    spring: Vec<(usize, [f64; 6])>,
}

impl MomentEvaluator {
    pub fn new(op: &AssembledOperator) -> Result<Self> {
        Self::from_layout(&op.layout, op.cfg.s)
    }

    pub fn from_layout(layout: &SpectralLayout, s: f64) -> Result<Self> {
        // dq = (1/4) ((1+p)/2)^{1/2} dp dΩ, r² = (1+p)/2, 1 − r² = (1−p)/2
        let n_pts = layout.n_max + 8;
        let rule_f = gauss_jacobi_rule(s, 0.5, n_pts)?;
        let rule_g = gauss_jacobi_rule(s - 1.0, 0.5, n_pts)?;
        let c_f = 0.25 * 2f64.powf(-s - 0.5);
        let c_g = 0.25 * 2f64.powf(-(s - 1.0) - 0.5);
        let y00 = (4.0 * PI).sqrt();
        let mut mass = Vec::new();
        let mut second = Vec::new();
        let mut spring = Vec::new();
        for (mi, ang) in quadratic_harmonic_moments(layout)? {
            let range = layout.block(mi);
            let l = layout.modes[mi].l;
            let basis = RadialBasis::with_any_degree(layout.kind, s, l, layout.n_max)?;
            let mut vals = vec![0.0; basis.dim];
            let mut i0 = vec![0.0; basis.dim];
            let mut i2 = vec![0.0; basis.dim];
            let mut ig = vec![0.0; basis.dim];
            for (&p, &w) in rule_f.nodes.iter().zip(&rule_f.weights) {
                basis.eval_all(p, &mut vals);
                for n in 0..basis.dim {
                    i0[n] += c_f * w * vals[n];
                    i2[n] += c_f * w * 0.5 * (1.0 + p) * vals[n];
                }
            }
            for (&p, &w) in rule_g.nodes.iter().zip(&rule_g.weights) {
                basis.eval_all(p, &mut vals);
                for n in 0..basis.dim {
                    ig[n] += c_g * w * 0.5 * (1.0 + p) * vals[n];
                }
            }
            for (n, idx) in range.enumerate() {
                if l == 0 {
                    mass.push((idx, y00 * i0[n]));
                }
                second.push((idx, ang.map(|a| a * i2[n])));
                spring.push((idx, ang.map(|a| a * ig[n])));
            }
        }
        Ok(Self { mass, second, spring })
    }

    /// `∫ f dq`.
    pub fn mass(&self, coeffs: &[f64]) -> f64 {
        self.mass.iter().map(|&(i, w)| w * coeffs[i]).sum()
    }

    fn tensor(list: &[(usize, [f64; 6])], coeffs: &[f64]) -> Mat3 {
        let mut acc = [0.0; 6];
        for (i, w) in list {
            for (a, b) in acc.iter_mut().zip(w) {
                *a += b * coeffs[*i];
            }
        }
        unpack(acc)
    }

    /// `C = ∫ qq f dq / ∫ f dq`.
    pub fn conformation(&self, coeffs: &[f64]) -> Result<ConformationTensor> {
        let m = self.mass(coeffs);
        if !(m.abs() > 0.0) {
            return Err(invalid("conformation tensor of a zero-mass state"));
        }
        let mut c = Self::tensor(&self.second, coeffs);
        c.iter_mut().flatten().for_each(|v| *v /= m);
        Ok(ConformationTensor::new(c))
    }

    /// Reference polymer stress `b ⟨qq/(1−|q|²)⟩ − I` of the unit-mass state.
    pub fn stress(&self, coeffs: &[f64], b: f64) -> Result<StressTensor> {
        let m = self.mass(coeffs);
        if !(m.abs() > 0.0) {
            return Err(invalid("stress of a zero-mass state"));
        }
        let mut t = Self::tensor(&self.spring, coeffs);
        for i in 0..3 {
            for j in 0..3 {
                t[i][j] = b * t[i][j] / m - IDENTITY[i][j];
            }
        }
        Ok(StressTensor::new(t))
    }

    /// Coefficients rescaled to unit mass.
    pub fn normalized(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        let m = self.mass(coeffs);
        if !(m.abs() > 0.0) || !m.is_finite() {
            return Err(Error::Inadmissible(format!("cannot normalize a state with mass {m}")));
        }
        Ok(coeffs.iter().map(|c| c / m).collect())
    }
}

/// Sampling pattern for exported fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SliceSpec {
    /// `n × n` grid on `[−1, 1]²` in the plane `q₃ = 0`.
    PlaneQ3 { n: usize },
    /// `n` points on `(−1, 1)` along coordinate axis `axis`.
    Axis { axis: usize, n: usize },
}

/// Sampled field on a slice; points outside the open ball are dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSlice {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
    pub skipped: usize,
}

impl FieldSlice {
    /// The last column.
    pub fn values(&self) -> Vec<f64> {
        self.rows.iter().map(|r| *r.last().unwrap()).collect()
    }
}

/// Samples a density `f(q)` on a slice.
pub fn sample_slice(spec: SliceSpec, mut density: impl FnMut([f64; 3]) -> Result<f64>) -> Result<FieldSlice> {
    let mut rows = Vec::new();
    let mut skipped = 0;
    let columns;
    match spec {
        SliceSpec::PlaneQ3 { n } => {
            if n < 2 {
                return Err(invalid("plane slice needs at least 2 points per side"));
            }
            columns = vec!["q1", "q2", "f"];
            for i in 0..n {
                for j in 0..n {
                    let q = [
                        -1.0 + 2.0 * i as f64 / (n - 1) as f64,
                        -1.0 + 2.0 * j as f64 / (n - 1) as f64,
                        0.0,
                    ];
                    if q[0] * q[0] + q[1] * q[1] >= 1.0 {
                        skipped += 1;
                        continue;
                    }
                    rows.push(vec![q[0], q[1], density(q)?]);
                }
            }
        }
        SliceSpec::Axis { axis, n } => {
            if axis > 2 || n < 2 {
                return Err(invalid("axis slice needs axis in 0..3 and at least 2 points"));
            }
            columns = vec!["x", "f"];
            for i in 0..n {
                // open interval, endpoints excluded
                let x = -1.0 + 2.0 * (i as f64 + 0.5) / n as f64;
                let mut q = [0.0; 3];
                q[axis] = x;
                rows.push(vec![x, density(q)?]);
            }
        }
    }
    Ok(FieldSlice { columns, rows, skipped })
}

/// Writes a slice as CSV with a header row; `comment` lines are prefixed `#`.
pub fn write_slice_csv(path: &Path, slice: &FieldSlice, comment: &[String]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for c in comment {
        writeln!(f, "# {c}")?;
    }
    if slice.skipped > 0 {
        writeln!(f, "# {} points outside the unit ball skipped", slice.skipped)?;
    }
    writeln!(f, "{}", slice.columns.join(","))?;
    for r in &slice.rows {
        let line: Vec<String> = r.iter().map(|v| format!("{v:.12e}")).collect();
        writeln!(f, "{}", line.join(","))?;
    }
    f.flush()?;
    Ok(())
}

/// Number of interior local maxima. A maximum counts once the signal has
/// risen and then fallen by more than `rel_tol · max|values|` around it, so
/// plateaus and sub-tolerance wiggles do not add peaks.
pub fn count_local_maxima(values: &[f64], rel_tol: f64) -> usize {
    let Some(&first) = values.first() else {
        return 0;
    };
    let scale = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let tol = rel_tol * scale;
    let mut count = 0;
    let mut rising = false;
    let (mut lo, mut hi) = (first, first);
    for &v in &values[1..] {
        if rising {
            hi = hi.max(v);
            if v < hi - tol {
                count += 1;
                rising = false;
                lo = v;
            }
        } else {
            lo = lo.min(v);
            if v > lo + tol {
                rising = true;
                hi = v;
            }
        }
    }
    count
}
