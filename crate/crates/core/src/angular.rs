//! Angular interaction matrices for the convection term.
//!
//! Every block factors into a polar integral of normalized Legendre
//! functions (`F`) times an azimuthal integral of `e_m^v` (`E`). Entries are
//! indexed `[test][trial]`; the test function carries the derivative.

use crate::error::{invalid, Result};
use crate::special::{gauss_legendre_rule, HarmonicIndex, LegendreTable};
use std::collections::HashMap;
use std::f64::consts::PI;

/// Azimuthal factor multiplying the trial/test product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AzimuthalKind {
    /// `(e, e')`
    E00,
    /// `(e, e' cos φ)`
    E01,
    /// `(e, e' sin φ)`
    E11,
    /// `(e, e' cos 2φ)`
    E02,
    /// `(e, e' sin 2φ)`
    E12,
    /// `(e, ∂_φ e')`
    D00,
    /// `(e, ∂_φ e' cos φ)`
    D01,
    /// `(e, ∂_φ e' sin φ)`
    D11,
    /// `(e, ∂_φ e' cos 2φ)`
    D02,
    /// `(e, ∂_φ e' sin 2φ)`
    D12,
}

impl AzimuthalKind {
    pub const ALL: [AzimuthalKind; 10] = [
        AzimuthalKind::E00,
        AzimuthalKind::E01,
        AzimuthalKind::E11,
        AzimuthalKind::E02,
        AzimuthalKind::E12,
        AzimuthalKind::D00,
        AzimuthalKind::D01,
        AzimuthalKind::D11,
        AzimuthalKind::D02,
        AzimuthalKind::D12,
    ];
}

/// Polar factor; `x = cos θ`, measure `dx`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolarKind {
    /// `(P̄, P̄')`
    F00,
    /// `(P̄, P̄' cot θ)`
    F01,
    /// `(P̄, P̄' cos 2θ)`
    F02,
    /// `(P̄, P̄' sin 2θ)`
    F12,
    /// `(P̄, ∂_θ P̄')`
    D00,
    /// `(P̄, ∂_θ P̄' cos 2θ)`
    D02,
    /// `(P̄, ∂_θ P̄' sin 2θ)`
    D12,
}

impl PolarKind {
    pub const ALL: [PolarKind; 7] = [
        PolarKind::F00,
        PolarKind::F01,
        PolarKind::F02,
        PolarKind::F12,
        PolarKind::D00,
        PolarKind::D02,
        PolarKind::D12,
    ];
}

// Real trigonometric functions as sparse sums of complex exponentials.
type Trig = Vec<(i64, f64, f64)>;

fn cos_k(k: i64, c: f64) -> Trig {
    if k == 0 {
        vec![(0, c, 0.0)]
    } else {
        vec![(k, 0.5 * c, 0.0), (-k, 0.5 * c, 0.0)]
    }
}

fn sin_k(k: i64, c: f64) -> Trig {
    if k == 0 {
        vec![]
    } else {
        // sin kφ = (e^{ikφ} − e^{−ikφ}) / (2i)
        vec![(k, 0.0, -0.5 * c), (-k, 0.0, 0.5 * c)]
    }
}

fn trig_mul(a: &Trig, b: &Trig) -> Trig {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &(ka, ra, ia) in a {
        for &(kb, rb, ib) in b {
            out.push((ka + kb, ra * rb - ia * ib, ra * ib + ia * rb));
        }
    }
    out
}

fn trig_mean_integral(a: &Trig) -> f64 {
    2.0 * PI * a.iter().filter(|t| t.0 == 0).map(|t| t.1).sum::<f64>()
}

fn e_basis(m: usize, v: u8) -> Trig {
    if m == 0 {
        cos_k(0, 1.0 / (2.0 * PI).sqrt())
    } else if v == 0 {
        cos_k(m as i64, 1.0 / PI.sqrt())
    } else {
        sin_k(m as i64, 1.0 / PI.sqrt())
    }
}

fn e_basis_dphi(m: usize, v: u8) -> Trig {
    let mf = m as f64;
    if m == 0 {
        vec![]
    } else if v == 0 {
        sin_k(m as i64, -mf / PI.sqrt())
    } else {
        cos_k(m as i64, mf / PI.sqrt())
    }
}

/// Closed-form azimuthal integral with trial `(v, m)` and test `(v', m')`.
pub fn azimuthal_integral(kind: AzimuthalKind, trial: (u8, usize), test: (u8, usize)) -> f64 {
    use AzimuthalKind::*;
    let (v, m) = trial;
    let (vt, mt) = test;
    let f = e_basis(m, v);
    let g = match kind {
        E00 | E01 | E11 | E02 | E12 => e_basis(mt, vt),
        _ => e_basis_dphi(mt, vt),
    };
    let h = match kind {
        E00 | D00 => cos_k(0, 1.0),
        E01 | D01 => cos_k(1, 1.0),
        E11 | D11 => sin_k(1, 1.0),
        E02 | D02 => cos_k(2, 1.0),
        E12 | D12 => sin_k(2, 1.0),
    };
    let v = trig_mean_integral(&trig_mul(&trig_mul(&f, &g), &h));
    if v.abs() < 1e-15 {
        0.0
    } else {
        v
    }
}

/// Sparse azimuthal matrices keyed by `(trial (v,m), test (v',m'))`.
#[derive(Debug, Clone, Default)]
pub struct AzimuthalMatrices {
    pub entries: HashMap<AzimuthalKind, HashMap<((u8, usize), (u8, usize)), f64>>,
}

/// All ten azimuthal matrices over orders `0..=l_max`.
pub fn build_e_matrices(l_max: usize) -> AzimuthalMatrices {
    let pairs: Vec<(u8, usize)> = (0..=l_max)
        .flat_map(|m| if m == 0 { vec![(0, 0)] } else { vec![(0, m), (1, m)] })
        .collect();
    let mut out = AzimuthalMatrices::default();
    for kind in AzimuthalKind::ALL {
        let map = out.entries.entry(kind).or_default();
        for &a in &pairs {
            for &b in &pairs {
                if a.1.abs_diff(b.1) > 2 {
                    continue;
                }
                let v = azimuthal_integral(kind, a, b);
                if v != 0.0 {
                    map.insert((a, b), v);
                }
            }
        }
    }
    out
}

/// Gauss–Legendre evaluator for polar integrals up to a fixed degree.
#[derive(Debug, Clone)]
pub struct PolarIntegrator {
    l_max: usize,
    weights: Vec<f64>,
    xs: Vec<f64>,
    tables: Vec<LegendreTable>,
}

impl PolarIntegrator {
    pub fn new(l_max: usize) -> Result<Self> {
        let rule = gauss_legendre_rule(l_max + 6)?;
        let tables = rule
            .nodes
            .iter()
            .map(|&x| LegendreTable::new(l_max, x))
            .collect();
        Ok(Self {
            l_max,
            weights: rule.weights,
            xs: rule.nodes,
            tables,
        })
    }

    /// Polar integral with trial `(l, m)` and test `(l', m')`.
    pub fn integral(&self, kind: PolarKind, trial: (usize, usize), test: (usize, usize)) -> Result<f64> {
        let (l, m) = trial;
        let (lt, mt) = test;
        if m > l || mt > lt || l.max(lt) > self.l_max {
            return Err(invalid(format!(
                "polar integral indices ({l},{m}) / ({lt},{mt}) out of range"
            )));
        }
        let mut acc = 0.0;
        for ((t, &x), &w) in self.tables.iter().zip(&self.xs).zip(&self.weights) {
            let sin_t = (1.0 - x * x).sqrt();
            let g = match kind {
                PolarKind::F00
                | PolarKind::F01
                | PolarKind::F02
                | PolarKind::F12 => t.value(lt, mt),
                _ => t.dtheta(lt, mt),
            };
            let h = match kind {
                PolarKind::F00 | PolarKind::D00 => 1.0,
                PolarKind::F01 => x / sin_t,
                PolarKind::F02 | PolarKind::D02 => 2.0 * x * x - 1.0,
                PolarKind::F12 | PolarKind::D12 => 2.0 * x * sin_t,
            };
            acc += w * t.value(l, m) * g * h;
        }
        Ok(if acc.abs() < 1e-15 { 0.0 } else { acc })
    }
}

/// Sparse polar matrices keyed by `(trial (l,m), test (l',m'))`.
#[derive(Debug, Clone, Default)]
pub struct PolarMatrices {
    pub entries: HashMap<PolarKind, HashMap<((usize, usize), (usize, usize)), f64>>,
}

/// All seven polar matrices for `l, l' ≤ l_max`, restricted to the pairs
/// the assembly uses (`|l−l'| ≤ 2`, `|m−m'| ≤ 2`).
pub fn build_f_matrices(l_max: usize) -> Result<PolarMatrices> {
    let pi = PolarIntegrator::new(l_max)?;
    let mut out = PolarMatrices::default();
    for kind in PolarKind::ALL {
        let map = out.entries.entry(kind).or_default();
        for l in 0..=l_max {
            for m in 0..=l {
                for lt in l.saturating_sub(2)..=(l + 2).min(l_max) {
                    for mt in m.saturating_sub(2)..=(m + 2).min(lt) {
                        let v = pi.integral(kind, (l, m), (lt, mt))?;
                        if v != 0.0 {
                            map.insert(((l, m), (lt, mt)), v);
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}


/// One nonzero of an angular block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngularEntry {
    pub test: usize,
    pub trial: usize,
    pub value: f64,
}

/// `U`, `V`, `W` for every velocity-gradient component `(i, j)`, indexed into
/// a shared list of harmonic modes.
///
/// `U` is confined to `|l − l'| ≤ 2`. `V` and `W` separately are not, because
/// `cot θ` and `∂_θ` mix orders; only their sum is confined.
#[derive(Debug, Clone)]
pub struct AngularSet {
    pub modes: Vec<HarmonicIndex>,
    pub u: [[Vec<AngularEntry>; 3]; 3],
    pub v: [[Vec<AngularEntry>; 3]; 3],
    pub w: [[Vec<AngularEntry>; 3]; 3],
}

/// Combined coefficients of one (test, trial) mode pair for a given `K`:
/// `Σ k_ij U_ij` pairs with the stretch radial block, `Σ k_ij (V_ij + W_ij)`
/// with the overlap block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvectionCoupling {
    pub test: usize,
    pub trial: usize,
    pub stretch: f64,
    pub overlap: f64,
}

impl AngularSet {
    pub fn convection_couplings(&self, k: &[[f64; 3]; 3]) -> Vec<ConvectionCoupling> {
        self.convection_couplings_with_residue(k).0
    }

    /// Couplings plus the largest summed `V + W` value discarded at
    /// `|l − l'| > 2`, relative to the largest sum of term magnitudes over
    /// all entries. Those sums vanish identically; the residue is roundoff.
    pub fn convection_couplings_with_residue(&self, k: &[[f64; 3]; 3]) -> (Vec<ConvectionCoupling>, f64) {
        // (stretch, overlap, Σ |overlap terms|)
        let mut map: HashMap<(usize, usize), (f64, f64, f64)> = HashMap::new();
        for i in 0..3 {
            for j in 0..3 {
                let kij = k[i][j];
                if kij == 0.0 {
                    continue;
                }
                for e in &self.u[i][j] {
                    map.entry((e.test, e.trial)).or_default().0 += kij * e.value;
                }
                for e in self.v[i][j].iter().chain(&self.w[i][j]) {
                    let slot = map.entry((e.test, e.trial)).or_default();
                    slot.1 += kij * e.value;
                    slot.2 += (kij * e.value).abs();
                }
            }
        }
        let scale = map.values().fold(f64::MIN_POSITIVE, |m, v| m.max(v.2));
        let mut residue: f64 = 0.0;
        let mut out: Vec<ConvectionCoupling> = map
            .into_iter()
            .map(|((test, trial), (a, mut b, _))| {
                if self.modes[test].l.abs_diff(self.modes[trial].l) > 2 {
                    residue = residue.max(b.abs() / scale);
                    b = 0.0;
                }
                ((test, trial), (a, b))
            })
            .filter(|(_, (a, b))| *a != 0.0 || *b != 0.0)
            .map(|((test, trial), (stretch, overlap))| ConvectionCoupling {
                test,
                trial,
                stretch,
                overlap,
            })
            .collect();
        out.sort_by_key(|c| (c.trial, c.test));
        (out, residue)
    }
}

/// Harmonic modes for the given degrees in canonical order
/// (`l` ascending, then `m`, then `v`).
pub fn harmonic_modes(degrees: &[usize]) -> Vec<HarmonicIndex> {
    let mut out = Vec::new();
    for &l in degrees {
        for m in 0..=l {
            out.push(HarmonicIndex { l, m, v: 0 });
            if m > 0 {
                out.push(HarmonicIndex { l, m, v: 1 });
            }
        }
    }
    out
}

/// Assembles all 27 blocks over the even degrees `0, 2, …, l_max`.
pub fn assemble_uvw(l_max: usize) -> Result<AngularSet> {
    let degrees: Vec<usize> = (0..=l_max).step_by(2).collect();
    assemble_uvw_for(&degrees)
}

/// Assembles all 27 blocks over an explicit degree list.
pub fn assemble_uvw_for(degrees: &[usize]) -> Result<AngularSet> {
    use AzimuthalKind as A;
    use PolarKind as P;
    let l_max = degrees.iter().copied().max().unwrap_or(0);
    let polar = PolarIntegrator::new(l_max)?;
    let modes = harmonic_modes(degrees);
    let mut u: [[Vec<AngularEntry>; 3]; 3] = Default::default();
    let mut v: [[Vec<AngularEntry>; 3]; 3] = Default::default();
    let mut w: [[Vec<AngularEntry>; 3]; 3] = Default::default();

    for (ir, r) in modes.iter().enumerate() {
        for (it, t) in modes.iter().enumerate() {
            if r.m.abs_diff(t.m) > 2 {
                continue;
            }
            let near = r.l.abs_diff(t.l) <= 2;
            let pl = |k| polar.integral(k, (r.l, r.m), (t.l, t.m));
            let az = |k| azimuthal_integral(k, (r.v, r.m), (t.v, t.m));
            let (f00, f01, f02, f12) = (pl(P::F00)?, pl(P::F01)?, pl(P::F02)?, pl(P::F12)?);
            let (d00, d02, d12) = (pl(P::D00)?, pl(P::D02)?, pl(P::D12)?);
            let (e00, e01, e11, e02, e12) = (az(A::E00), az(A::E01), az(A::E11), az(A::E02), az(A::E12));
            let (g00, g01, g11, g02, g12) = (az(A::D00), az(A::D01), az(A::D11), az(A::D02), az(A::D12));

            let mut uu = [[0.0; 3]; 3];
            uu[0][0] = 0.25 * (f00 - f02) * (e00 + e02);
            uu[1][1] = 0.25 * (f00 - f02) * (e00 - e02);
            uu[2][2] = 0.5 * (f00 + f02) * e00;
            uu[0][1] = 0.25 * (f00 - f02) * e12;
            uu[1][0] = uu[0][1];
            uu[0][2] = 0.5 * f12 * e01;
            uu[2][0] = uu[0][2];
            uu[1][2] = 0.5 * f12 * e11;
            uu[2][1] = uu[1][2];

            let mut vv = [[0.0; 3]; 3];
            vv[0][0] = 0.25 * d12 * (e00 + e02);
            vv[1][1] = 0.25 * d12 * (e00 - e02);
            vv[2][2] = -0.5 * d12 * e00;
            vv[0][1] = 0.25 * d12 * e12;
            vv[1][0] = vv[0][1];
            vv[0][2] = 0.5 * (d00 + d02) * e01;
            vv[1][2] = 0.5 * (d00 + d02) * e11;
            vv[2][0] = -0.5 * (d00 - d02) * e01;
            vv[2][1] = -0.5 * (d00 - d02) * e11;

            let mut ww = [[0.0; 3]; 3];
            ww[0][0] = -0.5 * f00 * g12;
            ww[1][1] = -ww[0][0];
            ww[0][1] = -0.5 * f00 * (g00 - g02);
            ww[1][0] = 0.5 * f00 * (g00 + g02);
            ww[0][2] = -f01 * g11;
            ww[1][2] = f01 * g01;

            for i in 0..3 {
                for j in 0..3 {
                    let push = |list: &mut Vec<AngularEntry>, value: f64| {
                        if value.abs() > 1e-15 {
                            list.push(AngularEntry {
                                test: it,
                                trial: ir,
                                value,
                            });
                        }
                    };
                    if near {
                        push(&mut u[i][j], uu[i][j]);
                    }
                    push(&mut v[i][j], vv[i][j]);
                    push(&mut w[i][j], ww[i][j]);
                }
            }
        }
    }
    Ok(AngularSet { modes, u, v, w })
}
