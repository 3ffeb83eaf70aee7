//! Independent oracles shared by the integration tests and the acceptance
//! suite.
#![allow(dead_code)]

use fene_core::angular::{assemble_uvw, AngularEntry};
use fene_core::radial::{radial_matrix_dense, BasisKind, RadialBasis, RadialMatrixKind};
use fene_core::special::{gauss_legendre_rule, real_spherical_harmonic_with_gradient};
use fene_core::field::to_cartesian;
use fene_core::solver::{AssembledOperator, SolverConfig, SpectralState};
use rand::Rng;
use std::f64::consts::PI;

pub const GL5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664_0, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664_0, 0.236_926_885_056_189_1),
];

/// Composite five-point Gauss–Legendre nodes and weights on `[a, b]`.
pub fn composite_rule(a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
    let h = (b - a) / panels as f64;
    (0..panels)
        .flat_map(|k| {
            let mid = a + (k as f64 + 0.5) * h;
            GL5.iter().map(move |&(x, w)| (mid + 0.5 * h * x, 0.5 * h * w))
        })
        .collect()
}

fn unit_vectors(theta: f64, phi: f64) -> ([f64; 3], [f64; 3], [f64; 3]) {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    ([st * cp, st * sp, ct], [ct * cp, ct * sp, -st], [-sp, cp, 0.0])
}

pub fn to_dense(list: &[AngularEntry], n: usize) -> Vec<Vec<f64>> {
    let mut d = vec![vec![0.0; n]; n];
    for e in list {
        d[e.test][e.trial] += e.value;
    }
    d
}

/// Largest absolute deviation of the assembled U, V, W blocks (all
/// degrees up to `l_max`) from direct quadrature over the sphere of
/// `∫ Y_trial e_i e_j-weighted test terms`, with the matrix name and index.
pub fn uvw_max_deviation(l_max: usize) -> (f64, String) {
    let set = assemble_uvw(l_max).unwrap();
    let modes = &set.modes;
    let n = modes.len();
    let gl = gauss_legendre_rule(3 * l_max).unwrap();
    let nphi = 5 * l_max;
    let mut direct = vec![vec![vec![vec![0.0; n]; n]; 9]; 3];
    for (&x, &wx) in gl.nodes.iter().zip(&gl.weights) {
        let theta = x.acos();
        for k in 0..nphi {
            let phi = 2.0 * PI * k as f64 / nphi as f64;
            let w = wx * 2.0 * PI / nphi as f64;
            let (r, th, ph) = unit_vectors(theta, phi);
            let vals: Vec<(f64, f64, f64)> = modes
                .iter()
                .map(|&m| real_spherical_harmonic_with_gradient(m, theta, phi).unwrap())
                .collect();
            for i in 0..3 {
                for j in 0..3 {
                    // U: Y_a r_i r_j; V: ∂_θ Y_a θ_i r_j; W: ∂_φ Y_a φ_i r_j / sin θ
                    let c = [r[i] * r[j], th[i] * r[j], ph[i] * r[j] / theta.sin()];
                    for a in 0..n {
                        let test = [vals[a].0, vals[a].1, vals[a].2];
                        for b in 0..n {
                            for t in 0..3 {
                                direct[t][3 * i + j][a][b] += w * vals[b].0 * test[t] * c[t];
                            }
                        }
                    }
                }
            }
        }
    }
    let mut worst = (0.0_f64, String::new());
    for i in 0..3 {
        for j in 0..3 {
            for (t, list) in [&set.u[i][j], &set.v[i][j], &set.w[i][j]].into_iter().enumerate() {
                let asm = to_dense(list, n);
                for a in 0..n {
                    for b in 0..n {
                        let d = (asm[a][b] - direct[t][3 * i + j][a][b]).abs();
                        if d > worst.0 {
                            worst = (d, format!("{}{}{}", ["U", "V", "W"][t], i + 1, j + 1));
                        }
                    }
                }
            }
        }
    }
    worst
}

/// Largest out-of-band entry relative to the matrix max-norm, over the
/// radial matrices of every even degree in `degrees`. At `l = 0` the angular
/// matrix is skipped: it is weighted by `l(l+1) = 0` and never assembled.
pub fn radial_out_of_band(kind: BasisKind, s: f64, degrees: impl Iterator<Item = usize>, n_max: usize) -> f64 {
    let mut worst = 0.0_f64;
    for l in degrees {
        let basis = RadialBasis::new(kind, s, l, n_max).unwrap();
        for which in RadialMatrixKind::ALL {
            if l == 0 && which == RadialMatrixKind::Angular {
                continue;
            }
            let m = radial_matrix_dense(&basis, which, n_max).unwrap();
            let scale = m.iter().flatten().fold(0.0_f64, |a, v| a.max(v.abs()));
            let band = which.half_bandwidth();
            for (i, row) in m.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    if i.abs_diff(j) > band {
                        worst = worst.max(v.abs() / scale);
                    }
                }
            }
        }
    }
    worst
}

/// Sorted admissible triple with trace in `[0.05, 0.9]` and smallest entry
/// at least 1% of the trace.
pub fn random_admissible(rng: &mut impl Rng) -> [f64; 3] {
    let t = rng.random_range(0.05..0.9);
    let mut w = [0.0; 3];
    loop {
        for v in w.iter_mut() {
            *v = rng.random_range(0.01..1.0);
        }
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= s);
        if w.iter().all(|&v| v >= 0.01) {
            break;
        }
    }
    w.sort_by(|a, b| b.total_cmp(a));
    w.map(|v| v * t)
}

pub fn mixed(kappa: f64) -> [[f64; 3]; 3] {
    [[1.0, kappa, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 0.0]]
}

pub fn config(basis: BasisKind, n: usize, s: f64, k: [[f64; 3]; 3]) -> SolverConfig {
    SolverConfig {
        b: 12.0,
        s,
        de: 1.0,
        k,
        l_max: n,
        n_max: n,
        dt: 1e-3,
        basis,
        t0: 0.0,
        t_end: 1.0,
        allow_unstable_dt: false,
    }
}

/// Equilibrium `h = ((1−p)/2)^{b/2−s}` projected onto the basis.
pub fn equilibrium_state(op: &AssembledOperator) -> SpectralState {
    let grid = op.projection_grid(8).unwrap();
    let e = 0.5 * op.cfg.b - op.cfg.s;
    SpectralState {
        coeffs: op.project(&grid, |p, _, _| (0.5 * (1.0 - p)).powf(e)),
        time: 0.0,
    }
}

/// Equilibrium plus a smooth anisotropic perturbation of zero mass.
pub fn perturbed_state(op: &AssembledOperator) -> SpectralState {
    let grid = op.projection_grid(8).unwrap();
    let e = 0.5 * op.cfg.b - op.cfg.s;
    SpectralState {
        coeffs: op.project(&grid, |p, t, f| {
            let q = to_cartesian((0.5 * (1.0 + p)).sqrt(), t, f);
            (0.5 * (1.0 - p)).powf(e) * (1.0 + 0.8 * (q[0] * q[0] - q[1] * q[1]) + 0.5 * q[0] * q[2])
        }),
        time: 0.0,
    }
}

