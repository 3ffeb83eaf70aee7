//! Conservation, stationarity, stability and moment properties of the
//! discrete Fokker–Planck solver.

mod common;

use common::{composite_rule, config, equilibrium_state, mixed, perturbed_state};
use fene_core::closures::equilibrium_moment;
use fene_core::field::{to_cartesian, FieldEvaluator, MomentEvaluator};
use fene_core::radial::BasisKind;
use fene_core::solver::{
    assemble_operator, gamma_threshold, run_simulation, stability_max_dt, RunOptions, SolverConfig, SpectralState,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn mass_is_conserved_step_by_step() {
    for basis in [BasisKind::Jg1, BasisKind::JgInf] {
        let mut cfg = config(basis, 10, 6.0, mixed(2.0));
        cfg.t_end = 0.3;
        let op = assemble_operator(&cfg).unwrap();
        let init = perturbed_state(&op);
        let m0 = op.mass(&init.coeffs);
        let out = run_simulation(&op, &init, None, None, &RunOptions::default()).unwrap();
        let masses: Vec<f64> = std::iter::once(m0).chain(out.diagnostics.iter().map(|d| d.mass)).collect();
        assert!(masses.len() > 100);
        for w in masses.windows(3) {
            let bdf2 = 3.0 * w[2] - 4.0 * w[1] + w[0];
            assert!(bdf2.abs() <= 1e-12 * m0.abs(), "{basis}: {bdf2:e}");
        }
        for m in &masses {
            assert!((m - m0).abs() <= 1e-12 * m0.abs());
        }
    }
}

#[test]
fn equilibrium_is_stationary_without_flow() {
    for (basis, s) in [(BasisKind::Jg1, 6.0), (BasisKind::JgInf, 6.0), (BasisKind::Jg1, 5.0)] {
        let mut cfg = config(basis, 10, s, [[0.0; 3]; 3]);
        cfg.t_end = 1000.0 * cfg.dt;
        let op = assemble_operator(&cfg).unwrap();
        let init = equilibrium_state(&op);
        let opts = RunOptions {
            record_every: 0,
            ..RunOptions::default()
        };
        let out = run_simulation(&op, &init, None, None, &opts).unwrap();
        assert_eq!(out.steps, 1000);
        let scale = init.coeffs.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let drift = out
            .state
            .coeffs
            .iter()
            .zip(&init.coeffs)
            .fold(0.0_f64, |a, (x, y)| a.max((x - y).abs()));
        assert!(drift <= 1e-11 * scale, "{basis} s={s}: drift {drift:e}");
    }
}

#[test]
fn stability_bound_formula() {
    assert!((gamma_threshold(5.0).unwrap() - 1.890625).abs() < 1e-15);
    let cfg = SolverConfig {
        s: 5.0,
        ..config(BasisKind::Jg1, 6, 5.0, [[0.0; 3]; 3])
    };
    let expect = 3.0 / (2.0 * 2.0 * 1.890625);
    assert!((stability_max_dt(&cfg).unwrap() - expect).abs() < 1e-15);
    let unconditional = config(BasisKind::Jg1, 6, 6.0, [[0.0; 3]; 3]);
    assert!(stability_max_dt(&unconditional).unwrap().is_infinite());
    // above the bound the gate refuses unless explicitly overridden
    let mut too_big = cfg.clone();
    too_big.dt = 1.1 * expect;
    assert!(assemble_operator(&too_big).is_err());
    too_big.allow_unstable_dt = true;
    assert!(assemble_operator(&too_big).is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, .. ProptestConfig::default() })]

    /// Below the bound, runs from random states complete and the discrete
    /// energy stays bounded by its starting value.
    #[test]
    fn energy_stays_bounded_below_the_time_step_bound(seed in any::<u64>(), jginf in any::<bool>()) {
        let basis = if jginf { BasisKind::JgInf } else { BasisKind::Jg1 };
        let mut cfg = config(basis, 8, 5.0, [[0.0; 3]; 3]);
        cfg.dt = 0.9 * stability_max_dt(&cfg).unwrap();
        cfg.t_end = 60.0 * cfg.dt;
        let op = assemble_operator(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let init = SpectralState {
            coeffs: (0..op.len()).map(|_| rng.random_range(-1.0..1.0)).collect(),
            time: 0.0,
        };
        let out = run_simulation(&op, &init, None, None, &RunOptions::default()).unwrap();
        let e0 = out.diagnostics[0].energy;
        for d in &out.diagnostics {
            prop_assert!(d.energy.is_finite());
            prop_assert!(d.energy <= e0 * (1.0 + 1e-10), "energy {} > {}", d.energy, e0);
        }
    }
}

#[test]
fn projection_of_a_representable_field_is_exact() {
    for basis in [BasisKind::Jg1, BasisKind::JgInf] {
        let op = assemble_operator(&config(basis, 8, 6.0, [[0.0; 3]; 3])).unwrap();
        let eval = FieldEvaluator::for_operator(&op).unwrap();
        let grid = op.projection_grid(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let coeffs: Vec<f64> = (0..op.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let back = op.project(&grid, |p, t, f| eval.h(&coeffs, p, t, f));
        let err = back.iter().zip(&coeffs).fold(0.0_f64, |a, (x, y)| a.max((x - y).abs()));
        assert!(err < 1e-11, "{basis}: {err:e}");
        let again = op.project(&grid, |p, t, f| eval.h(&back, p, t, f));
        let err2 = again.iter().zip(&back).fold(0.0_f64, |a, (x, y)| a.max((x - y).abs()));
        assert!(err2 < 1e-11);
    }
}

#[test]
fn solutions_are_head_tail_symmetric() {
    let mut cfg = config(BasisKind::Jg1, 8, 6.0, mixed(3.0));
    cfg.t_end = 0.2;
    let op = assemble_operator(&cfg).unwrap();
    let out = run_simulation(&op, &perturbed_state(&op), None, None, &RunOptions::default()).unwrap();
    let eval = FieldEvaluator::for_operator(&op).unwrap();
    for q in [[0.3, -0.2, 0.5], [0.7, 0.1, 0.0], [-0.1, 0.05, -0.9]] {
        let a = eval.f_cartesian(&out.state.coeffs, q).unwrap();
        let b = eval.f_cartesian(&out.state.coeffs, q.map(|v| -v)).unwrap();
        assert!((a - b).abs() <= 1e-13 * a.abs().max(1.0));
    }
}

#[test]
fn equilibrium_conformation_is_isotropic() {
    for (basis, s) in [(BasisKind::Jg1, 6.0), (BasisKind::JgInf, 5.0)] {
        let op = assemble_operator(&config(basis, 10, s, [[0.0; 3]; 3])).unwrap();
        let init = equilibrium_state(&op);
        let c = MomentEvaluator::new(&op).unwrap().conformation(&init.coeffs).unwrap().entries;
        // ⟨r²⟩ = 3/(b+5) by the Beta-function moment
        let want = 1.0 / 17.0;
        assert!((equilibrium_moment(12.0) - want).abs() < 1e-15);
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { want } else { 0.0 };
                assert!((c[i][j] - e).abs() < 1e-13, "{basis}: C[{i}][{j}] = {}", c[i][j]);
            }
        }
    }
}

#[test]
fn moments_agree_with_brute_force_quadrature() {
    let mut cfg = config(BasisKind::Jg1, 10, 6.0, mixed(2.0));
    cfg.t_end = 0.5;
    let op = assemble_operator(&cfg).unwrap();
    let out = run_simulation(&op, &perturbed_state(&op), None, None, &RunOptions::default()).unwrap();
    let coeffs = &out.state.coeffs;
    let moments = MomentEvaluator::new(&op).unwrap();
    let eval = FieldEvaluator::for_operator(&op).unwrap();

    let r_rule = composite_rule(0.0, 1.0, 16);
    let x_rule = composite_rule(-1.0, 1.0, 12);
    let n_phi = 32;
    let (mut mass, mut second, mut spring) = (0.0, [[0.0; 3]; 3], [[0.0; 3]; 3]);
    for &(r, wr) in &r_rule {
        for &(x, wx) in &x_rule {
            for k in 0..n_phi {
                let phi = 2.0 * std::f64::consts::PI * k as f64 / n_phi as f64;
                let q = to_cartesian(r, x.acos(), phi);
                let w = wr * wx * r * r * 2.0 * std::f64::consts::PI / n_phi as f64;
                let f = eval.f_cartesian(coeffs, q).unwrap() * w;
                mass += f;
                for i in 0..3 {
                    for j in 0..3 {
                        second[i][j] += q[i] * q[j] * f;
                        spring[i][j] += q[i] * q[j] * f / (1.0 - r * r);
                    }
                }
            }
        }
    }
    assert!((moments.mass(coeffs) - mass).abs() <= 1e-10 * mass.abs());
    let c = moments.conformation(coeffs).unwrap().entries;
    let tau = moments.stress(coeffs, cfg.b).unwrap().entries;
    for i in 0..3 {
        for j in 0..3 {
            let c_bf = second[i][j] / mass;
            let t_bf = cfg.b * spring[i][j] / mass - if i == j { 1.0 } else { 0.0 };
            assert!((c[i][j] - c_bf).abs() <= 1e-10, "C[{i}][{j}] {} vs {c_bf}", c[i][j]);
            assert!((tau[i][j] - t_bf).abs() <= 1e-10, "tau[{i}][{j}] {} vs {t_bf}", tau[i][j]);
        }
    }
    // the flow stretches along q1 and shears in the 1-2 plane
    assert!(c[0][0] > c[1][1] && c[0][1] > 0.0);
}
