//! Lookup-table and network multiplier maps against the Newton oracle, and
//! their contrasting smoothness.

use fene_core::closures::{nn_infer, nn_load, pla_build_table, pla_lookup, MlpWeights, PlaGridSpec, PlaTable, QeIntegrator};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::Path;
use std::sync::OnceLock;

fn integrator() -> &'static QeIntegrator {
    static QI: OnceLock<QeIntegrator> = OnceLock::new();
    QI.get_or_init(|| QeIntegrator::new(12.0).unwrap())
}

fn default_table() -> &'static PlaTable {
    static T: OnceLock<PlaTable> = OnceLock::new();
    T.get_or_init(|| pla_build_table(integrator(), PlaGridSpec::default()).unwrap())
}

fn network() -> MlpWeights {
    nn_load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/mlp_b12.json")).unwrap()
}

fn norm_inf(v: [f64; 3]) -> f64 {
    v.iter().fold(0.0_f64, |a, x| a.max(x.abs()))
}

#[test]
fn stored_nodes_round_trip_through_the_forward_map() {
    let table = default_table();
    let [n0, n1, n2] = table.grid.shape;
    for i0 in (0..n0).step_by(3) {
        for i1 in (0..n1).step_by(3) {
            for i2 in (0..n2).step_by(3) {
                let c = table.node_point([i0, i1, i2]);
                let back = integrator().forward(table.node([i0, i1, i2])).unwrap();
                for k in 0..3 {
                    assert!((back[k] - c[k]).abs() <= 1e-10, "node {:?}: {back:?} vs {c:?}", [i0, i1, i2]);
                }
            }
        }
    }
}

#[test]
fn lookup_matches_newton_on_random_interior_queries() {
    let table = default_table();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let w = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
        let c = table.grid.point(w);
        let got = pla_lookup(table, c).unwrap();
        let want = integrator().invert(c).unwrap().lambda;
        let err = norm_inf([0, 1, 2].map(|k| got[k] - want[k])) / norm_inf(want).max(1.0);
        worst = worst.max(err);
    }
    assert!(worst <= 1e-3, "max relative lookup error {worst:e}");
}

#[test]
fn network_reproduces_its_stored_probes() {
    let net = network();
    assert_eq!(net.probes.len(), 100);
    assert!(net.probe_mismatch() <= 1e-12, "probe mismatch {:e}", net.probe_mismatch());
}

#[test]
fn weights_with_unreproduced_probes_are_rejected() {
    let mut net = network();
    net.probes[7].output[1] *= 1.0 + 1e-6;
    let path = std::env::temp_dir().join(format!("fene_tampered_probes_{}.json", std::process::id()));
    net.save(&path).unwrap();
    let err = nn_load(&path).unwrap_err().to_string();
    std::fs::remove_file(&path).unwrap();
    assert!(err.contains("probe outputs not reproduced"), "{err}");
}

#[test]
fn network_tracks_the_newton_oracle() {
    let net = network();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut sq = 0.0;
    let n = 500;
    for _ in 0..n {
        // multipliers inside the training box keep queries in distribution
        let mut lam = [0.0_f64; 3];
        for v in lam.iter_mut() {
            *v = rng.random_range(-10.0..60.0);
        }
        lam.sort_by(|a, b| b.total_cmp(a));
        let c = integrator().forward(lam).unwrap();
        if c.iter().sum::<f64>() >= 0.99 {
            continue;
        }
        let got = nn_infer(&net, c);
        sq += (0..3).map(|k| (got[k] - lam[k]).powi(2)).sum::<f64>() / 3.0;
    }
    let mse = sq / n as f64;
    eprintln!("network mean squared error vs Newton: {mse:e}");
    assert!(mse < 1.83e-2, "network mean squared error {mse:e}");
}

/// Directional derivative along grid axis `axis` at grid coordinates `w`,
/// by central differences with step `h` in grid units.
fn axis_derivative(f: &dyn Fn([f64; 3]) -> [f64; 3], grid: &PlaGridSpec, w: [f64; 3], axis: usize, h: f64) -> [f64; 3] {
    let mut wp = w;
    let mut wm = w;
    wp[axis] += h;
    wm[axis] -= h;
    let (a, b) = (f(grid.point(wp)), f(grid.point(wm)));
    [0, 1, 2].map(|k| (a[k] - b[k]) / (2.0 * h))
}

/// Derivative jump across the face `w[axis] = face` relative to the
/// derivative size, probed at distance `delta`.
fn face_jump(f: &dyn Fn([f64; 3]) -> [f64; 3], grid: &PlaGridSpec, mut w: [f64; 3], axis: usize, face: f64, delta: f64) -> f64 {
    let h = 0.1 * delta;
    w[axis] = face - delta;
    let left = axis_derivative(f, grid, w, axis, h);
    w[axis] = face + delta;
    let right = axis_derivative(f, grid, w, axis, h);
    norm_inf([0, 1, 2].map(|k| left[k] - right[k])) / norm_inf(left).max(norm_inf(right)).max(1e-12)
}

/// Jumps at probe distances `delta` and `delta / 10`.
fn jump_pair(f: &dyn Fn([f64; 3]) -> [f64; 3], grid: &PlaGridSpec, w: [f64; 3], axis: usize, face: f64, delta: f64) -> (f64, f64) {
    (face_jump(f, grid, w, axis, face, delta), face_jump(f, grid, w, axis, face, 0.1 * delta))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[test]
fn lookup_has_kinks_where_the_network_is_smooth() {
    let table = default_table();
    let net = network();
    let grid = table.grid;
    let pla = |c: [f64; 3]| pla_lookup(table, c).unwrap();
    let nn = |c: [f64; 3]| nn_infer(&net, c);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (mut pla_pairs, mut nn_pairs) = (Vec::new(), Vec::new());
    for _ in 0..30 {
        let axis = rng.random_range(0..3);
        let cells = grid.shape[axis] - 1;
        let face = rng.random_range(5..cells - 5) as f64 / cells as f64;
        let w = [rng.random_range(0.2..0.8), rng.random_range(0.2..0.8), rng.random_range(0.2..0.8)];
        let delta = 1e-3 / cells as f64;
        pla_pairs.push(jump_pair(&pla, &grid, w, axis, face, delta));
        nn_pairs.push(jump_pair(&nn, &grid, w, axis, face, delta));
    }
    // a kink keeps its jump as the probes approach the face
    let pla_fine = median(pla_pairs.iter().map(|p| p.1).collect());
    let pla_ratio = median(pla_pairs.iter().map(|p| p.1 / p.0).collect());
    // a continuous derivative loses its apparent jump linearly in the distance
    let nn_fine = nn_pairs.iter().fold(0.0_f64, |a, p| a.max(p.1));
    eprintln!("lookup jump {pla_fine:e} (ratio {pla_ratio:.3}), network jump {nn_fine:e}");
    assert!(pla_fine > 1e-3, "median lookup derivative jump {pla_fine:e}");
    assert!(pla_ratio > 0.5, "lookup jump shrinks with distance: ratio {pla_ratio}");
    for (coarse, fine) in &nn_pairs {
        assert!(*fine <= 0.2 * coarse + 1e-8, "network jump {coarse:e} -> {fine:e} does not vanish");
    }
    assert!(pla_fine > 10.0 * nn_fine, "lookup {pla_fine:e} vs network {nn_fine:e}");
}
