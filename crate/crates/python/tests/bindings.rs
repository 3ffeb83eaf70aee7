//! The bindings exercised through an embedded interpreter.

use pyo3::prelude::*;
use pyo3::types::PyDict;
use std::ffi::CString;

fn run(code: &str) {
    Python::initialize();
    Python::attach(|py| {
        let module = pyo3::wrap_pymodule!(fene::fene)(py);
        let globals = PyDict::new(py);
        globals.set_item("fene", module).unwrap();
        globals
            .set_item("WEIGHTS", concat!(env!("CARGO_MANIFEST_DIR"), "/../core/tests/data/mlp_b12.json"))
            .unwrap();
        let src = CString::new(code).unwrap();
        if let Err(e) = py.run(&src, Some(&globals), None) {
            e.print(py);
            panic!("python snippet failed: {e}");
        }
    });
}

#[test]
fn quasi_equilibrium_map_round_trips() {
    run(r#"
qe = fene.QeMap(12.0)
assert qe.b == 12.0
c0 = qe.forward([0.0, 0.0, 0.0])
assert all(abs(v - 1 / 17) < 1e-10 for v in c0)
c = [0.4, 0.2, 0.1]
back = qe.forward(qe.invert(c))
assert max(abs(a - b) for a, b in zip(back, c)) < 1e-10
jac = qe.jacobian([1.0, 2.0, 3.0])
assert abs(jac[0][1] - jac[1][0]) < 1e-14
"#);
}

#[test]
fn errors_become_python_exceptions() {
    run(r#"
qe = fene.QeMap()
try:
    qe.invert([0.5, 0.4, 0.3])
    raise AssertionError("inadmissible triple accepted")
except ValueError:
    pass
try:
    fene.degrees_of_freedom("legendre", 4, 4)
    raise AssertionError("unknown basis accepted")
except ValueError:
    pass
"#);
}

#[test]
fn lookup_table_and_network_match_newton() {
    run(r#"
import os, tempfile
qe = fene.QeMap()
table = fene.PlaTable.build(qe, (8, 6, 6))
assert table.shape == (8, 6, 6)
c = [0.3, 0.15, 0.1]
exact = qe.invert(c)
approx = table.lookup(c)
assert max(abs(a - b) for a, b in zip(approx, exact)) < 0.1 * max(1.0, max(abs(v) for v in exact))
with tempfile.TemporaryDirectory() as d:
    p = os.path.join(d, "t.json")
    table.save(p)
    assert fene.PlaTable.load(p).lookup(c) == approx
net = fene.Mlp.load(WEIGHTS)
assert net.arch == [3, 64, 64, 3]
assert net.probe_mismatch() <= 1e-12
lam = net.infer(c)
assert max(abs(a - b) for a, b in zip(lam, exact)) < 0.5
"#);
}

#[test]
fn dataset_and_counts() {
    run(r#"
import csv, json, os, tempfile
with tempfile.TemporaryDirectory() as d:
    p = os.path.join(d, "ds.csv")
    kept = fene.gen_dataset(p, count=200, seed=5)
    rows = list(csv.reader(open(p)))
    assert rows[0] == ["c1", "c2", "c3", "l1", "l2", "l3"]
    assert len(rows) - 1 == kept > 150
    meta = json.load(open(os.path.join(d, "ds.json")))
    assert meta["count"] == kept and meta["sampling"]["seed"] == 5
assert fene.degrees_of_freedom("JG1", 10, 10) == 726
assert fene.degrees_of_freedom("JGinf", 40, 40) == 11921
"#);
}
