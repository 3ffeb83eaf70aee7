"""Builds the extension module and exercises it from a plain interpreter.

Usage: python3 python/smoke_test.py [--no-build]
"""

import argparse
import importlib.util
import os
import shutil
import subprocess
import sys
import sysconfig
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
WEIGHTS = ROOT / "crates" / "core" / "tests" / "data" / "mlp_b12.json"


def build():
    subprocess.run(
        ["cargo", "build", "--release", "--offline", "-p", "fene-py", "--features", "extension-module"],
        cwd=ROOT,
        check=True,
    )


def load(tmp):
    lib = ROOT / "target" / "release" / ("fene.dll" if os.name == "nt" else "libfene.so")
    if sys.platform == "darwin":
        lib = lib.with_suffix(".dylib")
    suffix = sysconfig.get_config_var("EXT_SUFFIX") or ".so"
    target = Path(tmp) / f"fene{suffix}"
    shutil.copy(lib, target)
    spec = importlib.util.spec_from_file_location("fene", target)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def check(fene, tmp):
    qe = fene.QeMap(12.0)
    c0 = qe.forward([0.0, 0.0, 0.0])
    assert all(abs(v - 1 / 17) < 1e-10 for v in c0), c0
    c = [0.4, 0.2, 0.1]
    back = qe.forward(qe.invert(c))
    assert max(abs(a - b) for a, b in zip(back, c)) < 1e-10, back

    net = fene.Mlp.load(str(WEIGHTS))
    assert net.probe_mismatch() <= 1e-12

    table = fene.PlaTable.build(qe, (6, 6, 6))
    assert len(table.lookup(c)) == 3

    out = Path(tmp) / "ds.csv"
    kept = fene.gen_dataset(str(out), count=100, seed=1)
    assert kept > 50 and out.exists()

    assert fene.degrees_of_freedom("JGinf", 10, 10) == 256
    print(f"fene {fene.__version__}: smoke test passed")


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--no-build", action="store_true", help="reuse the existing release library")
    args = parser.parse_args()
    if not args.no_build:
        build()
    with tempfile.TemporaryDirectory() as tmp:
        check(load(tmp), tmp)


if __name__ == "__main__":
    main()
