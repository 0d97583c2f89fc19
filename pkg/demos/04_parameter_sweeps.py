#!/usr/bin/env python3
"""Threshold and sample-count sweeps over a small manifest set, via the CLI.

The sweep command emits CSV tables (config echoed in leading # lines) meant
for external plotting; here we just run it and print the tables.
"""

import tempfile
from pathlib import Path

from corank.cli import main as corank
from corank.fixtures import make_sweep_fixture_set

workdir = Path(tempfile.mkdtemp(prefix="corank-sweep-"))
manifests = [str(p) for p in make_sweep_fixture_set(workdir)]
print(f"two fixture problems with ground truth, K = 5 candidates each\n")

print("=== threshold sweep, weighted vote ===")
corank(["sweep", *manifests, "--delta-grid", "0.75,1.0,1.25,1.5,1.75,2.0",
        "--out", str(workdir / "delta_sweep.csv")])

print("\n=== sample-count sweep, weighted vote ===")
corank(["sweep", *manifests, "--k-grid", "1,2,3,4,5",
        "--out", str(workdir / "k_weighted.csv")])

print("\n=== sample-count sweep, plain majority baseline ===")
corank(["sweep", *manifests, "--k-grid", "1,2,3,4,5", "--baseline", "self-consistency",
        "--out", str(workdir / "k_sc.csv")])

print("\nemitted CSV (k_sc.csv):")
print((workdir / "k_sc.csv").read_text())
