#!/usr/bin/env python3
"""Tour of the binary bundle format: layout, round trip, and error diagnostics."""

import struct
import tempfile
from pathlib import Path

import numpy as np

from corank import (
    BadMagicError,
    RepresentationBundle,
    TruncatedPayloadError,
    read_bundle,
    write_bundle,
)

workdir = Path(tempfile.mkdtemp(prefix="corank-fmt-"))
bundle = RepresentationBundle(
    candidate_id="c0",
    template_order="QA",
    representation_model="m1",
    layer=26,
    problem_reps=np.arange(6, dtype=np.float32).reshape(2, 3),
    solution_reps=np.array([[7.0, 8.0, 9.0]], dtype=np.float32),
)
path = workdir / "tour.sind"
write_bundle(bundle, path)
data = path.read_bytes()

print(f"bundle: N={bundle.n} problem rows, M={bundle.m} solution rows, d={bundle.dim}")
print(f"file: {len(data)} bytes\n")
print("header bytes:")
print("  magic      ", data[0:4], "->", data[0:4].decode())
print("  version    ", data[4:8].hex(), "->", struct.unpack_from('<I', data, 4)[0])
print("  order code ", data[8:9].hex(), "-> QA" if data[8] == 0 else "-> AQ")
print("  layer      ", data[9:13].hex(), "->", struct.unpack_from('<I', data, 9)[0])
print("  N, M, d    ", data[13:25].hex(), "->", struct.unpack_from('<III', data, 13))
print("  model tag  ", data[29:31], "   candidate id", data[35:37])
print(f"  payload    {len(data) - 37} bytes of little-endian float32")

again = read_bundle(path)
write_bundle(again, workdir / "again.sind")
print(f"\nround trip bit-exact: {(workdir / 'again.sind').read_bytes() == data}")

print("\nwhat the reader rejects:")
(workdir / "bad.sind").write_bytes(b"XXXX" + data[4:])
try:
    read_bundle(workdir / "bad.sind")
except BadMagicError as exc:
    print(f"  {exc}")

(workdir / "short.sind").write_bytes(data[:-5])
try:
    read_bundle(workdir / "short.sind")
except TruncatedPayloadError as exc:
    print(f"  {exc}")
