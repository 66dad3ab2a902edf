#!/usr/bin/env python3
"""Regenerate src/sobol_directions.cpp from the Joe-Kuo (new-joe-kuo-6.21201)
direction numbers shipped with SciPy."""
import os
import sys

import numpy as np
import scipy

src = os.path.join(os.path.dirname(scipy.__file__), "stats", "_sobol_direction_numbers.npz")
data = np.load(src)
poly = data["poly"].astype(np.int64)
vinit = data["vinit"].astype(np.int64)

out = sys.argv[1] if len(sys.argv) > 1 else os.path.join(
    os.path.dirname(__file__), "..", "src", "sobol_directions.cpp")

offsets = [0]
values = []
for d in range(len(poly)):
    deg = int(poly[d]).bit_length() - 1
    values.extend(int(v) for v in vinit[d, :deg])
    offsets.append(len(values))

with open(out, "w") as f:
    f.write("// Generated by scripts/gen_sobol_table.py. Do not edit.\n")
    f.write("// Joe & Kuo direction numbers (new-joe-kuo-6.21201).\n\n")
    f.write('#include "cfbo/sobol.hpp"\n\n')
    f.write("namespace cfbo::sobol_table {\n\n")
    f.write(f"const std::size_t kMaxDimension = {len(poly)};\n\n")
    f.write("const std::uint32_t kPoly[] = {\n")
    for i in range(0, len(poly), 16):
        f.write("  " + ",".join(str(int(p)) for p in poly[i:i + 16]) + ",\n")
    f.write("};\n\n")
    f.write("const std::uint32_t kOffset[] = {\n")
    for i in range(0, len(offsets), 16):
        f.write("  " + ",".join(str(o) for o in offsets[i:i + 16]) + ",\n")
    f.write("};\n\n")
    f.write("const std::uint32_t kInitial[] = {\n")
    for i in range(0, len(values), 24):
        f.write("  " + ",".join(str(v) for v in values[i:i + 24]) + ",\n")
    f.write("};\n\n")
    f.write("}  // namespace cfbo::sobol_table\n")
