#!/usr/bin/env python3
"""Regenerate include/kgf/sobol_table.hpp from data/sobol/joe_kuo_d64.txt."""
import pathlib

root = pathlib.Path(__file__).resolve().parent.parent
rows = []
for line in (root / "data/sobol/joe_kuo_d64.txt").read_text().splitlines()[1:]:
    d, s, a, m = line.split("\t")
    rows.append((int(d), int(s), int(a), [int(x) for x in m.split()]))

width = max(s for _, s, _, _ in rows)
out = [
    "// Generated by tools/gen_sobol_table.py from data/sobol/joe_kuo_d64.txt. Do not edit.",
    "#pragma once",
    "",
    "#include <array>",
    "#include <cstdint>",
    "",
    "namespace kgf::sobol_detail {",
    "",
    "struct DirectionEntry {",
    "  std::uint32_t degree;",
    "  std::uint32_t coefficients;",
    f"  std::array<std::uint32_t, {width}> initial;",
    "};",
    "",
    f"inline constexpr std::size_t kMaxDimension = {len(rows) + 1};",
    f"inline constexpr std::size_t kMaxDegree = {width};",
    "",
    "// Dimensions 2..kMaxDimension (dimension 1 is the van der Corput sequence).",
    f"inline constexpr std::array<DirectionEntry, {len(rows)}> kJoeKuo = {{{{",
]
for d, s, a, m in rows:
    padded = m + [0] * (width - len(m))
    out.append(f"    {{{s}, {a}, {{{', '.join(map(str, padded))}}}}},  // d={d}")
out += ["}};", "", "}  // namespace kgf::sobol_detail", ""]
(root / "include/kgf/sobol_table.hpp").write_text("\n".join(out))
