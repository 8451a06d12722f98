#!/usr/bin/env python3
"""Regenerates include/thinkdex/detail/nfc_data.inc from the Python unicodedata
module (canonical decompositions, combining classes, primary composites).

Usage: python3 scripts/gen_nfc_data.py > include/thinkdex/detail/nfc_data.inc
"""

import sys
import unicodedata

HANGUL_S_BASE = 0xAC00
HANGUL_S_COUNT = 11172


def is_hangul_syllable(cp: int) -> bool:
    return HANGUL_S_BASE <= cp < HANGUL_S_BASE + HANGUL_S_COUNT


def canonical_decomposition(cp: int):
    raw = unicodedata.decomposition(chr(cp))
    if not raw or raw.startswith("<"):
        return None
    parts = [int(p, 16) for p in raw.split()]
    if len(parts) not in (1, 2):
        raise ValueError(f"unexpected decomposition arity at U+{cp:04X}: {raw}")
    return parts


def main() -> None:
    decomp = []
    ccc = []
    comp = []
    for cp in range(0x110000):
        if 0xD800 <= cp <= 0xDFFF or is_hangul_syllable(cp):
            continue
        ch = chr(cp)
        k = unicodedata.combining(ch)
        if k:
            ccc.append((cp, k))
        d = canonical_decomposition(cp)
        if d is None:
            continue
        if len(d) == 1:
            decomp.append((cp, d[0], 0))
        else:
            a, b = d
            decomp.append((cp, a, b))
            # Primary composite iff NFC recombines the bare pair; this folds in
            # the composition-exclusion list without shipping it.
            if unicodedata.normalize("NFC", chr(a) + chr(b)) == ch:
                comp.append(((a << 21) | b, cp))

    comp.sort()

    out = sys.stdout
    out.write("// Generated by scripts/gen_nfc_data.py from Python unicodedata "
              f"(Unicode {unicodedata.unidata_version}). Do not edit.\n\n")

    out.write(f"inline constexpr NfcDecomp kNfcDecomp[{len(decomp)}] = {{\n")
    for cp, a, b in decomp:
        out.write(f"    {{0x{cp:X}, 0x{a:X}, 0x{b:X}}},\n")
    out.write("};\n\n")

    out.write(f"inline constexpr NfcCombining kNfcCombining[{len(ccc)}] = {{\n")
    for cp, k in ccc:
        out.write(f"    {{0x{cp:X}, {k}}},\n")
    out.write("};\n\n")

    out.write(f"inline constexpr NfcComposite kNfcComposite[{len(comp)}] = {{\n")
    for key, cp in comp:
        out.write(f"    {{0x{key:X}ULL, 0x{cp:X}}},\n")
    out.write("};\n")


if __name__ == "__main__":
    main()
