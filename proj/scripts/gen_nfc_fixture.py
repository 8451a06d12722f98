#!/usr/bin/env python3
"""Emits tests/data/nfc_cases.tsv: input and expected NFC form as codepoint
lists, computed with Python unicodedata. Frozen so the C++ tests do not need
a Python runtime.
"""

import random
import sys
import unicodedata


def cps(s: str) -> str:
    return " ".join(f"{ord(c):04X}" for c in s)


def main() -> None:
    cases = [
        "",
        "plain ascii, nothing to do",
        "café",                      # precomposed
        "café",                     # decomposed e + acute
        "q̣̇",                  # ccc reordering: dot-above after dot-below
        "q̣̇",
        "Å",                         # angstrom sign, singleton to A-ring
        "Å",
        "Å",
        "ḍ̇",                   # d-dot-above + dot-below
        "ḍ̇",
        "Á̧",             # blocked composition candidate
        "Á̧",
        "가",                         # hangul GA
        "가",                   # hangul jamo L+V
        "각",             # hangul jamo L+V+T
        "각",
        "ཱཱི",             # tibetan vowels, high ccc values
        "̈́",                         # non-starter decomposition
        "אִ֑",             # hebrew with marks
        "ṩ",                         # s with dot below and dot above
        "ṩ",
        "ṩ",
        "İ",                         # I with dot above (no decomposition)
        "ﬁ",                         # fi ligature: compatibility only, NFC keeps
        "क़",                         # composition exclusion (qa -> ka + nukta stays decomposed)
        "क़",
        "ئٔ",
        "x̀́̂̃",
        "\U0001D160",                     # musical symbol, exclusion territory
        "Ω",                         # ohm sign -> omega
    ]

    rng = random.Random(20260810)
    pool = (
        [0x41 + i for i in range(26)]
        + [0x300, 0x301, 0x302, 0x308, 0x30A, 0x323, 0x327, 0x328, 0x331]
        + [0xE0, 0xE9, 0xEA, 0x131, 0x212B, 0x2126]
        + [0x1100, 0x1161, 0x11A8, 0xAC00, 0xAC1C]
        + [0x4E2D, 0x6587, 0x3042, 0x30A2]
        + [0x1F600, 0x1D11E]
    )
    for _ in range(120):
        n = rng.randint(1, 12)
        cases.append("".join(chr(rng.choice(pool)) for _ in range(n)))

    out = sys.stdout
    out.write("# input_codepoints\tnfc_codepoints\n")
    for s in cases:
        out.write(f"{cps(s)}\t{cps(unicodedata.normalize('NFC', s))}\n")


if __name__ == "__main__":
    main()
