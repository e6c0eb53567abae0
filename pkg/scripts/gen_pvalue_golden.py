#!/usr/bin/env python3
"""Regenerate tests/data/pvalue_golden.json.

Reference p-values for the t and F survival functions, computed with
mpmath at 50 significant digits. mpmath is a dev-time dependency of this
script only; the shipped package never imports it. Run from the repo root:

    python3 scripts/gen_pvalue_golden.py
"""

import json
import pathlib

import mpmath as mp

mp.mp.dps = 50

CASES = [
    # (kind, df or [df1, df2], statistic)
    ("t", 5, 0.5),
    ("t", 10, 2.0),
    ("t", 30, 1.3),
    ("t", 96, 1.059),
    ("t", 240, 3.2),
    ("t", 480, 0.05),
    ("f", [2, 6], 3.0),
    ("f", [4, 240], 0.370763),
    ("f", [3, 36], 5.5),
    ("f", [1, 96], 1.1215),
    ("f", [9, 990], 0.77),
    ("f", [6, 14], 12.0),
]


def t_two_sided(t, df):
    x = mp.mpf(df) / (df + mp.mpf(t) ** 2)
    return mp.betainc(mp.mpf(df) / 2, mp.mpf("0.5"), 0, x, regularized=True)


def f_sf(f, df1, df2):
    x = mp.mpf(df2) / (df2 + mp.mpf(df1) * mp.mpf(f))
    return mp.betainc(mp.mpf(df2) / 2, mp.mpf(df1) / 2, 0, x, regularized=True)


def main():
    entries = []
    for kind, df, stat in CASES:
        if kind == "t":
            p = t_two_sided(stat, df)
        else:
            p = f_sf(stat, df[0], df[1])
        entries.append({"kind": kind, "df": df, "stat": stat,
                        "p": float(mp.nstr(p, 17, strip_zeros=False))})
    out = pathlib.Path(__file__).resolve().parent.parent / "tests" / "data" / "pvalue_golden.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(entries, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {len(entries)} entries to {out}")


if __name__ == "__main__":
    main()
