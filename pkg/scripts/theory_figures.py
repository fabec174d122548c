"""Regenerate the data behind the probability-surface, compensation,
Monte-Carlo and update-norm scaling figures into one output tree.

    python3 scripts/theory_figures.py --out out/theory
"""
import argparse
from pathlib import Path

from dimtrust.cli import main as cli


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="out/theory")
    ap.add_argument("--samples", type=int, default=100_000)
    args = ap.parse_args()
    out = Path(args.out)
    steps = [
        ["prob-surface", "--out", str(out / "surface")],
        ["prob-surface", "--compensated", "--out", str(out / "surface_compensated")],
        ["prob-surface", "--nu0", "0.1", "--out", str(out / "surface_nu0_0.1")],
        ["prob-surface", "--nu0", "0.1", "--compensated", "--out", str(out / "surface_nu0_0.1_compensated")],
        ["mc-validate", "--samples", str(args.samples), "--out", str(out / "mc")],
        ["mc-validate", "--samples", str(args.samples), "--eta", "0.95,1.0,1.05", "--out", str(out / "mc_eta")],
        ["trpo-scaling", "--out", str(out / "scaling")],
    ]
    for argv in steps:
        print("$ dimtrust " + " ".join(argv))
        code = cli(argv)
        if code:
            raise SystemExit(code)


if __name__ == "__main__":
    main()
