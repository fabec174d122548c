"""Train one policy with 6000-step snapshots, evaluate every snapshot on
dims 2..10 and the unseen 20, and write the figure bundles.

    python3 scripts/generalization_eval.py --config configs/train_compensated.json --out out/gen
"""
import argparse

from dimtrust.cli import main as cli


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default="configs/train_compensated.json")
    ap.add_argument("--out", default="out/gen")
    ap.add_argument("--episodes", type=int, default=3)
    args = ap.parse_args()
    for argv in (
        ["-v", "train", "--config", args.config, "--out", args.out],
        ["eval", "--checkpoint", args.out, "--episodes", str(args.episodes)],
        ["figure-data", "--run-dir", args.out],
    ):
        code = cli(argv)
        if code:
            raise SystemExit(code)


if __name__ == "__main__":
    main()
