"""Paired compensated / uncompensated PPO runs over several seeds.

Writes one run directory per (variant, seed) plus study.csv with the smoke
and clip-spread numbers for each run.

    python3 scripts/clip_spread_study.py --seeds 0,1,2 --timesteps 150000 --out out/study
"""
import argparse
import math
from pathlib import Path

from dimtrust.cli import int_list, write_csv
from dimtrust.experiments import paired_study


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", default="0,1,2")
    ap.add_argument("--timesteps", type=int, default=150_000)
    ap.add_argument("--episodes", type=int, default=20)
    ap.add_argument("--out", default="out/study")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def show(r):
        se = math.hypot(r.trained_stderr, r.untrained_stderr)
        print(f"{'comp ' if r.compensated else 'plain'} seed {r.seed}: trained {r.trained_mean:.2f} "
              f"(se {r.trained_stderr:.2f}) untrained {r.untrained_mean:.2f}, {r.improvement / se:.1f} se, "
              f"late spread {r.late_spread:.4f}, {r.seconds:.0f}s", flush=True)

    study = paired_study(int_list(args.seeds), args.timesteps, out, eval_episodes=args.episodes, log=show)
    cols = ["seed", "compensated", "untrained_mean", "untrained_stderr", "trained_mean", "trained_stderr",
            "late_spread", "final_mean_ep_reward", "seconds"]
    rows = [tuple(getattr(r, c) for c in cols) for r in sorted(study.runs, key=lambda r: (r.seed, r.compensated))]
    write_csv(out / "study.csv", cols, rows)
    for c, p in study.pairs():
        print(f"seed {c.seed}: spread comp {c.late_spread:.4f} vs plain {p.late_spread:.4f} "
              f"-> {'lower' if c.late_spread < p.late_spread else 'NOT lower'}")


if __name__ == "__main__":
    main()
