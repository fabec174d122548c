"""dimtrust command line.

Subcommands: prob-surface, mc-validate, trpo-scaling, train, eval, figure-data.
Each writes CSVs (12 significant digits, one header line) plus a
``config.json`` copy of the parameters that produced them.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import experiments as ex
from .config import ConfigError, load_json, parse_train_config, train_config_document, write_json
from .ppo import Metrics, fmt, read_metrics_csv, train, write_metrics_csv
from .swimmer import EnvConfig, evaluation_dims

log = logging.getLogger("dimtrust")


class MissingMetricsError(FileNotFoundError):
    pass


def write_csv(path: Path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def int_list(text: str) -> list[int]:
    """'2,3,8' or '2-10' or '2-10,20'."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    return out


def float_list(text: str) -> list[float]:
    return [float(p) for p in text.split(",") if p.strip()]


def out_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


# --- commands ---------------------------------------------------------------


def cmd_prob_surface(args) -> int:
    dims = int_list(args.dims) if args.dims else ex.default_dim_grid(args.dim_max)
    nu0s = float_list(args.nu0) if args.nu0 else ex.default_nu0_grid(args.nu0_count, args.nu0_min, args.nu0_max)
    res = ex.prob_surface(args.epsilon, dims, nu0s, args.compensated)
    out = out_dir(args.out)
    write_csv(out / "surface.csv", res.columns, res.rows)
    summary = {
        "max_abs_error": res.max_error,
        "max_abs_error_at": res.max_error_at,
        "spread_over_dims": res.spread_over_dims,
    }
    if res.max_deviation is not None:
        summary["max_deviation_from_dim1"] = res.max_deviation
    write_json(out / "summary.json", summary)
    write_json(out / "config.json", {"command": "prob-surface", "epsilon": args.epsilon, "dims": dims,
                                     "nu0": [float(v) for v in nu0s], "compensated": args.compensated})
    print(f"max |p_approx - p_exact| = {res.max_error:.4f} at dim={res.max_error_at['dim']} "
          f"nu0={res.max_error_at['nu0']:.4g} ||nu||={res.max_error_at['nu_norm']:.4g}")
    if res.max_deviation is not None:
        print(f"max deviation from dim=1 reference = {res.max_deviation:.4f}")
    print(f"spread of p_exact over dims = {res.spread_over_dims:.4f}")
    return 0


def cmd_mc_validate(args) -> int:
    dims, nu0s, etas = int_list(args.dims), float_list(args.nu0), float_list(args.eta)
    columns, rows = ex.mc_validate(args.epsilon, dims, nu0s, etas, args.samples, args.seed)
    out = out_dir(args.out)
    write_csv(out / "mc_validate.csv", columns, rows)
    write_json(out / "config.json", {"command": "mc-validate", "epsilon": args.epsilon, "dims": dims,
                                     "nu0": nu0s, "eta": etas, "samples": args.samples, "seed": args.seed})
    worst = max(abs(r[-1]) for r in rows if r[2] == 1.0) if any(r[2] == 1.0 for r in rows) else float("nan")
    print(f"{len(rows)} cells; max |z| over eta=1 cells = {worst:.3f}")
    return 0


def cmd_trpo_scaling(args) -> int:
    dims = int_list(args.dims)
    out = out_dir(args.out)
    summary = {}
    for mode in (["synthetic", "monte-carlo"] if args.mode == "both" else [args.mode]):
        table = ex.scaling_table(mode, dims, args.delta, args.beta, args.mean, args.log_std,
                                 samples=args.samples, seed=args.seed)
        write_csv(out / f"scaling_{mode}.csv", ["dim", "trpo_norm", "beta_norm"], table.rows())
        summary[mode] = {
            "trpo_slope": table.trpo_slope if table.trpo_slope is not None else "absent",
            "beta_slope": table.beta_slope if table.beta_slope is not None else "absent",
        }
        show = lambda s: "absent" if s is None else f"{s:.6f}"  # noqa: E731
        print(f"{mode}: trpo slope {show(table.trpo_slope)}, beta slope {show(table.beta_slope)}")
    write_json(out / "summary.json", summary)
    write_json(out / "config.json", {"command": "trpo-scaling", "mode": args.mode, "dims": dims,
                                     "delta": args.delta, "beta": args.beta, "mean": args.mean,
                                     "log_std": args.log_std, "samples": args.samples, "seed": args.seed})
    return 0


def cmd_train(args) -> int:
    doc = load_json(args.config)
    train_cfg, env_cfg, ext_cfg, cfg_out = parse_train_config(doc)
    if args.seed is not None:
        train_cfg.seed = args.seed
    if args.compensated is not None:
        train_cfg.compensated = args.compensated == "true"
    target = args.out or cfg_out
    if target is None:
        raise ConfigError("output_dir", "missing required key (or pass --out)")
    out = out_dir(target)
    write_json(out / "config.json", train_config_document(train_cfg, env_cfg, ext_cfg, str(target)))

    def progress(m: Metrics):
        log.info("t=%d reward=%.3f kl=%.4f spread=%.4f", m.timestep, m.mean_ep_reward, m.approx_kl, m.clip_spread)

    res = train(train_cfg, env_cfg, ext_cfg, run_dir=out, progress=progress)
    write_metrics_csv(out / "metrics.csv", res.metrics, train_cfg.dim_low, train_cfg.dim_high)
    print(f"{len(res.metrics)} updates, {len(res.checkpoints)} checkpoints written to {out}")
    return 0


def _env_from_run(path: Path) -> EnvConfig | None:
    cfg = path / "config.json"
    if cfg.exists():
        return parse_train_config(load_json(cfg))[1]
    return None


def cmd_eval(args) -> int:
    dims = int_list(args.dims) if args.dims else evaluation_dims()
    src = Path(args.checkpoint)
    env = None
    if src.is_dir():
        ckdir = src / "checkpoints" if (src / "checkpoints").is_dir() else src
        checkpoints = sorted(ckdir.glob("*.npz"))
        if not checkpoints:
            raise FileNotFoundError(f"no checkpoints under {src}")
        env = _env_from_run(src)
    else:
        checkpoints = [src]
    columns, rows = ex.evaluate_snapshots(checkpoints, dims, args.episodes, args.seed, env)
    out = out_dir(args.out) if args.out else (src if src.is_dir() else src.parent)
    write_csv(out / "eval.csv", columns, rows)
    write_json(out / "eval_config.json", {"command": "eval", "checkpoints": [str(c) for c in checkpoints],
                                          "dims": dims, "episodes": args.episodes, "seed": args.seed})
    last = max(r[0] for r in rows)
    for r in rows:
        if r[0] == last:
            print(f"t={r[0]} dim={r[1]:2d} mean={r[2]:.3f} std={r[3]:.3f}")
    return 0


def cmd_figure_data(args) -> int:
    run = Path(args.run_dir)
    metrics_path = run / "metrics.csv"
    if not metrics_path.exists():
        raise MissingMetricsError(f"{metrics_path}: metrics file not found")
    series = read_metrics_csv(metrics_path)
    out = out_dir(args.out or run / "figures")
    lo, hi = args.dim_low, args.dim_high

    scalar = ["mean_ep_reward", "policy_loss", "value_loss", "entropy", "approx_kl", "clip_spread"]
    long_rows = []
    for m in series:
        for name in scalar:
            long_rows.append((m.timestep, "", name, getattr(m, name)))
        for d in range(lo, hi + 1):
            if d in m.clip_fraction:
                long_rows.append((m.timestep, d, "clip_fraction", m.clip_fraction[d]))
    write_csv(out / "training_long.csv", ["timestep", "dim", "metric", "value"], long_rows)

    wide_cols = ["timestep"] + [f"dim_{d}" for d in range(lo, hi + 1)] + ["clip_spread"]
    wide = [(m.timestep, *[m.clip_fraction.get(d, float("nan")) for d in range(lo, hi + 1)], m.clip_spread)
            for m in series]
    write_csv(out / "clip_fraction.csv", wide_cols, wide)

    written = ["training_long.csv", "clip_fraction.csv"]
    eval_path = run / "eval.csv"
    if eval_path.exists():
        rows = []
        with open(eval_path, newline="") as fh:
            for r in csv.DictReader(fh):
                t, d = int(r["timestep"]), int(r["dim"])
                rows.append((t, d, "mean_reward", float(r["mean_reward"])))
                rows.append((t, d, "std_reward", float(r["std_reward"])))
        rows.sort(key=lambda r: (r[0], r[1], r[2]))
        write_csv(out / "eval_long.csv", ["timestep", "dim", "metric", "value"], rows)
        written.append("eval_long.csv")
    write_json(out / "config.json", {"command": "figure-data", "run_dir": str(run), "dim_low": lo, "dim_high": hi})
    print("wrote " + ", ".join(written) + f" to {out}")
    return 0


# --- parser -------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dimtrust", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("prob-surface", help="unclipped probability and approximation error on a (dim, nu0) grid")
    s.add_argument("--epsilon", type=float, default=0.2)
    s.add_argument("--dims", help="explicit dims, e.g. '1-32' (default 1..--dim-max)")
    s.add_argument("--dim-max", type=int, default=32)
    s.add_argument("--nu0", help="explicit comma-separated nu0 values (default log grid)")
    s.add_argument("--nu0-count", type=int, default=60)
    s.add_argument("--nu0-min", type=float, default=0.005)
    s.add_argument("--nu0-max", type=float, default=0.5)
    s.add_argument("--compensated", action="store_true", help="use epsilon*sqrt(dim)")
    s.add_argument("--out", default="out/prob_surface")
    s.set_defaults(func=cmd_prob_surface)

    s = sub.add_parser("mc-validate", help="Monte-Carlo check of the closed-form unclipped probability")
    s.add_argument("--epsilon", type=float, default=0.2)
    s.add_argument("--dims", default="1,2,4,8,16")
    s.add_argument("--nu0", default="0.01,0.03,0.1,0.2,0.4")
    s.add_argument("--eta", default="1.0")
    s.add_argument("--samples", type=int, default=100_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default="out/mc_validate")
    s.set_defaults(func=cmd_mc_validate)

    s = sub.add_parser("trpo-scaling", help="TRPO and beta update norms versus dim")
    s.add_argument("--mode", choices=["synthetic", "monte-carlo", "both"], default="both")
    s.add_argument("--dims", default="1,2,4,8,16,32")
    s.add_argument("--delta", type=float, default=0.01)
    s.add_argument("--beta", type=float, default=1.0)
    s.add_argument("--mean", type=float, default=0.0)
    s.add_argument("--log-std", type=float, default=-0.5)
    s.add_argument("--samples", type=int, default=20_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default="out/trpo_scaling")
    s.set_defaults(func=cmd_trpo_scaling)

    s = sub.add_parser("train", help="PPO training from a JSON config")
    s.add_argument("--config", required=True)
    s.add_argument("--out", help="run directory (overrides output_dir)")
    s.add_argument("--seed", type=int)
    s.add_argument("--compensated", choices=["true", "false"], help="override train.compensated")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="deterministic evaluation of a checkpoint or every snapshot in a run")
    s.add_argument("--checkpoint", required=True, help="checkpoint file or run directory")
    s.add_argument("--dims", help="default 2-10,20")
    s.add_argument("--episodes", type=int, default=5)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("figure-data", help="long-format CSV bundles from a run directory")
    s.add_argument("--run-dir", required=True)
    s.add_argument("--out")
    s.add_argument("--dim-low", type=int, default=2)
    s.add_argument("--dim-high", type=int, default=10)
    s.set_defaults(func=cmd_figure_data)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
