"""Command-line front end.

Three subcommands:

* ``rank``    -- synthetic ranking experiments (1d / 2d / 10d), writing a
  report document plus predicted-label and history CSVs;
* ``price``   -- train (or reload) Bermudan decision maps and price the
  max-call, writing a manifest, the serialized maps, and per-date
  decision-map CSVs;
* ``lattice`` -- the two-asset binomial oracle, writing a convergence CSV.

Flag values override an optional key=value config file (``--config``); all
effective values are echoed into the output manifest.  ``SURFRANK_SEED`` is
the default seed when ``--seed`` is absent.  Payload files never contain
timestamps, so identical flags and seeds reproduce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path

import numpy as np

from . import bermudan, lattice as lattice_mod, ranking
from .nn import TrainConfig
from .surfaces import BUILTIN_EXAMPLES, make_10d_example

DEFAULT_SEED_ENV = "SURFRANK_SEED"

#: per-experiment training presets (the optimizer is tuned per study)
RANK_PRESETS = {
    ("1d", False): {"learning_rate": 1e-3},
    ("1d", True): {"learning_rate": 3e-4},
    ("2d", False): {"learning_rate": 1e-3},
    ("2d", True): {"learning_rate": 3e-4},
    ("10d", False): {"learning_rate": 1e-3},
    ("10d", True): {"learning_rate": 1e-3},
}
UNET_PRESET = {"learning_rate": 5e-4, "base_channels": 12, "activity_l2": 1e-3}

SCALES = {
    "desk": {"m_prime": 16_000, "repetitions": 20},
    "paper": {"m_prime": 160_000, "repetitions": 100},
}

NET_SEED_OFFSET = 100


class ConfigError(ValueError):
    """Invalid or inconsistent command-line configuration."""


def _default_seed() -> int:
    raw = os.environ.get(DEFAULT_SEED_ENV, "0")
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"{DEFAULT_SEED_ENV}={raw!r} is not an integer") from exc


def read_config_file(path) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {stripped!r}")
        key, _, value = stripped.partition("=")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _merge_config(args: argparse.Namespace, parser: argparse.ArgumentParser) -> None:
    """Fill argparse defaults from the config file; explicit flags win."""
    if not getattr(args, "config", None):
        return
    file_values = read_config_file(args.config)
    actions = {
        action.dest: action
        for group in parser._subparsers._group_actions
        for sub in group.choices.values()
        for action in sub._actions
    }
    for key, raw in file_values.items():
        if not hasattr(args, key):
            raise ConfigError(f"unknown config key {key!r}")
        if getattr(args, key) is not None:
            continue  # flag given on the command line
        action = actions.get(key)
        if action is not None and action.const is True:
            setattr(args, key, raw.lower() in ("1", "true", "yes"))
        elif action is not None and action.type is not None:
            setattr(args, key, action.type(raw))
        else:
            setattr(args, key, raw)


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ",".join(_fmt(v) for v in value)
    return str(value)


def write_manifest(path: Path, entries: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{key}={_fmt(value)}" for key, value in entries.items()]
    path.write_text("\n".join(lines) + "\n")


def write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


# ---------------------------------------------------------------------------
# rank
# ---------------------------------------------------------------------------

DESIGN_ALIASES = {"unif": "uniform-grid", "lhs": "latin-hypercube", "file": "from-file"}


def cmd_rank(args: argparse.Namespace) -> int:
    example = args.example if args.example is not None else "1d"
    if example not in BUILTIN_EXAMPLES:
        raise ConfigError(f"unknown example {example!r} (choose 1d, 2d or 10d)")
    noise = [float(v) for v in args.noise_sd.split(",")] if args.noise_sd else None
    if example == "10d":
        sset = make_10d_example(noise_sd=noise)
    else:
        if noise is not None:
            raise ConfigError("--noise-sd applies to the 10d example only")
        sset = BUILTIN_EXAMPLES[example]()

    raw_design = args.design if args.design is not None else "unif"
    design_kind = DESIGN_ALIASES.get(raw_design, raw_design)
    if design_kind not in ranking.DESIGN_KINDS:
        raise ConfigError(f"unknown design {raw_design!r}")
    net_kind = args.net if args.net is not None else "feedforward"
    if net_kind not in ("feedforward", "unet"):
        raise ConfigError(f"unknown net {net_kind!r}")
    seed = args.seed if args.seed is not None else _default_seed()
    m = args.m if args.m is not None else {"1d": 128, "2d": 576, "10d": 4096}[example]
    if design_kind == "uniform-grid" and sset.dimension > 1:
        per_axis = round(m ** (1.0 / sset.dimension))
        if per_axis**sset.dimension != m:
            raise ConfigError(
                f"uniform-grid budget M={m} in {sset.dimension}D must be a perfect "
                f"{sset.dimension}-th power of the per-axis count"
            )
    if net_kind == "unet" and (example != "2d" or design_kind != "uniform-grid"):
        raise ConfigError("--net unet requires the 2d example with a uniform-grid design")

    preset = dict(RANK_PRESETS[(example, bool(args.noisy))])
    if net_kind == "unet":
        preset["learning_rate"] = UNET_PRESET["learning_rate"]
    lr = args.lr if args.lr is not None else preset["learning_rate"]
    epochs = args.epochs if args.epochs is not None else 1500
    hidden = tuple(int(h) for h in args.hidden.split(",")) if args.hidden else ()

    design_cfg = ranking.DesignConfig(
        kind=design_kind, m=m, noisy=bool(args.noisy), seed=seed, path=args.points_file
    )
    net_cfg = ranking.NetConfig(
        kind=net_kind,
        hidden=hidden,
        base_channels=args.base_channels
        if args.base_channels is not None
        else UNET_PRESET["base_channels"],
        activity_l2=args.activity_l2
        if args.activity_l2 is not None
        else (UNET_PRESET["activity_l2"] if net_kind == "unet" else 0.0),
        seed=seed + NET_SEED_OFFSET,
    )
    train_cfg = TrainConfig(
        epochs=epochs,
        batch_size=args.batch_size,
        learning_rate=lr,
        seed=seed + NET_SEED_OFFSET,
    )

    report = ranking.run_experiment(sset, design_cfg, net_cfg, train_cfg)

    out = Path(args.out if args.out is not None else "runs/rank")
    ranking.write_report(report, out / "report.txt")
    write_csv(
        out / "labels.csv",
        [f"x{j + 1}" for j in range(sset.dimension)] + ["predicted", "true"],
        [
            [repr(float(c)) for c in pt] + [int(p), int(t)]
            for pt, p, t in zip(report.grid_points, report.grid_predicted, report.grid_true)
        ],
    )
    write_csv(
        out / "history.csv",
        ["epoch", "loss", "train_accuracy"],
        [[rec.epoch, repr(rec.loss), repr(rec.train_accuracy)] for rec in report.history],
    )
    print(f"train_accuracy={report.train_accuracy!r} gen_accuracy={report.gen_accuracy!r}")
    return 0


# ---------------------------------------------------------------------------
# price
# ---------------------------------------------------------------------------


def cmd_price(args: argparse.Namespace) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    scale_name = args.scale if args.scale is not None else "desk"
    scale = SCALES.get(scale_name)
    if scale is None:
        raise ConfigError(f"unknown scale {scale_name!r} (desk or paper)")
    m_prime = args.m_prime if args.m_prime is not None else scale["m_prime"]
    reps = args.reps if args.reps is not None else scale["repetitions"]
    out = Path(args.out if args.out is not None else "runs/price")

    if args.maps:
        maps, model, payoff = bermudan.load_decision_maps(args.maps)
        if args.d is not None and args.d != model.dimension:
            raise ConfigError(
                f"--d {args.d} conflicts with the loaded maps (dimension {model.dimension})"
            )
        dimension = model.dimension
        x0 = _parse_x0(args.x0, dimension) if args.x0 else model.x0
        model = bermudan.GbmModel(
            dimension=dimension,
            rate=model.rate,
            dividend=model.dividend,
            sigma=model.sigma,
            x0=x0,
        )
        schedule = maps.schedule
        maps_dir = Path(args.maps)
    else:
        dimension = args.d if args.d is not None else 2
        x0 = _parse_x0(args.x0 or "90", dimension)
        model, schedule, payoff = bermudan.benchmark_problem(dimension, x0[0])
        model = bermudan.GbmModel(
            dimension=dimension,
            rate=model.rate,
            dividend=model.dividend,
            sigma=model.sigma,
            x0=x0,
        )
        overrides = {}
        if args.m is not None:
            overrides["m"] = args.m
        if args.r_paths is not None:
            overrides["r_paths"] = args.r_paths
        if args.epochs is not None:
            overrides["epochs"] = args.epochs
        if args.lr is not None:
            overrides["learning_rate"] = args.lr
        settings = bermudan.default_map_settings(dimension, seed=seed, **overrides)
        maps = bermudan.train_decision_maps(model, schedule, payoff, settings=settings)
        maps_dir = out / "maps"
        bermudan.save_decision_maps(maps, maps_dir, model, payoff)

    estimate = bermudan.price(
        model, schedule, payoff, maps, m_prime=m_prime, repetitions=reps, seed=seed
    )

    if model.dimension == 2:
        for i in range(1, schedule.count):
            rows = bermudan.decision_map_rows(maps, i)
            write_csv(
                out / f"decision_map_t{i}.csv",
                ["x1", "x2", "p_continue"],
                [[repr(a), repr(b), repr(p)] for a, b, p in rows],
            )

    write_manifest(
        out / "price.txt",
        {
            "command": "price",
            "dimension": model.dimension,
            "x0": model.x0,
            "rate": model.rate,
            "dividend": model.dividend,
            "sigma": model.sigma,
            "strike": payoff.strike,
            "maturity": schedule.maturity,
            "dates": schedule.count,
            "scale": scale_name,
            "m_prime": m_prime,
            "repetitions": reps,
            "seed": seed,
            "threads": args.threads if args.threads is not None else 1,
            "maps_dir": maps_dir,
            "price": estimate.price,
            "stderr": estimate.stderr,
            "rep_std": estimate.rep_std,
        },
    )
    print(f"price={estimate.price!r} stderr={estimate.stderr!r}")
    return 0


def _parse_x0(raw: str, dimension: int) -> tuple[float, ...]:
    parts = [float(v) for v in str(raw).split(",")]
    if len(parts) == 1:
        return (parts[0],) * dimension
    if len(parts) != dimension:
        raise ConfigError(f"--x0 needs 1 or {dimension} values, got {len(parts)}")
    return tuple(parts)


# ---------------------------------------------------------------------------
# lattice
# ---------------------------------------------------------------------------


def cmd_lattice(args: argparse.Namespace) -> int:
    x0 = _parse_x0(args.x0 or "90", 2)
    model, schedule, payoff = bermudan.benchmark_problem(2, x0[0])
    model = bermudan.GbmModel(
        dimension=2, rate=model.rate, dividend=model.dividend, sigma=model.sigma, x0=x0
    )
    steps = args.steps if args.steps is not None else 40
    params = lattice_mod.LatticeParams(
        model=model, schedule=schedule, payoff=payoff, steps_per_interval=steps
    )
    if args.convergence:
        n_list = [int(v) for v in args.convergence.split(",")]
        table = lattice_mod.convergence_table(params, n_list, european_only=bool(args.european_only))
    else:
        table = [(steps, lattice_mod.lattice_price(params, european_only=bool(args.european_only)))]
    out = Path(args.out if args.out is not None else "runs/lattice")
    write_csv(
        out / "lattice.csv",
        ["steps_per_interval", "price"],
        [[n, repr(p)] for n, p in table],
    )
    for n, p in table:
        print(f"steps={n} price={p!r}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="surfrank",
        description="Response-surface ranking experiments and Bermudan max-call pricing",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    rank = sub.add_parser("rank", help="train a ranking classifier on a synthetic example")
    rank.add_argument("--example", default=None, help="1d, 2d or 10d")
    rank.add_argument("--design", default=None, help="unif, lhs or file")
    rank.add_argument("--points-file", dest="points_file", default=None)
    rank.add_argument(
        "--noisy", action="store_true", default=None, help="train on noise-corrupted labels"
    )
    rank.add_argument("--m", type=int, default=None, help="design budget")
    rank.add_argument("--net", default=None, help="feedforward or unet")
    rank.add_argument("--hidden", default=None, help="comma-separated hidden widths")
    rank.add_argument("--base-channels", dest="base_channels", type=int, default=None)
    rank.add_argument("--activity-l2", dest="activity_l2", type=float, default=None)
    rank.add_argument("--epochs", type=int, default=None)
    rank.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    rank.add_argument("--lr", type=float, default=None)
    rank.add_argument("--noise-sd", dest="noise_sd", default=None, help="10d noise levels")
    rank.add_argument("--seed", type=int, default=None)
    rank.add_argument("--threads", type=int, default=None)
    rank.add_argument("--config", default=None)
    rank.add_argument("--out", default=None)
    rank.set_defaults(func=cmd_rank)

    price_p = sub.add_parser("price", help="price the Bermudan max-call with learned maps")
    price_p.add_argument("--d", type=int, default=None, help="number of assets")
    price_p.add_argument("--x0", default=None, help="start price (scalar or comma list)")
    price_p.add_argument("--scale", default=None, help="desk or paper budgets")
    price_p.add_argument("--m-prime", dest="m_prime", type=int, default=None)
    price_p.add_argument("--reps", type=int, default=None)
    price_p.add_argument("--m", type=int, default=None, help="design budget per date")
    price_p.add_argument("--r-paths", dest="r_paths", type=int, default=None)
    price_p.add_argument("--epochs", type=int, default=None)
    price_p.add_argument("--lr", type=float, default=None)
    price_p.add_argument("--maps", default=None, help="reuse a persisted decision-map directory")
    price_p.add_argument("--seed", type=int, default=None)
    price_p.add_argument("--threads", type=int, default=None)
    price_p.add_argument("--config", default=None)
    price_p.add_argument("--out", default=None)
    price_p.set_defaults(func=cmd_price)

    lat = sub.add_parser("lattice", help="two-asset binomial oracle")
    lat.add_argument("--x0", default=None)
    lat.add_argument("--steps", type=int, default=None, help="steps per exercise interval")
    lat.add_argument("--convergence", default=None, help="comma list of step counts")
    lat.add_argument("--european-only", dest="european_only", action="store_true", default=None)
    lat.add_argument("--seed", type=int, default=None)
    lat.add_argument("--threads", type=int, default=None)
    lat.add_argument("--config", default=None)
    lat.add_argument("--out", default=None)
    lat.set_defaults(func=cmd_lattice)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _merge_config(args, parser)
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
