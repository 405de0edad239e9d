"""Experiment pipeline: designs, labeled data sets, training, and accuracy reports.

Reproduces the synthetic studies: generate input locations (uniform grid,
Latin hypercube, or imported from file), label them with the true or the
noise-corrupted minimal-surface index, train a classifier, and score it both
on its own training labels and against the ground truth on a dense
evaluation grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .nn import (
    Network,
    TrainConfig,
    build_feedforward,
    build_unet,
    init_network,
    probabilities_to_labels,
    train,
)
from .nn.training import EpochRecord
from .surfaces import Array, Box, EvalGrid, SurfaceSet, ranking_loss

DESIGN_KINDS = ("uniform-grid", "latin-hypercube", "from-file")


class DesignError(ValueError):
    """Invalid design request (bad budget, malformed point file, ...)."""


@dataclass(frozen=True)
class LabeledDesign:
    """Training locations with 1-based labels and their provenance."""

    points: Array
    labels: Array
    provenance: str  # "true-label" | "noisy-label"
    seed: int

    def __post_init__(self) -> None:
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        labels = np.asarray(self.labels, dtype=int).reshape(-1)
        if len(labels) != len(pts):
            raise ValueError("points and labels must have equal length")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.points)


def latin_hypercube(m: int, d: int, rng: np.random.Generator) -> Array:
    """Stratified unit-cube sample: one point in each of m equal bins per axis."""
    pts = np.empty((m, d))
    for j in range(d):
        pts[:, j] = (rng.permutation(m) + rng.random(m)) / m
    return pts


def grid_points(box: Box, per_axis: int) -> Array:
    """Regular lattice over the box including its corners, row-major order."""
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in zip(box.lower, box.upper)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.reshape(-1) for m in mesh])


def read_points_file(path) -> Array:
    """Parse a plain-text point file: one point per line, whitespace-separated
    decimal floats, lines starting with '#' ignored."""
    rows: list[list[float]] = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        try:
            rows.append([float(tok) for tok in stripped.split()])
        except ValueError as exc:
            raise DesignError(f"{path}:{lineno}: malformed point line {stripped!r}") from exc
    if not rows:
        raise DesignError(f"{path}: no points found")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise DesignError(f"{path}: inconsistent coordinate counts")
    return np.asarray(rows, dtype=float)


def generate_design(
    kind: str, m: int, domain: Box, seed: int = 0, path=None
) -> Array:
    """Produce M input locations of the requested kind inside the domain box."""
    if kind not in DESIGN_KINDS:
        raise DesignError(f"unknown design kind {kind!r}")
    if m < 1:
        raise DesignError("design budget must be >= 1")
    d = domain.dimension
    if kind == "uniform-grid":
        if d == 1:
            return np.linspace(domain.lower[0], domain.upper[0], m)[:, None]
        per_axis = round(m ** (1.0 / d))
        if per_axis**d != m:
            raise DesignError(
                f"uniform-grid budget M={m} in {d}D must be a perfect {d}-th power "
                f"(per-axis count ** {d})"
            )
        return grid_points(domain, per_axis)
    if kind == "latin-hypercube":
        unit = latin_hypercube(m, d, np.random.default_rng(seed))
        lo = np.asarray(domain.lower)
        hi = np.asarray(domain.upper)
        return lo + unit * (hi - lo)
    if path is None:
        raise DesignError("from-file design needs a point file path")
    pts = read_points_file(path)
    if pts.shape[1] != d:
        raise DesignError(f"{path}: points are {pts.shape[1]}-dimensional, domain is {d}-dimensional")
    if not domain.contains(pts).all():
        raise DesignError(f"{path}: contains points outside the domain box")
    return pts[:m] if m < len(pts) else pts


def label_design(points: Array, sset: SurfaceSet, noisy: bool, seed: int = 0) -> LabeledDesign:
    """Attach minimal-surface labels: exact argmin, or argmin of one noisy draw
    per surface (fresh draws for every point)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if noisy:
        labels = sset.noisy_label(points, np.random.default_rng(seed))
    else:
        labels = sset.true_label(points)
    return LabeledDesign(
        points=points,
        labels=np.asarray(labels, dtype=int),
        provenance="noisy-label" if noisy else "true-label",
        seed=seed,
    )


def accuracy(pred, truth) -> float:
    """Fraction of equal entries."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape or pred.size == 0:
        raise ValueError("label sequences must be non-empty and of equal length")
    return float(np.mean(pred == truth))


# ---------------------------------------------------------------------------
# evaluation grids
# ---------------------------------------------------------------------------

EVAL_GRID_1D = 1001
EVAL_GRID_2D = 101
EVAL_POINTS_HIGHD = 20_000
EVAL_SEED_HIGHD = 20_000


def default_eval_grid(sset: SurfaceSet, seed: int = EVAL_SEED_HIGHD) -> EvalGrid:
    """Uniform-weight grid: 1001 points in 1D, 101x101 in 2D, and a seeded
    20000-point Latin hypercube in higher dimension."""
    d = sset.dimension
    if d == 1:
        return EvalGrid(points=grid_points(sset.domain, EVAL_GRID_1D))
    if d == 2:
        return EvalGrid(points=grid_points(sset.domain, EVAL_GRID_2D))
    unit = latin_hypercube(EVAL_POINTS_HIGHD, d, np.random.default_rng(seed))
    lo = np.asarray(sset.domain.lower)
    hi = np.asarray(sset.domain.upper)
    return EvalGrid(points=lo + unit * (hi - lo))


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DesignConfig:
    kind: str = "uniform-grid"
    m: int = 128
    noisy: bool = False
    seed: int = 0
    path: str | None = None


@dataclass(frozen=True)
class NetConfig:
    kind: str = "feedforward"  # "feedforward" | "unet"
    hidden: tuple[int, ...] = ()  # feedforward widths; () -> two layers of M/8
    base_channels: int = 8  # unet
    activity_l1: float = 0.0
    activity_l2: float = 0.0
    seed: int = 0


@dataclass
class ExperimentReport:
    train_accuracy: float
    gen_accuracy: float
    grid_points: Array
    grid_predicted: Array
    grid_true: Array
    history: list[EpochRecord]
    config: dict
    network: Network

    def final_loss(self) -> float:
        return self.history[-1].loss if self.history else math.nan


def _default_hidden(m: int) -> tuple[int, ...]:
    width = max(4, m // 8)
    return (width, width)


def _image_from_points(points: Array, side: int, d: int) -> Array:
    return points.reshape(1, side, side, d)


def interpolate_image_probabilities(probs: Array, domain: Box, points: Array) -> Array:
    """Bilinear interpolation of a (side, side, L) probability image at arbitrary
    domain points.

    A convolutional classifier is resolution-bound: its filters act at the
    training lattice's pixel spacing, so off-lattice queries read the learned
    probability field rather than re-running the net at a different spacing.
    """
    side = probs.shape[0]
    lo = np.asarray(domain.lower)
    hi = np.asarray(domain.upper)
    frac = (points - lo) / (hi - lo) * (side - 1)
    i0 = np.clip(np.floor(frac[:, 0]).astype(int), 0, side - 2)
    j0 = np.clip(np.floor(frac[:, 1]).astype(int), 0, side - 2)
    fu = (frac[:, 0] - i0)[:, None]
    fv = (frac[:, 1] - j0)[:, None]
    return (
        probs[i0, j0] * (1 - fu) * (1 - fv)
        + probs[i0 + 1, j0] * fu * (1 - fv)
        + probs[i0, j0 + 1] * (1 - fu) * fv
        + probs[i0 + 1, j0 + 1] * fu * fv
    )


def run_experiment(
    sset: SurfaceSet,
    design_cfg: DesignConfig,
    net_cfg: NetConfig,
    train_cfg: TrainConfig,
    grid: EvalGrid | None = None,
) -> ExperimentReport:
    """Full pipeline: design -> labels -> train -> score.

    Training accuracy is measured against the design's own (possibly noisy)
    labels; generalization accuracy against the exact classifier on the
    evaluation grid.
    """
    if grid is None:
        grid = default_eval_grid(sset)
    points = generate_design(
        design_cfg.kind, design_cfg.m, sset.domain, seed=design_cfg.seed, path=design_cfg.path
    )
    design = label_design(points, sset, noisy=design_cfg.noisy, seed=design_cfg.seed)
    m = len(design)

    if net_cfg.kind == "unet":
        if design_cfg.kind != "uniform-grid" or sset.dimension != 2:
            raise DesignError("the unet classifier requires a 2D uniform-grid design")
        side = round(math.isqrt(m))
        if side * side != m:
            raise DesignError(f"unet design budget M={m} is not a perfect square")
        specs = build_unet(
            side,
            side,
            sset.dimension,
            sset.count,
            base_channels=net_cfg.base_channels,
            activity_l1=net_cfg.activity_l1,
            activity_l2=net_cfg.activity_l2,
        )
        train_x: Array = _image_from_points(design.points, side, sset.dimension)
    else:
        hidden = net_cfg.hidden or _default_hidden(m)
        specs = build_feedforward(
            sset.dimension,
            sset.count,
            hidden,
            activity_l1=net_cfg.activity_l1,
            activity_l2=net_cfg.activity_l2,
        )
        train_x = design.points

    net = init_network(specs, seed=net_cfg.seed)
    trained, history = train(net, train_x, design.labels, train_cfg)

    if net_cfg.kind == "unet":
        train_pred = trained.predict_labels(train_x)
        field = trained.forward(train_x)[0]
        grid_probs = interpolate_image_probabilities(field, sset.domain, grid.points)
        grid_pred = probabilities_to_labels(grid_probs, sset.count)
    else:
        train_pred = trained.predict_labels(design.points)
        grid_pred = trained.predict_labels(grid.points)
    grid_true = np.asarray(sset.true_label(grid.points), dtype=int)

    config = {
        "example": sset.name,
        "design": asdict(design_cfg),
        "net": asdict(net_cfg),
        "train": asdict(train_cfg),
        "m": m,
        "eval_points": len(grid),
    }
    return ExperimentReport(
        train_accuracy=accuracy(train_pred, design.labels),
        gen_accuracy=1.0 - ranking_loss(grid_pred, grid_true, grid),
        grid_points=grid.points,
        grid_predicted=grid_pred,
        grid_true=grid_true,
        history=history,
        config=config,
        network=trained,
    )


# ---------------------------------------------------------------------------
# report document
# ---------------------------------------------------------------------------


def _flat_config(config: dict, prefix: str = "") -> list[tuple[str, str]]:
    items: list[tuple[str, str]] = []
    for key in sorted(config):
        value = config[key]
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            items.extend(_flat_config(value, prefix=f"{name}."))
        elif isinstance(value, (list, tuple)):
            items.append((name, ",".join(repr(v) for v in value)))
        else:
            items.append((name, repr(value) if isinstance(value, float) else str(value)))
    return items


def format_report(report: ExperimentReport) -> str:
    """Key-value document followed by CSV blocks: epoch history, then the
    predicted-label grid (coordinates, predicted, true)."""
    lines = ["surfrank-report v1"]
    lines.append(f"train_accuracy={report.train_accuracy!r}")
    lines.append(f"gen_accuracy={report.gen_accuracy!r}")
    for key, value in _flat_config(report.config):
        lines.append(f"{key}={value}")
    lines.append("")
    lines.append("[history]")
    lines.append("epoch,loss,train_accuracy")
    for rec in report.history:
        lines.append(f"{rec.epoch},{rec.loss!r},{rec.train_accuracy!r}")
    lines.append("")
    lines.append("[labels]")
    d = report.grid_points.shape[1]
    lines.append(",".join([f"x{j + 1}" for j in range(d)] + ["predicted", "true"]))
    for point, pred, true in zip(report.grid_points, report.grid_predicted, report.grid_true):
        coords = ",".join(repr(float(c)) for c in point)
        lines.append(f"{coords},{int(pred)},{int(true)}")
    return "\n".join(lines) + "\n"


def write_report(report: ExperimentReport, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_report(report))
    return path
