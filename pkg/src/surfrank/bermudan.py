"""Bermudan max-call pricing by backward-trained stop/continue decision maps.

The pricing loop walks the exercise dates backwards: at each date it labels a
design of asset-price locations stop/continue by comparing the simulated
continuation value (paths driven forward through the already-trained later
maps) against immediate exercise, then trains a binary classifier on those
labels.  Pricing runs fresh out-of-sample paths through the full map sequence.

Class convention for the decision networks: label 1 = continue, label 2 =
stop, so the sigmoid output is directly the probability of continuing.

Randomness is organized as substreams derived from a master seed and a
purpose key (date index, design-point index, pricing repetition), so results
do not depend on execution order or worker scheduling.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .nn import Network, TrainConfig, build_feedforward, init_network, load_network, save_network, train
from .ranking import generate_design
from .surfaces import Array, Box

CONTINUE, STOP = 1, 2

#: parameter set of the benchmark max-call family
BENCHMARK_RATE = 0.05
BENCHMARK_DIVIDEND = 0.10
BENCHMARK_SIGMA = 0.20
BENCHMARK_STRIKE = 100.0
BENCHMARK_MATURITY = 3.0
BENCHMARK_DATES = 9


def substream(seed: int, *key: int) -> np.random.Generator:
    """Generator on a deterministic substream of (seed, key)."""
    return np.random.default_rng(
        np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    )


@dataclass(frozen=True)
class GbmModel:
    """Independent geometric Brownian motions sharing rate, dividend and volatility."""

    dimension: int
    rate: float
    dividend: float
    sigma: float
    x0: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if len(self.x0) != self.dimension:
            raise ValueError("x0 must have one entry per asset")
        if any(v <= 0 for v in self.x0):
            raise ValueError("x0 must be positive componentwise")


@dataclass(frozen=True)
class ExerciseSchedule:
    """Equally spaced exercise dates t_i = i * maturity / count, i = 0..count."""

    maturity: float
    count: int

    def __post_init__(self) -> None:
        if self.maturity <= 0 or self.count < 1:
            raise ValueError("need positive maturity and at least one exercise date")

    @property
    def dates(self) -> Array:
        return np.linspace(0.0, self.maturity, self.count + 1)

    @property
    def dt(self) -> float:
        return self.maturity / self.count


@dataclass(frozen=True)
class MaxCallPayoff:
    """Discounted max-call: e^{-rate*t} * (max_i x_i - strike)_+."""

    strike: float
    rate: float

    def __call__(self, t: float, x: Array) -> float | Array:
        x = np.asarray(x, dtype=float)
        best = x.max(axis=-1) if x.ndim > 1 else x.max()
        value = np.exp(-self.rate * t) * np.maximum(best - self.strike, 0.0)
        return float(value) if np.ndim(value) == 0 else value


def benchmark_problem(dimension: int, x0: float) -> tuple[GbmModel, ExerciseSchedule, MaxCallPayoff]:
    """The standard multi-asset max-call test case at a symmetric start price."""
    model = GbmModel(
        dimension=dimension,
        rate=BENCHMARK_RATE,
        dividend=BENCHMARK_DIVIDEND,
        sigma=BENCHMARK_SIGMA,
        x0=(float(x0),) * dimension,
    )
    schedule = ExerciseSchedule(maturity=BENCHMARK_MATURITY, count=BENCHMARK_DATES)
    payoff = MaxCallPayoff(strike=BENCHMARK_STRIKE, rate=BENCHMARK_RATE)
    return model, schedule, payoff


def default_training_domain(dimension: int) -> Box:
    """Design box for decision-map training: [50,150]^2 in 2D, [30,180]^d above."""
    if dimension == 2:
        return Box((50.0, 50.0), (150.0, 150.0))
    return Box((30.0,) * dimension, (180.0,) * dimension)


# ---------------------------------------------------------------------------
# path simulation
# ---------------------------------------------------------------------------


def simulate_paths(
    model: GbmModel,
    start: Array,
    from_index: int,
    schedule: ExerciseSchedule,
    count: int,
    rng: np.random.Generator,
) -> Array:
    """Exact lognormal stepping over the remaining dates.

    Returns (count, n_remaining + 1, dimension); column 0 is the start state
    at date index ``from_index``.
    """
    start = np.asarray(start, dtype=float)
    if np.any(start <= 0):
        raise ValueError("start must be positive componentwise")
    steps = schedule.count - from_index
    dt = schedule.dt
    drift = (model.rate - model.dividend - 0.5 * model.sigma**2) * dt
    vol = model.sigma * math.sqrt(dt)
    paths = np.empty((count, steps + 1, model.dimension))
    paths[:, 0, :] = start
    if steps:
        shocks = rng.standard_normal((count, steps, model.dimension))
        log_steps = np.cumsum(drift + vol * shocks, axis=1)
        paths[:, 1:, :] = start * np.exp(log_steps)
    return paths


# ---------------------------------------------------------------------------
# decision maps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstantMap:
    """Degenerate per-date classifier: every state gets the same action."""

    action: int  # CONTINUE or STOP

    def continue_probability(self, x: Array) -> Array:
        value = 1.0 if self.action == CONTINUE else 0.0
        return np.full(len(np.atleast_2d(x)), value)

    def labels(self, x: Array) -> Array:
        return np.full(len(np.atleast_2d(x)), self.action, dtype=int)


@dataclass(frozen=True)
class NetworkMap:
    """Trained stop/continue classifier over a domain box.

    Inputs are rescaled to [-1,1]^d; states outside the training box are
    projected onto it first, so the classifier extends constantly instead of
    extrapolating.
    """

    network: Network
    domain: Box

    def _scaled(self, x: Array) -> Array:
        clipped = np.clip(np.atleast_2d(x), self.domain.lower, self.domain.upper)
        return self.domain.rescale_to_unit(clipped)

    def continue_probability(self, x: Array) -> Array:
        return self.network.forward(self._scaled(x))[:, 0]

    def labels(self, x: Array) -> Array:
        return self.network.predict_labels(self._scaled(x))


@dataclass
class DecisionMapSequence:
    """Classifiers for dates t_1 .. t_{N-1}; the map at t_N is the constant stop."""

    schedule: ExerciseSchedule
    domain: Box
    maps: dict[int, ConstantMap | NetworkMap]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        expected = set(range(1, self.schedule.count))
        if set(self.maps) != expected:
            raise ValueError(f"maps must cover date indices {sorted(expected)}")

    def map_at(self, i: int) -> ConstantMap | NetworkMap:
        if i == self.schedule.count:
            return ConstantMap(STOP)
        return self.maps[i]

    def stop_mask(self, i: int, x: Array) -> Array:
        """Boolean stop decision per row of ``x`` at date index ``i``."""
        return self.map_at(i).labels(x) == STOP

    def continue_probability(self, i: int, x: Array) -> Array:
        return self.map_at(i).continue_probability(x)


def pathwise_payoffs(
    paths: Array,
    maps: DecisionMapSequence,
    from_index: int,
    schedule: ExerciseSchedule,
    payoff: MaxCallPayoff,
) -> Array:
    """Payoff at the first post-start date whose map says stop (capped at maturity).

    Trained maps only exercise in the money: a zero payoff never beats the
    non-negative continuation value (that is exactly how the training labels
    are generated), so an out-of-the-money "stop" from a network is
    extrapolation noise and is ignored.  Constant maps are taken literally.
    """
    n_paths = len(paths)
    dates = schedule.dates
    values = np.zeros(n_paths)
    alive = np.ones(n_paths, dtype=bool)
    for j in range(from_index + 1, schedule.count + 1):
        col = j - from_index
        if not alive.any():
            break
        states = paths[alive, col, :]
        if j == schedule.count:
            stop_now = np.ones(len(states), dtype=bool)
        else:
            entry = maps.map_at(j)
            stop_now = entry.labels(states) == STOP
            if isinstance(entry, NetworkMap):
                stop_now &= payoff(dates[j], states) > 0.0
        if stop_now.any():
            idx = np.flatnonzero(alive)[stop_now]
            values[idx] = payoff(dates[j], paths[idx, col, :])
            alive[idx] = False
    return values


def pathwise_stop(
    path: Array,
    maps: DecisionMapSequence,
    from_index: int,
    schedule: ExerciseSchedule,
    payoff: MaxCallPayoff,
) -> float:
    """Single-path version of :func:`pathwise_payoffs`."""
    return float(pathwise_payoffs(path[None], maps, from_index, schedule, payoff)[0])


def estimate_continuation(
    x: Array,
    i: int,
    maps: DecisionMapSequence,
    model: GbmModel,
    schedule: ExerciseSchedule,
    payoff: MaxCallPayoff,
    r_paths: int,
    rng: np.random.Generator,
) -> float:
    """Average stopped payoff over ``r_paths`` fresh paths started at (t_i, x)."""
    if r_paths < 1:
        raise ValueError("r_paths must be >= 1")
    paths = simulate_paths(model, np.asarray(x, dtype=float), i, schedule, r_paths, rng)
    return float(pathwise_payoffs(paths, maps, i, schedule, payoff).mean())


# ---------------------------------------------------------------------------
# training (backward induction over dates)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MapTrainSettings:
    """Budget and network settings for decision-map training."""

    design_kind: str = "uniform-grid"
    m: int = 1024
    r_paths: int = 100
    hidden: tuple[int, ...] = (64, 64)
    epochs: int = 800
    batch_size: int | None = None
    learning_rate: float = 1e-3
    seed: int = 0


def default_map_settings(dimension: int, seed: int = 0, **overrides) -> MapTrainSettings:
    """2D: 32x32 uniform grid; higher d: 1024*d Latin-hypercube points."""
    if dimension == 2:
        base = dict(design_kind="uniform-grid", m=1024)
    else:
        base = dict(design_kind="latin-hypercube", m=1024 * dimension)
    base.update(overrides)
    return MapTrainSettings(seed=seed, **base)


def _label_chunk(
    points: Array,
    i: int,
    maps_so_far: dict[int, ConstantMap | NetworkMap],
    schedule: ExerciseSchedule,
    model: GbmModel,
    payoff: MaxCallPayoff,
    settings: MapTrainSettings,
    point_offset: int,
) -> Array:
    """Continuation estimates for a block of design points at date index i.

    One RNG substream per design point keeps labels independent of chunking
    and of any parallel execution order.
    """
    n_pts = len(points)
    steps = schedule.count - i
    shocks = np.empty((n_pts, settings.r_paths, steps, model.dimension))
    for k in range(n_pts):
        rng = substream(settings.seed, 1, i, point_offset + k)
        shocks[k] = rng.standard_normal((settings.r_paths, steps, model.dimension))
    dt = schedule.dt
    drift = (model.rate - model.dividend - 0.5 * model.sigma**2) * dt
    vol = model.sigma * math.sqrt(dt)
    log_steps = np.cumsum(drift + vol * shocks, axis=2)
    paths = np.empty((n_pts * settings.r_paths, steps + 1, model.dimension))
    paths[:, 0, :] = np.repeat(points, settings.r_paths, axis=0)
    paths[:, 1:, :] = (points[:, None, None, :] * np.exp(log_steps)).reshape(
        n_pts * settings.r_paths, steps, model.dimension
    )
    sequence = DecisionMapSequence(
        schedule=schedule,
        domain=default_training_domain(model.dimension),
        maps={j: maps_so_far.get(j, ConstantMap(STOP)) for j in range(1, schedule.count)},
    )
    values = pathwise_payoffs(paths, sequence, i, schedule, payoff)
    return values.reshape(n_pts, settings.r_paths).mean(axis=1)


def train_decision_maps(
    model: GbmModel,
    schedule: ExerciseSchedule,
    payoff: MaxCallPayoff,
    domain: Box | None = None,
    settings: MapTrainSettings | None = None,
) -> DecisionMapSequence:
    """Backward loop of the pricing algorithm: label a design by simulated
    continuation vs immediate exercise at each date, train one classifier per
    date.  Dates whose labels are all one class get a constant classifier."""
    if domain is None:
        domain = default_training_domain(model.dimension)
    if settings is None:
        settings = default_map_settings(model.dimension)
    maps: dict[int, ConstantMap | NetworkMap] = {}
    date_meta: dict[str, dict] = {}
    dates = schedule.dates
    chunk = max(1, 2**22 // max(1, settings.r_paths * model.dimension * schedule.count))
    for i in range(schedule.count - 1, 0, -1):
        points = generate_design(
            settings.design_kind,
            settings.m,
            domain,
            seed=int(substream(settings.seed, 0, i).integers(2**31)),
        )
        cont = np.empty(len(points))
        for start in range(0, len(points), chunk):
            block = points[start : start + chunk]
            cont[start : start + chunk] = _label_chunk(
                block, i, maps, schedule, model, payoff, settings, start
            )
        exercise = payoff(dates[i], points)
        labels = np.where(cont > exercise, CONTINUE, STOP)
        counts = {"continue": int((labels == CONTINUE).sum()), "stop": int((labels == STOP).sum())}
        if counts["continue"] == 0 or counts["stop"] == 0:
            action = CONTINUE if counts["continue"] else STOP
            maps[i] = ConstantMap(action)
            date_meta[str(i)] = {"constant": "continue" if action == CONTINUE else "stop", **counts}
            continue
        net = init_network(
            build_feedforward(model.dimension, 2, settings.hidden),
            seed=int(substream(settings.seed, 2, i).integers(2**31)),
        )
        trained, history = train(
            net,
            domain.rescale_to_unit(points),
            labels,
            TrainConfig(
                epochs=settings.epochs,
                batch_size=settings.batch_size,
                learning_rate=settings.learning_rate,
                seed=int(substream(settings.seed, 3, i).integers(2**31)),
            ),
        )
        maps[i] = NetworkMap(network=trained, domain=domain)
        date_meta[str(i)] = {"train_accuracy": history[-1].train_accuracy, **counts}
    return DecisionMapSequence(
        schedule=schedule,
        domain=domain,
        maps=maps,
        metadata={
            "design_kind": settings.design_kind,
            "m": settings.m,
            "r_paths": settings.r_paths,
            "seed": settings.seed,
            "hidden": list(settings.hidden),
            "epochs": settings.epochs,
            "learning_rate": settings.learning_rate,
            "dates": date_meta,
        },
    )


# ---------------------------------------------------------------------------
# pricing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PriceEstimate:
    """Monte Carlo price with dispersion across repetitions.

    ``rep_std`` is the standard deviation of the per-repetition estimates;
    ``stderr`` (= rep_std / sqrt(repetitions)) is the standard error of the
    reported price.
    """

    price: float
    stderr: float
    rep_std: float
    n_paths: int
    repetitions: int
    rep_values: tuple[float, ...]


def price(
    model: GbmModel,
    schedule: ExerciseSchedule,
    payoff: MaxCallPayoff,
    maps: DecisionMapSequence,
    m_prime: int = 16_000,
    repetitions: int = 20,
    seed: int = 0,
) -> PriceEstimate:
    """Out-of-sample valuation: stop the fresh paths with the trained maps,
    average, and floor at the immediate payoff."""
    if m_prime < 1 or repetitions < 1:
        raise ValueError("m_prime and repetitions must be >= 1")
    x0 = np.asarray(model.x0)
    values = []
    for rep in range(repetitions):
        rng = substream(seed, 4, rep)
        paths = simulate_paths(model, x0, 0, schedule, m_prime, rng)
        values.append(float(pathwise_payoffs(paths, maps, 0, schedule, payoff).mean()))
    values_arr = np.asarray(values)
    continuation = float(values_arr.mean())
    rep_std = float(values_arr.std(ddof=1)) if repetitions > 1 else 0.0
    return PriceEstimate(
        price=max(payoff(0.0, x0), continuation),
        stderr=rep_std / math.sqrt(repetitions),
        rep_std=rep_std,
        n_paths=m_prime,
        repetitions=repetitions,
        rep_values=tuple(values),
    )


# ---------------------------------------------------------------------------
# persistence (directory of networks plus a key=value manifest)
# ---------------------------------------------------------------------------

MANIFEST_NAME = "manifest.txt"
_MANIFEST_FORMAT = "surfrank-decision-maps"
_MANIFEST_VERSION = 1


def save_decision_maps(
    maps: DecisionMapSequence, directory, model: GbmModel, payoff: MaxCallPayoff
) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lines = [
        f"format={_MANIFEST_FORMAT}",
        f"version={_MANIFEST_VERSION}",
        f"dimension={model.dimension}",
        f"rate={model.rate!r}",
        f"dividend={model.dividend!r}",
        f"sigma={model.sigma!r}",
        "x0=" + ",".join(repr(v) for v in model.x0),
        f"strike={payoff.strike!r}",
        f"maturity={maps.schedule.maturity!r}",
        f"dates={maps.schedule.count}",
        "domain_lower=" + ",".join(repr(v) for v in maps.domain.lower),
        "domain_upper=" + ",".join(repr(v) for v in maps.domain.upper),
        "metadata=" + json.dumps(maps.metadata, sort_keys=True),
    ]
    for i in range(1, maps.schedule.count):
        entry = maps.maps[i]
        if isinstance(entry, ConstantMap):
            action = "continue" if entry.action == CONTINUE else "stop"
            lines.append(f"map_{i}=constant:{action}")
        else:
            name = f"net_t{i}.npz"
            save_network(entry.network, directory / name)
            lines.append(f"map_{i}=network:{name}")
    (directory / MANIFEST_NAME).write_text("\n".join(lines) + "\n")
    return directory


def load_decision_maps(directory) -> tuple[DecisionMapSequence, GbmModel, MaxCallPayoff]:
    directory = Path(directory)
    fields: dict[str, str] = {}
    for line in (directory / MANIFEST_NAME).read_text().splitlines():
        if line.strip():
            key, _, value = line.partition("=")
            fields[key] = value
    if fields.get("format") != _MANIFEST_FORMAT:
        raise ValueError(f"{directory}: not a decision-map directory")
    if int(fields.get("version", -1)) != _MANIFEST_VERSION:
        raise ValueError(f"{directory}: unsupported manifest version")
    model = GbmModel(
        dimension=int(fields["dimension"]),
        rate=float(fields["rate"]),
        dividend=float(fields["dividend"]),
        sigma=float(fields["sigma"]),
        x0=tuple(float(v) for v in fields["x0"].split(",")),
    )
    schedule = ExerciseSchedule(maturity=float(fields["maturity"]), count=int(fields["dates"]))
    payoff = MaxCallPayoff(strike=float(fields["strike"]), rate=model.rate)
    domain = Box(
        tuple(float(v) for v in fields["domain_lower"].split(",")),
        tuple(float(v) for v in fields["domain_upper"].split(",")),
    )
    maps: dict[int, ConstantMap | NetworkMap] = {}
    for i in range(1, schedule.count):
        entry = fields[f"map_{i}"]
        kind, _, arg = entry.partition(":")
        if kind == "constant":
            maps[i] = ConstantMap(CONTINUE if arg == "continue" else STOP)
        else:
            maps[i] = NetworkMap(network=load_network(directory / arg), domain=domain)
    sequence = DecisionMapSequence(
        schedule=schedule,
        domain=domain,
        maps=maps,
        metadata=json.loads(fields.get("metadata", "{}")),
    )
    return sequence, model, payoff


def decision_map_rows(maps: DecisionMapSequence, i: int, side: int = 64) -> list[tuple[float, float, float]]:
    """(x1, x2, probability-of-continue) rows on a regular grid, for plotting."""
    if maps.domain.dimension != 2:
        raise ValueError("decision-map export is defined for two assets")
    axis1 = np.linspace(maps.domain.lower[0], maps.domain.upper[0], side)
    axis2 = np.linspace(maps.domain.lower[1], maps.domain.upper[1], side)
    g1, g2 = np.meshgrid(axis1, axis2, indexing="ij")
    pts = np.column_stack([g1.reshape(-1), g2.reshape(-1)])
    probs = maps.continue_probability(i, pts)
    return [(float(a), float(b), float(p)) for (a, b), p in zip(pts, probs)]
