"""Two-asset binomial-lattice oracle for Bermudan max-call prices.

A product tree: per-asset Cox-Ross-Rubinstein up/down factors on log-prices
with risk-neutral branch probabilities, four branches per step since the two
drivers are independent.  Values are carried pre-discounted (the payoff
already contains e^{-rt}), so backward induction is a plain expectation, with
an exercise comparison only at the Bermudan dates.

CRR trees oscillate between odd and even layer counts around the strike, so
the quoted price averages two trees with n and n+1 steps per exercise
interval, which damps the oscillation and makes the convergence table shrink
monotonically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bermudan import ExerciseSchedule, GbmModel, MaxCallPayoff


class LatticeError(ValueError):
    """Invalid lattice parameters (bad dimension or degenerate probabilities)."""


@dataclass(frozen=True)
class LatticeParams:
    model: GbmModel
    schedule: ExerciseSchedule
    payoff: MaxCallPayoff
    steps_per_interval: int

    def __post_init__(self) -> None:
        if self.model.dimension != 2:
            raise LatticeError("the lattice oracle covers exactly two assets")
        if self.steps_per_interval < 1:
            raise LatticeError("steps_per_interval must be >= 1")
        # probabilities only degrade as the step grows, so checking the coarse
        # sub-tree covers the n+1 tree as well
        _branch_probability(self.model, self.schedule, self.steps_per_interval)


def _branch_probability(model: GbmModel, schedule: ExerciseSchedule, n: int) -> float:
    dt = schedule.maturity / (schedule.count * n)
    u = np.exp(model.sigma * np.sqrt(dt))
    d = 1.0 / u
    p = (np.exp((model.rate - model.dividend) * dt) - d) / (u - d)
    if not 0.0 < p < 1.0:
        raise LatticeError(
            f"branch probability {p:.4f} outside (0,1); increase steps_per_interval"
        )
    return float(p)


def _tree_price(params: LatticeParams, n: int, european_only: bool) -> float:
    model, schedule, payoff = params.model, params.schedule, params.payoff
    steps = schedule.count * n
    dt = schedule.maturity / steps
    u = np.exp(model.sigma * np.sqrt(dt))
    p = _branch_probability(model, schedule, n)
    q = 1.0 - p
    x0 = np.asarray(model.x0)

    def layer_prices(k: int) -> tuple[np.ndarray, np.ndarray]:
        moves = u ** (2 * np.arange(k + 1) - k)
        return x0[0] * moves, x0[1] * moves

    s1, s2 = layer_prices(steps)
    values = payoff(schedule.maturity, _pair_grid(s1, s2))
    for k in range(steps - 1, -1, -1):
        values = (
            p * p * values[1:, 1:]
            + p * q * values[1:, :-1]
            + q * p * values[:-1, 1:]
            + q * q * values[:-1, :-1]
        )
        if not european_only and k > 0 and k % n == 0:
            s1, s2 = layer_prices(k)
            exercise = payoff(k * dt, _pair_grid(s1, s2))
            np.maximum(values, exercise, out=values)
    return float(max(values[0, 0], payoff(0.0, x0)))


def _pair_grid(s1: np.ndarray, s2: np.ndarray) -> np.ndarray:
    grid = np.empty((len(s1), len(s2), 2))
    grid[:, :, 0] = s1[:, None]
    grid[:, :, 1] = s2[None, :]
    return grid


def lattice_price(params: LatticeParams, european_only: bool = False) -> float:
    """Time-0 value; ``european_only`` restricts exercise to maturity."""
    n = params.steps_per_interval
    return 0.5 * (
        _tree_price(params, n, european_only) + _tree_price(params, n + 1, european_only)
    )


def convergence_table(
    params: LatticeParams, n_list, european_only: bool = False
) -> list[tuple[int, float]]:
    """Prices for increasing steps-per-interval counts."""
    table = []
    for n in sorted(set(int(v) for v in n_list)):
        refined = LatticeParams(
            model=params.model,
            schedule=params.schedule,
            payoff=params.payoff,
            steps_per_interval=n,
        )
        table.append((n, lattice_price(refined, european_only=european_only)))
    return table
