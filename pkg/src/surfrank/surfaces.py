"""Synthetic response-surface families, their noisy samplers, and the mis-ranking loss.

A surface set holds L real-valued functions over a common box domain together
with one homoscedastic noise level per surface.  The quantity of interest is
the index of the pointwise-minimal surface; everything downstream (designs,
classifiers, experiments) consumes the operations defined here.

Labels are 1-based integers in ``{1, ..., L}`` throughout the public API.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

Array = np.ndarray
SurfaceFn = Callable[[Array], Array]  # maps (n, d) points to (n,) values

_WEIGHT_TOL = 1e-12


class DomainError(ValueError):
    """Point outside the domain box, or surface index out of range."""


@dataclass(frozen=True)
class Box:
    """Axis-aligned box in R^d with strictly positive side lengths."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.lower) != len(self.upper):
            raise ValueError("lower and upper must have the same length")
        for lo, hi in zip(self.lower, self.upper):
            if not hi > lo:
                raise ValueError(f"box side [{lo}, {hi}] has non-positive length")

    @property
    def dimension(self) -> int:
        return len(self.lower)

    def contains(self, x: Array, tol: float = 1e-9) -> Array:
        """Boolean mask over the rows of ``x``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        lo = np.asarray(self.lower) - tol
        hi = np.asarray(self.upper) + tol
        return np.all((x >= lo) & (x <= hi), axis=1)

    def rescale_to_unit(self, x: Array) -> Array:
        """Affine map of points onto [-1, 1]^d."""
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        return 2.0 * (np.asarray(x, dtype=float) - lo) / (hi - lo) - 1.0


def _as_points(x: Array, dimension: int) -> tuple[Array, bool]:
    """Normalize ``x`` to shape (n, d); report whether the input was a single point."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        if arr.shape[0] != dimension:
            raise DomainError(f"point has {arr.shape[0]} coordinates, expected {dimension}")
        return arr[None, :], True
    if arr.ndim == 2 and arr.shape[1] == dimension:
        return arr, False
    raise DomainError(f"points must have shape (n, {dimension}), got {arr.shape}")


@dataclass(frozen=True)
class SurfaceSet:
    """L evaluable response surfaces with per-surface noise levels over a box domain.

    ``surfaces[k]`` is a vectorized function mapping (n, d) arrays to (n,)
    values; the noise attached to surface k is N(0, noise_sd[k]^2), constant
    in x.  Evaluation is pure, so instances are safe to share across workers;
    sampling takes an explicit generator.
    """

    domain: Box
    surfaces: tuple[SurfaceFn, ...]
    noise_sd: tuple[float, ...]
    name: str = "custom"

    def __post_init__(self) -> None:
        if len(self.surfaces) < 2:
            raise ValueError("a surface set needs at least two surfaces")
        if len(self.noise_sd) != len(self.surfaces):
            raise ValueError(
                f"noise_sd has length {len(self.noise_sd)}, expected {len(self.surfaces)}"
            )
        if any(s < 0 for s in self.noise_sd):
            raise ValueError("noise levels must be non-negative")

    @property
    def dimension(self) -> int:
        return self.domain.dimension

    @property
    def count(self) -> int:
        return len(self.surfaces)

    def _check_inside(self, pts: Array) -> None:
        inside = self.domain.contains(pts)
        if not inside.all():
            bad = pts[~inside][0]
            raise DomainError(f"point {bad.tolist()} outside domain box")

    def _check_index(self, ell: int) -> int:
        if not 1 <= int(ell) <= self.count:
            raise DomainError(f"surface index {ell} outside 1..{self.count}")
        return int(ell)

    def value(self, ell: int, x: Array) -> float | Array:
        """Noiseless value of surface ``ell`` (1-based) at ``x``."""
        ell = self._check_index(ell)
        pts, single = _as_points(x, self.dimension)
        self._check_inside(pts)
        vals = np.asarray(self.surfaces[ell - 1](pts), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"surface {ell} produced non-finite values")
        return float(vals[0]) if single else vals

    def values(self, x: Array) -> Array:
        """All L surface values at each point: shape (n, L)."""
        pts, _ = _as_points(x, self.dimension)
        self._check_inside(pts)
        out = np.column_stack([np.asarray(f(pts), dtype=float) for f in self.surfaces])
        if not np.all(np.isfinite(out)):
            raise ValueError("surface evaluation produced non-finite values")
        return out

    def sample(self, ell: int, x: Array, rng: np.random.Generator) -> float | Array:
        """One noisy draw of surface ``ell``: value + noise_sd[ell] * Z."""
        ell = self._check_index(ell)
        base = self.value(ell, x)
        if np.isscalar(base):
            return float(base + self.noise_sd[ell - 1] * rng.standard_normal())
        return base + self.noise_sd[ell - 1] * rng.standard_normal(len(base))

    def true_label(self, x: Array) -> int | Array:
        """Index (1-based) of the minimal surface; ties go to the smallest index."""
        pts, single = _as_points(x, self.dimension)
        labels = np.argmin(self.values(pts), axis=1) + 1
        return int(labels[0]) if single else labels

    def noisy_label(self, x: Array, rng: np.random.Generator) -> int | Array:
        """Label from one independent noisy draw per surface, argmin over draws."""
        pts, single = _as_points(x, self.dimension)
        vals = self.values(pts)
        draws = vals + np.asarray(self.noise_sd) * rng.standard_normal(vals.shape)
        labels = np.argmin(draws, axis=1) + 1
        return int(labels[0]) if single else labels


@dataclass(frozen=True)
class EvalGrid:
    """Ordered evaluation points with probability weights (the measure of the loss)."""

    points: Array
    weights: Array = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        object.__setattr__(self, "points", pts)
        if self.weights is None:
            w = np.full(len(pts), 1.0 / len(pts))
        else:
            w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w)
        if len(w) != len(pts):
            raise ValueError("weights must match the number of points")
        if np.any(w < 0):
            raise ValueError("weights must be non-negative")
        if abs(w.sum() - 1.0) > _WEIGHT_TOL:
            raise ValueError(f"weights sum to {w.sum()!r}, expected 1")

    def __len__(self) -> int:
        return len(self.points)


def _labels_on_grid(labels, grid: EvalGrid) -> Array:
    if callable(labels):
        out = np.asarray([labels(p) for p in grid.points], dtype=int)
    else:
        out = np.asarray(labels, dtype=int)
    if out.shape != (len(grid),):
        raise ValueError("labels must cover every grid point")
    return out


def ranking_loss(predicted, truth, grid: EvalGrid) -> float:
    """Weighted fraction of grid points where the predicted label disagrees.

    ``predicted`` and ``truth`` are either label arrays aligned with
    ``grid.points`` or callables point -> label.  With uniform weights this is
    exactly one minus the accuracy.
    """
    pred = _labels_on_grid(predicted, grid)
    true = _labels_on_grid(truth, grid)
    return float(np.sum(grid.weights * (pred != true)))


# ---------------------------------------------------------------------------
# Built-in surface families
# ---------------------------------------------------------------------------


def _curve_1d(pts: Array) -> Array:
    x = pts[:, 0]
    return (5.0 / 8.0) * (np.sin(10 * x) / (1 + x) + 2 * x**3 * np.cos(5 * x) + 0.841)


def make_1d_example() -> SurfaceSet:
    """Two surfaces on [0, 1]: an oscillating curve vs the constant 0.5."""
    return SurfaceSet(
        domain=Box((0.0,), (1.0,)),
        surfaces=(_curve_1d, lambda pts: np.full(len(pts), 0.5)),
        noise_sd=(0.2, 0.1),
        name="1d",
    )


_2D_SURFACES: tuple[SurfaceFn, ...] = (
    lambda p: 2 - p[:, 0] ** 2 - 0.5 * p[:, 1] ** 2,
    lambda p: 2 * (p[:, 0] - 1) ** 2 + 2 * p[:, 1] ** 2 - 2,
    lambda p: 2 * np.sin(2 * p[:, 0]) + 2,
    lambda p: 8 * (p[:, 0] - 1) ** 2 + 8 * p[:, 1] ** 2 - 3,
    lambda p: 0.5 * (p[:, 0] + 3) ** 2 + 16 * p[:, 1] ** 2 - 6,
)


def make_2d_example() -> SurfaceSet:
    """Five quadratic/sinusoidal surfaces on [-2, 2]^2, noise 0.5 on each."""
    return SurfaceSet(
        domain=Box((-2.0, -2.0), (2.0, 2.0)),
        surfaces=_2D_SURFACES,
        noise_sd=(0.5,) * 5,
        name="2d",
    )


_HARTMANN_ALPHA = np.array([1.0, 1.2, 3.0, 3.2])
_HARTMANN_A = np.array(
    [
        [10, 3, 17, 3.50, 1.7, 8],
        [0.05, 10, 17, 0.1, 8, 14],
        [3, 3.5, 1.7, 10, 17, 8],
        [17, 8, 0.05, 10, 0.1, 14],
    ]
)
_HARTMANN_P = np.array(
    [
        [0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886],
        [0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991],
        [0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650],
        [0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381],
    ]
)


def hartmann6(u: Array) -> Array:
    """Hartmann 6-D test function on its native [0, 1]^6, vectorized over rows."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    # (n, 4): squared distances weighted by A, per exponential term
    expo = np.einsum("kj,nkj->nk", _HARTMANN_A, (u[:, None, :] - _HARTMANN_P) ** 2)
    return -np.exp(-expo) @ _HARTMANN_ALPHA


def _embedded_hartmann(pts: Array) -> Array:
    # first six coordinates mapped affinely from [-1, 1] onto [0, 1]
    return hartmann6((pts[:, :6] + 1.0) / 2.0)


def _styblinski_tang(pts: Array) -> Array:
    d = pts.shape[1]
    return np.sum(625 * pts**4 - 400 * pts**2 + 25 * pts, axis=1) / (2 * d)


def _trid(pts: Array, exponent: int) -> Array:
    power = np.sum((pts - 1.0) ** exponent, axis=1)
    cross = np.sum(pts[:, 1:] * pts[:, :-1], axis=1)
    return 0.5 * (power - cross) - 5.0


def make_10d_example(
    noise_sd: Sequence[float] | None = None, *, trid_exponent: int = 10
) -> SurfaceSet:
    """Three surfaces on [-1, 1]^10: embedded Hartmann 6-D, rescaled
    Styblinski-Tang, and a Trid variant.

    The Trid term uses exponent 10 by default, matching the form this family
    was defined with; pass ``trid_exponent=2`` for the classical quadratic
    Trid function.
    """
    if noise_sd is None:
        noise_sd = (0.0, 0.0, 0.0)
    if len(noise_sd) != 3:
        raise ValueError(f"noise_sd must have length 3, got {len(noise_sd)}")
    exponent = int(trid_exponent)
    return SurfaceSet(
        domain=Box((-1.0,) * 10, (1.0,) * 10),
        surfaces=(
            _embedded_hartmann,
            _styblinski_tang,
            lambda p, _e=exponent: _trid(p, _e),
        ),
        noise_sd=tuple(float(s) for s in noise_sd),
        name="10d",
    )


BUILTIN_EXAMPLES = {
    "1d": make_1d_example,
    "2d": make_2d_example,
    "10d": make_10d_example,
}
