"""Phase averaging by recursion over the slabs of a stack.

``f_n(eta)`` is the average of the target over the phases of the first
``n - 1`` gaps, seen as a function of the rapidity ``eta`` of the remaining
stack. One more slab is averaged out by

    f_{n+1}(eta) = mean over psi of f_n(compose_eta(eta, 2 theta, psi)),

and the stack average is ``f_N(2 theta)``. Functions live on a uniform grid
in ``eta`` (whose needed extent grows additively by ``2 theta`` per slab,
whereas ``cosh(eta)`` would grow exponentially). Positive targets are stored
as logarithms so that values such as ``<tau_N>`` never underflow.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import CapacityError, ConvergenceError, SlabDomainError
from .interp import hermite_eval, locate, pchip_slopes
from .model import SlabParams, compose_eta, log_cosh, slab_params

__all__ = [
    "Tag",
    "Representation",
    "TargetFunction",
    "TAU",
    "LOG_TAU",
    "IDENTITY_C",
    "SECOND_MOMENT",
    "INV_TAU",
    "COSH_SQ",
    "TARGETS",
    "custom_target",
    "GridFunction",
    "RecurrenceConfig",
    "SeriesResult",
    "build_initial_grid",
    "propagate",
    "average_series",
    "average_over_stack",
]


class Tag(enum.Enum):
    TAU = "tau"
    LOG_TAU = "logtau"
    IDENTITY_C = "cosh"
    SECOND_MOMENT = "second_moment"
    CUSTOM = "custom"


class Representation(enum.Enum):
    LINEAR = "linear"
    LOG_OF_POSITIVE = "log"


@dataclass(frozen=True)
class TargetFunction:
    """A function of ``C' = cosh(eta)`` to be averaged over the gap phases.

    `on_eta` maps rapidities to ``f`` (or to ``log f`` when `positive`).
    `decreasing` marks targets whose every ``f_n`` must be non-increasing.
    """

    tag: Tag
    name: str
    on_eta: Callable[[np.ndarray], np.ndarray]
    positive: bool
    decreasing: bool = False

    @property
    def representation(self) -> Representation:
        return Representation.LOG_OF_POSITIVE if self.positive else Representation.LINEAR

    def __call__(self, c_prime):
        c = np.asarray(c_prime, dtype=float)
        if np.any(c < 1.0):
            raise SlabDomainError("target functions are defined for C' >= 1")
        v = self.on_eta(np.arccosh(c))
        return np.exp(v) if self.positive else v


def _log_tau(eta):
    return -2.0 * log_cosh(0.5 * np.asarray(eta, dtype=float))


def _log_second_moment(eta):
    lc = log_cosh(eta)
    return 2.0 * lc + np.log1p(-np.exp(-2.0 * lc) / 3.0)


TAU = TargetFunction(Tag.TAU, "tau", _log_tau, positive=True, decreasing=True)
LOG_TAU = TargetFunction(Tag.LOG_TAU, "logtau", _log_tau, positive=False)
IDENTITY_C = TargetFunction(Tag.IDENTITY_C, "cosh", log_cosh, positive=True)
SECOND_MOMENT = TargetFunction(Tag.SECOND_MOMENT, "second_moment", _log_second_moment, positive=True)
# 1/tau = (C' + 1)/2 = cosh^2(eta/2)
INV_TAU = TargetFunction(Tag.CUSTOM, "invtau", lambda e: -_log_tau(e), positive=True)
COSH_SQ = TargetFunction(Tag.CUSTOM, "cosh2", lambda e: 2.0 * log_cosh(e), positive=True)

TARGETS = {t.name: t for t in (TAU, LOG_TAU, IDENTITY_C, SECOND_MOMENT, INV_TAU, COSH_SQ)}


def custom_target(name: str, func: Callable, positive: bool = False) -> TargetFunction:
    """Wrap an arbitrary ``f(C')``; positive targets are stored as ``log f``."""
    if positive:
        return TargetFunction(Tag.CUSTOM, name, lambda e: np.log(func(np.cosh(e))), True)
    return TargetFunction(Tag.CUSTOM, name, lambda e: func(np.cosh(e)), False)


@dataclass(frozen=True)
class RecurrenceConfig:
    delta_eta: float = 0.005
    quad_nodes: int = 128
    interpolation: str = "monotone_cubic"
    convergence_check: bool = True
    tolerance: float = 1e-8
    max_points: int = 10**8
    # query plans larger than this many entries are recomputed per level
    plan_cache_entries: int = 30_000_000
    estimate_error: bool = True

    def __post_init__(self):
        if not self.delta_eta > 0:
            raise SlabDomainError("delta_eta must be positive")
        if self.quad_nodes < 8 or self.quad_nodes % 2:
            raise SlabDomainError("quad_nodes must be even and at least 8")
        if self.interpolation not in ("monotone_cubic", "linear"):
            raise SlabDomainError(f"unknown interpolation {self.interpolation!r}")
        if not self.tolerance > 0:
            raise SlabDomainError("tolerance must be positive")

    def coarsened(self) -> "RecurrenceConfig":
        nodes = max(8, (self.quad_nodes // 4) * 2)
        return replace(self, delta_eta=2.0 * self.delta_eta, quad_nodes=nodes,
                       convergence_check=False, estimate_error=False)


@dataclass
class GridFunction:
    """Samples of ``f_n`` at ``eta_j = j * delta_eta``, ``j = 0 .. len - 1``.

    `source` is set only for ``f_1``, which is the target itself; it is then
    evaluated exactly instead of interpolated.
    """

    delta_eta: float
    values: np.ndarray
    representation: Representation
    level: int
    source: Optional[TargetFunction] = None

    @property
    def eta_max(self) -> float:
        return (self.values.size - 1) * self.delta_eta

    @property
    def eta(self) -> np.ndarray:
        return np.arange(self.values.size) * self.delta_eta

    def evaluate(self, eta, interpolation: str = "monotone_cubic"):
        """Interpolated stored value (``log f`` for the log representation)."""
        try:
            idx, t = locate(eta, self.delta_eta, self.values.size)
        except ValueError as exc:
            raise SlabDomainError(str(exc)) from None
        if self.source is not None:
            return np.asarray(self.source.on_eta(np.asarray(eta, dtype=float)), dtype=float)
        if interpolation == "linear":
            y = self.values
            return y[idx] + t * (y[idx + 1] - y[idx])
        m = pchip_slopes(self.values, self.delta_eta)
        return hermite_eval(self.values, m, self.delta_eta, idx, t)

    def __call__(self, eta):
        v = self.evaluate(eta)
        return np.exp(v) if self.representation is Representation.LOG_OF_POSITIVE else v


def _cells_per_step(params: SlabParams, h: float) -> int:
    return int(math.ceil(params.two_theta / h - 1e-9))


def build_initial_grid(target: TargetFunction, N: int, params: SlabParams,
                       config: RecurrenceConfig = RecurrenceConfig()) -> GridFunction:
    """Sample ``f_1`` far enough out that ``f_N`` can still be read at ``2 theta``."""
    if N < 2:
        raise SlabDomainError("a recurrence grid is only needed for N >= 2")
    h = config.delta_eta
    n_pts = max((N + 1) * _cells_per_step(params, h) + 4, 8)
    if n_pts > config.max_points:
        raise CapacityError(
            f"grid of {n_pts} points exceeds the bound of {config.max_points}; "
            "increase delta_eta or reduce N"
        )
    eta = np.arange(n_pts) * h
    values = np.asarray(target.on_eta(eta), dtype=float)
    return GridFunction(h, values, target.representation, level=1, source=target)


class _QueryPlan:
    """Cell indices and fractions of ``compose_eta(eta_j, 2 theta, psi_k)``.

    The query points do not depend on the level, so they are computed once
    for the largest output grid and sliced for later levels. Only nodes
    ``psi_k`` with ``0 <= k <= M/2`` are used; the others mirror them.
    """

    def __init__(self, params: SlabParams, h: float, quad_nodes: int,
                 n_rows: int, cache_limit: int):
        self.two_theta = params.two_theta
        self.h = h
        k = np.arange(quad_nodes // 2 + 1)
        self.psi = 2.0 * np.pi * k / quad_nodes
        w = np.full(k.size, 2.0 / quad_nodes)
        w[0] = w[-1] = 1.0 / quad_nodes
        self.weights = w
        self.n_rows = n_rows
        self._cache = None
        if n_rows * k.size <= cache_limit:
            self._cache = self._compute(0, n_rows)

    def _compute(self, start, stop):
        eta = np.arange(start, stop)[:, None] * self.h
        q = compose_eta(eta, self.two_theta, self.psi[None, :])
        u = np.asarray(q) / self.h
        idx = np.floor(u).astype(np.int32)
        return idx, u - idx

    def rows(self, start, stop, n_in):
        if self._cache is not None:
            idx, t = self._cache[0][start:stop], self._cache[1][start:stop]
        else:
            idx, t = self._compute(start, stop)
        top = n_in - 1
        if idx.size and idx.max() >= top:
            over = idx >= top
            if np.any((idx + t)[over] > top + 1e-9):
                raise SlabDomainError("interpolation requested outside the grid")
            idx = np.where(over, top - 1, idx)
            t = np.where(over, 1.0, t)
        return idx, t


_ROW_CHUNK = 4096


def _average_rows(f_n: GridFunction, plan: _QueryPlan, n_out: int, interpolation: str):
    y = f_n.values
    h = f_n.delta_eta
    exact = f_n.source
    m = pchip_slopes(y, h) if interpolation == "monotone_cubic" and exact is None else None
    w = plan.weights
    out = np.empty(n_out)
    log_rep = f_n.representation is Representation.LOG_OF_POSITIVE
    for start in range(0, n_out, _ROW_CHUNK):
        stop = min(start + _ROW_CHUNK, n_out)
        idx, t = plan.rows(start, stop, y.size)
        if exact is not None:
            v = exact.on_eta((idx + t) * h)
        elif m is None:
            v = y[idx] + t * (y[idx + 1] - y[idx])
        else:
            v = hermite_eval(y, m, h, idx, t)
        if log_rep:
            top = v.max(axis=1)
            out[start:stop] = top + np.log((np.exp(v - top[:, None]) * w).sum(axis=1))
        else:
            out[start:stop] = (v * w).sum(axis=1)
    return out


def _point_average(f_n: GridFunction, eta: float, two_theta: float, nodes: int,
                   interpolation: str) -> float:
    psi = 2.0 * np.pi * np.arange(nodes) / nodes
    v = f_n.evaluate(compose_eta(eta, two_theta, psi), interpolation)
    if f_n.representation is Representation.LOG_OF_POSITIVE:
        top = v.max()
        return float(top + np.log(np.mean(np.exp(v - top))))
    return float(np.mean(v))


def _checked_average(f_n: GridFunction, eta: float, two_theta: float,
                     config: RecurrenceConfig) -> float:
    """`_point_average` with M nodes, verified against 2M nodes if configured."""
    coarse = _point_average(f_n, eta, two_theta, config.quad_nodes, config.interpolation)
    if not config.convergence_check:
        return coarse
    fine = _point_average(f_n, eta, two_theta, 2 * config.quad_nodes, config.interpolation)
    if f_n.representation is Representation.LOG_OF_POSITIVE:
        err = abs(fine - coarse)
    else:
        err = abs(fine - coarse) / max(abs(fine), 1.0)
    if err > config.tolerance:
        raise ConvergenceError(
            f"doubling the quadrature nodes changed level {f_n.level + 1} "
            f"by {err:.3g} (> {config.tolerance:g}); increase quad_nodes"
        )
    return coarse


def propagate(f_n: GridFunction, params: SlabParams,
              config: RecurrenceConfig = RecurrenceConfig(),
              target: Optional[TargetFunction] = None,
              _plan: Optional[_QueryPlan] = None) -> GridFunction:
    """Average out one more gap phase: ``f_n`` -> ``f_{n+1}``.

    The output grid is shorter by ``2 theta``. Each output point is the
    equally weighted periodic trapezoid sum over `config.quad_nodes` phases,
    accumulated by log-sum-exp for the log representation. Points are summed
    in a fixed order, so results do not depend on how rows are chunked.
    """
    h = f_n.delta_eta
    if not math.isclose(h, config.delta_eta, rel_tol=0, abs_tol=1e-15):
        raise SlabDomainError("grid spacing of f_n differs from config.delta_eta")
    n_out = f_n.values.size - _cells_per_step(params, h)
    if n_out < 2:
        raise SlabDomainError("f_n does not extend one composition step beyond 2 theta")
    plan = _plan
    if plan is None or plan.n_rows < n_out:
        plan = _QueryPlan(params, h, config.quad_nodes, n_out, config.plan_cache_entries)
    out = _average_rows(f_n, plan, n_out, config.interpolation)
    if not np.all(np.isfinite(out)):
        raise ConvergenceError(f"non-finite values after propagation to level {f_n.level + 1}")
    if target is not None and target.decreasing:
        if np.any(np.diff(out) > 1e-12 * np.maximum(1.0, np.abs(out[1:]))):
            raise ConvergenceError(
                f"level {f_n.level + 1} lost monotonicity; refine delta_eta"
            )
    if config.convergence_check:
        eta0 = min(params.two_theta, (n_out - 1) * h)
        _checked_average(f_n, eta0, params.two_theta, config)
    return GridFunction(h, out, f_n.representation, f_n.level + 1)


@dataclass
class SeriesResult:
    """``<f>`` for stacks of ``n = 1 .. N`` slabs.

    ``values[n-1]`` is ``log <f>`` when `log_values`, else ``<f>`` itself.
    """

    tau1: float
    target: str
    log_values: bool
    values: np.ndarray
    error_estimate: np.ndarray
    config: RecurrenceConfig = field(default_factory=RecurrenceConfig)

    @property
    def n(self) -> np.ndarray:
        return np.arange(1, self.values.size + 1)

    def at(self, N: int) -> float:
        return float(self.values[N - 1])


def _series(params: SlabParams, N: int, target: TargetFunction,
            config: RecurrenceConfig) -> np.ndarray:
    two_theta = params.two_theta
    out = np.empty(N)
    out[0] = float(target.on_eta(np.array(two_theta)))
    if N == 1:
        return out
    f = build_initial_grid(target, N, params, config)
    n_rows = f.values.size - _cells_per_step(params, config.delta_eta)
    plan = _QueryPlan(params, config.delta_eta, config.quad_nodes, n_rows,
                      config.plan_cache_entries)
    # the read-off below already performs the node-doubling check
    step = replace(config, convergence_check=False)
    for n in range(2, N + 1):
        # <f_n>(2 theta) straight from the quadrature over f_{n-1}, which is
        # one interpolation layer fewer than reading the propagated grid
        out[n - 1] = _checked_average(f, two_theta, two_theta, config)
        if n < N:
            f = propagate(f, params, step, target, plan)
    return out


def average_series(tau1: float, N: int, target: TargetFunction = TAU,
                   config: RecurrenceConfig = RecurrenceConfig()) -> SeriesResult:
    """Run the recurrence once and read off ``<f>`` for every stack size up to `N`.

    The error estimate is the difference to a run with doubled grid spacing
    and halved quadrature nodes.
    """
    params = slab_params(tau1)
    N = int(N)
    if N < 1:
        raise SlabDomainError(f"N must be >= 1, got {N}")
    values = _series(params, N, target, config)
    if config.estimate_error and N > 1:
        coarse = _series(params, N, target, config.coarsened())
        err = np.abs(values - coarse)
    else:
        err = np.zeros(N)
    return SeriesResult(params.tau1, target.name, target.positive, values, err, config)


def average_over_stack(tau1: float, N: int, target: TargetFunction = TAU,
                       config: RecurrenceConfig = RecurrenceConfig()):
    """``<f(cosh 2 theta_tot)>`` over the ``N - 1`` gap phases.

    Returns ``(value, error_estimate)``; for positive targets `value` is the
    natural log of the average.
    """
    res = average_series(tau1, N, target, config)
    return res.at(N), float(res.error_estimate[N - 1])
