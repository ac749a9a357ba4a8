r"""SMO solver for box-constrained QPs with a single sum constraint.

Every dual handled by occkit has the form

.. math:: \min_c \tfrac12 c^\top G c + q^\top c
          \quad\text{s.t.}\quad l \le c \le u,\; \textstyle\sum_i c_i = s

with per-variable bounds ``l`` and ``u``. The solver is two-variable SMO
with maximal-violating-pair selection: the pair ``(i, j)`` moves mass from
``j`` (largest gradient among variables that can decrease) to ``i``
(smallest gradient among variables that can increase), which keeps the sum
constraint exact at every step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numba
import numpy as np

from .exceptions import DimensionMismatch, InfeasibleQP
from .kernels import GramMatrix

CURVATURE_EPS = 1e-12


@dataclass(frozen=True)
class SolverConfig:
    tolerance: float = 1e-6
    max_iterations: Optional[int] = None
    shrinking: bool = True
    debug: bool = False

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be > 0")
        if self.max_iterations is not None and self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")

    def iteration_cap(self, n: int) -> int:
        if self.max_iterations is not None:
            return int(self.max_iterations)
        return int(min(10 * n * 1000, 10_000_000))

    def to_dict(self):
        return {
            "tolerance": self.tolerance,
            "max_iterations": self.max_iterations,
            "shrinking": self.shrinking,
            "debug": self.debug,
        }


@dataclass(frozen=True, eq=False)
class BoxQP:
    gram: np.ndarray
    linear: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    sum_target: float = 1.0

    def __post_init__(self):
        G = self.gram.values if isinstance(self.gram, GramMatrix) else self.gram
        G = np.ascontiguousarray(G, dtype=np.float64)
        n = G.shape[0]
        if G.ndim != 2 or G.shape != (n, n) or n == 0:
            raise DimensionMismatch(f"gram must be square and nonempty, got {G.shape}")
        q = np.broadcast_to(np.asarray(self.linear, dtype=np.float64), (n,)).copy()
        lo = np.broadcast_to(np.asarray(self.lower, dtype=np.float64), (n,)).copy()
        hi = np.broadcast_to(np.asarray(self.upper, dtype=np.float64), (n,)).copy()
        s = float(self.sum_target)
        if np.any(lo > hi):
            k = int(np.argmax(lo > hi))
            raise InfeasibleQP(f"lower bound {lo[k]} exceeds upper bound {hi[k]} at index {k}")
        slack = 1e-12 * max(1.0, abs(s))
        if lo.sum() > s + slack or hi.sum() < s - slack:
            raise InfeasibleQP(
                f"sum target {s} outside [{lo.sum()}, {hi.sum()}] allowed by the box"
            )
        object.__setattr__(self, "gram", G)
        object.__setattr__(self, "linear", q)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "sum_target", s)

    @property
    def n(self) -> int:
        return self.gram.shape[0]

    def objective(self, c) -> float:
        c = np.asarray(c, dtype=np.float64)
        return float(0.5 * c @ (self.gram @ c) + self.linear @ c)

    def gradient(self, c) -> np.ndarray:
        return self.gram @ np.asarray(c, dtype=np.float64) + self.linear

    def initial_point(self) -> np.ndarray:
        """Feasible start: everything at its lower bound, then fill in index order."""
        c = self.lower.copy()
        remaining = self.sum_target - c.sum()
        for i in range(self.n):
            if remaining <= 0:
                break
            room = self.upper[i] - c[i]
            if remaining >= room:
                c[i] = self.upper[i]
                remaining -= room
            else:
                c[i] += remaining
                remaining = 0.0
        return c

    def is_feasible(self, c, tol=1e-10) -> bool:
        c = np.asarray(c, dtype=np.float64)
        return bool(
            np.all(c >= self.lower - tol)
            and np.all(c <= self.upper + tol)
            and abs(c.sum() - self.sum_target) <= tol
        )


@dataclass
class QPSolution:
    coeffs: np.ndarray
    dual_objective: float
    kkt_residual: float
    iterations: int
    converged: bool
    gradient: np.ndarray
    multiplier: float
    max_objective_rise: float = 0.0
    gradient_drift: float = 0.0
    objective_trace: Optional[np.ndarray] = field(default=None, repr=False)


@numba.njit(cache=True)
def _full_gradient(G, q, c, grad):
    n = c.shape[0]
    for k in range(n):
        grad[k] = q[k]
    for m in range(n):
        if c[m] != 0.0:
            for k in range(n):
                grad[k] += G[m, k] * c[m]


@numba.njit(cache=True)
def _smo_loop(G, q, lo, hi, c, grad, tol, max_iter, debug, trace, shrinking):
    n = c.shape[0]
    it = 0
    converged = False
    max_rise = 0.0
    drift = 0.0
    obj = 0.0
    active = np.arange(n)
    n_active = n
    shrink_every = min(n, 1000)
    countdown = shrink_every
    unshrunk = False
    if debug:
        for k in range(n):
            obj += 0.5 * c[k] * (grad[k] + q[k])
        trace[0] = obj
    while True:
        i = -1
        j = -1
        gmin = np.inf
        gmax = -np.inf
        for a in range(n_active):
            k = active[a]
            g = grad[k]
            if c[k] < hi[k] and g < gmin:
                gmin = g
                i = k
            if c[k] > lo[k] and g > gmax:
                gmax = g
                j = k
        if i < 0 or j < 0 or gmax - gmin <= tol:
            if n_active < n:
                # shrunk variables have stale gradients: rebuild and recheck all
                _full_gradient(G, q, c, grad)
                n_active = n
                for k in range(n):
                    active[k] = k
                countdown = shrink_every
                continue
            converged = True
            break
        if it >= max_iter:
            break
        if shrinking:
            countdown -= 1
            if countdown == 0:
                countdown = shrink_every
                if not unshrunk and gmax - gmin <= 10.0 * tol and n_active < n:
                    unshrunk = True
                    _full_gradient(G, q, c, grad)
                    n_active = n
                    for k in range(n):
                        active[k] = k
                else:
                    # drop bound variables that cannot join a violating pair
                    m = 0
                    for a in range(n_active):
                        k = active[a]
                        at_lo = c[k] <= lo[k]
                        at_hi = c[k] >= hi[k]
                        if (at_lo and grad[k] > gmax) or (at_hi and grad[k] < gmin):
                            continue
                        active[m] = k
                        m += 1
                    n_active = m
        room_i = hi[i] - c[i]
        room_j = c[j] - lo[j]
        tmax = min(room_i, room_j)
        curv = G[i, i] + G[j, j] - 2.0 * G[i, j]
        if curv > CURVATURE_EPS:
            t = (gmax - gmin) / curv
            if t > tmax:
                t = tmax
        else:
            t = tmax
        if t == room_i:
            c[i] = hi[i]
        else:
            c[i] += t
        if t == room_j:
            c[j] = lo[j]
        else:
            c[j] -= t
        Gi = G[i]
        Gj = G[j]
        for a in range(n_active):
            k = active[a]
            grad[k] += t * (Gi[k] - Gj[k])
        it += 1
        if debug:
            new_obj = 0.0
            for k in range(n):
                new_obj += 0.5 * c[k] * (grad[k] + q[k])
            rise = new_obj - obj
            if rise > max_rise:
                max_rise = rise
            obj = new_obj
            if it < trace.shape[0]:
                trace[it] = obj
            if it % 1000 == 0:
                for a in range(n_active):
                    k = active[a]
                    exact = q[k]
                    for m2 in range(n):
                        exact += G[k, m2] * c[m2]
                    d = abs(exact - grad[k])
                    if d > drift:
                        drift = d
    return it, converged, max_rise, drift


def _bound_sets(qp: BoxQP, c):
    return c < qp.upper, c > qp.lower


def kkt_residual(qp: BoxQP, coeffs) -> float:
    """Largest first-order violation at a feasible point.

    Returns ``max(g_j : c_j > l_j) - min(g_i : c_i < u_i)`` clipped at zero,
    with ``g = G c + q``. It is zero exactly when some multiplier ``rho``
    satisfies ``g_i >= rho`` at lower bounds, ``g_i <= rho`` at upper bounds
    and ``g_i == rho`` for free variables.
    """
    c = np.asarray(coeffs, dtype=np.float64)
    g = qp.gradient(c)
    can_up, can_down = _bound_sets(qp, c)
    if not can_up.any() or not can_down.any():
        return 0.0
    return float(max(0.0, g[can_down].max() - g[can_up].min()))


def equality_multiplier(qp: BoxQP, c, g=None) -> float:
    """Multiplier of the sum constraint recovered from a (near) optimum.

    Mean gradient over free variables; with no free variable, the midpoint of
    the admissible interval ``[max g over upper-bound vars, min g over
    lower-bound vars]`` (or its finite end if one side is empty).
    """
    c = np.asarray(c, dtype=np.float64)
    if g is None:
        g = qp.gradient(c)
    can_up, can_down = _bound_sets(qp, c)
    free = can_up & can_down
    if free.any():
        return float(g[free].mean())
    at_upper = ~can_up & can_down
    at_lower = can_up & ~can_down
    hi = g[at_lower].min() if at_lower.any() else None
    lo = g[at_upper].max() if at_upper.any() else None
    if hi is None and lo is None:
        return float(g.mean())
    if hi is None:
        return float(lo)
    if lo is None:
        return float(hi)
    return float(0.5 * (lo + hi))


def solve(qp: BoxQP, cfg: SolverConfig = SolverConfig(), x0=None) -> QPSolution:
    """Minimize ``qp`` with SMO.

    Parameters
    ----------
    qp : BoxQP
    cfg : SolverConfig
        ``cfg.debug`` records the objective after every pair update and
        checks the maintained gradient against ``G c + q`` every 1000 steps.
    x0 : array, optional
        Feasible starting point; defaults to :meth:`BoxQP.initial_point`.

    Returns
    -------
    QPSolution
        ``converged`` is False when the iteration cap was reached; the
        coefficients are then feasible but not optimal.
    """
    if x0 is None:
        c = qp.initial_point()
    else:
        c = np.array(x0, dtype=np.float64)
        if c.shape != (qp.n,) or not qp.is_feasible(c):
            raise InfeasibleQP("x0 is not a feasible point of the QP")
        c = np.clip(c, qp.lower, qp.upper)
    grad = qp.gradient(c)
    cap = cfg.iteration_cap(qp.n)
    trace = np.empty(min(cap, 1_000_000) + 1 if cfg.debug else 1)
    it, converged, rise, drift = _smo_loop(
        qp.gram, qp.linear, qp.lower, qp.upper, c, grad,
        float(cfg.tolerance), cap, bool(cfg.debug), trace,
        bool(cfg.shrinking and not cfg.debug),
    )
    return QPSolution(
        coeffs=c,
        dual_objective=float(0.5 * c @ (grad + qp.linear)),
        kkt_residual=kkt_residual(qp, c),
        iterations=int(it),
        converged=bool(converged),
        gradient=grad,
        multiplier=equality_multiplier(qp, c, grad),
        max_objective_rise=float(rise),
        gradient_drift=float(drift),
        objective_trace=trace[: min(it, trace.size - 1) + 1] if cfg.debug else None,
    )
