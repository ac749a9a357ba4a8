"""OCSVM, SVDD and pinball-loss OCSVM trainers and scoring.

All three models reduce to :class:`occkit.solver.BoxQP` instances over the
training Gram matrix ``G``:

============  ==========================  ===============  =========
model         objective                    box              sum
============  ==========================  ===============  =========
ocsvm         1/2 a'Ga                     [0, c]           1
svdd          1/2 a'Ga - 1/2 sum a_i G_ii  [0, C]           1
pb_ocsvm      1/2 l'Gl                     [-tau c, c]      1
============  ==========================  ===============  =========

with ``c = 1 / (nu N)``. The pinball dual follows from the primal
``min 1/2|w|^2 - rho + c sum xi_i`` subject to ``w.phi(x_i) >= rho - xi_i``
and ``w.phi(x_i) <= rho + xi_i / tau``: stationarity in ``rho`` gives
``sum(alpha - beta) = 1`` and eliminating ``beta`` from
``c - alpha_i - beta_i / tau = 0`` leaves ``-tau c <= lambda_i <= c``.
At ``tau = 0`` the box collapses to ``[0, c]`` and the problem is exactly
the OCSVM dual. ``dual_form="paper"`` instead poses the sum-zero variant
(``sum lambda = 0`` with a ``-sum lambda`` linear term), which has
``lambda = 0`` as its optimum and is kept only for comparison.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, OutlierMixin
from sklearn.utils.validation import check_is_fitted

from .core import Dataset, as_samples
from .exceptions import (
    DegenerateNorm,
    DimensionMismatch,
    DomainError,
    InfeasibleParams,
    ModelDegenerate,
    SchemaVersionError,
    SolverDidNotConverge,
)
from .kernels import KernelSpec, cross_kernel, gram
from .solver import BoxQP, QPSolution, SolverConfig, solve

SCHEMA_NAME = "occkit.model"
SCHEMA_VERSION = (1, 1)
SV_THRESHOLD = 1e-12
MODEL_KINDS = ("ocsvm", "svdd", "pb_ocsvm")
DUAL_FORMS = ("rederived", "paper")


def pinball_loss(u, tau):
    """``u`` for ``u >= 0`` and ``-tau * u`` otherwise; vectorized."""
    if not 0.0 <= tau <= 1.0:
        raise DomainError(f"tau must lie in [0, 1], got {tau}")
    u = np.asarray(u, dtype=np.float64)
    out = np.where(u >= 0, u, -tau * u)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------


def _check_nu(nu):
    if not 0.0 < nu <= 1.0:
        raise DomainError(f"nu must lie in (0, 1], got {nu}")


@dataclass(frozen=True)
class TrainParamsOCSVM:
    nu: float = 0.5
    kernel: KernelSpec = field(default_factory=KernelSpec)
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        _check_nu(self.nu)


@dataclass(frozen=True)
class TrainParamsPB:
    nu: float = 0.5
    tau: float = 0.5
    kernel: KernelSpec = field(default_factory=KernelSpec)
    solver: SolverConfig = field(default_factory=SolverConfig)
    dual_form: str = "rederived"

    def __post_init__(self):
        _check_nu(self.nu)
        if not 0.0 <= self.tau <= 1.0:
            raise DomainError(f"tau must lie in [0, 1], got {self.tau}")
        if self.dual_form not in DUAL_FORMS:
            raise DomainError(f"dual_form must be one of {DUAL_FORMS}")


@dataclass(frozen=True)
class TrainParamsSVDD:
    C: float = 1.0
    kernel: KernelSpec = field(default_factory=KernelSpec)
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if not self.C > 0:
            raise DomainError(f"C must be > 0, got {self.C}")


# ---------------------------------------------------------------------------
# trained model
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class TrainedModel:
    kind: str
    support_vectors: np.ndarray
    coeffs: np.ndarray
    rho: float
    kernel: KernelSpec
    params: dict
    diagnostics: dict
    n_features: int
    # SVDD only: squared norm of the sphere centre, sum_ij a_i a_j K_ij
    center_sq: Optional[float] = None
    # row indices of the support vectors in the training matrix
    support_indices: Optional[np.ndarray] = None

    @property
    def n_support(self) -> int:
        return self.coeffs.shape[0]

    def dense_coeffs(self) -> np.ndarray:
        """Coefficients over all training rows, zeros for pruned ones."""
        if self.support_indices is None:
            raise ModelDegenerate("model carries no training indices")
        out = np.zeros(int(self.diagnostics["n_train"]))
        out[self.support_indices] = self.coeffs
        return out

    @property
    def w_norm(self) -> float:
        K = gram(self.kernel, self.support_vectors).values
        return math.sqrt(max(float(self.coeffs @ K @ self.coeffs), 0.0))


def _training_matrix(data) -> np.ndarray:
    if isinstance(data, Dataset):
        return data.targets().X if data.has_labels else data.X
    return as_samples(data)


def _required_nu_n(nu, n):
    if nu * n < 1.0 - 1e-12:
        raise InfeasibleParams(
            f"nu * N = {nu * n:.6g} < 1: the box [.., 1/(nu N)] cannot sum to 1"
        )


def _finish(kind, X, kernel, qp: BoxQP, sol: QPSolution, rho, params, center_sq=None,
            objective_offset=0.0):
    coeffs = sol.coeffs
    keep = np.abs(coeffs) > SV_THRESHOLD
    lower, upper = qp.lower, qp.upper
    at_bound = keep & ((coeffs >= upper) | ((coeffs <= lower) & (lower != 0)))
    diagnostics = {
        "dual_objective": sol.dual_objective + objective_offset,
        "kkt_residual": sol.kkt_residual,
        "iterations": sol.iterations,
        "converged": sol.converged,
        "n_train": int(X.shape[0]),
        "n_support": int(keep.sum()),
        "n_bound": int(at_bound.sum()),
        "n_free": int((keep & (coeffs < upper) & (coeffs > lower)).sum()),
        "max_objective_rise": sol.max_objective_rise,
        "gradient_drift": sol.gradient_drift,
    }
    if not sol.converged:
        warnings.warn(
            f"{kind} solver stopped after {sol.iterations} iterations "
            f"with KKT residual {sol.kkt_residual:.3g}",
            SolverDidNotConverge,
            stacklevel=3,
        )
    return TrainedModel(
        kind=kind,
        support_vectors=X[keep].copy(),
        coeffs=coeffs[keep].copy(),
        rho=float(rho),
        kernel=kernel,
        params=params,
        diagnostics=diagnostics,
        n_features=int(X.shape[1]),
        center_sq=center_sq,
        support_indices=np.flatnonzero(keep),
    )


def _solve_with_trace(qp, cfg, keep_solution):
    sol = solve(qp, cfg)
    if keep_solution is not None:
        keep_solution.append(sol)
    return sol


def train_ocsvm(data, p: TrainParamsOCSVM = TrainParamsOCSVM(), _solutions=None) -> TrainedModel:
    """Schölkopf one-class SVM; ``rho`` from the free support vectors."""
    X = _training_matrix(data)
    n = X.shape[0]
    _required_nu_n(p.nu, n)
    kernel = p.kernel.resolve(X)
    G = gram(kernel, X)
    qp = BoxQP(G, 0.0, 0.0, 1.0 / (p.nu * n), 1.0)
    sol = _solve_with_trace(qp, p.solver, _solutions)
    params = {"nu": p.nu, "solver": p.solver.to_dict()}
    return _finish("ocsvm", X, kernel, qp, sol, sol.multiplier, params)


def train_pb_ocsvm(data, p: TrainParamsPB = TrainParamsPB(), _solutions=None) -> TrainedModel:
    """One-class SVM with pinball loss: coefficients in ``[-tau c, c]``."""
    X = _training_matrix(data)
    n = X.shape[0]
    _required_nu_n(p.nu, n)
    kernel = p.kernel.resolve(X)
    G = gram(kernel, X)
    c = 1.0 / (p.nu * n)
    if p.dual_form == "paper":
        qp = BoxQP(G, -1.0, -p.tau * c, c, 0.0)
    else:
        qp = BoxQP(G, 0.0, -p.tau * c, c, 1.0)
    sol = _solve_with_trace(qp, p.solver, _solutions)
    rho = sol.multiplier
    if p.dual_form == "paper":
        # gradient carries the -1 linear term; report the kernel expansion value
        rho = sol.multiplier + 1.0
    params = {"nu": p.nu, "tau": p.tau, "dual_form": p.dual_form, "solver": p.solver.to_dict()}
    return _finish("pb_ocsvm", X, kernel, qp, sol, rho, params)


def train_svdd(data, p: TrainParamsSVDD = TrainParamsSVDD(), _solutions=None) -> TrainedModel:
    """Tax & Duin support vector data description.

    The stored ``rho`` is the squared radius and ``center_sq`` the squared
    norm of the centre, so scores are ``R^2 - |phi(x) - a|^2``.
    """
    X = _training_matrix(data)
    n = X.shape[0]
    if p.C * n < 1.0 - 1e-12:
        raise InfeasibleParams(f"C * N = {p.C * n:.6g} < 1: coefficients cannot sum to 1")
    kernel = p.kernel.resolve(X)
    G = gram(kernel, X)
    diag = np.diag(G.values).copy()
    # a constant shift of the linear term only moves the multiplier; removing
    # the mean makes RBF runs follow exactly the OCSVM path
    shift = float(diag.mean())
    qp = BoxQP(G, -0.5 * (diag - shift), 0.0, p.C, 1.0)
    sol = _solve_with_trace(qp, p.solver, _solutions)
    alpha = sol.coeffs
    center_sq = float(alpha @ (sol.gradient - qp.linear))
    # |phi(x_i) - a|^2 = K_ii - 2 g_i + center_sq on the sphere
    r2 = center_sq - 2.0 * (sol.multiplier - 0.5 * shift)
    params = {"C": p.C, "solver": p.solver.to_dict()}
    return _finish("svdd", X, kernel, qp, sol, r2, params, center_sq=center_sq,
                   objective_offset=-0.5 * shift)


# ---------------------------------------------------------------------------
# scoring
# ---------------------------------------------------------------------------


def _self_kernel(spec: KernelSpec, X):
    if spec.family == "rbf":
        return np.ones(X.shape[0])
    sq = np.einsum("ij,ij->i", X, X)
    if spec.family == "linear":
        return sq
    return (sq + spec.coef0) ** spec.degree


def _probe_matrix(m: TrainedModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.shape[1] != m.n_features:
        raise DimensionMismatch(
            f"model expects {m.n_features} features, got {X.shape[1]}"
        )
    if m.n_support == 0:
        raise ModelDegenerate("model has no support vectors")
    return X


def kernel_expansion(m: TrainedModel, X) -> np.ndarray:
    """``sum_i coeff_i K(sv_i, x)`` for each row of ``X``."""
    X = _probe_matrix(m, X)
    return cross_kernel(m.kernel, X, m.support_vectors) @ m.coeffs


def decision_function(m: TrainedModel, X) -> np.ndarray:
    """Scores for each row of ``X``; non-negative means target."""
    X = _probe_matrix(m, X)
    expansion = cross_kernel(m.kernel, X, m.support_vectors) @ m.coeffs
    if m.kind == "svdd":
        dist_sq = _self_kernel(m.kernel, X) - 2.0 * expansion + m.center_sq
        return m.rho - dist_sq
    return expansion - m.rho


def predict(m: TrainedModel, X) -> np.ndarray:
    """Boolean labels, ``True`` for target; ``f(x) = 0`` counts as target."""
    return decision_function(m, X) >= 0


def sample_margin(m: TrainedModel, X, return_clamped=False):
    """Normalized projection ``w.phi(x) / |w|`` in the RBF feature space.

    Values are clipped to ``[0, 1]``; with ``return_clamped`` the number of
    entries that fell outside ``[-1e-9, 1 + 1e-9]`` is returned as well.
    """
    if m.kernel.family != "rbf":
        raise DomainError("sample margins need the unit-norm feature space of an rbf kernel")
    X = _probe_matrix(m, X)
    K = gram(m.kernel, m.support_vectors).values
    norm_sq = float(m.coeffs @ K @ m.coeffs)
    if norm_sq <= 1e-15:
        raise DegenerateNorm(f"|w|^2 = {norm_sq:.3g}")
    gamma = cross_kernel(m.kernel, X, m.support_vectors) @ m.coeffs / math.sqrt(norm_sq)
    clamped = int(np.sum((gamma < -1e-9) | (gamma > 1 + 1e-9)))
    gamma = np.clip(gamma, 0.0, 1.0)
    return (gamma, clamped) if return_clamped else gamma


def primal_objective(m: TrainedModel, X_train) -> float:
    """Primal value ``1/2|w|^2 - rho + c sum P_tau(rho - w.phi(x_i))``.

    Valid for ``ocsvm`` (``tau = 0``) and ``pb_ocsvm``. At the optimum it
    equals ``-1/2 |w|^2``, the negated minimization-form dual objective.
    """
    if m.kind not in ("ocsvm", "pb_ocsvm"):
        raise DomainError("primal_objective is defined for ocsvm and pb_ocsvm")
    X = as_samples(X_train)
    n = X.shape[0]
    tau = m.params.get("tau", 0.0)
    c = 1.0 / (m.params["nu"] * n)
    K = gram(m.kernel, m.support_vectors).values
    w_sq = float(m.coeffs @ K @ m.coeffs)
    z = cross_kernel(m.kernel, X, m.support_vectors) @ m.coeffs
    slack = pinball_loss(m.rho - z, tau)
    return 0.5 * w_sq - m.rho + c * float(np.sum(slack))


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------


def model_to_dict(m: TrainedModel) -> dict:
    return {
        "schema": SCHEMA_NAME,
        "version": f"{SCHEMA_VERSION[0]}.{SCHEMA_VERSION[1]}",
        "kind": m.kind,
        "kernel": m.kernel.to_dict(),
        "n_features": m.n_features,
        "rho": m.rho,
        "center_sq": m.center_sq,
        "coeffs": m.coeffs.tolist(),
        "support_vectors": m.support_vectors.tolist(),
        "support_indices": None if m.support_indices is None else m.support_indices.tolist(),
        "params": m.params,
        "diagnostics": m.diagnostics,
    }


def model_from_dict(d: dict) -> TrainedModel:
    if not isinstance(d, dict) or d.get("schema") != SCHEMA_NAME:
        raise SchemaVersionError("not an occkit model file")
    try:
        major, minor = (int(v) for v in str(d["version"]).split("."))
    except (KeyError, ValueError):
        raise SchemaVersionError(f"unreadable schema version {d.get('version')!r}") from None
    if major != SCHEMA_VERSION[0] or minor > SCHEMA_VERSION[1]:
        raise SchemaVersionError(
            f"model schema {major}.{minor} not supported (reader is "
            f"{SCHEMA_VERSION[0]}.{SCHEMA_VERSION[1]})"
        )
    try:
        kind = d["kind"]
        if kind not in MODEL_KINDS:
            raise SchemaVersionError(f"unknown model kind {kind!r}")
        sv = np.asarray(d["support_vectors"], dtype=np.float64)
        coeffs = np.asarray(d["coeffs"], dtype=np.float64)
        n_features = int(d.get("n_features", sv.shape[1] if sv.ndim == 2 else 0))
        sv = sv.reshape(-1, n_features)
        if coeffs.shape != (sv.shape[0],):
            raise SchemaVersionError("coefficient and support vector counts differ")
        return TrainedModel(
            kind=kind,
            support_vectors=sv,
            coeffs=coeffs,
            rho=float(d["rho"]),
            kernel=KernelSpec.from_dict(d["kernel"]),
            # fields added in 1.1
            params=d.get("params", {}),
            diagnostics=d.get("diagnostics", {}),
            n_features=n_features,
            center_sq=d.get("center_sq"),
            support_indices=(
                np.asarray(d["support_indices"], dtype=np.int64)
                if d.get("support_indices") is not None else None
            ),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaVersionError(f"corrupted model file: {exc}") from None


def save_model(m: TrainedModel, path):
    Path(path).write_text(json.dumps(model_to_dict(m), indent=1) + "\n", encoding="utf-8")


def load_model(path) -> TrainedModel:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaVersionError(f"corrupted model file {path}: {exc}") from None
    return model_from_dict(d)


# ---------------------------------------------------------------------------
# scikit-learn estimators
# ---------------------------------------------------------------------------


class _OneClassBase(OutlierMixin, BaseEstimator):
    """Shared estimator plumbing; subclasses implement ``_train``.

    ``predict`` follows the scikit-learn outlier convention: ``+1`` for
    target, ``-1`` for outlier.
    """

    def _kernel_spec(self):
        gamma = None if self.gamma in (None, "scale") else float(self.gamma)
        return KernelSpec(self.kernel, gamma, int(self.degree), float(self.coef0))

    def _solver_config(self):
        return SolverConfig(tolerance=self.tol, max_iterations=self.max_iter)

    def fit(self, X, y=None):
        X = as_samples(X)
        self.model_ = self._train(X)
        self.n_features_in_ = X.shape[1]
        self.support_vectors_ = self.model_.support_vectors
        self.dual_coef_ = self.model_.coeffs
        self.offset_ = self.model_.rho
        return self

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        return decision_function(self.model_, as_samples(X))

    def score_samples(self, X):
        return self.decision_function(X) + self.offset_

    def predict(self, X):
        return np.where(self.decision_function(X) >= 0, 1, -1)


class OneClassSVM(_OneClassBase):
    def __init__(self, nu=0.5, kernel="rbf", gamma="scale", degree=3, coef0=1.0,
                 tol=1e-6, max_iter=None):
        self.nu = nu
        self.kernel = kernel
        self.gamma = gamma
        self.degree = degree
        self.coef0 = coef0
        self.tol = tol
        self.max_iter = max_iter

    def _train(self, X):
        return train_ocsvm(X, TrainParamsOCSVM(self.nu, self._kernel_spec(), self._solver_config()))


class PinballOCSVM(_OneClassBase):
    """One-class SVM whose slack is measured by the pinball loss.

    Parameters
    ----------
    nu : float in (0, 1]
    tau : float in [0, 1]
        Pinball slope on the inner side of the margin. ``tau=0`` recovers
        :class:`OneClassSVM` exactly.
    kernel, gamma, degree, coef0
        Kernel family and hyperparameters; ``gamma="scale"`` resolves to
        ``1 / (d * var(X))``.
    tol, max_iter
        SMO stopping rule.
    dual_form : {"rederived", "paper"}
    """

    def __init__(self, nu=0.5, tau=0.5, kernel="rbf", gamma="scale", degree=3,
                 coef0=1.0, tol=1e-6, max_iter=None, dual_form="rederived"):
        self.nu = nu
        self.tau = tau
        self.kernel = kernel
        self.gamma = gamma
        self.degree = degree
        self.coef0 = coef0
        self.tol = tol
        self.max_iter = max_iter
        self.dual_form = dual_form

    def _train(self, X):
        p = TrainParamsPB(self.nu, self.tau, self._kernel_spec(), self._solver_config(), self.dual_form)
        return train_pb_ocsvm(X, p)


class SVDD(_OneClassBase):
    def __init__(self, C=1.0, kernel="rbf", gamma="scale", degree=3, coef0=1.0,
                 tol=1e-6, max_iter=None):
        self.C = C
        self.kernel = kernel
        self.gamma = gamma
        self.degree = degree
        self.coef0 = coef0
        self.tol = tol
        self.max_iter = max_iter

    def _train(self, X):
        return train_svdd(X, TrainParamsSVDD(self.C, self._kernel_spec(), self._solver_config()))


def train_model(kind, data, nu=0.5, tau=0.0, kernel: KernelSpec = KernelSpec(),
                solver: SolverConfig = SolverConfig(), C=None, dual_form="rederived"):
    """Dispatch helper used by the CLI and benchmark harness.

    For ``svdd``, ``C`` defaults to ``1 / (nu N)``, the setting under which
    it matches ``ocsvm`` on RBF kernels.
    """
    if kind == "ocsvm":
        return train_ocsvm(data, TrainParamsOCSVM(nu, kernel, solver))
    if kind == "pb_ocsvm":
        return train_pb_ocsvm(data, TrainParamsPB(nu, tau, kernel, solver, dual_form))
    if kind == "svdd":
        if C is None:
            _check_nu(nu)
            C = 1.0 / (nu * _training_matrix(data).shape[0])
        return train_svdd(data, TrainParamsSVDD(C, kernel, solver))
    raise DomainError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")
