"""Kernel functions and Gram matrices."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist

from .exceptions import DimensionMismatch, DomainError

KERNEL_FAMILIES = ("linear", "rbf", "polynomial")


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus hyperparameters.

    ``gamma=None`` on an RBF kernel means "scale": it is resolved against the
    training data as ``1 / (d * var(X))`` by :meth:`resolve`.
    """

    family: str = "rbf"
    gamma: Optional[float] = None
    degree: int = 3
    coef0: float = 1.0

    def __post_init__(self):
        if self.family not in KERNEL_FAMILIES:
            raise DomainError(f"unknown kernel {self.family!r}; expected {KERNEL_FAMILIES}")
        if self.gamma is not None and not self.gamma > 0:
            raise DomainError(f"gamma must be > 0, got {self.gamma}")
        if int(self.degree) != self.degree or self.degree < 1:
            raise DomainError(f"degree must be an integer >= 1, got {self.degree}")

    def resolve(self, X) -> "KernelSpec":
        if self.family == "rbf" and self.gamma is None:
            return replace(self, gamma=scale_gamma(X))
        return self

    def to_dict(self):
        return {"family": self.family, "gamma": self.gamma, "degree": int(self.degree), "coef0": self.coef0}

    @classmethod
    def from_dict(cls, d):
        return cls(d["family"], d.get("gamma"), int(d.get("degree", 3)), float(d.get("coef0", 1.0)))


def scale_gamma(X) -> float:
    X = np.asarray(X, dtype=np.float64)
    var = X.var()
    if var <= 0:
        return 1.0
    return 1.0 / (X.shape[1] * var)


def kernel_eval(spec: KernelSpec, x, y) -> float:
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise DimensionMismatch(f"vectors of dimension {x.size} and {y.size}")
    if spec.family == "linear":
        return float(x @ y)
    if spec.family == "rbf":
        if spec.gamma is None:
            raise DomainError("rbf kernel needs a resolved gamma")
        diff = x - y
        return float(np.exp(-spec.gamma * (diff @ diff)))
    return float((x @ y + spec.coef0) ** spec.degree)


def cross_kernel(spec: KernelSpec, A, B) -> np.ndarray:
    """Kernel block ``K[i, j] = k(A[i], B[j])``."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    if A.shape[1] != B.shape[1]:
        raise DimensionMismatch(f"samples of dimension {A.shape[1]} and {B.shape[1]}")
    if spec.family == "linear":
        return A @ B.T
    if spec.family == "polynomial":
        return (A @ B.T + spec.coef0) ** spec.degree
    if spec.gamma is None:
        raise DomainError("rbf kernel needs a resolved gamma")
    # explicit differences: duplicate rows give exactly 0
    return np.exp(-spec.gamma * cdist(A, B, "sqeuclidean"))


@dataclass(frozen=True, eq=False)
class GramMatrix:
    values: np.ndarray
    kernel: KernelSpec
    fingerprint: str

    @property
    def n(self) -> int:
        return self.values.shape[0]


def _fingerprint(X) -> str:
    return hashlib.sha1(np.ascontiguousarray(X).tobytes()).hexdigest()[:16]


def gram(spec: KernelSpec, samples) -> GramMatrix:
    """Symmetric Gram matrix of ``samples`` under ``spec``.

    Only the upper triangle is computed; the lower one is mirrored, so the
    result is exactly symmetric. RBF diagonals are set to exactly 1.
    """
    X = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    if X.shape[0] == 0:
        raise DimensionMismatch("gram() needs at least one sample")
    K = cross_kernel(spec, X, X)
    iu = np.triu_indices(X.shape[0], 1)
    K[(iu[1], iu[0])] = K[iu]
    if spec.family == "rbf":
        np.fill_diagonal(K, 1.0)
    K.setflags(write=False)
    return GramMatrix(K, spec, _fingerprint(X))
