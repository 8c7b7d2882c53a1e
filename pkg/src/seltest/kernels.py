"""Kernel functions: continuous product kernels and discrete category kernels.

The continuous kernels are second order, symmetric, nonnegative, and
compactly supported on [-1, 1]. The discrete kernel is the unordered
Li-Racine form: weight 1 on a category match and lambda on a mismatch,
so lambda = 0 reduces to exact matching and lambda = 1 ignores the
coordinate entirely.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "KernelSpec",
    "DiscreteKernelSpec",
    "EPANECHNIKOV",
    "kernel_eval",
    "product_kernel",
    "discrete_kernel",
]


def _epanechnikov(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return np.where(np.abs(v) <= 1.0, 0.75 * (1.0 - v * v), 0.0)


def _biweight(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    u = 1.0 - v * v
    return np.where(np.abs(v) <= 1.0, 0.9375 * u * u, 0.0)


def _triweight(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    u = 1.0 - v * v
    return np.where(np.abs(v) <= 1.0, 1.09375 * u * u * u, 0.0)


# family -> (evaluator, integral of K^2 over the support)
_FAMILIES = {
    "epanechnikov": (_epanechnikov, 0.6),
    "biweight": (_biweight, 5.0 / 7.0),
    "triweight": (_triweight, 350.0 / 429.0),
}


@dataclass(frozen=True)
class KernelSpec:
    """A second-order kernel with compact support on [-1, 1]."""

    family: str = "epanechnikov"

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ConfigurationError(
                f"unknown kernel family {self.family!r}; "
                f"choose one of {sorted(_FAMILIES)}"
            )

    @property
    def square_integral(self) -> float:
        """Integral of K(v)^2 over [-1, 1], known in closed form per family."""
        return _FAMILIES[self.family][1]

    def __call__(self, v) -> np.ndarray:
        return _FAMILIES[self.family][0](v)


EPANECHNIKOV = KernelSpec("epanechnikov")


def kernel_eval(spec: KernelSpec, v) -> np.ndarray | float:
    """Evaluate K(v); zero outside [-1, 1]."""
    out = spec(v)
    return float(out) if np.isscalar(v) else out


def product_kernel(spec: KernelSpec, u: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Product kernel over the last axis: prod_j K(u_j / h_j).

    ``u`` has shape (..., d) and ``h`` is a positive vector of length d
    (a scalar broadcasts to all coordinates).
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    h = np.atleast_1d(np.asarray(h, dtype=float))
    if np.any(h <= 0):
        raise ConfigurationError("all bandwidths must be positive")
    if h.size not in (1, u.shape[-1]):
        raise ConfigurationError(
            f"bandwidth dimension {h.size} does not match data dimension {u.shape[-1]}"
        )
    return np.prod(spec(u / h), axis=-1)


@dataclass(frozen=True)
class DiscreteKernelSpec:
    """Unordered discrete kernel weights, one smoothing parameter per coordinate."""

    lam: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        lam = np.atleast_1d(np.asarray(self.lam, dtype=float))
        object.__setattr__(self, "lam", lam)
        if lam.size and (np.any(lam < 0.0) or np.any(lam > 1.0)):
            raise ConfigurationError("discrete smoothing parameters must lie in [0, 1]")


def discrete_kernel(
    spec: DiscreteKernelSpec, zd: np.ndarray, zd2: np.ndarray
) -> np.ndarray:
    """Product over coordinates of (1 on match, lambda_j on mismatch).

    ``zd`` and ``zd2`` broadcast against each other over shape (..., d).
    """
    zd = np.atleast_1d(np.asarray(zd))
    zd2 = np.atleast_1d(np.asarray(zd2))
    if zd.shape[-1] != zd2.shape[-1]:
        raise ConfigurationError("discrete category vectors have different dimensions")
    lam = spec.lam
    if lam.size == 1 and zd.shape[-1] > 1:
        lam = np.full(zd.shape[-1], lam[0])
    if lam.size != zd.shape[-1]:
        raise ConfigurationError(
            f"{lam.size} smoothing parameters for {zd.shape[-1]} discrete coordinates"
        )
    match = zd == zd2
    return np.prod(np.where(match, 1.0, lam), axis=-1)
