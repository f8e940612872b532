"""Principal eigenpair of a monotone operator matrix.

Two independent methods: shifted power iteration (the production path) and
an explicit-Euler growth-rate oracle used for cross-validation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from .assembly import NEGATIVE_TOL, OperatorMatrix

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 100_000


class ConvergenceError(RuntimeError):
    """Power iteration did not settle within ``max_iter`` steps.

    ``estimate`` holds the last (unconverged) pair.
    """

    def __init__(self, message: str, estimate: "PrincipalPair | None" = None) -> None:
        super().__init__(message)
        self.estimate = estimate


class StructureError(ValueError):
    """The matrix lacks the sign structure the Perron argument needs."""


@dataclass(frozen=True)
class PrincipalPair:
    """Principal eigenvalue ``k`` with positive, l2-normalised eigenvector ``psi``.

    ``psi`` is positive at every node unless the eigenfunction is so
    localised that far-away values underflow to zero.
    """

    k: float
    psi: np.ndarray
    iterations: int
    residual: float
    shift: float
    tol: float


def _shift(op: OperatorMatrix) -> float:
    return 1.0 + float(np.max(np.abs(op.diagonal())))


def _csr_arrays(op: OperatorMatrix) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    m = op.matrix
    return (np.ascontiguousarray(m.indptr, dtype=np.int32),
            np.ascontiguousarray(m.indices, dtype=np.int32),
            np.ascontiguousarray(m.data, dtype=np.float64))


def effective_tol(tol: float, sigma: float) -> float:
    """Requested tolerance, floored at the roundoff level of the shifted iteration."""
    return max(tol, 16.0 * np.finfo(float).eps * sigma)


def principal_eig_power(op: OperatorMatrix, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                        v0: np.ndarray | None = None, backend: str | None = None) -> PrincipalPair:
    """Power iteration on ``sigma I + L`` with ``sigma = 1 + max|diag|``.

    Stops once successive Rayleigh estimates differ by at most ``tol``, the
    Aitken estimate of the remaining tail is within ``tol`` and the residual
    ``|L v - k v|`` is within ``tol``; the returned ``k`` includes the tail
    correction. ``tol`` is floored at a small multiple of machine precision
    times ``sigma``. ``v0`` warm-starts
    the iteration (it must be positive).
    """
    if op.min_off_diagonal() < -NEGATIVE_TOL:
        raise StructureError("negative off-diagonal entry: shifted matrix would not be non-negative")
    sigma = _shift(op)
    tol_eff = effective_tol(tol, sigma)
    kern = _backend.kernels if backend is None else _backend.get(backend)
    if v0 is None or np.shape(v0) != (op.n,):
        v = np.ones(op.n)
    else:
        # a warm start may carry underflowed zeros; keep it strictly positive
        v = np.maximum(np.asarray(v0, dtype=np.float64), 1e-300)
    k, corr, it, ok, _ = kern.power_iteration(*_csr_arrays(op), sigma, v, tol_eff, int(max_iter))
    k = float(k + corr)
    psi = v / np.linalg.norm(v)
    residual = float(np.linalg.norm(op @ psi - k * psi))
    pair = PrincipalPair(k, psi, int(it), residual, sigma, tol_eff)
    if not ok:
        raise ConvergenceError(f"power iteration did not converge in {it} steps "
                               f"(tol {tol_eff:.2e}, residual {residual:.2e})", pair)
    # exact zeros can only come from underflow of a strongly localised
    # eigenfunction; a negative entry means the Perron structure is broken
    if psi.min() < 0:
        raise StructureError(f"eigenvector has a negative entry (min {psi.min():.3e})")
    return pair


def rayleigh_value(op: OperatorMatrix, v: np.ndarray) -> float:
    """``v^T L v / v^T v`` for a symmetric operator."""
    if not op.symmetric:
        raise StructureError("Rayleigh quotient needs a symmetric operator")
    v = np.asarray(v, dtype=float)
    vv = float(v @ v)
    if vv == 0.0:
        raise ValueError("v must be non-zero")
    return float(v @ (op @ v)) / vv


def growth_rate_oracle(op: OperatorMatrix, T: float = 200.0, dt: float | None = None,
                       tail: float = 0.2, backend: str | None = None) -> float:
    """Growth rate of ``v <- (I + dt L) v`` from a positive start.

    The per-step growth factors ``rho`` over the last ``tail`` fraction of the
    horizon are combined as ``(exp(mean log rho) - 1) / dt``, the exact
    inverse of ``rho = 1 + dt k`` for the Euler map.
    """
    sigma = _shift(op)
    if dt is None:
        dt = 1.0 / sigma
    if not 0 < dt <= 1.0 / (sigma - 1.0 if sigma > 1.0 else 1.0):
        raise ValueError(f"dt={dt} breaks positivity of I + dt L (need dt <= {1.0 / (sigma - 1.0):.3e})")
    if op.min_off_diagonal() < -NEGATIVE_TOL:
        raise StructureError("negative off-diagonal entry")
    nsteps = max(int(math.ceil(T / dt)), 5)
    ntail = max(int(nsteps * tail), 1)
    kern = _backend.kernels if backend is None else _backend.get(backend)
    v = np.ones(op.n)
    mean_log = kern.euler_growth(*_csr_arrays(op), float(dt), v, nsteps, ntail)
    return math.expm1(mean_log) / dt
