"""Monotone finite-volume assembly of the conjugated linearised operator.

Diffusion is in flux form with harmonic face averages. First-order terms are
upwinded face by face from normal face velocities, so every off-diagonal
entry is non-negative and divergence-free face fluxes give a matrix whose
transport part has zero row and column sums.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence, TextIO

import numpy as np
import scipy.sparse as sp

from .medium import (CellMedium2D, ShearMedium, discrete_divergence, harmonic_faces,
                     sample_field)

NEGATIVE_TOL = 1e-12


class AssemblyError(ValueError):
    """Inputs outside the admissible range, or a non-monotone stencil."""


@dataclass(frozen=True)
class Grid:
    sizes: tuple[int, ...]
    lengths: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "sizes", tuple(int(n) for n in self.sizes))
        object.__setattr__(self, "lengths", tuple(float(v) for v in self.lengths))
        if len(self.sizes) != len(self.lengths) or len(self.sizes) not in (1, 2):
            raise AssemblyError("grid must be 1D or 2D with one length per axis")
        if any(n < 4 for n in self.sizes):
            raise AssemblyError(f"need at least 4 cells per axis, got {self.sizes}")
        if any(not v > 0 for v in self.lengths):
            raise AssemblyError(f"lengths must be positive, got {self.lengths}")

    @property
    def dimension(self) -> int:
        return len(self.sizes)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(v / n for v, n in zip(self.lengths, self.sizes))

    @property
    def size(self) -> int:
        return int(np.prod(self.sizes))


@dataclass(frozen=True)
class OperatorMatrix:
    """Assembled operator: a CSR matrix plus its grid and provenance metadata."""

    matrix: sp.csr_matrix
    grid: Grid
    symmetric: bool
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()

    def min_off_diagonal(self) -> float:
        m = self.matrix.tocoo()
        off = m.data[m.row != m.col]
        return float(off.min()) if off.size else 0.0

    def shifted(self, c: float) -> "OperatorMatrix":
        """``L + c I``."""
        mat = (self.matrix + c * sp.identity(self.n, format="csr")).tocsr()
        return OperatorMatrix(mat, self.grid, self.symmetric, dict(self.meta, shift=c))

    def __matmul__(self, v: np.ndarray) -> np.ndarray:
        return self.matrix @ v

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def dump(self, fh: TextIO) -> None:
        """Write ``row col value`` lines (coordinate format)."""
        m = self.matrix.tocoo()
        order = np.lexsort((m.col, m.row))
        for r, c, v in zip(m.row[order], m.col[order], m.data[order]):
            fh.write(f"{r} {c} {v:.17g}\n")


class _Builder:
    """Accumulates entries; duplicates are summed when the CSR matrix is formed."""

    def __init__(self, n: int) -> None:
        self.n = n
        self.rows: list[np.ndarray] = []
        self.cols: list[np.ndarray] = []
        self.vals: list[np.ndarray] = []
        self.diag = np.zeros(n)

    def add(self, rows: np.ndarray, cols: np.ndarray, vals: np.ndarray) -> None:
        self.rows.append(rows.ravel())
        self.cols.append(cols.ravel())
        self.vals.append(np.broadcast_to(vals, rows.shape).ravel())

    def couple(self, rows: np.ndarray, cols: np.ndarray, rate: np.ndarray) -> None:
        """Add a conservative coupling ``rate * (psi[col] - psi[row])``."""
        self.add(rows, cols, rate)
        np.subtract.at(self.diag, rows.ravel(), np.broadcast_to(rate, rows.shape).ravel())

    def build(self) -> sp.csr_matrix:
        idx = np.arange(self.n)
        rows = np.concatenate(self.rows + [idx])
        cols = np.concatenate(self.cols + [idx])
        vals = np.concatenate(self.vals + [self.diag])
        mat = sp.csr_matrix((vals, (rows, cols)), shape=(self.n, self.n))
        mat.sum_duplicates()
        mat.sort_indices()
        return mat


def _check_positive(**kw: float) -> None:
    for name, v in kw.items():
        if not (np.isfinite(v) and v > 0):
            raise AssemblyError(f"{name} must be positive, got {v}")


def _check_lambda(lam: float) -> None:
    # lam = 0 is admitted: it is the plain generator, used by conservation checks
    if not (np.isfinite(lam) and lam >= 0):
        raise AssemblyError(f"lambda must be non-negative, got {lam}")


def _upwind(b: _Builder, cells: np.ndarray, nbrs: np.ndarray, outward: np.ndarray, h: float) -> None:
    """Face-upwinded transport: couple to the neighbour the outward velocity points at."""
    b.couple(cells, nbrs, np.maximum(outward, 0.0) / h)


def _monotone(mat: sp.csr_matrix) -> None:
    m = mat.tocoo()
    off = m.data[m.row != m.col]
    if off.size and off.min() < -NEGATIVE_TOL:
        raise AssemblyError(f"stencil is not monotone: off-diagonal entry {off.min():.3e} < 0")


def assemble_line_operator(a: Sequence[float], zeta: Sequence[float], lam: float, eps: float = 1.0,
                           length: float = 1.0, B: float = 1.0) -> OperatorMatrix:
    """1D operator ``eps (a psi')' - 2 eps lam a psi' + [eps lam^2 a - eps lam a' + B zeta] psi``.

    ``a`` and ``zeta`` are cell-centred samples over one period of ``length``.
    The ``a'`` terms are built from the same harmonic face values as the flux.
    """
    a = np.asarray(a, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    if a.shape != zeta.shape or a.ndim != 1:
        raise AssemblyError(f"a and zeta must be 1D arrays of equal length, got {a.shape} and {zeta.shape}")
    _check_lambda(lam)
    _check_positive(eps=eps, length=length, B=B)
    grid = Grid((a.size,), (length,))
    n, h = a.size, grid.spacing[0]
    if np.any(a <= 0):
        raise AssemblyError("diffusion samples must be positive")

    af = harmonic_faces(a)  # af[i] sits between cells i-1 and i
    af_right = np.roll(af, -1)
    i = np.arange(n)
    left, right = np.roll(i, 1), np.roll(i, -1)
    b = _Builder(n)
    b.couple(i, left, eps * af / h**2)
    b.couple(i, right, eps * af_right / h**2)
    w_left, w_right = -2.0 * eps * lam * af, -2.0 * eps * lam * af_right
    _upwind(b, i, left, -w_left, h)
    _upwind(b, i, right, w_right, h)
    b.diag += (eps * lam**2 * 0.5 * (af + af_right)
               - eps * lam * (af_right - af) / h
               + B * zeta)
    mat = b.build()
    _monotone(mat)
    meta = {"kind": "line", "lambda": lam, "eps": eps, "B": B, "length": length}
    return OperatorMatrix(mat, grid, symmetric=(lam == 0.0), meta=meta)


def assemble_cross_section_operator(medium: ShearMedium, lam: float, eps: float = 1.0, B: float = 1.0,
                                    n: int = 128, advection: float = 1.0) -> OperatorMatrix:
    """Symmetric cross-section operator ``eps (d phi')' + [eps lam^2 alpha - lam s q1 + B zeta] phi``.

    ``s = advection`` scales the shear flow.
    """
    _check_lambda(lam)
    _check_positive(eps=eps, B=B)
    if not np.isfinite(advection):
        raise AssemblyError(f"advection scale must be finite, got {advection}")
    grid = Grid((n,), (medium.period,))
    h = grid.spacing[0]
    d = sample_field(medium.d, n)
    alpha = sample_field(medium.alpha, n)
    zeta = sample_field(medium.zeta, n)
    q1 = sample_field(medium.q1, n) if medium.q1 is not None else np.zeros(n)

    df = harmonic_faces(d)
    i = np.arange(n)
    b = _Builder(n)
    b.couple(i, np.roll(i, 1), eps * df / h**2)
    b.couple(i, np.roll(i, -1), eps * np.roll(df, -1) / h**2)
    b.diag += eps * lam**2 * alpha - lam * advection * q1 + B * zeta
    mat = b.build()
    meta = {"kind": "cross_section", "lambda": lam, "eps": eps, "B": B, "advection": advection}
    return OperatorMatrix(mat, grid, symmetric=True, meta=meta)


def assemble_cell_operator(medium: CellMedium2D, lam: float, M: float = 1.0, gamma: float = 0.0,
                           B: float = 1.0, n: int | Sequence[int] = 64, mode: str = "M",
                           advection_scale: float | None = None) -> OperatorMatrix:
    """2D torus operator with diffusion ``M A``, advection ``s q`` and reaction ``B zeta``.

    ``s`` is ``M**gamma`` in mode "M" (0 <= gamma <= 1/2) and ``B**gamma`` in
    mode "B" (gamma >= 1/2), unless ``advection_scale`` is given explicitly.
    """
    _check_lambda(lam)
    _check_positive(M=M, B=B)
    if advection_scale is None:
        if mode == "M":
            if not 0.0 <= gamma <= 0.5:
                raise AssemblyError(f"gamma must lie in [0, 1/2] for diffusion scaling, got {gamma}")
            advection_scale = M**gamma
        elif mode == "B":
            if gamma < 0.5:
                raise AssemblyError(f"gamma must be >= 1/2 for reaction scaling, got {gamma}")
            advection_scale = B**gamma
        else:
            raise AssemblyError(f"mode must be 'M' or 'B', got {mode!r}")
    s = float(advection_scale)
    n1, n2 = (int(n), int(n)) if np.ndim(n) == 0 else (int(n[0]), int(n[1]))
    grid = Grid((n1, n2), medium.periods)
    h1, h2 = grid.spacing

    a11 = sample_field(medium.a11, (n1, n2))
    a22 = sample_field(medium.a22, (n1, n2))
    a12 = sample_field(medium.a12, (n1, n2))
    zeta = sample_field(medium.zeta, (n1, n2))
    if np.any(a11 <= 0) or np.any(a11 * a22 - a12**2 <= 0):
        raise AssemblyError("diffusion tensor is not elliptic at some node")

    idx = np.arange(n1 * n2).reshape(n1, n2)
    west, east = np.roll(idx, 1, axis=0), np.roll(idx, -1, axis=0)
    south, north = np.roll(idx, 1, axis=1), np.roll(idx, -1, axis=1)
    b = _Builder(n1 * n2)

    # face coefficients: [i, j] is the face west (resp. south) of cell (i, j)
    fx11 = harmonic_faces(a11, 0)
    fy22 = harmonic_faces(a22, 1)
    b.couple(idx, west, M * fx11 / h1**2)
    b.couple(idx, east, M * np.roll(fx11, -1, axis=0) / h1**2)
    b.couple(idx, south, M * fy22 / h2**2)
    b.couple(idx, north, M * np.roll(fy22, -1, axis=1) / h2**2)

    if np.any(a12 != 0.0):
        # centred mixed derivatives d_x(a12 d_y) + d_y(a12 d_x); rows still sum to zero
        c = M / (4.0 * h1 * h2)
        ae, aw = np.roll(a12, -1, axis=0), np.roll(a12, 1, axis=0)
        an, as_ = np.roll(a12, -1, axis=1), np.roll(a12, 1, axis=1)
        for di, dj, coef in ((1, 1, ae + an), (1, -1, -(ae + as_)), (-1, 1, -(aw + an)), (-1, -1, aw + as_)):
            corner = np.roll(np.roll(idx, -di, axis=0), -dj, axis=1)
            b.add(idx, corner, c * coef)

    # A e on faces, matching the diffusion face values along e
    if medium.direction == (1.0, 0.0):
        ex, ey = fx11, 0.5 * (a12 + np.roll(a12, 1, axis=1))
        eAe = 0.5 * (fx11 + np.roll(fx11, -1, axis=0))
    else:
        ex, ey = 0.5 * (a12 + np.roll(a12, 1, axis=0)), fy22
        eAe = 0.5 * (fy22 + np.roll(fy22, -1, axis=1))
    div_ae = discrete_divergence(ex, ey, (h1, h2))

    u, v = medium.face_velocities(n1, n2)
    wx = -2.0 * M * lam * ex + s * u
    wy = -2.0 * M * lam * ey + s * v
    _upwind(b, idx, west, -wx, h1)
    _upwind(b, idx, east, np.roll(wx, -1, axis=0), h1)
    _upwind(b, idx, south, -wy, h2)
    _upwind(b, idx, north, np.roll(wy, -1, axis=1), h2)

    if medium.direction == (1.0, 0.0):
        qe = 0.5 * (u + np.roll(u, -1, axis=0))
    else:
        qe = 0.5 * (v + np.roll(v, -1, axis=1))
    b.diag += (M * lam**2 * eAe - M * lam * div_ae - lam * s * qe + B * zeta).ravel()
    mat = b.build()
    _monotone(mat)
    symmetric = lam == 0.0 and medium.stream_function is None
    meta = {"kind": "cell", "lambda": lam, "M": M, "gamma": gamma, "B": B,
            "advection": s, "mode": mode}
    return OperatorMatrix(mat, grid, symmetric=symmetric, meta=meta)
