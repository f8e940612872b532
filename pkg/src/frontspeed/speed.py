"""Minimal front speed ``c* = min_{lam > 0} k(lam) / lam``.

A problem couples a medium with three scale factors: ``diffusion`` multiplies
the diffusion tensor, ``advection`` the flow, ``reaction`` the reaction slope.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Union

import numpy as np

from .assembly import (OperatorMatrix, assemble_cell_operator, assemble_cross_section_operator,
                       assemble_line_operator)
from .eigen import DEFAULT_TOL, ConvergenceError, PrincipalPair, principal_eig_power
from .medium import (CHECK_N, CellMedium2D, LineMedium, ShearMedium, cell_average, max_over_cell,
                     sample_field)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True, kw_only=True)
class _Problem:
    diffusion: float = 1.0
    advection: float = 1.0
    reaction: float = 1.0

    def rescaled(self, diffusion: float = 1.0, advection: float = 1.0, reaction: float = 1.0) -> Any:
        """Same medium with each scale factor multiplied by the given amount."""
        return replace(self, diffusion=self.diffusion * diffusion, advection=self.advection * advection,
                       reaction=self.reaction * reaction)

    def with_grid(self, n: Any) -> Any:
        return replace(self, n=n)

    def operator(self, lam: float) -> OperatorMatrix:
        raise NotImplementedError

    def eAe_mean(self) -> float:
        raise NotImplementedError

    def lambda_hat(self) -> float:
        """Optimal wave number for the cell-averaged constant problem."""
        return math.sqrt(self.reaction * cell_average(self.medium.zeta) / (self.diffusion * self.eAe_mean()))


@dataclass(frozen=True, kw_only=True)
class LineProblem(_Problem):
    """1D medium; there is no advection, so the ``advection`` factor is inert."""

    medium: LineMedium
    n: int = 128

    def operator(self, lam: float) -> OperatorMatrix:
        m = self.medium
        return assemble_line_operator(sample_field(m.a, self.n), sample_field(m.zeta, self.n), lam,
                                      self.diffusion, m.period, self.reaction)

    def eAe_mean(self) -> float:
        return cell_average(self.medium.a)

    def negative_drift_max(self) -> float:
        return 0.0

    def eAe_max(self) -> float:
        return max_over_cell(self.medium.a)


@dataclass(frozen=True, kw_only=True)
class ShearProblem(_Problem):
    """Shear medium reduced to its symmetric cross-section eigenproblem."""

    medium: ShearMedium
    n: int = 128

    def operator(self, lam: float) -> OperatorMatrix:
        return assemble_cross_section_operator(self.medium, lam, self.diffusion, self.reaction, self.n,
                                               self.advection)

    def eAe_mean(self) -> float:
        return cell_average(self.medium.alpha)

    def negative_drift_max(self) -> float:
        if self.medium.q1 is None:
            return 0.0
        return max(0.0, max_over_cell(self.medium.q1.scaled(-self.advection)))

    def eAe_max(self) -> float:
        return max_over_cell(self.medium.alpha)


@dataclass(frozen=True, kw_only=True)
class CellProblem(_Problem):
    """Full 2D torus problem."""

    medium: CellMedium2D
    n: Any = 64

    def operator(self, lam: float) -> OperatorMatrix:
        return assemble_cell_operator(self.medium, lam, M=self.diffusion, B=self.reaction, n=self.n,
                                      advection_scale=self.advection)

    def eAe_mean(self) -> float:
        return cell_average(self.medium.eAe)

    def negative_drift_max(self) -> float:
        if self.medium.stream_function is None:
            return 0.0
        u, v = self.medium.face_velocities(CHECK_N, CHECK_N)
        qe = u if self.medium.direction == (1.0, 0.0) else v
        return max(0.0, float(np.max(-self.advection * qe)))

    def eAe_max(self) -> float:
        return max_over_cell(self.medium.eAe)


Problem = Union[LineProblem, ShearProblem, CellProblem]


def make_problem(medium: Any, n: Any = None, **scales: float) -> Problem:
    if isinstance(medium, LineMedium):
        return LineProblem(medium=medium, n=n or 128, **scales)
    if isinstance(medium, ShearMedium):
        return ShearProblem(medium=medium, n=n or 128, **scales)
    if isinstance(medium, CellMedium2D):
        return CellProblem(medium=medium, n=n or 64, **scales)
    raise TypeError(f"not a medium: {type(medium).__name__}")


@dataclass
class SpeedResult:
    """Outcome of the scan plus golden-section minimisation of ``k(lam)/lam``."""

    c_star: float
    lambda_star: float
    k_at_star: float
    scan: list[tuple[float, float]]
    refinement_iterations: int
    bracket_error: float
    bracket_failure: bool
    eigen_solves: int
    eigen_iterations: int
    lambda_range: tuple[float, float]
    diagnostics: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {"c_star": self.c_star, "lambda_star": self.lambda_star, "k_at_star": self.k_at_star,
                "scan": [list(p) for p in self.scan], "refinement_iterations": self.refinement_iterations,
                "bracket_error": self.bracket_error, "bracket_failure": self.bracket_failure,
                "eigen_solves": self.eigen_solves, "eigen_iterations": self.eigen_iterations,
                "lambda_range": list(self.lambda_range), "diagnostics": dict(self.diagnostics)}

    @property
    def unconverged_probes(self) -> int:
        return len(self.diagnostics.get("unconverged", []))


class _Evaluator:
    """Evaluates ``k(lam)`` with warm starts, caching every probe.

    A probe whose power iteration hits ``max_iter`` keeps its last estimate
    and is recorded in ``unconverged``. That is harmless far from the
    minimum; the caller refuses a minimiser that did not converge.
    """

    def __init__(self, problem: Problem, eig_tol: float, max_iter: int) -> None:
        self.problem = problem
        self.eig_tol = eig_tol
        self.max_iter = max_iter
        self.v: np.ndarray | None = None
        self.cache: dict[float, float] = {}
        self.unconverged: dict[float, float] = {}
        self.solves = 0
        self.iterations = 0

    def k(self, lam: float) -> float:
        if lam not in self.cache:
            try:
                pair = principal_eig_power(self.problem.operator(lam), self.eig_tol, self.max_iter, v0=self.v)
            except ConvergenceError as err:
                pair = err.estimate
                self.unconverged[lam] = pair.residual
            self.v = pair.psi
            self.solves += 1
            self.iterations += pair.iterations
            self.cache[lam] = pair.k
        return self.cache[lam]

    def phi(self, lam: float) -> float:
        return self.k(lam) / lam


def k_of_lambda(problem: Problem, lam: float, tol: float = DEFAULT_TOL) -> float:
    """Principal eigenvalue of the conjugated operator at wave number ``lam``."""
    return principal_pair(problem, lam, tol).k


def principal_pair(problem: Problem, lam: float, tol: float = DEFAULT_TOL) -> PrincipalPair:
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    return principal_eig_power(problem.operator(lam), tol)


def default_lambda_range(problem: Problem) -> tuple[float, float]:
    lh = problem.lambda_hat()
    if isinstance(problem, CellProblem):
        return lh / 10.0, lh * 10.0
    return lh * 1e-3, lh * 1e3


def minimal_speed(problem: Problem, lambda_range: tuple[float, float] | None = None, tol: float = 1e-6,
                  probes: int | None = None, eig_tol: float | None = None,
                  max_iter: int = 100_000) -> SpeedResult:
    """Minimise ``k(lam)/lam``: log-spaced scan, then golden section in ``log lam``.

    ``tol`` is the relative width of the final bracket in ``lam``; the
    eigenvalue tolerance defaults to ``tol / 10``. A scan minimum at either
    end of ``lambda_range`` sets ``bracket_failure``.
    """
    lo, hi = default_lambda_range(problem) if lambda_range is None else lambda_range
    if not 0 < lo < hi:
        raise ValueError(f"need 0 < lambda_min < lambda_max, got [{lo}, {hi}]")
    if probes is None:
        probes = 16 if isinstance(problem, CellProblem) else 40
    if probes < 3:
        raise ValueError("need at least 3 scan probes")
    if eig_tol is None:
        eig_tol = tol / 10.0
    ev = _Evaluator(problem, eig_tol, max_iter)
    grid = np.geomspace(lo, hi, probes)
    scan = [(float(lam), ev.phi(float(lam))) for lam in grid]
    j = int(np.argmin([p[1] for p in scan]))
    failure = j in (0, probes - 1)

    # golden section on t = log(lam) inside the neighbouring probes
    a = math.log(grid[max(j - 1, 0)])
    b = math.log(grid[min(j + 1, probes - 1)])
    c, d = b - GOLDEN * (b - a), a + GOLDEN * (b - a)
    fc, fd = ev.phi(math.exp(c)), ev.phi(math.exp(d))
    iters = 0
    while b - a > tol and iters < 200:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = ev.phi(math.exp(c))
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = ev.phi(math.exp(d))
        iters += 1

    lam_star = min(ev.cache, key=lambda lam: ev.cache[lam] / lam)
    if lam_star in ev.unconverged:
        raise ConvergenceError(f"eigen solve at the minimiser lambda={lam_star:.6g} did not converge "
                               f"(residual {ev.unconverged[lam_star]:.2e})")
    k_star = ev.cache[lam_star]
    c_star = k_star / lam_star
    ends = [ev.phi(math.exp(a)), ev.phi(math.exp(b))]
    return SpeedResult(
        c_star=c_star, lambda_star=lam_star, k_at_star=k_star, scan=scan,
        refinement_iterations=iters, bracket_error=max(ends) - c_star, bracket_failure=failure,
        eigen_solves=ev.solves, eigen_iterations=ev.iterations, lambda_range=(lo, hi),
        diagnostics={"eig_tol": eig_tol, "tol": tol, "probes": probes, "grid": problem.n,
                     "unconverged": sorted(ev.unconverged)},
    )


def analytic_speed_constant(a: float, zeta: float, q1: float = 0.0) -> float:
    """``min_{lam>0} (a lam^2 - q1 lam + zeta)/lam = 2 sqrt(a zeta) - q1``."""
    if not (a > 0 and zeta > 0):
        raise ValueError(f"a and zeta must be positive, got a={a}, zeta={zeta}")
    return 2.0 * math.sqrt(a * zeta) - q1


def upper_bound(problem: Problem) -> float:
    """``max (q.e)^- + 2 sqrt(max zeta) sqrt(max eAe)``, all scales included."""
    zmax = problem.reaction * max_over_cell(problem.medium.zeta)
    amax = problem.diffusion * problem.eAe_max()
    return problem.negative_drift_max() + 2.0 * math.sqrt(zmax * amax)
