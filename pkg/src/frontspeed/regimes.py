"""Parameter sweeps of the minimal speed against its asymptotic limits.

Each sweep returns a ``SweepTable``: one row per parameter value with the
computed quantity, the limit it should approach, the relative error, any
non-asymptotic bounds that must hold row by row, and a monotonicity verdict.
Sweeps whose structural hypotheses fail raise ``HypothesisError`` unless
``override=True``.
"""
from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from .medium import (CellMedium2D, LineMedium, ShearMedium, cell_average, harmonic_mean,
                     max_over_cell, medium_hash, validate)
from .speed import (CellProblem, LineProblem, Problem, ShearProblem, SpeedResult, make_problem,
                    minimal_speed)

MONOTONE_SLACK = 1e-9
BOUND_SLACK = 1e-8
CSV_HEADER = ("parameter", "value", "quantity", "theory_limit", "rel_error")


class HypothesisError(ValueError):
    """A sweep was asked to run on a medium outside its theorem's hypotheses."""

    def __init__(self, message: str, diagnostic: dict[str, Any] | None = None) -> None:
        super().__init__(message)
        self.diagnostic = diagnostic or {}


def worker_count() -> int:
    """Threads for independent sweep rows, from ``FRONTSPEED_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("FRONTSPEED_THREADS", "1")))
    except ValueError:
        return 1


def _map_rows(fn: Callable[[float], SpeedResult], values: Sequence[float]) -> list[SpeedResult]:
    workers = min(worker_count(), len(values))
    if workers <= 1:
        return [fn(v) for v in values]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, values))


def _pow2_at_least(x: float) -> int:
    return 1 << max(2, math.ceil(math.log2(max(x, 4.0))))


def resolution_for_width(width: float, base: int = 128, cells: int = 8) -> int:
    """Grid size so that a layer of the given width (in cell units) spans ``cells`` cells.

    Each sweep row gets its own grid: a finer grid than needed slows the
    power iteration (the shift grows like ``eps n^2`` while the gap does not).
    """
    return max(base, _pow2_at_least(cells / width))


@dataclass
class MonotoneVerdict:
    ok: bool
    expected: str
    violations: list[tuple[int, float, float]] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.ok


@dataclass
class SweepTable:
    """Rows of a parameter sweep.

    ``limits`` holds the theoretical limit attached to each row; ``bounds``
    maps a bound name to ``(kind, values)`` with kind "upper" or "lower",
    each of which must hold row by row.
    """

    parameter: str
    values: list[float]
    quantity: str
    results: list[float]
    limits: list[float]
    limit_tag: str
    expected_direction: str | None = None
    bounds: dict[str, tuple[str, list[float]]] = field(default_factory=dict)
    speeds: list[SpeedResult] = field(default_factory=list)
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not (len(self.values) == len(self.results) == len(self.limits)):
            raise ValueError("values, results and limits must have equal length")

    @property
    def limit(self) -> float:
        return self.limits[-1]

    @property
    def rel_errors(self) -> list[float]:
        return [abs(q - lim) / abs(lim) if lim and math.isfinite(lim) else math.nan
                for q, lim in zip(self.results, self.limits)]

    @property
    def extrapolated(self) -> float:
        """Aitken delta-squared estimate from the last three rows (last value if degenerate)."""
        if len(self.results) < 3:
            return self.results[-1] if self.results else math.nan
        x0, x1, x2 = self.results[-3:]
        denom = (x2 - x1) - (x1 - x0)
        if denom == 0.0:
            return x2
        est = x2 - (x2 - x1) ** 2 / denom
        # an estimate far outside the data range signals a non-geometric tail
        spread = max(abs(x2 - x1), abs(x1 - x0))
        if not math.isfinite(est) or abs(est - x2) > 10.0 * spread:
            return x2
        return est

    @property
    def monotone(self) -> MonotoneVerdict | None:
        if self.expected_direction is None or len(self.results) < 2:
            return None
        return check_monotone(self, self.expected_direction)

    def bound_violations(self, slack: float = BOUND_SLACK) -> list[tuple[str, int, float, float]]:
        out = []
        for name, (kind, vals) in self.bounds.items():
            for i, (q, b) in enumerate(zip(self.results, vals)):
                if (kind == "upper" and q > b + slack) or (kind == "lower" and q < b - slack):
                    out.append((name, i, q, b))
        return out

    def rows(self) -> list[tuple[str, float, float, float, float]]:
        return [(self.parameter, v, q, lim, e)
                for v, q, lim, e in zip(self.values, self.results, self.limits, self.rel_errors)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for p, v, q, lim, e in self.rows():
            w.writerow([p, _fmt(v), _fmt(q), _fmt(lim), _fmt(e)])
        return buf.getvalue()

    def to_json(self) -> dict[str, Any]:
        verdict = self.monotone
        return {
            "parameter": self.parameter,
            "quantity": self.quantity,
            "limit_tag": self.limit_tag,
            "rows": [{"value": v, "quantity": q, "theory_limit": _num(lim), "rel_error": _num(e)}
                     for _, v, q, lim, e in self.rows()],
            "extrapolated": _num(self.extrapolated),
            "bounds": {k: {"kind": kind, "values": list(vals)} for k, (kind, vals) in self.bounds.items()},
            "bound_violations": [list(b) for b in self.bound_violations()],
            "monotone": None if verdict is None else {
                "expected": verdict.expected, "ok": verdict.ok,
                "violations": [list(v) for v in verdict.violations]},
            "speeds": [{"lambda_star": s.lambda_star, "bracket_failure": s.bracket_failure,
                        "unconverged_probes": s.unconverged_probes} for s in self.speeds],
            "meta": dict(self.meta),
        }


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _num(x: float) -> float | None:
    return x if math.isfinite(x) else None


def check_monotone(table: SweepTable | Sequence[float], expected: str,
                   slack: float = MONOTONE_SLACK) -> MonotoneVerdict:
    """Non-strict monotonicity within ``slack * max|value|``; violations carry row indices."""
    if expected not in ("increasing", "decreasing"):
        raise ValueError(f"expected must be 'increasing' or 'decreasing', got {expected!r}")
    vals = list(table.results if isinstance(table, SweepTable) else table)
    if len(vals) < 2:
        raise ValueError("need at least two rows")
    tol = slack * max(abs(v) for v in vals)
    sign = 1.0 if expected == "increasing" else -1.0
    bad = [(i, a, b) for i, (a, b) in enumerate(zip(vals, vals[1:])) if sign * (b - a) < -tol]
    return MonotoneVerdict(not bad, expected, bad)


def _check_sequence(values: Sequence[float], name: str, direction: str | None = None) -> list[float]:
    vals = [float(v) for v in values]
    if not vals:
        raise ValueError(f"{name} list is empty")
    if any(not (v > 0 and math.isfinite(v)) for v in vals):
        raise ValueError(f"{name} values must be positive and finite")
    if direction == "decreasing" and any(b >= a for a, b in zip(vals, vals[1:])):
        raise ValueError(f"{name} values must be strictly decreasing")
    if direction == "increasing" and any(b <= a for a, b in zip(vals, vals[1:])):
        raise ValueError(f"{name} values must be strictly increasing")
    return vals


def _refuse(override: bool, message: str, diagnostic: dict[str, Any] | None = None) -> None:
    if not override:
        raise HypothesisError(message, diagnostic)


def _as_problem(medium_or_problem: Any, n: Any = None) -> Problem:
    if isinstance(medium_or_problem, (LineProblem, ShearProblem, CellProblem)):
        return medium_or_problem if n is None else medium_or_problem.with_grid(n)
    return make_problem(medium_or_problem, n)


def _meta(problem: Problem, **extra: Any) -> dict[str, Any]:
    return {"medium_hash": medium_hash(problem.medium), "grid": problem.n, **extra}


def _max_limit(medium: ShearMedium | LineMedium) -> float:
    eae = medium.alpha if isinstance(medium, ShearMedium) else medium.a
    return 2.0 * math.sqrt(max_over_cell(medium.zeta) * max_over_cell(eae))


def _mean_limit(medium: Any) -> float:
    if isinstance(medium, ShearMedium):
        eae = medium.alpha
    elif isinstance(medium, CellMedium2D):
        eae = medium.eAe
    else:
        eae = medium.a
    return 2.0 * math.sqrt(cell_average(eae) * cell_average(medium.zeta))


def _speed_rows(problems: Iterable[Problem], tol: float) -> list[SpeedResult]:
    plist = list(problems)
    return _map_rows(lambda i: minimal_speed(plist[int(i)], tol=tol), list(range(len(plist))))


# small diffusion ----------------------------------------------------------------

def sweep_small_diffusion(medium: ShearMedium, eps: Sequence[float], n: int | None = None,
                          tol: float = 1e-6, override: bool = False) -> SweepTable:
    """``c*(eps)/sqrt(eps)`` against ``2 sqrt(max zeta) sqrt(max alpha)`` as ``eps -> 0``."""
    eps = _check_sequence(eps, "eps", "decreasing")
    if medium.has_shear:
        _refuse(override, "small-diffusion limit without advection: medium has a shear flow")
    if medium.alternative() is None:
        _refuse(override, "neither alpha nor zeta is constant", {"alternative": None})
    base = ShearProblem(medium=medium, n=n or 128)
    grids = [n or resolution_for_width(math.sqrt(e)) for e in eps]
    speeds = _speed_rows((base.with_grid(g).rescaled(diffusion=e) for e, g in zip(eps, grids)), tol)
    limit = _max_limit(medium)
    results = [s.c_star / math.sqrt(e) for s, e in zip(speeds, eps)]
    return SweepTable(
        "eps", eps, "c*/sqrt(eps)", results, [limit] * len(eps),
        "small-diffusion limit 2 sqrt(max zeta) sqrt(max alpha)", "increasing",
        bounds={"max_bound": ("upper", [limit] * len(eps))}, speeds=speeds,
        meta=_meta(base, tol=tol, grids=grids, alternative=medium.alternative()))


def sweep_small_diffusion_shear(medium: ShearMedium, eps: Sequence[float], n: int | None = None,
                                tol: float = 1e-6, override: bool = False) -> SweepTable:
    """``c*(eps)`` against ``max(-q1)`` as ``eps -> 0`` in a shear flow."""
    eps = _check_sequence(eps, "eps", "decreasing")
    if medium.q1 is None or not medium.has_shear:
        raise HypothesisError("shear-flow limit needs a non-zero shear flow q1")
    base = ShearProblem(medium=medium, n=n or 128)
    grids = [n or resolution_for_width(math.sqrt(e)) for e in eps]
    speeds = _speed_rows((base.with_grid(g).rescaled(diffusion=e) for e, g in zip(eps, grids)), tol)
    limit = max_over_cell(medium.q1.scaled(-1.0))
    spread = 2.0 * math.sqrt(max_over_cell(medium.alpha) * max_over_cell(medium.zeta))
    upper = [limit + spread * math.sqrt(e) for e in eps]
    results = [s.c_star for s in speeds]
    return SweepTable(
        "eps", eps, "c*", results, [limit] * len(eps), "shear-flow limit max(-q1)", None,
        bounds={"upper": ("upper", upper)}, speeds=speeds, meta=_meta(base, tol=tol, grids=grids))


# large diffusion / homogenisation ------------------------------------------------

def _require_div_free(medium: CellMedium2D, override: bool) -> None:
    diag = validate(medium)
    if not diag.hypotheses.get("div_A_e_free", False):
        _refuse(override, f"div(A e) does not vanish (residual {diag.div_Ae_residual:.3e})", diag.to_dict())


def sweep_large_diffusion(medium: CellMedium2D | ShearMedium, M: Sequence[float], gamma: float = 0.0,
                          n: Any = 64, tol: float = 1e-6, override: bool = False) -> SweepTable:
    """``c*(M A, M^gamma q)/sqrt(M)`` against ``2 sqrt(mean eAe) sqrt(mean zeta)``."""
    M = _check_sequence(M, "M", "increasing")
    if not 0.0 <= gamma <= 0.5:
        raise ValueError(f"gamma must lie in [0, 1/2], got {gamma}")
    cell = medium.as_cell() if isinstance(medium, ShearMedium) else medium
    _require_div_free(cell, override)
    base = CellProblem(medium=cell, n=n)
    speeds = _speed_rows((base.rescaled(diffusion=m, advection=m**gamma) for m in M), tol)
    limit = _mean_limit(cell)
    results = [s.c_star / math.sqrt(m) for s, m in zip(speeds, M)]
    return SweepTable(
        "M", M, "c*/sqrt(M)", results, [limit] * len(M),
        "large-diffusion limit 2 sqrt(mean eAe) sqrt(mean zeta)", None,
        bounds={"mean_bound": ("lower", [limit] * len(M))}, speeds=speeds,
        meta=_meta(base, tol=tol, gamma=gamma))


def homogenized_speed(medium: CellMedium2D | ShearMedium, eps: Sequence[float], n: Any = 64,
                      tol: float = 1e-6, override: bool = False) -> SweepTable:
    """Speed in the ``eps``-periodic medium, ``eps c*(A/eps^2, q/eps, f)``, as ``eps -> 0``.

    This is the large-diffusion sweep with ``M = 1/eps^2`` and ``gamma = 1/2``.
    The limit does not depend on the advection.
    """
    eps = _check_sequence(eps, "eps", "decreasing")
    table = sweep_large_diffusion(medium, [1.0 / e**2 for e in eps], 0.5, n, tol, override)
    return SweepTable(
        "eps", eps, "c*_eps", table.results, table.limits,
        "homogenized speed 2 sqrt(mean eAe) sqrt(mean zeta)", None,
        bounds={"mean_bound": ("lower", table.limits)}, speeds=table.speeds,
        meta=dict(table.meta, limit_depends_on_advection=False))


# reaction factor -----------------------------------------------------------------

def sweep_reaction(medium: ShearMedium | CellMedium2D, B: Sequence[float], mode: str = "to-infinity",
                   gamma: float = 0.5, n: Any = None, tol: float = 1e-6,
                   override: bool = False) -> SweepTable:
    """``c*(B zeta)/sqrt(B)`` as ``B -> infinity`` or ``B -> 0``.

    to-infinity: shear medium without flow; limit ``2 sqrt(max zeta) sqrt(max eAe)``.
    to-zero: run on the 2D cell embedding with advection ``B^gamma q``
    (``gamma >= 1/2``); limit ``2 sqrt(mean eAe) sqrt(mean zeta)``.
    """
    if mode == "to-infinity":
        B = _check_sequence(B, "B", "increasing")
        if not isinstance(medium, ShearMedium):
            raise HypothesisError("the large-reaction limit is implemented for shear media")
        if medium.has_shear:
            _refuse(override, "large-reaction limit needs a medium without advection")
        if medium.alternative() is None:
            _refuse(override, "neither alpha nor zeta is constant", {"alternative": None})
        # B zeta with unit diffusion is eps = 1/B after rescaling time: boundary layer 1/sqrt(B)
        base: Problem = ShearProblem(medium=medium, n=n or 128)
        grids = [n or resolution_for_width(1.0 / math.sqrt(b)) for b in B]
        speeds = _speed_rows((base.with_grid(g).rescaled(reaction=b) for b, g in zip(B, grids)), tol)
        limit = _max_limit(medium)
        results = [s.c_star / math.sqrt(b) for s, b in zip(speeds, B)]
        strict = not (medium.zeta.is_constant and medium.alpha.is_constant)
        return SweepTable(
            "B", B, "c*/sqrt(B)", results, [limit] * len(B),
            "large-reaction limit 2 sqrt(max zeta) sqrt(max alpha)", "increasing",
            bounds={"max_bound": ("upper", [limit] * len(B))}, speeds=speeds,
            meta=_meta(base, tol=tol, grids=grids, mode=mode, strict_below_limit=strict))
    if mode == "to-zero":
        B = _check_sequence(B, "B", "decreasing")
        if gamma < 0.5:
            raise ValueError(f"gamma must be >= 1/2 for the small-reaction limit, got {gamma}")
        cell = medium.as_cell() if isinstance(medium, ShearMedium) else medium
        _require_div_free(cell, override)
        base = CellProblem(medium=cell, n=n or 64)
        speeds = _speed_rows((base.rescaled(reaction=b, advection=b**gamma) for b in B), tol)
        limit = _mean_limit(cell)
        results = [s.c_star / math.sqrt(b) for s, b in zip(speeds, B)]
        return SweepTable(
            "B", B, "c*/sqrt(B)", results, [limit] * len(B),
            "small-reaction limit 2 sqrt(mean eAe) sqrt(mean zeta)", None,
            bounds={"mean_bound": ("lower", [limit] * len(B))}, speeds=speeds,
            meta=_meta(base, tol=tol, mode=mode, gamma=gamma))
    raise ValueError(f"mode must be 'to-infinity' or 'to-zero', got {mode!r}")


# scaling families ----------------------------------------------------------------

def scaled_speed_by_period(problem: Problem | Any, L: float, tol: float = 1e-6) -> float:
    """Speed for coefficients of period ``L``: ``L * c*(A/L^2, q/L, f)`` on the unit cell."""
    return _period_speed(_as_problem(problem), L, tol)[0]


def _period_speed(problem: Problem, L: float, tol: float) -> tuple[float, SpeedResult]:
    if not (L > 0 and math.isfinite(L)):
        raise ValueError(f"L must be positive, got {L}")
    res = minimal_speed(problem.rescaled(diffusion=1.0 / L**2, advection=1.0 / L), tol=tol)
    return L * res.c_star, res


def _period_limits(problem: Problem) -> tuple[float, float, str]:
    m = problem.medium
    if isinstance(m, LineMedium):
        small = 2.0 * math.sqrt(harmonic_mean(m.a) * cell_average(m.zeta))
        large = _max_limit(m)
        note = "" if m.a.is_constant else "large-period value assumes constant diffusion"
        return small, large, note
    if isinstance(m, ShearMedium):
        small = _mean_limit(m)
        large = math.nan if m.has_shear else _max_limit(m)
        return small, large, "no large-period limit with fixed-amplitude flow" if m.has_shear else ""
    small = _mean_limit(m) if validate(m).hypotheses.get("div_A_e_free") else math.nan
    return small, math.nan, "no large-period limit for general cell media"


def sweep_period(problem: Problem | Any, L: Sequence[float], tol: float = 1e-6,
                 n: int | None = None) -> SweepTable:
    """``c*(L)`` for coefficients of period ``L``.

    Rows with ``L < 1`` are compared with the small-period limit and rows with
    ``L >= 1`` with the large-period limit. One grid serves the whole sweep,
    fine enough for the largest period (layer width ``1/L`` over 8 cells).
    """
    L = _check_sequence(L, "L")
    if any(b <= a for a, b in zip(L, L[1:])):
        raise ValueError("L values must be strictly increasing")
    problem = _as_problem(problem)
    if n is None and not isinstance(problem, CellProblem):
        n = max(problem.n, resolution_for_width(1.0 / max(L)))
    if n is not None:
        problem = problem.with_grid(n)
    pairs = _map_rows(lambda l: _period_speed(problem, l, tol), L)
    small, large, note = _period_limits(problem)
    limits = [small if l < 1.0 else large for l in L]
    m = problem.medium
    expected = None
    if isinstance(m, ShearMedium) and not (m.zeta.is_constant and m.alpha.is_constant):
        expected = "increasing"
    return SweepTable(
        "L", L, "c*(L)", [p[0] for p in pairs], limits,
        "small-period mean limit / large-period max limit", expected,
        speeds=[p[1] for p in pairs],
        meta=_meta(problem, tol=tol, small_period_limit=_num(small), large_period_limit=_num(large),
                   note=note))


def sweep_diffusion_factor(problem: Problem | Any, beta: Sequence[float], tol: float = 1e-6) -> SweepTable:
    """``c*(beta A, sqrt(beta) q)/sqrt(beta)``; non-increasing in ``beta``."""
    beta = _check_sequence(beta, "beta", "increasing")
    problem = _as_problem(problem)
    speeds = _speed_rows((problem.rescaled(diffusion=b, advection=math.sqrt(b)) for b in beta), tol)
    results = [s.c_star / math.sqrt(b) for s, b in zip(speeds, beta)]
    limits = [_mean_limit(problem.medium)] * len(beta)
    return SweepTable("beta", beta, "c*/sqrt(beta)", results, limits,
                      "large-diffusion mean limit", "decreasing", speeds=speeds,
                      meta=_meta(problem, tol=tol))


def sweep_reaction_factor(problem: Problem | Any, B: Sequence[float], tol: float = 1e-6) -> SweepTable:
    """``c*(sqrt(B) q, B zeta)/sqrt(B)``; non-decreasing in ``B``."""
    B = _check_sequence(B, "B", "increasing")
    problem = _as_problem(problem)
    speeds = _speed_rows((problem.rescaled(reaction=b, advection=math.sqrt(b)) for b in B), tol)
    results = [s.c_star / math.sqrt(b) for s, b in zip(speeds, B)]
    m = problem.medium
    lim = _max_limit(m) if isinstance(m, (ShearMedium, LineMedium)) and not getattr(m, "has_shear", False) \
        else math.nan
    return SweepTable("B", B, "c*/sqrt(B)", results, [lim] * len(B),
                      "large-reaction max limit", "increasing", speeds=speeds,
                      meta=_meta(problem, tol=tol))


def geometric(start: float, stop: float, count: int) -> list[float]:
    """``count`` geometrically spaced values from ``start`` to ``stop`` inclusive."""
    return [float(v) for v in np.geomspace(start, stop, count)]
