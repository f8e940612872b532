"""Periodic coefficient fields and complete problem media.

Fields are sampled at cell-centred (midpoint) nodes throughout, so cell
averages are midpoint-rule quadratures and match the finite-volume assembly.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np

PROFILE_KINDS = ("constant", "cosine", "inverse_cosine", "sine_product", "samples")
ZERO_AVERAGE_RTOL = 1e-12
DIV_FREE_TOL = 1e-10
CHECK_N = 512

_TWO_PI = 2.0 * math.pi


class MediumError(ValueError):
    """A medium violates one of its structural hypotheses."""

    def __init__(self, message: str, path: str | None = None) -> None:
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


def _check_n(n: int) -> int:
    if int(n) != n or n < 4:
        raise ValueError(f"grid size must be an integer >= 4, got {n}")
    return int(n)


def midpoints(n: int, length: float = 1.0) -> np.ndarray:
    """Cell-centred nodes ``(j + 1/2) * length / n``."""
    return (np.arange(n) + 0.5) * (length / n)


@dataclass(frozen=True)
class CoefficientField:
    """A periodic scalar profile on a 1D or 2D cell.

    ``periods`` has one entry per dimension. In 2D, ``axis`` ("x" or "y")
    makes the profile depend on that coordinate only; otherwise cosine and
    sine profiles are tensor products of the two directions.
    """

    kind: str
    params: tuple[float, ...]
    periods: tuple[float, ...] = (1.0,)
    axis: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        object.__setattr__(self, "periods", tuple(float(p) for p in self.periods))
        if self.kind not in PROFILE_KINDS:
            raise MediumError(f"unknown profile kind {self.kind!r}", "kind")
        if len(self.periods) not in (1, 2):
            raise MediumError("fields are 1D or 2D", "periods")
        for i, p in enumerate(self.periods):
            if not (p > 0 and math.isfinite(p)):
                raise MediumError(f"must be a positive length, got {p}", f"periods[{i}]")
        if self.axis not in (None, "x", "y"):
            raise MediumError(f"must be 'x', 'y' or absent, got {self.axis!r}", "axis")
        if self.axis is not None and self.dimension == 1:
            raise MediumError("only applies to 2D fields", "axis")
        if not all(math.isfinite(p) for p in self.params):
            raise MediumError("must be finite", "params")
        nparams = {"constant": 1, "cosine": 2, "inverse_cosine": 2, "sine_product": 2}
        if self.kind in nparams and len(self.params) != nparams[self.kind]:
            raise MediumError(f"{self.kind} takes {nparams[self.kind]} values, got {len(self.params)}", "params")
        if self.kind == "samples" and len(self.params) < 4:
            raise MediumError("samples profile needs at least 4 values", "params")
        if self.kind == "inverse_cosine" and self.params[0] - abs(self.params[1]) <= 0:
            raise MediumError("inverse_cosine requires c0 > |c1|", "params")
        if self.dimension == 2 and self.axis is None and self.kind in ("inverse_cosine", "samples"):
            raise MediumError(f"2D {self.kind} profiles need an axis", "axis")

    @classmethod
    def constant(cls, c: float, periods: Sequence[float] = (1.0,)) -> "CoefficientField":
        return cls("constant", (c,), tuple(periods))

    @classmethod
    def cosine(cls, c0: float, c1: float, periods: Sequence[float] = (1.0,),
               axis: str | None = None) -> "CoefficientField":
        return cls("cosine", (c0, c1), tuple(periods), axis)

    @classmethod
    def inverse_cosine(cls, c0: float, c1: float, periods: Sequence[float] = (1.0,),
                       axis: str | None = None) -> "CoefficientField":
        return cls("inverse_cosine", (c0, c1), tuple(periods), axis)

    @classmethod
    def sine_product(cls, c0: float, c1: float, periods: Sequence[float] = (1.0, 1.0),
                     axis: str | None = None) -> "CoefficientField":
        return cls("sine_product", (c0, c1), tuple(periods), axis)

    @classmethod
    def samples(cls, values: Sequence[float], periods: Sequence[float] = (1.0,),
                axis: str | None = None) -> "CoefficientField":
        return cls("samples", tuple(values), tuple(periods), axis)

    @classmethod
    def from_json(cls, obj: Mapping[str, Any], periods: Sequence[float],
                  path: str = "field") -> "CoefficientField":
        if not isinstance(obj, Mapping):
            raise MediumError("profile must be an object", path)
        unknown = set(obj) - {"kind", "params", "axis"}
        if unknown:
            raise MediumError(f"unknown keys {sorted(unknown)}", path)
        if "kind" not in obj or "params" not in obj:
            raise MediumError("profile needs 'kind' and 'params'", path)
        params = obj["params"]
        if not isinstance(params, list) or not all(
                isinstance(p, (int, float)) and not isinstance(p, bool) for p in params):
            raise MediumError("must be a list of numbers", f"{path}.params")
        try:
            return cls(obj["kind"], tuple(params), tuple(periods), obj.get("axis"))
        except MediumError as err:
            raise MediumError(str(err).split(": ", 1)[-1], f"{path}.{err.path or 'kind'}") from None

    @property
    def dimension(self) -> int:
        return len(self.periods)

    @property
    def is_constant(self) -> bool:
        if self.kind == "constant":
            return True
        if self.kind == "samples":
            return bool(np.ptp(self.params) == 0.0)
        return self.params[1] == 0.0

    def scaled(self, factor: float) -> "CoefficientField":
        """Return ``factor * field``."""
        factor = float(factor)
        if self.kind == "inverse_cosine":
            if factor <= 0:
                raise MediumError("inverse_cosine profiles only scale by positive factors")
            c0, c1 = self.params
            return CoefficientField(self.kind, (c0 / factor, c1 / factor), self.periods, self.axis)
        return CoefficientField(self.kind, tuple(factor * p for p in self.params), self.periods, self.axis)

    def extrude(self, axis: str, other_period: float = 1.0) -> "CoefficientField":
        """Lift a 1D profile to a 2D field that depends on ``axis`` only."""
        if self.dimension != 1:
            raise MediumError("only 1D fields can be extruded")
        if axis not in ("x", "y"):
            raise MediumError(f"axis must be 'x' or 'y', got {axis!r}")
        periods = (self.periods[0], other_period) if axis == "x" else (other_period, self.periods[0])
        if self.kind == "constant":
            return CoefficientField("constant", self.params, periods)
        return CoefficientField(self.kind, self.params, periods, axis)

    def _profile_1d(self, s: np.ndarray, period: float) -> np.ndarray:
        k, p = self.kind, self.params
        if k == "constant":
            return np.full(np.shape(s), p[0])
        if k == "cosine":
            return p[0] + p[1] * np.cos(_TWO_PI * s / period)
        if k == "inverse_cosine":
            return 1.0 / (p[0] + p[1] * np.cos(_TWO_PI * s / period))
        if k == "sine_product":
            return p[0] + p[1] * np.sin(_TWO_PI * s / period)
        # samples sit at cell centres; interpolate linearly with wrap-around
        vals = np.asarray(p)
        m = len(vals)
        t = np.mod(np.asarray(s) / period * m - 0.5, m)
        i0 = np.floor(t).astype(int)
        w = t - i0
        return (1.0 - w) * vals[i0 % m] + w * vals[(i0 + 1) % m]

    def evaluate(self, x: Any, y: Any = None) -> np.ndarray:
        """Evaluate at points; ``y`` is required in 2D and broadcasting applies."""
        x = np.asarray(x, dtype=float)
        if self.dimension == 1:
            return self._profile_1d(x, self.periods[0])
        if y is None:
            raise ValueError("2D field needs both x and y")
        x, y = np.broadcast_arrays(x, np.asarray(y, dtype=float))
        if self.kind == "constant":
            return np.full(x.shape, self.params[0])
        if self.axis == "x":
            return self._profile_1d(x, self.periods[0])
        if self.axis == "y":
            return self._profile_1d(y, self.periods[1])
        c0, c1 = self.params
        l1, l2 = self.periods
        if self.kind == "cosine":
            return c0 + c1 * np.cos(_TWO_PI * x / l1) * np.cos(_TWO_PI * y / l2)
        return c0 + c1 * np.sin(_TWO_PI * x / l1) * np.sin(_TWO_PI * y / l2)

    def primitive(self) -> "CoefficientField":
        """Periodic primitive of a zero-mean 1D profile (used to build stream functions)."""
        if self.dimension != 1:
            raise MediumError("primitive is defined for 1D profiles")
        L = self.periods[0]
        if self.is_constant and self.params[0] == 0.0:
            return CoefficientField.constant(0.0, self.periods)
        if self.kind == "cosine" and self.params[0] == 0.0:
            return CoefficientField("sine_product", (0.0, self.params[1] * L / _TWO_PI), self.periods)
        if self.kind == "sine_product" and self.params[0] == 0.0:
            return CoefficientField("cosine", (0.0, -self.params[1] * L / _TWO_PI), self.periods)
        raise MediumError(f"no closed-form primitive for {self.kind} profile {list(self.params)}")

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"kind": self.kind, "params": list(self.params)}
        if self.axis is not None:
            d["axis"] = self.axis
        return d


def _grid_shape(f: CoefficientField, n: int | Sequence[int]) -> tuple[int, ...]:
    if np.ndim(n) == 0:
        return (_check_n(n),) * f.dimension
    shape = tuple(_check_n(m) for m in n)
    if len(shape) != f.dimension:
        raise ValueError(f"need {f.dimension} grid sizes, got {len(shape)}")
    return shape


def sample_field(f: CoefficientField, n: int | Sequence[int]) -> np.ndarray:
    """Values at cell-centred nodes over one period.

    Returns shape ``(n,)`` in 1D and ``(n1, n2)`` in 2D, indexed ``[i, j]``
    with ``i`` along x.
    """
    shape = _grid_shape(f, n)
    if f.dimension == 1:
        return f.evaluate(midpoints(shape[0], f.periods[0]))
    x = midpoints(shape[0], f.periods[0])[:, None]
    y = midpoints(shape[1], f.periods[1])[None, :]
    return f.evaluate(x, y)


def cell_average(f: CoefficientField, n: int | Sequence[int] = CHECK_N) -> float:
    """Midpoint-rule cell average."""
    if f.kind == "constant":
        return f.params[0]
    return float(np.mean(sample_field(f, n)))


def harmonic_mean(f: CoefficientField, n: int | Sequence[int] = CHECK_N) -> float:
    """``1 / mean(1/f)`` by the midpoint rule."""
    s = sample_field(f, n)
    if np.any(s <= 0):
        raise MediumError("harmonic mean needs a strictly positive field")
    if f.kind == "constant":
        return f.params[0]
    return float(1.0 / np.mean(1.0 / s))


def _extreme(f: CoefficientField, sign: float) -> float:
    # exact for every profile kind: the oscillating factor spans [-1, 1]
    p = f.params
    if f.kind == "constant":
        return p[0]
    if f.kind == "samples":
        # linear interpolation between samples attains its extremes at the samples
        return max(p) if sign > 0 else min(p)
    if f.kind == "inverse_cosine":
        return 1.0 / (p[0] - sign * abs(p[1]))
    return p[0] + sign * abs(p[1])


def max_over_cell(f: CoefficientField) -> float:
    """Supremum of the profile over one period (closed form)."""
    return float(_extreme(f, 1.0))


def min_over_cell(f: CoefficientField) -> float:
    return float(_extreme(f, -1.0))


def _require_positive(f: CoefficientField, name: str) -> None:
    lo = min_over_cell(f)
    if not lo > 0:
        raise MediumError(f"must be strictly positive, minimum sample {lo:g}", name)


# reaction ---------------------------------------------------------------------

SHAPES: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "logistic": lambda s: s * (1.0 - s),
    "cubic": lambda s: s * (1.0 - s) * (1.0 + s),
}


@dataclass(frozen=True)
class ReactionProfile:
    """Nonlinearity ``f(x, s) = zeta(x) * g(s)`` with ``g(0) = g(1) = 0``."""

    zeta: CoefficientField
    shape: str = "logistic"

    def __post_init__(self) -> None:
        if self.shape not in SHAPES:
            raise MediumError(f"unknown reaction shape {self.shape!r}", "reaction_shape")

    def g(self, s: Any) -> np.ndarray:
        return SHAPES[self.shape](np.asarray(s, dtype=float))

    def slope0(self, h: float = 1e-7) -> float:
        return float(self.g(h) / h)

    def check_kpp(self, samples: int = 1000) -> bool:
        """``0 < g(s) <= g'(0) s`` on an interior sample of (0, 1)."""
        s = np.linspace(0.0, 1.0, samples + 2)[1:-1]
        g = self.g(s)
        return bool(np.all(g > 0) and np.all(g <= self.slope0() * s * (1 + 1e-12)))

    def __call__(self, x: Any, s: Any) -> np.ndarray:
        return self.zeta.evaluate(x) * self.g(s)


# media ------------------------------------------------------------------------

@dataclass(frozen=True)
class LineMedium:
    """1D periodic medium: diffusion ``a(x)``, reaction slope ``zeta(x)``, no advection."""

    a: CoefficientField
    zeta: CoefficientField
    reaction_shape: str = "logistic"

    def __post_init__(self) -> None:
        for name in ("a", "zeta"):
            f = getattr(self, name)
            if f.dimension != 1:
                raise MediumError("line media use 1D fields", name)
        if self.a.periods != self.zeta.periods:
            raise MediumError("a and zeta must share the period", "zeta")
        _require_positive(self.a, "a")
        _require_positive(self.zeta, "zeta")
        ReactionProfile(self.zeta, self.reaction_shape)

    @property
    def period(self) -> float:
        return self.a.periods[0]

    @property
    def reaction(self) -> ReactionProfile:
        return ReactionProfile(self.zeta, self.reaction_shape)

    def to_dict(self) -> dict[str, Any]:
        return {"geometry": "line", "dimension": 1, "periods": [self.period],
                "fields": {"a": self.a.to_dict()}, "zeta": self.zeta.to_dict(),
                "q1": None, "stream_function": None, "reaction_shape": self.reaction_shape}


@dataclass(frozen=True)
class ShearMedium:
    """Cylinder medium with coefficients depending on the cross-section variable only.

    ``alpha`` is the diffusion along the propagation direction, ``d`` the
    cross-section diffusion, ``q1`` an optional shear flow along the
    propagation direction. ``q1`` must have zero average unless
    ``waive_zero_average`` is set.
    """

    alpha: CoefficientField
    d: CoefficientField
    zeta: CoefficientField
    q1: CoefficientField | None = None
    reaction_shape: str = "logistic"
    waive_zero_average: bool = False

    def __post_init__(self) -> None:
        fields = {"alpha": self.alpha, "d": self.d, "zeta": self.zeta}
        if self.q1 is not None:
            fields["q1"] = self.q1
        for name, f in fields.items():
            if f.dimension != 1:
                raise MediumError("shear media use 1D cross-section fields", name)
            if f.periods != self.alpha.periods:
                raise MediumError("all fields must share the cross-section period", name)
        for name in ("alpha", "d", "zeta"):
            _require_positive(fields[name], name)
        if self.q1 is not None and not self.waive_zero_average:
            avg, scale = cell_average(self.q1), max(abs(max_over_cell(self.q1)), abs(min_over_cell(self.q1)))
            if abs(avg) > ZERO_AVERAGE_RTOL * max(scale, 1e-300) and scale > 0:
                raise MediumError(f"shear flow must have zero average, got {avg:g}", "q1")
        ReactionProfile(self.zeta, self.reaction_shape)

    @property
    def period(self) -> float:
        return self.alpha.periods[0]

    @property
    def has_shear(self) -> bool:
        return self.q1 is not None and not (self.q1.is_constant and self.q1.params[0] == 0.0)

    @property
    def reaction(self) -> ReactionProfile:
        return ReactionProfile(self.zeta, self.reaction_shape)

    def alternative(self) -> str | None:
        """Which small-diffusion alternative holds: "alpha-constant", "zeta-constant" or None."""
        if self.alpha.is_constant:
            return "alpha-constant"
        if self.zeta.is_constant:
            return "zeta-constant"
        return None

    def with_shear(self, q1: CoefficientField | None, waive_zero_average: bool | None = None) -> "ShearMedium":
        waive = self.waive_zero_average if waive_zero_average is None else waive_zero_average
        return ShearMedium(self.alpha, self.d, self.zeta, q1, self.reaction_shape, waive)

    def as_cell(self, x_period: float = 1.0) -> "CellMedium2D":
        """Embed as a 2D cell medium with coefficients depending on y only."""
        H = None
        if self.has_shear:
            # q = (dH/dy, -dH/dx) = (q1(y), 0)
            H = self.q1.primitive().extrude("y", x_period)
        return CellMedium2D(
            a11=self.alpha.extrude("y", x_period),
            a22=self.d.extrude("y", x_period),
            a12=CoefficientField.constant(0.0, (x_period, self.period)),
            zeta=self.zeta.extrude("y", x_period),
            stream_function=H,
            reaction_shape=self.reaction_shape,
        )

    def to_dict(self) -> dict[str, Any]:
        return {"geometry": "shear", "dimension": 1, "periods": [self.period],
                "fields": {"alpha": self.alpha.to_dict(), "d": self.d.to_dict()},
                "zeta": self.zeta.to_dict(),
                "q1": None if self.q1 is None else self.q1.to_dict(),
                "stream_function": None, "reaction_shape": self.reaction_shape}


@dataclass(frozen=True)
class CellMedium2D:
    """2D torus medium with symmetric diffusion tensor and stream-function advection.

    Advection is ``q = (dH/dy, -dH/dx)``; on the grid it is taken from vertex
    values of ``H`` so that face fluxes are exactly divergence-free.
    ``direction`` is restricted to the axis directions.
    """

    a11: CoefficientField
    a22: CoefficientField
    zeta: CoefficientField
    a12: CoefficientField | None = None
    stream_function: CoefficientField | None = None
    direction: tuple[float, float] = (1.0, 0.0)
    reaction_shape: str = "logistic"

    def __post_init__(self) -> None:
        object.__setattr__(self, "direction", tuple(float(c) for c in self.direction))
        if self.a12 is None:
            object.__setattr__(self, "a12", CoefficientField.constant(0.0, self.periods))
        fields = {"a11": self.a11, "a22": self.a22, "a12": self.a12, "zeta": self.zeta}
        if self.stream_function is not None:
            fields["stream_function"] = self.stream_function
        for name, f in fields.items():
            if f.dimension != 2:
                raise MediumError("cell media use 2D fields", name)
            if f.periods != self.periods:
                raise MediumError("all fields must share the periods", name)
        if self.direction not in ((1.0, 0.0), (0.0, 1.0)):
            raise MediumError("only the axis directions (1,0) and (0,1) are supported", "direction")
        _require_positive(self.zeta, "zeta")
        a11, a22, a12 = (sample_field(f, CHECK_N // 4) for f in (self.a11, self.a22, self.a12))
        if np.any(a11 <= 0) or np.any(a11 * a22 - a12 ** 2 <= 0):
            raise MediumError("diffusion tensor is not uniformly elliptic", "fields")
        ReactionProfile(self.zeta, self.reaction_shape)

    @property
    def periods(self) -> tuple[float, float]:
        return self.a11.periods  # type: ignore[return-value]

    @property
    def reaction(self) -> ReactionProfile:
        return ReactionProfile(self.zeta, self.reaction_shape)

    @property
    def eAe(self) -> CoefficientField:
        return self.a11 if self.direction == (1.0, 0.0) else self.a22

    def with_stream_function(self, H: CoefficientField | None) -> "CellMedium2D":
        return CellMedium2D(self.a11, self.a22, self.zeta, self.a12, H, self.direction, self.reaction_shape)

    def vertex_stream(self, n1: int, n2: int) -> np.ndarray:
        """``H`` at vertices ``(i h1, j h2)``, shape ``(n1, n2)``."""
        if self.stream_function is None:
            return np.zeros((n1, n2))
        l1, l2 = self.periods
        x = np.arange(n1)[:, None] * (l1 / n1)
        y = np.arange(n2)[None, :] * (l2 / n2)
        return self.stream_function.evaluate(x, y)

    def face_velocities(self, n1: int, n2: int) -> tuple[np.ndarray, np.ndarray]:
        """Normal velocities on cell faces.

        ``u[i, j]`` is the x-velocity on the face left of cell ``(i, j)``,
        ``v[i, j]`` the y-velocity on the face below it.
        """
        l1, l2 = self.periods
        h1, h2 = l1 / n1, l2 / n2
        H = self.vertex_stream(n1, n2)
        u = (np.roll(H, -1, axis=1) - H) / h2
        v = -(np.roll(H, -1, axis=0) - H) / h1
        return u, v

    def to_dict(self) -> dict[str, Any]:
        return {"geometry": "cell", "dimension": 2, "periods": list(self.periods),
                "fields": {"a11": self.a11.to_dict(), "a22": self.a22.to_dict(), "a12": self.a12.to_dict()},
                "zeta": self.zeta.to_dict(),
                "stream_function": None if self.stream_function is None else self.stream_function.to_dict(),
                "q1": None, "direction": list(self.direction), "reaction_shape": self.reaction_shape}


Medium = LineMedium | ShearMedium | CellMedium2D


def harmonic_faces(c: np.ndarray, axis: int = 0) -> np.ndarray:
    """Harmonic average of each cell value with its lower neighbour along ``axis``.

    Entry ``i`` belongs to the face between cells ``i - 1`` and ``i``.
    """
    lo = np.roll(c, 1, axis=axis)
    return 2.0 * lo * c / (lo + c)


def discrete_divergence(u: np.ndarray, v: np.ndarray | None, h: Sequence[float]) -> np.ndarray:
    """Cell divergence of face fluxes laid out as in ``CellMedium2D.face_velocities``."""
    div = (np.roll(u, -1, axis=0) - u) / h[0]
    if v is not None:
        div = div + (np.roll(v, -1, axis=1) - v) / h[1]
    return div


def div_Ae_faces(medium: CellMedium2D, n1: int, n2: int) -> np.ndarray:
    """Discrete divergence of ``A e`` from the same face values used by the assembler."""
    l1, l2 = medium.periods
    h = (l1 / n1, l2 / n2)
    a11 = sample_field(medium.a11, (n1, n2))
    a22 = sample_field(medium.a22, (n1, n2))
    a12 = sample_field(medium.a12, (n1, n2))
    if medium.direction == (1.0, 0.0):
        fx = harmonic_faces(a11, 0)
        fy = 0.5 * (a12 + np.roll(a12, 1, axis=1))
    else:
        fx = 0.5 * (a12 + np.roll(a12, 1, axis=0))
        fy = harmonic_faces(a22, 1)
    return discrete_divergence(fx, fy, h)


@dataclass(frozen=True)
class Diagnostics:
    """Outcome of hypothesis checks.

    ``checks`` holds the structural requirements every medium must meet;
    ``hypotheses`` holds extra conditions only some limit theorems need
    (currently ``div_A_e_free``). ``passed`` looks at ``checks`` only.
    """

    bounds: dict[str, tuple[float, float]] = field(default_factory=dict)
    zero_average_residual: float = 0.0
    div_q_residual: float = 0.0
    div_Ae_residual: float = 0.0
    checks: dict[str, bool] = field(default_factory=dict)
    hypotheses: dict[str, bool] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_dict(self) -> dict[str, Any]:
        return {"bounds": {k: list(v) for k, v in self.bounds.items()},
                "zero_average_residual": self.zero_average_residual,
                "div_q_residual": self.div_q_residual,
                "div_Ae_residual": self.div_Ae_residual,
                "checks": dict(self.checks), "hypotheses": dict(self.hypotheses),
                "passed": self.passed}


def validate(medium: Medium, n: int = 64) -> Diagnostics:
    """Report positivity bounds and advection/divergence residuals without raising."""
    bounds: dict[str, tuple[float, float]] = {}
    checks: dict[str, bool] = {}
    hyp: dict[str, bool] = {}
    zavg = div_q = div_ae = 0.0
    positive = {"line": ("a", "zeta"), "shear": ("alpha", "d", "zeta"), "cell": ("a11", "a22", "zeta")}
    geometry = medium_geometry(medium)
    for name in positive[geometry]:
        f = getattr(medium, name)
        lo, hi = min_over_cell(f), max_over_cell(f)
        bounds[name] = (lo, hi)
        checks[f"{name}_positive"] = lo > 0
    checks["reaction_kpp"] = medium.reaction.check_kpp()

    if isinstance(medium, ShearMedium):
        if medium.q1 is not None:
            scale = max(abs(min_over_cell(medium.q1)), abs(max_over_cell(medium.q1)))
            zavg = abs(cell_average(medium.q1))
            checks["zero_average"] = zavg <= ZERO_AVERAGE_RTOL * scale or scale == 0.0
        else:
            checks["zero_average"] = True
        hyp["div_A_e_free"] = True
        checks["div_q_free"] = True
    elif isinstance(medium, CellMedium2D):
        l1, l2 = medium.periods
        u, v = medium.face_velocities(n, n)
        div_q = float(np.max(np.abs(discrete_divergence(u, v, (l1 / n, l2 / n)))))
        vel = max(float(np.max(np.abs(u))), float(np.max(np.abs(v))))
        zavg = max(abs(float(np.mean(u))), abs(float(np.mean(v))))
        checks["div_q_free"] = div_q <= 1e-12 * max(vel, 1.0)
        checks["zero_average"] = zavg <= ZERO_AVERAGE_RTOL * max(vel, 1.0)
        div_ae = float(np.max(np.abs(div_Ae_faces(medium, n, n))))
        hyp["div_A_e_free"] = div_ae <= DIV_FREE_TOL
        a11, a22, a12 = (sample_field(f, n) for f in (medium.a11, medium.a22, medium.a12))
        det = a11 * a22 - a12 ** 2
        bounds["det_A"] = (float(det.min()), float(det.max()))
        checks["elliptic"] = bool(det.min() > 0)
    else:
        checks["zero_average"] = True
        checks["div_q_free"] = True
        a = medium.a
        hyp["div_A_e_free"] = a.is_constant
        if not a.is_constant:
            div_ae = float(np.max(np.abs(discrete_divergence(harmonic_faces(sample_field(a, n)), None, (medium.period / n,)))))
    return Diagnostics(bounds, zavg, div_q, div_ae, checks, hyp)


def medium_geometry(medium: Medium) -> str:
    if isinstance(medium, LineMedium):
        return "line"
    if isinstance(medium, ShearMedium):
        return "shear"
    if isinstance(medium, CellMedium2D):
        return "cell"
    raise TypeError(f"not a medium: {type(medium).__name__}")


def medium_hash(medium: Medium) -> str:
    blob = json.dumps(medium.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


# JSON --------------------------------------------------------------------------

_TOP_KEYS = {"geometry", "dimension", "periods", "fields", "stream_function", "zeta", "q1",
             "reaction_shape", "direction", "name"}
_FIELD_KEYS = {"line": ({"a"}, set()), "shear": ({"alpha"}, {"d"}),
               "cell": ({"a11", "a22"}, {"a12"})}


def medium_from_json(doc: Mapping[str, Any], waive_zero_average: bool = False) -> Medium:
    """Build a medium from a JSON document; errors carry the offending path."""
    if not isinstance(doc, Mapping):
        raise MediumError("medium document must be an object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise MediumError(f"unknown keys {sorted(unknown)}")
    dim = doc.get("dimension", 1)
    if dim not in (1, 2):
        raise MediumError(f"must be 1 or 2, got {dim!r}", "dimension")
    periods = doc.get("periods", [1.0] * dim)
    if not isinstance(periods, list) or len(periods) != dim:
        raise MediumError(f"must list {dim} period(s)", "periods")
    for i, p in enumerate(periods):
        if not isinstance(p, (int, float)) or isinstance(p, bool) or not p > 0:
            raise MediumError(f"must be a positive length, got {p!r}", f"periods[{i}]")
    fields = doc.get("fields", {})
    if not isinstance(fields, Mapping):
        raise MediumError("must be an object", "fields")
    geometry = doc.get("geometry")
    if geometry is None:
        geometry = "cell" if dim == 2 else ("shear" if doc.get("q1") is not None or "alpha" in fields else "line")
    if geometry not in _FIELD_KEYS:
        raise MediumError(f"unknown geometry {geometry!r}", "geometry")
    if (geometry == "cell") != (dim == 2):
        raise MediumError(f"geometry {geometry!r} does not match dimension {dim}", "geometry")
    required, optional = _FIELD_KEYS[geometry]
    extra = set(fields) - required - optional
    if extra:
        raise MediumError(f"unknown fields {sorted(extra)} for {geometry} geometry", "fields")
    missing = required - set(fields)
    if missing:
        raise MediumError(f"missing fields {sorted(missing)}", "fields")
    if "zeta" not in doc:
        raise MediumError("missing reaction slope", "zeta")

    def prof(obj: Any, path: str) -> CoefficientField:
        return CoefficientField.from_json(obj, periods, path)

    zeta = prof(doc["zeta"], "zeta")
    shape = doc.get("reaction_shape", "logistic")
    if geometry == "line":
        if doc.get("q1") is not None or doc.get("stream_function") is not None:
            raise MediumError("line media carry no advection", "q1")
        return LineMedium(prof(fields["a"], "fields.a"), zeta, shape)
    if geometry == "shear":
        alpha = prof(fields["alpha"], "fields.alpha")
        d = prof(fields["d"], "fields.d") if "d" in fields else CoefficientField.constant(1.0, periods)
        q1 = doc.get("q1")
        return ShearMedium(alpha, d, zeta, None if q1 is None else prof(q1, "q1"), shape, waive_zero_average)
    a12 = prof(fields["a12"], "fields.a12") if "a12" in fields else None
    H = doc.get("stream_function")
    direction = tuple(doc.get("direction", (1.0, 0.0)))
    return CellMedium2D(prof(fields["a11"], "fields.a11"), prof(fields["a22"], "fields.a22"), zeta,
                        a12, None if H is None else prof(H, "stream_function"), direction, shape)


def load_medium(path: str, waive_zero_average: bool = False) -> Medium:
    with open(path, encoding="utf-8") as fh:
        return medium_from_json(json.load(fh), waive_zero_average)


# built-in media ------------------------------------------------------------------

def _c(v: float, periods: Sequence[float] = (1.0,)) -> CoefficientField:
    return CoefficientField.constant(v, periods)


def builtin_media() -> dict[str, Medium]:
    """The default test media, keyed by name."""
    sin_sin = CoefficientField.sine_product(1.0, 0.5)
    H = CoefficientField.sine_product(0.0, 1.0 / _TWO_PI)
    return {
        "constant": LineMedium(_c(1.0), _c(1.0)),
        "cosine1d": LineMedium(_c(1.0), CoefficientField.cosine(1.0, 0.5)),
        "layered1d": LineMedium(CoefficientField.inverse_cosine(1.0, 0.5), _c(1.0)),
        "shear": ShearMedium(_c(1.0), _c(1.0), CoefficientField.cosine(1.0, 0.5)),
        "shear_flow": ShearMedium(_c(1.0), _c(1.0), _c(1.0), CoefficientField.cosine(0.0, 1.0)),
        "cell": CellMedium2D(_c(1.0, (1, 1)), _c(1.0, (1, 1)), sin_sin, stream_function=H),
    }
