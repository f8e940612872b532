"""Explicit 1D reaction-diffusion simulation and measured spreading speed.

Solves ``u_t = (a(x) u_x)_x + zeta(x) g(u)`` on a window of whole periods
with ``u = 1`` behind and ``u = 0`` ahead of a rightward front. The window
follows the front by shifting whole periods, so the periodic coefficient
arrays never change. The spreading speed is the least-squares slope of the
``u = 1/2`` level-set position over the second half of the run.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Any, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from . import _backend
from .medium import SHAPES, LineMedium, harmonic_faces, sample_field

THETA = 0.5
MAX_PRINCIPLE_SLACK = 1e-12


class StabilityError(ValueError):
    """Time step too large for the explicit scheme to keep ``0 <= u <= 1``."""


class WindowError(RuntimeError):
    """The front left the simulation window."""


@dataclass(frozen=True)
class SimState:
    """Values ``u`` on ``W * m`` cells starting at absolute cell index ``offset``."""

    u: np.ndarray
    t: float
    h: float
    m: int
    offset: int = 0

    @property
    def x(self) -> np.ndarray:
        return (self.offset + np.arange(self.u.size) + 0.5) * self.h

    @property
    def periods(self) -> int:
        return self.u.size // self.m


@dataclass
class FrontMeasurement:
    times: list[float]
    positions: list[float]
    speed: float
    fit_residual: float
    burn_in: float
    pulsating_residuals: list[tuple[float, float]] = field(default_factory=list)
    max_principle_ok: bool = True
    u_range: tuple[float, float] = (0.0, 1.0)
    dt: float = 0.0
    grid: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {"speed": self.speed, "fit_residual": self.fit_residual, "burn_in": self.burn_in,
                "times": list(self.times), "positions": list(self.positions),
                "pulsating_residuals": [list(p) for p in self.pulsating_residuals],
                "max_principle_ok": self.max_principle_ok, "u_range": list(self.u_range),
                "dt": self.dt, "grid": dict(self.grid)}


@dataclass(frozen=True)
class _Coefficients:
    a_face: np.ndarray
    zeta: np.ndarray
    shape: str
    lipschitz: float


def _lipschitz(shape: str, samples: int = 2001) -> float:
    s = np.linspace(0.0, 1.0, samples)
    return float(np.max(np.abs(np.diff(SHAPES[shape](s)) / np.diff(s))))


def _coefficients(medium: LineMedium, m: int, periods: int) -> _Coefficients:
    a = np.tile(sample_field(medium.a, m), periods)
    zeta = np.tile(sample_field(medium.zeta, m), periods)
    af = harmonic_faces(a)
    # the last face is the periodic image of the first
    a_face = np.append(af, af[0])
    return _Coefficients(np.ascontiguousarray(a_face), np.ascontiguousarray(zeta), medium.reaction_shape,
                         _lipschitz(medium.reaction_shape))


def stable_dt(medium: LineMedium, m: int = 32, safety: float = 0.9) -> float:
    """Largest step keeping the explicit map order-preserving on ``[0, 1]``, times ``safety``."""
    c = _coefficients(medium, m, 1)
    h = medium.period / m
    return safety / _stability_rate(c, h)


def _stability_rate(c: _Coefficients, h: float) -> float:
    # u_new is a non-negative combination of neighbours and 1 when
    # dt * ((a_left + a_right) / h^2 + Lip(g) max zeta) <= 1
    return float(np.max(c.a_face[:-1] + c.a_face[1:])) / h**2 + c.lipschitz * float(np.max(c.zeta))


def initial_state(medium: LineMedium, W: int = 60, m: int = 32, filled: int = 5) -> SimState:
    """Heaviside data: ``u = 1`` on the first ``filled`` periods, 0 elsewhere."""
    if W < filled + 2:
        raise ValueError(f"window of {W} periods is too small")
    u = np.zeros(W * m)
    u[: filled * m] = 1.0
    return SimState(u, 0.0, medium.period / m, m)


def _advance(u: np.ndarray, c: _Coefficients, dt: float, h: float, nsteps: int) -> None:
    if c.shape == "logistic":
        _backend.kernels.front_advance(u, c.a_face, c.zeta, dt, h, int(nsteps), 1.0, 0.0)
        return
    g = SHAPES[c.shape]
    padded = np.empty(u.size + 2)
    padded[0], padded[-1] = 1.0, 0.0
    for _ in range(nsteps):
        padded[1:-1] = u
        flux = c.a_face * np.diff(padded)
        u += dt / h**2 * np.diff(flux) + dt * c.zeta * g(u)


def step(state: SimState, medium: LineMedium, dt: float, nsteps: int = 1) -> SimState:
    """``nsteps`` explicit steps of flux-form diffusion plus reaction."""
    if not 0 < dt:
        raise StabilityError(f"dt must be positive, got {dt}")
    c = _coefficients(medium, state.m, state.periods)
    if dt * _stability_rate(c, state.h) > 1.0:
        raise StabilityError(f"dt={dt:.3e} exceeds the stability bound {1.0 / _stability_rate(c, state.h):.3e}")
    u = state.u.copy()
    _advance(u, c, dt, state.h, nsteps)
    return replace(state, u=u, t=state.t + nsteps * dt)


def front_position(state: SimState, theta: float = THETA) -> float:
    """Absolute position where ``u`` last drops through ``theta`` (linear interpolation)."""
    above = np.nonzero(state.u >= theta)[0]
    if above.size == 0:
        return (state.offset + 0.0) * state.h
    i = int(above[-1])
    x = state.x
    if i == state.u.size - 1:
        return float(x[i])
    u0, u1 = state.u[i], state.u[i + 1]
    return float(x[i] + (u0 - theta) / (u0 - u1) * state.h)


def _shift(u: np.ndarray, k: int) -> None:
    u[:-k] = u[k:]
    u[-k:] = 0.0


def _value_at(frame: tuple[int, np.ndarray], idx: np.ndarray) -> np.ndarray:
    offset, u = frame
    j = idx - offset
    out = np.where(j < 0, 1.0, 0.0)
    inside = (j >= 0) & (j < u.size)
    out[inside] = u[j[inside]]
    return out


def _pulsating_residual(frames: list[tuple[float, int, np.ndarray]], t0: float, tau: float,
                        m: int) -> float:
    """``max |u(t0 + tau, x + L) - u(t0, x)|`` over the front region, frames interpolated in time."""
    times = np.array([f[0] for f in frames])

    def at(t: float, idx: np.ndarray) -> np.ndarray:
        # cubic Lagrange interpolation through the four surrounding frames
        j = int(np.clip(np.searchsorted(times, t) - 2, 0, len(frames) - 4))
        ts = times[j:j + 4]
        out = np.zeros(idx.size)
        for a in range(4):
            w = np.prod([(t - ts[b]) / (ts[a] - ts[b]) for b in range(4) if b != a])
            out += w * _value_at(frames[j + a][1:], idx)
        return out

    j0 = int(np.clip(np.searchsorted(times, t0), 0, len(frames) - 1))
    offset, u = frames[j0][1:]
    idx = offset + np.arange(u.size)
    early = at(t0, idx)
    late = at(t0 + tau, idx + m)
    region = ((early > 1e-3) & (early < 1 - 1e-3)) | ((late > 1e-3) & (late < 1 - 1e-3))
    if not region.any():
        return 0.0
    return float(np.max(np.abs(late - early)[region]))


def measure_spreading_speed(medium: LineMedium, T: float = 40.0, burn_in: float = 0.5, W: int = 60,
                            m: int = 32, dt: float | None = None, samples: int = 1000,
                            checkpoints: Sequence[float] | None = None,
                            frame_times: Sequence[float] = ()) -> tuple[FrontMeasurement, list]:
    """Run from Heaviside data up to time ``T`` and fit the front speed.

    Returns the measurement and the frames requested in ``frame_times`` as
    ``(t, x, u)`` arrays. ``checkpoints`` are fractions of the post-burn-in
    record at which the space-time periodicity residual is evaluated.
    """
    if not isinstance(medium, LineMedium):
        raise TypeError("the simulator handles 1D line media only")
    if not 0.0 <= burn_in < 1.0:
        raise ValueError(f"burn_in must lie in [0, 1), got {burn_in}")
    state = initial_state(medium, W, m)
    c = _coefficients(medium, m, W)
    rate = _stability_rate(c, state.h)
    dt = 0.9 / rate if dt is None else dt
    if dt * rate > 1.0:
        raise StabilityError(f"dt={dt:.3e} exceeds the stability bound {1.0 / rate:.3e}")
    n_total = int(math.ceil(T / dt))
    per_sample = max(1, n_total // samples)
    u = state.u.copy()
    offset, t, done = 0, 0.0, 0
    times, positions = [], []
    frames: list[tuple[float, int, np.ndarray]] = []
    wanted = sorted(frame_times)
    dumped = []
    lo, hi = 0.0, 1.0
    while done < n_total:
        nsteps = min(per_sample, n_total - done)
        _advance(u, c, dt, state.h, nsteps)
        done += nsteps
        t = done * dt
        lo, hi = min(lo, float(u.min())), max(hi, float(u.max()))
        cur = SimState(u, t, state.h, m, offset)
        pos = front_position(cur)
        if pos - offset * state.h > 0.9 * W * medium.period:
            raise WindowError(f"front left the window at t={t:.3g}; enlarge W or shorten T")
        times.append(t)
        positions.append(pos)
        frames.append((t, offset, u.copy()))
        while wanted and wanted[0] <= t:
            wanted.pop(0)
            dumped.append((t, cur.x.copy(), u.copy()))
        # keep the front in the middle third: the leading edge sets the speed
        # of a pulled front, so it keeps the larger share of the window
        lead = int((pos / state.h - offset) // m)
        if lead > W // 2:
            k = (lead - W // 3) * m
            _shift(u, k)
            offset += k

    t_arr, x_arr = np.array(times), np.array(positions)
    sel = t_arr >= burn_in * T
    if sel.sum() < 3:
        raise ValueError("too few samples after burn-in; increase T or samples")
    slope, intercept = np.polyfit(t_arr[sel], x_arr[sel], 1)
    fit_res = float(np.sqrt(np.mean((x_arr[sel] - (slope * t_arr[sel] + intercept)) ** 2)))
    if x_arr[sel][-1] - x_arr[sel][0] < 10 * medium.period:
        # the front must cross several periods for the fit to mean anything
        fit_note = "front crossed fewer than 10 periods after burn-in"
    else:
        fit_note = ""

    pulsating = []
    if slope > 0:
        # tau(t0): time for the level set to advance exactly one period from t0
        t_start = burn_in * T
        x_of_t = CubicSpline(t_arr, x_arr)
        t_of_x = CubicSpline(x_arr, t_arr)
        t_end = float(t_of_x(x_arr[-1] - medium.period))
        fracs = (0.0, 0.5, 1.0) if checkpoints is None else tuple(checkpoints)
        if t_end > t_start and np.all(np.diff(x_arr) > 0):
            for f in fracs:
                t0 = t_start + f * (t_end - t_start)
                tau = float(t_of_x(float(x_of_t(t0)) + medium.period)) - t0
                pulsating.append((t0, _pulsating_residual(frames, t0, tau, m)))

    ok = lo >= -MAX_PRINCIPLE_SLACK and hi <= 1.0 + MAX_PRINCIPLE_SLACK
    meas = FrontMeasurement(
        times=times, positions=positions, speed=float(slope), fit_residual=fit_res, burn_in=burn_in,
        pulsating_residuals=pulsating, max_principle_ok=ok, u_range=(lo, hi), dt=dt,
        grid={"W": W, "m": m, "h": state.h, "T": T, "note": fit_note})
    return meas, dumped


def frames_to_csv(frames: list) -> str:
    """``t,x,u`` rows for dumped frames."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("t", "x", "u"))
    for t, x, u in frames:
        for xi, ui in zip(x, u):
            w.writerow((f"{t:.17g}", f"{xi:.17g}", f"{ui:.17g}"))
    return buf.getvalue()
