import csv
import io

import numpy as np
import pytest

from frontspeed.frontsim import (SimState, StabilityError, WindowError, front_position, frames_to_csv,
                                 initial_state, measure_spreading_speed, stable_dt, step)
from frontspeed.medium import CoefficientField, LineMedium
from frontspeed.speed import make_problem, minimal_speed, upper_bound

C = CoefficientField


@pytest.fixture(scope="module")
def constant_run(media):
    return measure_spreading_speed(media["constant"], T=40.0, frame_times=(10.0, 20.0))


@pytest.mark.parametrize("value", [0.0, 1.0])
def test_equilibria_are_fixed(media, value):
    m = media["cosine1d"]
    s = initial_state(m, W=10, m=16)
    s.u[:] = value
    # boundary values are 1 on the left and 0 on the right; each explicit step
    # carries their influence one cell inward
    out = step(s, m, stable_dt(m, 16), 50)
    np.testing.assert_allclose(out.u[51:-51], value, atol=1e-14)


def test_step_refuses_unstable_dt(media):
    m = media["layered1d"]
    s = initial_state(m, W=10, m=16)
    with pytest.raises(StabilityError):
        step(s, m, 2.0 * stable_dt(m, 16, safety=1.0))
    with pytest.raises(StabilityError):
        step(s, m, 0.0)
    with pytest.raises(StabilityError):
        measure_spreading_speed(m, T=1.0, W=10, m=16, dt=1.0)


def test_front_position_interpolates():
    u = np.array([1.0, 1.0, 0.75, 0.25, 0.0, 0.0])
    s = SimState(u, 0.0, 0.5, 2, offset=4)
    # crossing of 1/2 halfway between cells 2 and 3: absolute x = (4 + 2.5 + 0.5) * 0.5
    assert front_position(s) == pytest.approx(3.5)


def test_constant_speed(constant_run):
    meas, _ = constant_run
    # the logarithmic delay of pulled fronts keeps the finite-time slope a few percent low
    assert meas.speed == pytest.approx(2.0, rel=0.05)
    assert meas.speed < 2.0
    assert meas.max_principle_ok
    assert meas.grid["note"] == ""


def test_constant_pulsating_residual_decreases(constant_run):
    res = [r for _, r in constant_run[0].pulsating_residuals]
    assert len(res) == 3
    assert res[0] > res[1] > res[2]
    assert res[-1] < 1e-3


def test_frames_csv(constant_run):
    _, frames = constant_run
    assert [f[0] for f in frames] == pytest.approx([10.0, 20.0], abs=0.05)
    rows = list(csv.reader(io.StringIO(frames_to_csv(frames))))
    assert rows[0] == ["t", "x", "u"]
    assert len(rows) == 1 + sum(len(f[1]) for f in frames)
    assert all(0.0 <= float(r[2]) <= 1.0 for r in rows[1:])


def test_fast_constant_medium_with_wide_window():
    m = LineMedium(C.constant(4.0), C.constant(1.0))
    meas, _ = measure_spreading_speed(m, T=40.0, W=120)
    assert meas.speed == pytest.approx(4.0, rel=0.05)


def test_cosine_medium_matches_minimal_speed(media):
    m = media["cosine1d"]
    meas, _ = measure_spreading_speed(m, T=80.0)
    c_star = minimal_speed(make_problem(m)).c_star
    assert meas.speed == pytest.approx(c_star, rel=0.05)
    assert meas.speed <= upper_bound(make_problem(m)) * 1.05
    assert meas.max_principle_ok
    res = [r for _, r in meas.pulsating_residuals]
    assert res[-1] <= res[0]


def test_window_error(media):
    with pytest.raises(WindowError):
        measure_spreading_speed(media["constant"], T=20.0, W=20, samples=2)


def test_argument_checks(media):
    with pytest.raises(ValueError, match="burn_in"):
        measure_spreading_speed(media["constant"], burn_in=1.0)
    with pytest.raises(TypeError):
        measure_spreading_speed(media["shear"])
    with pytest.raises(ValueError):
        initial_state(media["constant"], W=6)


def test_cubic_reaction_path():
    m = LineMedium(C.constant(1.0), C.constant(1.0), reaction_shape="cubic")
    meas, _ = measure_spreading_speed(m, T=20.0, W=60, m=16)
    # same linearisation g'(0) = 1, so the same minimal speed
    assert meas.speed == pytest.approx(2.0, rel=0.08)
    assert meas.max_principle_ok
