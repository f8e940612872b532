import math

import numpy as np
import pytest

from frontspeed.medium import CoefficientField, LineMedium, ShearMedium
from frontspeed.speed import (ShearProblem, analytic_speed_constant, default_lambda_range, k_of_lambda,
                              make_problem, minimal_speed, upper_bound)

C = CoefficientField

# continuum references, computed independently of the finite-volume code:
# shear_flow (q1 = cos 2 pi y): k(lam) from the Mathieu characteristic value a_0, minimised in lam
SHEAR_FLOW_CSTAR = 2.012621811669997
# shear, eps = 0.01: c*/sqrt(eps) = 2 sqrt(mu), mu the Mathieu-based principal eigenvalue
SHEAR_EPS001_RATIO = 2.2062002518746406
# cosine1d: 81-mode Fourier-Galerkin k(lam), minimised in lam
COSINE1D_CSTAR = 2.002871947265104


def line(a, z):
    return LineMedium(C.constant(a), C.constant(z))


def test_constant_speed(media):
    res = minimal_speed(make_problem(media["constant"]))
    assert res.c_star == pytest.approx(2.0, rel=1e-6)
    assert res.lambda_star == pytest.approx(1.0, rel=1e-3)


def test_constant_a4():
    res = minimal_speed(make_problem(line(4.0, 1.0)))
    assert res.c_star == pytest.approx(4.0, rel=1e-6)
    assert res.lambda_star == pytest.approx(0.5, rel=1e-3)


def test_constant_shear_flow_shift():
    m = ShearMedium(C.constant(1.0), C.constant(1.0), C.constant(1.0), C.constant(-0.5), waive_zero_average=True)
    assert minimal_speed(make_problem(m, 16)).c_star == pytest.approx(2.5, rel=1e-6)
    assert k_of_lambda(make_problem(m, 16), 2.0) == pytest.approx(4 + 1 + 1, rel=1e-12)


@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
def test_k_constant(media, lam):
    assert k_of_lambda(make_problem(media["constant"]), lam) == pytest.approx(lam**2 + 1, abs=1e-8)


def test_k_rejects_nonpositive_lambda(media):
    with pytest.raises(ValueError):
        k_of_lambda(make_problem(media["constant"]), 0.0)


def test_k_shear_bracket_and_dense_check(media):
    p = make_problem(media["shear"], 16)
    k = k_of_lambda(p, 1.0)
    assert 2.0 < k <= 2.5
    assert k == pytest.approx(np.linalg.eigvalsh(p.operator(1.0).toarray()).max(), abs=1e-9)


def test_mathieu_reference_shear_flow(media):
    res = minimal_speed(make_problem(media["shear_flow"], 256))
    assert res.c_star == pytest.approx(SHEAR_FLOW_CSTAR, abs=1e-5)


def test_mathieu_reference_small_eps(media):
    p = ShearProblem(medium=media["shear"], n=128).rescaled(diffusion=0.01)
    assert minimal_speed(p).c_star / 0.1 == pytest.approx(SHEAR_EPS001_RATIO, rel=1e-4)


def test_fourier_reference_cosine1d(media):
    # first-order upwinding: error roughly halves with h
    errs = [abs(minimal_speed(make_problem(media["cosine1d"], n)).c_star - COSINE1D_CSTAR) for n in (64, 128, 256)]
    assert errs[2] < 1.2e-5
    assert errs[2] < 0.6 * errs[1] < 0.36 * errs[0]


def test_result_invariants(media):
    for name in ("cosine1d", "layered1d", "shear_flow"):
        res = minimal_speed(make_problem(media[name], 64))
        assert res.c_star == pytest.approx(res.k_at_star / res.lambda_star, rel=1e-13)
        assert all(res.c_star <= phi for _, phi in res.scan)
        assert res.c_star > 0
        assert not res.bracket_failure
        assert res.diagnostics["eig_tol"] == pytest.approx(1e-7)


def test_bracket_failure_reported(media):
    res = minimal_speed(make_problem(media["constant"]), lambda_range=(2.0, 5.0))
    assert res.bracket_failure
    assert res.lambda_star == pytest.approx(2.0)


def test_range_validation(media):
    with pytest.raises(ValueError):
        minimal_speed(make_problem(media["constant"]), lambda_range=(1.0, 0.5))
    lo, hi = default_lambda_range(make_problem(media["constant"]))
    assert (lo, hi) == pytest.approx((1e-3, 1e3))


def test_analytic_constant():
    assert analytic_speed_constant(1, 1, 0) == 2
    assert analytic_speed_constant(4, 1, 0) == 4
    assert analytic_speed_constant(1, 2.25, 1) == pytest.approx(2)
    with pytest.raises(ValueError):
        analytic_speed_constant(0, 1)


def test_upper_bound_examples(media):
    assert upper_bound(make_problem(media["constant"])) == pytest.approx(2.0)
    assert upper_bound(make_problem(media["shear"])) == pytest.approx(2 * math.sqrt(1.5), abs=1e-6)
    assert upper_bound(make_problem(media["shear_flow"])) == pytest.approx(3.0, abs=1e-6)


def test_upper_bound_and_strict_gap(media):
    for name, m in media.items():
        p = make_problem(m, 32 if name == "cell" else 128)
        c, ub = minimal_speed(p).c_star, upper_bound(p)
        assert c <= ub + 1e-8, name
        if name != "constant":
            assert ub - c > 1e-3, name


@pytest.mark.parametrize("B", [0.25, 4.0])
def test_reaction_scaling_constant(media, B):
    base = minimal_speed(make_problem(media["constant"])).c_star
    scaled = minimal_speed(make_problem(media["constant"]).rescaled(reaction=B)).c_star
    assert scaled == pytest.approx(math.sqrt(B) * base, rel=1e-7)


def test_reaction_monotone(media):
    Bs = [0.25, 0.5, 1.0, 2.0, 4.0]
    for name, m in media.items():
        p = make_problem(m, 16 if name == "cell" else 64)
        cs = [minimal_speed(p.rescaled(reaction=b)).c_star for b in Bs]
        assert all(b >= a - 1e-9 for a, b in zip(cs, cs[1:])), name


def test_upper_bound_scales(media):
    p = make_problem(media["shear_flow"]).rescaled(diffusion=0.25, advection=2.0, reaction=4.0)
    assert upper_bound(p) == pytest.approx(2.0 + 2 * math.sqrt(4.0 * 0.25), abs=1e-6)
