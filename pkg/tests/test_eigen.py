import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import mathieu_a

from frontspeed import _backend
from frontspeed.assembly import (Grid, OperatorMatrix, assemble_cell_operator,
                                 assemble_cross_section_operator, assemble_line_operator)
from frontspeed.eigen import (ConvergenceError, StructureError, growth_rate_oracle,
                              principal_eig_power, rayleigh_value)
from frontspeed.medium import CellMedium2D, CoefficientField, ShearMedium, sample_field

C = CoefficientField
TOL = 1e-10


def mathieu_k_shear_flow(lam, eps=1.0):
    """k(lam) for eps phi'' + (eps lam^2 - lam cos(2 pi y) + 1) phi, via the Mathieu value a_0."""
    q = lam / (2 * eps * math.pi**2)
    return eps * lam**2 + 1 - eps * math.pi**2 * mathieu_a(0, q)


def mathieu_k_shear(lam, eps=1.0):
    """k(lam) for eps phi'' + (eps lam^2 + 1 + 0.5 cos(2 pi y)) phi."""
    q = 0.25 / (eps * math.pi**2)
    return eps * lam**2 + 1 - eps * math.pi**2 * mathieu_a(0, q)


def test_constant_line_value():
    pair = principal_eig_power(assemble_line_operator(np.ones(32), np.ones(32), 1.0), TOL)
    assert pair.k == pytest.approx(2.0, abs=TOL)
    assert np.linalg.norm(pair.psi) == pytest.approx(1.0, abs=1e-14)
    assert pair.psi.min() > 0
    assert pair.residual <= 10 * TOL


def test_pair_invariants_on_default_media(media):
    ops = [assemble_line_operator(sample_field(media["layered1d"].a, 64), np.ones(64), 1.0),
           assemble_cross_section_operator(media["shear_flow"], 1.0, n=64),
           assemble_cell_operator(media["cell"], 1.0, n=16)]
    for op in ops:
        pair = principal_eig_power(op, TOL)
        assert pair.psi.min() > 0
        assert np.linalg.norm(pair.psi) == pytest.approx(1.0, abs=1e-14)
        assert pair.residual <= 10 * pair.tol


@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
def test_mathieu_oracle_shear_flow(media, lam):
    k = principal_eig_power(assemble_cross_section_operator(media["shear_flow"], lam, n=256), 1e-12).k
    assert k == pytest.approx(mathieu_k_shear_flow(lam), abs=1e-5)


def test_mathieu_oracle_shear(media):
    k = principal_eig_power(assemble_cross_section_operator(media["shear"], 1.0, n=256), 1e-12).k
    assert k == pytest.approx(mathieu_k_shear(1.0), abs=1e-6)


def test_rayleigh_at_eigenvector(media):
    op = assemble_cross_section_operator(media["shear"], 1.0, n=64)
    pair = principal_eig_power(op, TOL)
    assert abs(rayleigh_value(op, pair.psi) - pair.k) <= 10 * TOL


def test_rayleigh_constants():
    m = ShearMedium(C.constant(1.0), C.constant(1.0), C.constant(1.0))
    op = assemble_cross_section_operator(m, 2.0, eps=0.3, n=16)
    assert rayleigh_value(op, np.ones(16)) == pytest.approx(0.3 * 4 + 1)


def test_rayleigh_is_maximised_by_principal_pair(media):
    op = assemble_cross_section_operator(media["shear_flow"], 1.0, n=32)
    pair = principal_eig_power(op, TOL)
    rng = np.random.default_rng(7)
    for _ in range(20):
        v = rng.uniform(0.1, 1.0, 32)
        assert rayleigh_value(op, v) <= pair.k + pair.residual + 1e-12


def test_rayleigh_rejects_nonsymmetric():
    op = assemble_line_operator(np.ones(8), np.ones(8), 1.0)
    with pytest.raises(StructureError):
        rayleigh_value(op, np.ones(8))
    sym = assemble_line_operator(np.ones(8), np.ones(8), 0.0)
    with pytest.raises(ValueError):
        rayleigh_value(sym, np.zeros(8))


def test_oracle_constant_case():
    op = assemble_line_operator(np.ones(32), np.ones(32), 1.0)
    assert growth_rate_oracle(op, T=200) == pytest.approx(2.0, abs=1e-6)


def test_oracle_pure_diffusion_has_zero_rate():
    op = assemble_line_operator(np.ones(32), np.zeros(32), 0.0)
    assert abs(growth_rate_oracle(op, T=200)) <= 1e-8


def test_oracle_cross_section(media):
    op = assemble_cross_section_operator(media["shear"], 1.0, n=64)
    assert abs(growth_rate_oracle(op) - principal_eig_power(op, TOL).k) <= 1e-6


def test_oracle_cell(media):
    op = assemble_cell_operator(media["cell"], 1.0, n=16)
    assert abs(growth_rate_oracle(op) - principal_eig_power(op, TOL).k) <= 1e-6


def test_oracle_dt_bound():
    op = assemble_line_operator(np.ones(16), np.ones(16), 1.0)
    sigma = 1 + np.abs(op.diagonal()).max()
    with pytest.raises(ValueError, match="positivity"):
        growth_rate_oracle(op, dt=2.0 / (sigma - 1))


def test_negative_off_diagonal_refused():
    mat = sp.csr_matrix(np.array([[0.0, -1.0, 0.0, 1.0], [1.0, 0.0, 1.0, 0.0],
                                  [0.0, 1.0, 0.0, 1.0], [1.0, 0.0, 1.0, 0.0]]))
    op = OperatorMatrix(mat, Grid((4,), (1.0,)), symmetric=False)
    with pytest.raises(StructureError):
        principal_eig_power(op)
    with pytest.raises(StructureError):
        growth_rate_oracle(op)


def test_non_convergence_carries_estimate(media):
    op = assemble_cross_section_operator(media["shear"], 1.0, n=64)
    with pytest.raises(ConvergenceError) as info:
        principal_eig_power(op, 1e-14, max_iter=5)
    assert info.value.estimate is not None
    assert info.value.estimate.iterations == 5


def test_shift_invariance(media):
    op = assemble_cross_section_operator(media["shear_flow"], 1.0, n=32)
    a = principal_eig_power(op, 1e-12)
    b = principal_eig_power(op.shifted(3.5), 1e-12)
    assert b.k - a.k == pytest.approx(3.5, abs=1e-9)
    np.testing.assert_allclose(a.psi, b.psi, atol=1e-6)


@given(delta=st.floats(0.0, 2.0))
def test_constant_zeta_increment(delta):
    a = sample_field(C.cosine(1.0, 0.5), 16)
    z = sample_field(C.cosine(1.0, 0.3), 16)
    k0 = principal_eig_power(assemble_line_operator(a, z, 1.0), 1e-12).k
    k1 = principal_eig_power(assemble_line_operator(a, z + delta, 1.0), 1e-12).k
    assert k1 - k0 == pytest.approx(delta, abs=1e-9)


@given(bump=st.lists(st.floats(0.0, 1.0), min_size=16, max_size=16))
def test_zeta_monotonicity(bump):
    a = sample_field(C.inverse_cosine(1.0, 0.5), 16)
    z = np.ones(16)
    k0 = principal_eig_power(assemble_line_operator(a, z, 0.7), 1e-12).k
    k1 = principal_eig_power(assemble_line_operator(a, z + np.array(bump), 0.7), 1e-12).k
    assert k1 >= k0 - 1e-10


def test_zero_zeta_small_lambda():
    # degenerate input goes through the same path
    pair = principal_eig_power(assemble_line_operator(np.ones(16), np.zeros(16), 1e-8), 1e-12)
    assert abs(pair.k) <= 1e-12
    assert np.ptp(pair.psi) <= 1e-6


@pytest.mark.skipif(not _backend.COMPILED, reason="compiled kernels not built")
def test_backends_agree(media):
    op = assemble_cell_operator(media["cell"], 1.0, n=16)
    kc = principal_eig_power(op, 1e-12, backend="compiled").k
    kp = principal_eig_power(op, 1e-12, backend="python").k
    assert kc == pytest.approx(kp, abs=1e-11)
    oc = growth_rate_oracle(op, T=20, backend="compiled")
    op_ = growth_rate_oracle(op, T=20, backend="python")
    assert oc == pytest.approx(op_, abs=1e-12)


def test_cell_oracle_example():
    c = C.constant(1.0, (1, 1))
    m = CellMedium2D(c, c, C.sine_product(1.0, 0.5))
    op = assemble_cell_operator(m, 1.0, n=16)
    assert abs(principal_eig_power(op, TOL).k - growth_rate_oracle(op)) <= 1e-6
