import io

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from frontspeed.assembly import (AssemblyError, Grid, assemble_cell_operator,
                                 assemble_cross_section_operator, assemble_line_operator)
from frontspeed.eigen import growth_rate_oracle, principal_eig_power
from frontspeed.medium import CellMedium2D, CoefficientField, ShearMedium, sample_field

C = CoefficientField
ONE2 = C.constant(1.0, (1, 1))

# principal eigenvalue of psi'' - 2 psi' + (1 + zeta) psi, zeta = 1 + 0.5 cos(2 pi x), from a
# 81-mode Fourier-Galerkin solve (continuum value)
K_COSINE_LAMBDA1 = 2.0028748391584017


def test_grid_validation():
    assert Grid((8,), (2.0,)).spacing == (0.25,)
    assert Grid((4, 8), (1.0, 1.0)).size == 32
    with pytest.raises(AssemblyError):
        Grid((3,), (1.0,))
    with pytest.raises(AssemblyError):
        Grid((8,), (0.0,))


@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
def test_line_constant_eigenvector(lam):
    op = assemble_line_operator(np.ones(32), np.ones(32), lam)
    np.testing.assert_allclose(op @ np.ones(32), lam**2 + 1.0, rtol=1e-13)
    # transport part conserves: rows of L - diag(zeroth order) sum to zero
    transport = op.toarray() - np.diag(np.full(32, lam**2 + 1.0))
    np.testing.assert_allclose(transport.sum(axis=1), 0.0, atol=1e-9)


def test_line_no_reaction_gives_eps_lambda_squared():
    op = assemble_line_operator(np.ones(16), np.zeros(16), 1.5, eps=0.3)
    np.testing.assert_allclose(op @ np.ones(16), 0.3 * 1.5**2, rtol=1e-12)


def test_line_variable_a_against_oracle():
    a = sample_field(C.cosine(1.0, 0.5), 64)
    op = assemble_line_operator(a, np.ones(64), 1.0)
    k = principal_eig_power(op, 1e-12).k
    assert abs(k - growth_rate_oracle(op)) <= 1e-8


def test_line_refinement_first_order():
    zeta = C.cosine(1.0, 0.5)
    errs = []
    for n in (32, 64, 128, 256):
        op = assemble_line_operator(np.ones(n), sample_field(zeta, n), 1.0)
        errs.append(abs(principal_eig_power(op, 1e-13).k - K_COSINE_LAMBDA1))
    ratios = [b / a for a, b in zip(errs, errs[1:])]
    assert all(r <= 0.75 for r in ratios[1:]), ratios


def test_line_input_checks():
    with pytest.raises(AssemblyError):
        assemble_line_operator(np.ones(8), np.ones(9), 1.0)
    with pytest.raises(AssemblyError):
        assemble_line_operator(np.ones(8), np.ones(8), -1.0)
    with pytest.raises(AssemblyError):
        assemble_line_operator(np.ones(8), np.ones(8), 1.0, eps=0.0)
    with pytest.raises(AssemblyError):
        assemble_line_operator(-np.ones(8), np.ones(8), 1.0)


def test_line_lambda_zero_conserves():
    a = sample_field(C.inverse_cosine(1.0, 0.5), 32)
    op = assemble_line_operator(a, np.zeros(32), 0.0)
    assert op.symmetric
    np.testing.assert_allclose(op @ np.ones(32), 0.0, atol=1e-12 * np.abs(op.diagonal()).max())


def test_cross_section_constant():
    m = ShearMedium(C.constant(1.0), C.constant(1.0), C.constant(1.0))
    op = assemble_cross_section_operator(m, 2.0, eps=0.5, n=16)
    np.testing.assert_allclose(op @ np.ones(16), 0.5 * 4 + 1, rtol=1e-14)


def test_cross_section_constant_shear():
    m = ShearMedium(C.constant(1.0), C.constant(1.0), C.constant(1.0), C.constant(0.7), waive_zero_average=True)
    op = assemble_cross_section_operator(m, 1.5, n=16)
    np.testing.assert_allclose(op @ np.ones(16), 1.5**2 - 1.5 * 0.7 + 1, rtol=1e-14)


def test_cross_section_rayleigh_bracket():
    m = ShearMedium(C.constant(1.0), C.constant(1.0), C.cosine(1.0, 0.5))
    k = principal_eig_power(assemble_cross_section_operator(m, 10.0, eps=0.01, n=128), 1e-10).k
    assert 1.5 <= k <= 2.5
    dense = assemble_cross_section_operator(m, 10.0, eps=0.01, n=16).toarray()
    k16 = np.linalg.eigvalsh(dense).max()
    assert 1.5 <= k16 <= 2.5


def test_cross_section_symmetric(media):
    for name in ("shear", "shear_flow"):
        mat = assemble_cross_section_operator(media[name], 1.3, eps=0.2, n=32).matrix
        assert (mat != mat.T).nnz == 0


def test_cell_constant():
    m = CellMedium2D(ONE2, ONE2, ONE2)
    op = assemble_cell_operator(m, 0.8, M=3.0, n=8)
    np.testing.assert_allclose(op @ np.ones(64), 3.0 * 0.64 + 1, rtol=1e-13)


def test_cell_with_flow_against_oracle(media):
    m = media["cell"]
    op = assemble_cell_operator(CellMedium2D(ONE2, ONE2, ONE2, stream_function=m.stream_function), 1.0, n=16)
    k = principal_eig_power(op, 1e-12).k
    assert abs(k - growth_rate_oracle(op)) <= 1e-6
    # a zero-mean drift can only raise the principal eigenvalue above lam^2 + 1
    assert k >= 2.0 - 1e-12


def test_cell_transport_has_zero_column_sums(media):
    op = assemble_cell_operator(media["cell"], 1.3, M=2.0, n=16)
    rows = op @ np.ones(op.n)
    g = op.toarray() - np.diag(rows)
    # divergence-free face fluxes make the transport part doubly stochastic
    np.testing.assert_allclose(g.sum(axis=0), 0.0, atol=1e-9)
    zeta = sample_field(media["cell"].zeta, (16, 16))
    assert rows.mean() == pytest.approx(2.0 * 1.3**2 + zeta.mean(), rel=1e-13)


def test_cell_large_m_lower_bound(media):
    # mean of row sums is a lower bound of the Perron root when the transport part is doubly stochastic
    M = 1e3
    for lam_prime in (0.5, 1.0, 2.0):
        lam = lam_prime / np.sqrt(M)
        k = principal_eig_power(assemble_cell_operator(media["cell"], lam, M=M, n=16), 1e-12).k
        assert k >= lam_prime**2 + 1.0 - 1e-9


def test_cell_cross_term_refused():
    with pytest.raises(AssemblyError, match="monotone"):
        assemble_cell_operator(CellMedium2D(ONE2, ONE2, ONE2, a12=C.constant(0.3, (1, 1))), 1.0, n=8)


def test_cell_scale_checks(media):
    with pytest.raises(AssemblyError):
        assemble_cell_operator(media["cell"], 1.0, gamma=0.7, n=8)
    with pytest.raises(AssemblyError):
        assemble_cell_operator(media["cell"], 1.0, gamma=0.3, mode="B", n=8)
    op = assemble_cell_operator(media["cell"], 1.0, B=4.0, gamma=0.5, mode="B", n=8)
    assert op.meta["advection"] == pytest.approx(2.0)


@given(lam=st.floats(0.0, 50.0), eps=st.floats(1e-4, 10.0), c1=st.floats(-0.9, 0.9))
def test_line_monotone(lam, eps, c1):
    a = sample_field(C.cosine(1.0, c1), 16)
    assert assemble_line_operator(a, np.ones(16), lam, eps).min_off_diagonal() >= 0.0


@given(lam=st.floats(0.0, 20.0), M=st.floats(1e-2, 1e3), amp=st.floats(-3.0, 3.0))
def test_cell_monotone(lam, M, amp):
    m = CellMedium2D(C.cosine(1.0, 0.5, (1, 1)), ONE2, ONE2, stream_function=C.sine_product(0.0, amp))
    assert assemble_cell_operator(m, lam, M=M, n=8).min_off_diagonal() >= 0.0


def test_dump_format():
    op = assemble_line_operator(np.ones(4), np.ones(4), 1.0)
    buf = io.StringIO()
    op.dump(buf)
    lines = buf.getvalue().splitlines()
    assert len(lines) == op.matrix.nnz
    r, c, v = lines[0].split()
    assert (int(r), int(c)) == (0, 0) and float(v) == pytest.approx(op.diagonal()[0])
