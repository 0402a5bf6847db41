import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import linalg

from epsctl.errors import InvalidModel, NumericalFailure, SolverDegenerate
from epsctl.linmat import (
    as_matrix,
    block_eigenvalues,
    is_spd,
    is_stable,
    lambda_max,
    lambda_min,
    lyap_residual,
    lyap_solve,
    matexp,
    real_schur,
    spectral_abscissa,
)


def test_as_matrix_promotes_rows_and_rejects_nan():
    assert as_matrix([1.0, 2.0]).shape == (1, 2)
    with pytest.raises(InvalidModel):
        as_matrix([[1.0, float("nan")]])
    with pytest.raises(InvalidModel):
        as_matrix([])


def test_schur_eigenvalues_match_numpy():
    rng = np.random.default_rng(3)
    m = rng.standard_normal((5, 5))
    form = real_schur(m)
    assert_allclose(form.q @ form.t @ form.q.T, m, atol=1e-12)
    ours = np.sort_complex(block_eigenvalues(form.t))
    ref = np.sort_complex(np.linalg.eigvals(m))
    assert_allclose(ours, ref, atol=1e-10)


def test_spectral_abscissa_of_oscillator():
    a = np.array([[0.0, 1.0], [-2.0, -3.0]])
    assert spectral_abscissa(a) == pytest.approx(-1.0)
    assert is_stable(a)
    assert not is_stable(np.array([[0.0, 1.0], [-1.0, 0.0]]))


def test_lyap_solve_scalar():
    # -2x + 1 = 0
    assert lyap_solve([[-1.0]], [[1.0]])[0, 0] == pytest.approx(0.5)


def test_lyap_solve_random_residuals():
    rng = np.random.default_rng(11)
    for n in range(1, 9):
        a = rng.standard_normal((n, n))
        a -= (np.max(np.linalg.eigvals(a).real) + 0.5) * np.eye(n)
        w = rng.standard_normal((n, n))
        w = w @ w.T
        x = lyap_solve(a, w)
        assert lyap_residual(a, x, w) <= 1e-9
        assert_allclose(x, x.T, atol=0.0)


def test_lyap_solve_rejects_unstable_operator():
    with pytest.raises(SolverDegenerate):
        lyap_solve([[0.0, 1.0], [-1.0, 0.0]], np.eye(2))
    with pytest.raises(InvalidModel):
        lyap_solve(np.eye(2) * -1.0, np.eye(3))


def test_symmetric_extremes():
    s = np.diag([3.0, -1.0, 2.0])
    assert lambda_max(s) == pytest.approx(3.0)
    assert lambda_min(s) == pytest.approx(-1.0)


def test_matexp_matches_scipy_and_overflows_cleanly():
    a = np.array([[0.0, 1.0], [-2.0, -3.0]])
    assert_allclose(matexp(a, 0.7), linalg.expm(0.7 * a), rtol=1e-13)
    assert_allclose(matexp(a, 0.0), np.eye(2), atol=0.0)
    with pytest.raises(NumericalFailure):
        matexp([[1000.0]], 1000.0)


def test_is_spd():
    assert is_spd(np.eye(3))
    assert not is_spd(np.diag([1.0, 0.0]))
    assert not is_spd(np.diag([1.0, -1.0]))
    assert not is_spd(np.zeros((2, 2)))


def test_matexp_composes_over_time():
    rng = np.random.default_rng(9)
    a = rng.standard_normal((4, 4)) - 1.5 * np.eye(4)
    for s, t in ((0.3, 1.1), (2.0, 0.25), (0.0, 3.0)):
        assert_allclose(matexp(a, s + t), matexp(a, s) @ matexp(a, t), rtol=1e-11, atol=1e-12)
