import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from epsctl.ellipsoids import (
    Ellipsoid,
    alpha_window,
    contains,
    is_convex,
    obs_inclusion,
    obs_norms,
    obs_radius,
    p_alpha,
    p_matrix,
    q_alpha,
    q_matrix,
    reach_boundary_points,
    reach_inclusion,
    reach_support,
    reach_supports,
    set_polygon,
)
from epsctl.errors import AlphaOutOfRange, InvalidConfig, InvalidModel, SolverDegenerate
from epsctl.lmi import min_trace_p, min_trace_q
from epsctl.models import EllipsoidForm, SetKind, SignalNorm
from epsctl.sysmodel import LtiSystem

ISOTROPIC = LtiSystem(-np.eye(2), np.eye(2), np.eye(2), name="isotropic")


def test_scalar_p_alpha_closed_form(scalar):
    # (alpha - 2) p + 1 / alpha = 0
    for alpha in (0.5, 1.0, 1.5):
        assert p_matrix(scalar, alpha)[0, 0] == pytest.approx(1.0 / (alpha * (2.0 - alpha)), rel=1e-12)
        assert q_matrix(scalar, alpha)[0, 0] == pytest.approx(1.0 / (alpha * (2.0 - alpha)), rel=1e-12)


def test_alpha_window(illustrative):
    assert alpha_window(illustrative) == (0.0, pytest.approx(2.0))
    with pytest.raises(AlphaOutOfRange):
        p_matrix(illustrative, 2.5)
    with pytest.raises(AlphaOutOfRange):
        q_matrix(illustrative, 0.0)
    unstable = LtiSystem([[1.0]], [[1.0]], [[1.0]])
    with pytest.raises(SolverDegenerate):
        alpha_window(unstable)


def test_trace_duality(make_system):
    rng = np.random.default_rng(5)
    for _ in range(10):
        sys = make_system(rng, 3, 2, 2)
        hi = alpha_window(sys)[1]
        for alpha in np.linspace(0.1, 0.9, 5) * hi:
            p = p_matrix(sys, alpha)
            q = q_matrix(sys, alpha)
            lhs = np.trace(sys.c @ p @ sys.c.T)
            rhs = np.trace(sys.b.T @ q @ sys.b)
            assert lhs == pytest.approx(rhs, rel=1e-9)


def test_membership_forms():
    e = Ellipsoid(np.diag([4.0, 1.0]), EllipsoidForm.P)
    assert e.quadratic_form([2.0, 0.0]) == pytest.approx(1.0)
    assert contains(e, [0.0, 1.0])
    assert not contains(e, [0.0, 1.01])
    q = Ellipsoid(np.diag([4.0, 1.0]), EllipsoidForm.Q)
    assert q.quadratic_form([0.5, 0.0]) == pytest.approx(1.0)
    batch = e.quadratic_form(np.array([[2.0, 0.0], [0.0, 0.5]]))
    assert_allclose(batch, [1.0, 0.25])
    with pytest.raises(InvalidModel):
        Ellipsoid(np.diag([1.0, -1.0]), EllipsoidForm.P)


def test_isotropic_reach_support_is_one():
    for eta in ([1.0, 0.0], [1.0, 1.0], [-0.3, 0.8]):
        assert reach_support(ISOTROPIC, SignalNorm.INF, None, eta) == pytest.approx(1.0, abs=1e-6)
        assert reach_support(ISOTROPIC, SignalNorm.ONE, None, eta) == pytest.approx(1.0, abs=1e-9)


def test_reach_inf_polygon_is_unit_circle():
    polygon = set_polygon(ISOTROPIC, SetKind.REACH_INF, n_dirs=360)
    radii = np.linalg.norm(polygon.vertices, axis=1)
    assert_allclose(radii, 1.0, atol=1e-3)
    assert is_convex(polygon.vertices)


def test_reach_boundary_points_lie_on_support(illustrative):
    etas = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, -1.0]]) / np.array([[1.0], [1.0], [math.sqrt(2.0)]])
    points = reach_boundary_points(illustrative, None, etas)
    for eta, x in zip(etas, points, strict=True):
        assert float(eta @ x) == pytest.approx(reach_support(illustrative, SignalNorm.INF, None, eta), rel=1e-6)


def test_reach_set_inside_p_alpha(illustrative):
    """Sampled boundary of the unit-peak reachable set stays inside every P_alpha."""
    dirs = np.column_stack([np.cos(np.linspace(0, 2 * np.pi, 64, endpoint=False)), np.sin(np.linspace(0, 2 * np.pi, 64, endpoint=False))])
    points = reach_boundary_points(illustrative, None, dirs)
    for alpha in np.linspace(0.1, 1.9, 10):
        e = p_alpha(illustrative, alpha)
        assert np.max(e.quadratic_form(points)) <= 1.0 + 1e-3


def test_q_alpha_inside_obs_one(illustrative):
    e = q_alpha(illustrative, 0.67)
    dirs = np.column_stack([np.cos(np.linspace(0, 2 * np.pi, 64, endpoint=False)), np.sin(np.linspace(0, 2 * np.pi, 64, endpoint=False))])
    assert obs_inclusion(illustrative, SignalNorm.ONE, e, dirs) <= 1.0 + 1e-3


def test_polygon_inclusion_against_ellipse(illustrative):
    polygon = set_polygon(illustrative, SetKind.REACH_INF, n_dirs=180)
    assert reach_inclusion(polygon, p_alpha(illustrative, 0.67)) <= 1.0 + 1e-3


def test_obs_norms_scalar_closed_form(scalar):
    assert obs_norms(scalar, SignalNorm.ONE, [[2.0]])[0] == pytest.approx(2.0, rel=1e-9)
    assert obs_norms(scalar, SignalNorm.INF, [[2.0]])[0] == pytest.approx(2.0, rel=1e-12)
    assert obs_radius(scalar, SignalNorm.ONE, [1.0]) == pytest.approx(1.0, rel=1e-9)


def test_unobservable_direction_has_infinite_radius():
    sys = LtiSystem(np.diag([-1.0, -2.0]), np.eye(2), [[1.0, 0.0]])
    assert math.isinf(obs_radius(sys, SignalNorm.ONE, [0.0, 1.0]))


def test_set_polygon_errors(illustrative):
    three = LtiSystem(-np.eye(3), np.ones((3, 1)), np.ones((1, 3)))
    with pytest.raises(InvalidModel):
        set_polygon(three, SetKind.REACH_INF)
    with pytest.raises(InvalidConfig):
        set_polygon(illustrative, SetKind.REACH_INF, n_dirs=4)
    with pytest.raises(InvalidConfig):
        set_polygon(illustrative, SetKind.ELLIPSE)


def test_ellipse_polygon_uses_the_shape(illustrative):
    e = p_alpha(illustrative, 0.67)
    polygon = set_polygon(illustrative, SetKind.ELLIPSE, ellipsoid=e, n_dirs=90)
    assert_allclose(e.quadratic_form(polygon.vertices), 1.0, rtol=1e-12)
    assert is_convex(polygon.vertices)


def _random_directions(rng: np.random.Generator, n: int, count: int = 24) -> np.ndarray:
    dirs = rng.standard_normal((count, n))
    return dirs / np.linalg.norm(dirs, axis=1)[:, None]


@pytest.mark.parametrize("seed", [21, 22, 23])
def test_alpha_ellipsoids_bound_exact_sets_on_random_systems(make_system, seed):
    rng = np.random.default_rng(seed)
    for n in (2, 3, 4):
        sys = make_system(rng, n, int(rng.integers(1, 3)), int(rng.integers(1, 3)))
        dirs = _random_directions(rng, n)
        supports = reach_supports(sys, SignalNorm.INF, None, dirs)
        hi = alpha_window(sys)[1]
        for alpha in (0.2 * hi, 0.5 * hi, 0.8 * hi):
            # support of R_inf never exceeds the support sqrt(eta' P eta) of P_alpha
            p = p_matrix(sys, alpha)
            ellipse_support = np.sqrt(np.einsum("dn,nm,dm->d", dirs, p, dirs))
            assert np.all(supports <= ellipse_support * (1.0 + 1e-4))
            # boundary of Q_alpha lies in O_1
            e = q_alpha(sys, alpha)
            assert obs_inclusion(sys, SignalNorm.ONE, e, dirs) <= 1.0 + 1e-4


@pytest.mark.parametrize("seed", [31, 32])
def test_lmi_witness_ellipsoids_bound_exact_sets_on_random_systems(make_system, seed):
    rng = np.random.default_rng(seed)
    for n in (2, 3):
        sys = make_system(rng, n, 1, 1)
        dirs = _random_directions(rng, n)

        # peak output from the boundary of Q~ is at most one
        q_tilde = Ellipsoid(min_trace_q(sys).witness, EllipsoidForm.Q)
        assert obs_inclusion(sys, SignalNorm.INF, q_tilde, dirs) <= 1.0 + 1e-6

        # unit-integral reachable set lies inside P~
        p_tilde = min_trace_p(sys).witness
        supports = reach_supports(sys, SignalNorm.ONE, None, dirs)
        ellipse_support = np.sqrt(np.einsum("dn,nm,dm->d", dirs, p_tilde, dirs))
        assert np.all(supports <= ellipse_support * (1.0 + 1e-6))
