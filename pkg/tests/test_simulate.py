import numpy as np
import pytest
from numpy.testing import assert_array_equal

from epsctl.ellipsoids import p_alpha, q_alpha
from epsctl.errors import InvalidConfig, InvalidModel
from epsctl.models import PolicyKind
from epsctl.norms import eps_norm
from epsctl.simulate import (
    SimulationConfig,
    constant_policy,
    default_step,
    integrate,
    random_policy,
    simulate,
    worst_case_policy,
    zero_policy,
)
from epsctl.synth import state_feedback_loop, synthesize
from epsctl.sysmodel import LtiSystem


def test_policies_stay_in_the_unit_ball(illustrative):
    x = np.array([0.3, -0.7])
    assert np.linalg.norm(constant_policy([3.0, 4.0])(0.0, x)) == pytest.approx(1.0)
    assert np.linalg.norm(zero_policy(2)(0.0, x)) == 0.0
    policy = random_policy(3, seed=5)
    for t in range(20):
        assert np.linalg.norm(policy(float(t), x)) == pytest.approx(1.0)
    worst = worst_case_policy(p_alpha(illustrative, 0.67), illustrative)
    assert np.linalg.norm(worst(0.0, x)) == pytest.approx(1.0)
    assert np.linalg.norm(worst(0.0, np.zeros(2))) == 0.0


def test_worst_case_policy_needs_p_form(illustrative):
    with pytest.raises(InvalidModel):
        worst_case_policy(q_alpha(illustrative, 0.67), illustrative)


def test_zero_policy_decays_monotonically(illustrative):
    e = p_alpha(illustrative, 0.67)
    run = simulate(illustrative, PolicyKind.ZERO, [1.0, 0.0], SimulationConfig(t_end=10.0), ellipsoid=e)
    assert run.report.monotone
    assert run.trajectory.v_values[-1] < 1e-2 * run.trajectory.v_values[0]


def test_worst_case_trajectory_stays_in_p_alpha(illustrative):
    e = p_alpha(illustrative, 0.67)
    run = simulate(illustrative, PolicyKind.WORST, [0.0, 0.0], SimulationConfig(t_end=30.0), ellipsoid=e)
    assert run.report.entered
    assert run.report.first_entry_time == 0.0
    assert run.report.max_v <= 1.0 + 5e-3
    assert run.trajectory.meta.dt == pytest.approx(1e-3)
    assert run.trajectory.meta.alpha == pytest.approx(0.67)
    assert run.trajectory.meta.seed is None


def test_trajectory_starting_far_away_never_enters(illustrative):
    e = p_alpha(illustrative, 0.67)
    run = simulate(illustrative, PolicyKind.CONSTANT, [50.0, 0.0], SimulationConfig(t_end=0.2), ellipsoid=e)
    assert not run.report.entered
    assert run.report.max_v > 1.0


def test_random_runs_are_reproducible(illustrative):
    cfg = SimulationConfig(t_end=2.0, seed=42)
    first = simulate(illustrative, PolicyKind.RANDOM, [0.1, 0.1], cfg)
    second = simulate(illustrative, PolicyKind.RANDOM, [0.1, 0.1], cfg)
    assert_array_equal(first.trajectory.states, second.trajectory.states)
    assert first.trajectory.meta.seed == 42
    other = simulate(illustrative, PolicyKind.RANDOM, [0.1, 0.1], SimulationConfig(t_end=2.0, seed=43))
    assert not np.array_equal(first.trajectory.states, other.trajectory.states)


def test_rk4_matches_the_exact_scalar_step_response(scalar):
    # x' = -x + 1 from 0: x(t) = 1 - e^-t
    traj = integrate(scalar, constant_policy([1.0]), [0.0], 3.0, dt=1e-2)
    assert traj.states[-1, 0] == pytest.approx(1.0 - np.exp(-3.0), abs=1e-9)
    assert traj.outputs.shape == (len(traj.times), 1)


def test_integration_errors(illustrative):
    with pytest.raises(InvalidModel):
        integrate(illustrative, zero_policy(1), [1.0, 2.0, 3.0], 1.0)
    with pytest.raises(InvalidConfig):
        integrate(illustrative, lambda t, x: np.array([2.0]), [0.0, 0.0], 1.0, dt=0.1)
    with pytest.raises(InvalidConfig):
        default_step(LtiSystem([[0.5]], [[1.0]], [[1.0]]))
    with pytest.raises(InvalidConfig):
        SimulationConfig(t_end=0.0)


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_random_disturbances_stay_inside_the_optimal_bounding_set(illustrative, seed):
    alpha = eps_norm(illustrative).alpha
    e = p_alpha(illustrative, alpha)
    run = simulate(illustrative, PolicyKind.RANDOM, np.zeros(2), SimulationConfig(t_end=20.0, dt=1e-2, seed=seed), ellipsoid=e)
    assert float(e.quadratic_form(run.trajectory.states[-1])) <= 1.0 + 5e-2
    assert run.report.max_v <= 1.0 + 5e-2


def test_synthesized_loop_output_stays_below_its_norm(counterexample):
    result = synthesize(counterexample)
    loop = state_feedback_loop(counterexample, np.asarray(result.k))
    for seed in (4, 5):
        run = simulate(loop, PolicyKind.RANDOM, np.zeros(3), SimulationConfig(t_end=10.0, dt=1e-3, seed=seed))
        peak = float(np.max(np.linalg.norm(run.trajectory.outputs, axis=1)))
        assert 0.0 < peak <= result.eps_norm * (1.0 + 5e-2)
