"""Solver tests: analytic toy problems, BFGS behavior, contracts."""

import numpy as np
import pytest

from comotion import human_model as hm
from comotion import objectives as obj
from comotion import solver as sv
from comotion.data import SynthConfig, synth_generate
from comotion.graph import Tape
from comotion.objectives import CompiledProblem


def toy_problem(build, n, num_ineq=0, num_eq=0, lower=None, upper=None):
    """Wrap a hand-built scalar graph into the compiled-problem interface.

    ``build(tape, x)`` returns (objective ref, [ineq refs], [eq refs]).
    """
    tape = Tape()
    x = tape.leaf("x", np.zeros(n))
    f, gs, hs = build(tape, x)
    parts = [tape.reshape(f, (1,))]
    parts += [tape.reshape(v, (1,)) for v in gs]
    parts += [tape.reshape(v, (1,)) for v in hs]
    tape.set_output(tape.concat(parts) if len(parts) > 1 else parts[0])
    return CompiledProblem(
        problem=None,
        tape=tape,
        leaf_dims={"x": n},
        num_ineq=len(gs),
        num_eq=len(hs),
        ineq_names=[f"g{i}" for i in range(len(gs))],
        eq_names=[f"h{i}" for i in range(len(hs))],
        lower=np.full(n, -np.inf) if lower is None else np.asarray(lower, dtype=float),
        upper=np.full(n, np.inf) if upper is None else np.asarray(upper, dtype=float),
        human_state_refs=None,
        robot_state_refs=None,
    )


def test_unconstrained_quadratic_stays_at_origin():
    compiled = toy_problem(lambda t, x: (t.sum_squares(x), [], []), n=6)
    result = sv.solve_compiled(compiled)
    assert result.status == "converged"
    assert result.objective == 0.0
    assert np.allclose(result.theta, 0.0)


def test_equality_toy_matches_analytic_solution():
    """min sum(u^2) s.t. sum(u) = 1 over 10 variables: u_i = 0.1."""

    def build(t, x):
        h = t.sub(t.sum(x), t.const(1.0))
        return t.sum_squares(x), [], [h]

    compiled = toy_problem(build, n=10)
    result = sv.solve_compiled(compiled)
    assert result.status == "converged"
    assert np.allclose(result.theta, 0.1, atol=1e-6)


def test_box_bound_quadratic_hits_kkt_point():
    """min (u - 2)^2 with u <= 1: active bound at u* = 1."""

    def build(t, x):
        d = t.sub(x, t.const(np.full(1, 2.0)))
        return t.sum_squares(d), [], []

    compiled = toy_problem(build, n=1, lower=[-5.0], upper=[1.0])
    result = sv.solve_compiled(compiled)
    assert result.theta[0] == pytest.approx(1.0, abs=1e-5)


def test_inequality_toy_max_style():
    """min |u - a|^2 s.t. u_i <= 0 elementwise (a > 0): solution 0."""
    a = np.array([0.5, 1.0, 0.2])

    def build(t, x):
        d = t.sub(x, t.const(a))
        gs = [t.slice(x, i, i + 1) for i in range(3)]
        gs = [t.sum(v) for v in gs]
        return t.sum_squares(d), gs, []

    compiled = toy_problem(build, n=3)
    result = sv.solve_compiled(compiled)
    assert np.all(result.theta <= 1e-8)
    assert np.allclose(result.theta, 0.0, atol=1e-4)


def test_merit_examples():
    def build(t, x):
        g = t.sub(t.sum(x), t.const(1.0))  # g = sum(x) - 1 <= 0
        h = t.sum(x)
        return t.sum_squares(x), [g], [h]

    compiled = toy_problem(build, n=2)
    theta = np.zeros(2)
    # g(0) = -1, ln(shift - g) with shift 0 = ln(1) = 0; h = 0
    assert sv.merit(compiled, theta, mu=1.0, rho=10.0, multipliers=np.zeros(1),
                    shift=0.0) == pytest.approx(0.0, abs=1e-15)
    # feasible point, mu -> 0, h = 0: merit -> objective
    theta = np.array([0.2, -0.2])
    f = float(np.sum(theta ** 2))
    assert sv.merit(compiled, theta, mu=1e-12, rho=10.0, multipliers=np.zeros(1),
                    shift=0.0) == pytest.approx(f, abs=1e-9)


def test_merit_matches_hand_evaluation():
    rng = np.random.default_rng(0)

    def build(t, x):
        g = t.sub(t.sum_squares(x), t.const(4.0))
        h = t.sub(t.sum(x), t.const(0.5))
        return t.sum_squares(x), [g], [h]

    compiled = toy_problem(build, n=3)
    theta = rng.normal(size=3) * 0.3
    mu, rho, shift = 0.7, 12.0, 0.05
    lam = np.array([0.3])
    f = float(np.sum(theta ** 2))
    g = f - 4.0
    h = float(np.sum(theta)) - 0.5
    expected = f - mu * np.log(shift - g) + lam[0] * h + 0.5 * rho * h * h
    assert sv.merit(compiled, theta, mu, rho, lam, shift) == pytest.approx(expected, rel=1e-12)


def test_merit_infeasible_barrier_is_infinite():
    def build(t, x):
        return t.sum_squares(x), [t.sum(x)], []

    compiled = toy_problem(build, n=1)
    assert sv.merit(compiled, np.array([2.0]), 1.0, 10.0, np.zeros(0), shift=0.0) == np.inf


def test_bfgs_quadratic_termination():
    """BFGS from identity solves a 5-dim quadratic in at most n + 2 iterations."""
    rng = np.random.default_rng(1)
    A = rng.normal(size=(5, 5))
    A = A @ A.T + 5 * np.eye(5)
    b = rng.normal(size=5)

    x = np.zeros(5)
    h_inv = np.eye(5)
    grad = A @ x - b
    for it in range(7):
        if np.linalg.norm(grad) < 1e-8:
            break
        d = -h_inv @ grad
        denom = float(d @ A @ d)
        alpha = -float(grad @ d) / denom  # exact line search on the quadratic
        s = alpha * d
        x = x + s
        grad_new = A @ x - b
        h_inv = sv.bfgs_update(h_inv, s, grad_new - grad)
        grad = grad_new
    assert it <= 7
    assert np.linalg.norm(A @ x - b) < 1e-6


def test_bfgs_update_guards_and_symmetry():
    rng = np.random.default_rng(2)
    h_inv = np.eye(4)
    s = rng.normal(size=4)
    y = -s  # negative curvature: update must be skipped
    assert np.array_equal(sv.bfgs_update(h_inv, s, y), h_inv)
    y = s + 0.1 * rng.normal(size=4)
    out = sv.bfgs_update(h_inv, s, y)
    assert np.allclose(out, out.T, atol=1e-12)


def test_monotone_merit_within_rounds():
    def build(t, x):
        h = t.sub(t.sum(x), t.const(1.0))
        return t.sum_squares(x), [], [h]

    compiled = toy_problem(build, n=10)
    result = sv.solve_compiled(compiled)
    by_round = {}
    for rec in result.log:
        by_round.setdefault(rec.round, []).append(rec.merit)
    for merits in by_round.values():
        assert all(b <= a + 1e-12 for a, b in zip(merits, merits[1:]))


def test_iteration_log_lines_parse():
    import json

    def build(t, x):
        return t.sum_squares(t.sub(x, t.const(np.ones(3)))), [], []

    result = sv.solve_compiled(toy_problem(build, n=3))
    assert result.log
    rec = json.loads(result.log[0].to_line())
    assert set(rec) == {"iteration", "round", "mu", "rho", "objective",
                        "max_violation", "step_size", "merit"}


def test_solver_determinism():
    def build(t, x):
        g = t.sub(t.sum_squares(x), t.const(1.0))
        h = t.sub(t.sum(x), t.const(0.5))
        return t.sum_squares(t.sub(x, t.const(np.array([1.0, -2.0, 0.5])))), [g], [h]

    a = sv.solve_compiled(toy_problem(build, n=3))
    b = sv.solve_compiled(toy_problem(build, n=3))
    assert np.array_equal(a.theta, b.theta)
    assert [r.merit for r in a.log] == [r.merit for r in b.log]


@pytest.fixture(scope="module")
def tiny_model_setup():
    cfg = hm.ModelConfig(num_layers=1, hidden_size=16, input_frames=4, output_frames=4,
                         dropout=0.0, recurrent_dropout=0.0)
    model = hm.init_params(cfg, seed=0)
    recs = synth_generate(SynthConfig(num_trajectories=1, duration_frames=24,
                                      reach_frames=6), seed=1)
    return model, recs[0].frames[:4]


def test_motion_problem_warm_start_objective_zero(tiny_model_setup):
    model, observed = tiny_model_setup
    problem = obj.ProblemSpec(
        horizon=4 + 5,
        observed_human=observed,
        robot_initial=np.array([1.0, 0.0, np.pi, 0.0, 0.0, 0.0, 0.0]),
    )
    compiled = obj.compile_problem(problem, model=model)
    f, g, h, _ = compiled.evaluate(np.zeros(compiled.n))
    assert f == 0.0
    result = sv.solve_compiled(compiled, sv.SolverConfig(max_rounds=2, max_inner=5))
    assert result.objective == 0.0  # nothing pulls away from the warm start
    assert np.allclose(result.theta, 0.0)


def test_shooting_consistency_bit_exact(tiny_model_setup):
    model, observed = tiny_model_setup
    target = observed[-1][:3] + np.array([0.3, 0.1, -0.1])
    problem = obj.ProblemSpec(
        horizon=4 + 5,
        observed_human=observed,
        robot_initial=np.array([1.0, 0.0, np.pi, 0.0, 0.0, 0.0, 0.0]),
        constraints=[
            obj.ConstraintSpec(kind="goal", agent="human", link="rWrist",
                               target=tuple(target)),
            obj.ConstraintSpec(kind="goal", agent="robot", link="base",
                               target=(0.5, 0.5, 0.0)),
        ],
    )
    compiled = obj.compile_problem(problem, model=model)
    result = sv.solve_compiled(compiled, sv.SolverConfig(max_rounds=3, max_inner=15))

    # re-unroll the returned controls independently
    hiddens = hm.encode(model, observed)
    human = hm.unroll_decoder(model, observed[-1], observed[-1] - observed[-2], hiddens,
                              result.modifiers, 5)
    assert np.array_equal(human, result.human_traj)
    from comotion.robot_model import robot_unroll

    robot = robot_unroll(problem.robot_initial, result.controls)
    assert np.array_equal(robot, result.robot_traj)


def test_human_reach_problem_converges(tiny_model_setup):
    model, observed = tiny_model_setup
    pred = hm.predict(model, observed, horizon=6)
    from comotion.kinematics import DEFAULT_HUMAN_SKELETON, forward_kinematics

    wrist, _ = forward_kinematics(DEFAULT_HUMAN_SKELETON, pred[-1], "rWrist")
    target = wrist + np.array([0.15, -0.1, 0.05])
    problem = obj.ProblemSpec(
        horizon=4 + 6,
        observed_human=observed,
        constraints=[obj.ConstraintSpec(kind="goal", agent="human", link="rWrist",
                                        target=tuple(target))],
        optimize_robot=False,
    )
    compiled = obj.compile_problem(problem, model=model)
    result = sv.solve_compiled(compiled, sv.SolverConfig(max_rounds=6, max_inner=40))
    assert result.status == "converged"
    final, _ = forward_kinematics(DEFAULT_HUMAN_SKELETON, result.human_traj[-1], "rWrist")
    assert np.linalg.norm(final - target) < 0.05  # residual < 1e-3 means < 3.2 cm
