"""Baselines, error/smoothness metrics, success checks and batch drivers.

Methods compared throughout the experiments:

* ``ours``: joint optimization of the human prediction and the robot plan
  (``human_prio``/``robot_prio`` are the same with shifted agent weights).
* ``initial``: the plain prediction; the robot, when present, is optimized
  against it as a fixed trajectory.
* ``zerovel``: the no-movement prediction, treated like ``initial``.
* ``sample``: noisy-hidden-state prediction samples, ranked by a heuristic,
  with robot-only optimization attempted against each until one succeeds.
* ``with_coll`` / ``human_avoids`` / ``robot_avoids``: sequential pipelines
  that optimize the agents separately (and in the avoid variants freeze the
  first agents' result while the second keeps a clearance to it).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import human_model as hm
from .environment import scene_sdf
from .kinematics import (
    DEFAULT_HUMAN_SKELETON,
    NUM_JOINTS,
    forward_kinematics,
    quat_from_rot6d,
    relative_angle,
)
from .objectives import (
    ConstraintSpec,
    ObjectiveWeights,
    ProblemSpec,
    compile_problem,
    control_objective,
)
from .robot_model import DEFAULT_ROBOT, robot_fk
from .solver import SolveResult, SolverConfig, solve_compiled

METHODS = (
    "ours",
    "human_prio",
    "robot_prio",
    "initial",
    "zerovel",
    "sample",
    "with_coll",
    "human_avoids",
    "robot_avoids",
)

WEIGHT_PRESETS = {
    "human_prio": (100.0, 1.0),
    "robot_prio": (1.0, 100.0),
}


class EvaluationError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Prediction baselines
# ---------------------------------------------------------------------------


def predict_initial(model: hm.ModelParams, observed: np.ndarray, horizon: int) -> np.ndarray:
    """The plain forecast: encode the history and unroll zero modifiers."""
    return hm.predict(model, observed, horizon=horizon)


def zerovel_predict(observed: np.ndarray, horizon: int) -> np.ndarray:
    """No-movement baseline: repeats the last observed frame."""
    observed = np.asarray(observed, dtype=np.float64)
    if observed.ndim != 2 or observed.shape[0] < 1:
        raise EvaluationError("need at least one observed frame")
    return np.tile(observed[-1], (horizon, 1))


@dataclass(frozen=True)
class SampleConfig:
    num_samples: int = 100
    noise_variance: float | None = None  # None: 0.05 * mean |hidden| per layer
    ranking: str = "distance_to_goal"  # or "handover_loss"

    def __post_init__(self):
        if self.num_samples < 1:
            raise EvaluationError("need at least one sample")
        if self.noise_variance is not None and self.noise_variance <= 0:
            raise EvaluationError("noise variance must be positive")
        if self.ranking not in ("distance_to_goal", "handover_loss"):
            raise EvaluationError(f"unknown ranking {self.ranking!r}")


def sample_predictions(model, observed, horizon, config: SampleConfig, seed: int):
    """Decode ``num_samples`` futures from Gaussian-perturbed hidden states."""
    rng = np.random.default_rng(seed)
    hiddens = hm.encode(model, observed)
    var = config.noise_variance
    if var is None:
        mean_mag = float(np.mean([np.mean(np.abs(h)) for h in hiddens]))
        var = max(0.05 * mean_mag, 1e-12)
    sigma = np.sqrt(var)
    zeros = np.zeros((horizon, hm.MODIFIER_DIM))
    init_state = observed[-1]
    init_vel = observed[-1] - observed[-2]
    samples = []
    for _ in range(config.num_samples):
        noisy = [h + sigma * rng.standard_normal(h.shape) for h in hiddens]
        samples.append(hm.unroll_decoder(model, init_state, init_vel, noisy, zeros, horizon))
    return samples


def _human_palm(state, spec_offset):
    pos, R = forward_kinematics(DEFAULT_HUMAN_SKELETON, state, "rWrist")
    return pos + R @ np.asarray(spec_offset)


def _robot_palm(state, robot, spec_offset):
    pos, R = robot_fk(robot, state, robot.hand_link)
    return pos + R @ np.asarray(spec_offset)


def handover_loss(human_state, robot_state, spec: ConstraintSpec,
                  robot=DEFAULT_ROBOT) -> float:
    """Hard handover residual: palm distance squared plus the facing term."""
    ph = _human_palm(human_state, spec.palm_offset_human)
    pr = _robot_palm(robot_state, robot, spec.palm_offset_robot)
    Rh = forward_kinematics(DEFAULT_HUMAN_SKELETON, human_state, "base")[1]
    hh = Rh[:2, 0]
    hh = hh / max(np.linalg.norm(hh), 1e-12)
    th = robot_state[2]
    hr = np.array([np.cos(th), np.sin(th)])
    return float(np.sum((ph - pr) ** 2) + 1.0 + hh @ hr)


def rank_predictions(samples, config: SampleConfig, problem: ProblemSpec,
                     robot=DEFAULT_ROBOT):
    """Order sample indices by the configured heuristic, best first."""
    scores = []
    if config.ranking == "distance_to_goal":
        goal = _human_goal(problem)
        if goal is None:
            raise EvaluationError("distance_to_goal ranking needs a human goal constraint")
        link = _human_goal_link(problem)
        for s in samples:
            pos, _ = forward_kinematics(DEFAULT_HUMAN_SKELETON, s[-1], link)
            scores.append(float(np.linalg.norm(pos - goal)))
    else:
        spec = _find(problem, "handover")
        if spec is None:
            raise EvaluationError("handover_loss ranking needs a handover constraint")
        rstate = np.asarray(problem.robot_initial)
        for s in samples:
            scores.append(handover_loss(s[-1], rstate, spec, robot))
    return list(np.argsort(scores, kind="stable"))


def _find(problem: ProblemSpec, kind: str) -> ConstraintSpec | None:
    for c in problem.constraints:
        if c.kind == kind:
            return c
    return None


def _human_goal(problem) -> np.ndarray | None:
    for c in problem.constraints:
        if c.kind == "goal" and c.agent == "human":
            return np.asarray(c.target)
    return None


def _human_goal_link(problem) -> str:
    for c in problem.constraints:
        if c.kind == "goal" and c.agent == "human":
            return c.link
    return "rWrist"


def _robot_goal(problem) -> np.ndarray | None:
    for c in problem.constraints:
        if c.kind == "goal" and c.agent == "robot":
            return np.asarray(c.target)
    return None


# ---------------------------------------------------------------------------
# Method results
# ---------------------------------------------------------------------------


@dataclass
class MethodResult:
    method: str
    human_traj: np.ndarray | None
    robot_traj: np.ndarray | None
    modifiers: np.ndarray | None
    controls: np.ndarray | None
    objective: float
    solver_status: str
    details: dict = field(default_factory=dict)


def _robot_only_problem(problem: ProblemSpec, human_traj: np.ndarray | None,
                        drop_joint: bool = False) -> ProblemSpec:
    constraints = []
    for c in problem.constraints:
        if c.kind in ("goal", "collision") and c.agent == "human":
            continue
        if drop_joint and c.kind in ("joint_clearance", "joint_goal", "handover"):
            continue
        if human_traj is None and c.kind in ("joint_clearance", "joint_goal", "handover"):
            continue
        constraints.append(c)
    return replace_problem(
        problem,
        constraints=constraints,
        optimize_human=False,
        fixed_human=human_traj,
    )


def _human_only_problem(problem: ProblemSpec, robot_traj: np.ndarray | None,
                        drop_joint: bool = False) -> ProblemSpec:
    constraints = []
    for c in problem.constraints:
        if c.kind in ("goal", "collision") and c.agent == "robot":
            continue
        if drop_joint and c.kind in ("joint_clearance", "joint_goal", "handover"):
            continue
        if robot_traj is None and c.kind in ("joint_clearance", "joint_goal", "handover"):
            continue
        constraints.append(c)
    return replace_problem(
        problem,
        constraints=constraints,
        optimize_robot=False,
        robot_initial=None,
        fixed_robot=robot_traj,
    )


def replace_problem(problem: ProblemSpec, **changes) -> ProblemSpec:
    fields = dict(
        horizon=problem.horizon,
        weights=problem.weights,
        constraints=list(problem.constraints),
        observed_human=problem.observed_human,
        robot_initial=problem.robot_initial,
        scene=problem.scene,
        optimize_human=problem.optimize_human,
        optimize_robot=problem.optimize_robot,
        fixed_human=problem.fixed_human,
        fixed_robot=problem.fixed_robot,
        model_path=problem.model_path,
    )
    fields.update(changes)
    return ProblemSpec(**fields)


def _solve_robot_against(problem, human_traj, model, robot, sdf, solver_config,
                         compiled_cache=None):
    """Robot-only solve with the human frozen; caches the compiled tape."""
    sub = _robot_only_problem(problem, human_traj)
    if compiled_cache is not None and "compiled" in compiled_cache:
        compiled = compiled_cache["compiled"]
        return compiled, solve_compiled(
            compiled, solver_config, extra_leaves={"fixed_h": human_traj.reshape(-1)}
        )
    compiled = compile_problem(sub, model=None, robot=robot, sdf=sdf)
    if compiled_cache is not None:
        compiled_cache["compiled"] = compiled
    return compiled, solve_compiled(compiled, solver_config)


def run_method(
    problem: ProblemSpec,
    method: str,
    model: hm.ModelParams | None,
    *,
    robot=DEFAULT_ROBOT,
    sdf=None,
    solver_config: SolverConfig = SolverConfig(),
    sample_config: SampleConfig = SampleConfig(),
    criteria: "SuccessCriteria | None" = None,
    kind: str = "collision",
    seed: int = 0,
) -> MethodResult:
    """Run one planning method on one problem."""
    if method not in METHODS:
        raise EvaluationError(f"unknown method {method!r}")
    if method in WEIGHT_PRESETS:
        wh, wr = WEIGHT_PRESETS[method]
        problem = replace_problem(
            problem, weights=replace(problem.weights, weight_human=wh, weight_robot=wr)
        )

    steps = problem.steps
    if method in ("ours", "human_prio", "robot_prio"):
        compiled = compile_problem(problem, model=model, robot=robot, sdf=sdf)
        res = solve_compiled(compiled, solver_config)
        return MethodResult(method, res.human_traj, res.robot_traj, res.modifiers,
                            res.controls, res.objective, res.status,
                            details={"iterations": res.iterations})

    if method in ("initial", "zerovel"):
        human = (
            predict_initial(model, problem.observed_human, steps)
            if method == "initial"
            else zerovel_predict(problem.observed_human, steps)
        )
        if not problem.has_robot():
            return MethodResult(method, human, None, None, None, 0.0, "converged")
        _, res = _solve_robot_against(problem, human, model, robot, sdf, solver_config)
        return MethodResult(method, human, res.robot_traj, None, res.controls,
                            res.objective, res.status,
                            details={"iterations": res.iterations})

    if method == "sample":
        samples = sample_predictions(model, problem.observed_human, steps,
                                     sample_config, seed)
        order = rank_predictions(samples, sample_config, problem, robot)
        if not problem.has_robot():
            best = samples[order[0]]
            return MethodResult(method, best, None, None, None, 0.0, "converged",
                                details={"attempts": 0, "picked": int(order[0])})
        if criteria is None:
            criteria = SuccessCriteria()
        cache: dict = {}
        best_result = None
        for attempt, idx in enumerate(order):
            human = samples[idx]
            _, res = _solve_robot_against(problem, human, model, robot, sdf,
                                          solver_config, compiled_cache=cache)
            candidate = MethodResult(method, human, res.robot_traj, None, res.controls,
                                     res.objective, res.status,
                                     details={"attempts": attempt + 1, "picked": int(idx)})
            ok, _ = check_success(problem, candidate, criteria, kind, robot=robot)
            if ok:
                return candidate
            if best_result is None:
                best_result = candidate
        return best_result

    # sequential pipelines
    if method == "with_coll":
        hres = solve_compiled(
            compile_problem(_human_only_problem(problem, None, drop_joint=True),
                            model=model, robot=robot, sdf=sdf),
            solver_config,
        )
        rres = solve_compiled(
            compile_problem(_robot_only_problem(problem, None, drop_joint=True),
                            model=None, robot=robot, sdf=sdf),
            solver_config,
        )
        return MethodResult(method, hres.human_traj, rres.robot_traj, hres.modifiers,
                            rres.controls, hres.objective + rres.objective,
                            _combine_status(hres, rres))
    if method == "human_avoids":
        rres = solve_compiled(
            compile_problem(_robot_only_problem(problem, None, drop_joint=True),
                            model=None, robot=robot, sdf=sdf),
            solver_config,
        )
        hres = solve_compiled(
            compile_problem(_human_only_problem(problem, rres.robot_traj),
                            model=model, robot=robot, sdf=sdf),
            solver_config,
        )
        return MethodResult(method, hres.human_traj, rres.robot_traj, hres.modifiers,
                            rres.controls, hres.objective + rres.objective,
                            _combine_status(hres, rres),
                            details={"frozen": "robot"})
    if method == "robot_avoids":
        hres = solve_compiled(
            compile_problem(_human_only_problem(problem, None, drop_joint=True),
                            model=model, robot=robot, sdf=sdf),
            solver_config,
        )
        rres = solve_compiled(
            compile_problem(_robot_only_problem(problem, hres.human_traj),
                            model=None, robot=robot, sdf=sdf),
            solver_config,
        )
        return MethodResult(method, hres.human_traj, rres.robot_traj, hres.modifiers,
                            rres.controls, hres.objective + rres.objective,
                            _combine_status(hres, rres),
                            details={"frozen": "human"})
    raise EvaluationError(f"unhandled method {method!r}")


def _combine_status(a: SolveResult, b: SolveResult) -> str:
    order = ("numeric-failure", "infeasible", "max-iter", "converged")
    return order[min(order.index(a.status), order.index(b.status))]


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


@dataclass
class MetricsReport:
    base_pos_error: dict[float, float] | None  # seconds -> meters
    angle_error: dict[float, float] | None  # seconds -> radians, all joints
    arm_angle_error: dict[float, float] | None  # seconds -> radians, right arm
    travel_human: float | None
    travel_robot: float | None
    ms_jerk: float | None
    ld_jerk: float | None
    sparc: float | None
    success: bool | None = None

    def row(self) -> dict:
        doc = {
            "travel_human": self.travel_human,
            "travel_robot": self.travel_robot,
            "ms_jerk": self.ms_jerk,
            "ld_jerk": self.ld_jerk,
            "sparc": self.sparc,
            "success": self.success,
        }
        if self.base_pos_error:
            for s, v in self.base_pos_error.items():
                doc[f"base_pos@{s:g}s"] = v
        if self.angle_error:
            for s, v in self.angle_error.items():
                doc[f"angle@{s:g}s"] = v
        if self.arm_angle_error:
            for s, v in self.arm_angle_error.items():
                doc[f"angle_arm@{s:g}s"] = v
        return doc


ARM_JOINTS = ("rElbow", "rShoulder")


def _joint_quats(state):
    return [quat_from_rot6d(state[3 + 6 * j : 9 + 6 * j]) for j in range(NUM_JOINTS)]


def path_length(xy: np.ndarray) -> float:
    return float(np.sum(np.linalg.norm(np.diff(xy, axis=0), axis=1)))


def mean_squared_jerk(xy: np.ndarray, dt: float) -> float:
    """Negative mean squared third difference per dt^3; 0 is maximally smooth."""
    if len(xy) < 4:
        raise EvaluationError("jerk metrics need at least 4 frames")
    jerk = np.diff(xy, n=3, axis=0) / dt ** 3
    return -float(np.mean(np.sum(jerk ** 2, axis=1)))


def log_dimensionless_jerk(xy: np.ndarray, dt: float) -> float:
    """-ln of the dimensionless squared-jerk integral, clamped to <= 0.

    Stationary or jerk-free motion reports 0 (maximally smooth).
    """
    if len(xy) < 4:
        raise EvaluationError("jerk metrics need at least 4 frames")
    vel = np.diff(xy, axis=0) / dt
    speed = np.linalg.norm(vel, axis=1)
    peak = float(np.max(speed))
    if peak < 1e-9:
        return 0.0
    jerk = np.diff(xy, n=3, axis=0) / dt ** 3
    integral = float(np.sum(np.sum(jerk ** 2, axis=1)) * dt)
    if integral < 1e-12:
        return 0.0
    duration = dt * (len(xy) - 1)
    dj = duration ** 3 / peak ** 2 * integral
    return min(0.0, -float(np.log(dj)))


def spectral_arc_length(speed: np.ndarray, fs: float, pad_level: int = 4,
                        cutoff_hz: float = 10.0, amp_threshold: float = 0.05) -> float:
    """Spectral arc length of a speed profile (closer to 0 is smoother)."""
    speed = np.asarray(speed, dtype=np.float64)
    if speed.size < 2 or float(np.max(speed)) < 1e-9:
        return 0.0
    nfft = int(2 ** (np.ceil(np.log2(speed.size)) + pad_level))
    freqs = np.arange(nfft) * (fs / nfft)
    mag = np.abs(np.fft.fft(speed, nfft))
    mag = mag / np.max(mag)
    sel = freqs <= cutoff_hz
    f_sel, m_sel = freqs[sel], mag[sel]
    above = np.nonzero(m_sel >= amp_threshold)[0]
    f_sel = f_sel[above[0] : above[-1] + 1]
    m_sel = m_sel[above[0] : above[-1] + 1]
    if f_sel.size < 2:
        return 0.0
    df = np.diff(f_sel) / (f_sel[-1] - f_sel[0])
    dm = np.diff(m_sel)
    return -float(np.sum(np.sqrt(df ** 2 + dm ** 2)))


def compute_metrics(
    human_traj: np.ndarray | None,
    robot_traj: np.ndarray | None,
    ground_truth: np.ndarray | None = None,
    dt: float = 0.05,
    sample_seconds=(0.4, 0.8, 1.2, 1.6, 2.0),
    robot_initial: np.ndarray | None = None,
    human_start: np.ndarray | None = None,
    strict_smoothness: bool = True,
) -> MetricsReport:
    """Errors against ground truth plus travel and robot smoothness metrics.

    Error metrics sample the exact frames closest to the requested horizon
    seconds.  Smoothness is computed on the robot base path (the planned
    agent); travel distances are planar path lengths of each base.  Jerk
    metrics are undefined below 4 frames: an error when strict, otherwise
    they stay unset.
    """
    base_err = angle_err = arm_err = None
    if human_traj is not None and ground_truth is not None:
        n = min(len(human_traj), len(ground_truth))
        base_err, angle_err, arm_err = {}, {}, {}
        arm_idx = [DEFAULT_HUMAN_SKELETON.index(nm) for nm in ARM_JOINTS]
        for s in sample_seconds:
            f = int(round(s / dt)) - 1
            if f < 0 or f >= n:
                continue
            pred, truth = human_traj[f], ground_truth[f]
            base_err[s] = float(np.linalg.norm(pred[:3] - truth[:3]))
            qp, qt = _joint_quats(pred), _joint_quats(truth)
            angles = [relative_angle(a, b) for a, b in zip(qp, qt)]
            angle_err[s] = float(np.mean(angles))
            arm_err[s] = float(np.mean([angles[j] for j in arm_idx]))

    travel_h = travel_r = None
    if human_traj is not None:
        xy = human_traj[:, :2]
        if human_start is not None:
            xy = np.vstack([human_start[None, :2], xy])
        travel_h = path_length(xy)
    ms = ld = sal = None
    if robot_traj is not None:
        if len(robot_traj) < 4 and strict_smoothness:
            raise EvaluationError("jerk metrics need at least 4 frames")
        xy = robot_traj[:, :2]
        if robot_initial is not None:
            xy = np.vstack([robot_initial[None, :2], xy])
        travel_r = path_length(xy)
        if len(robot_traj) >= 4:
            ms = mean_squared_jerk(xy, dt)
            ld = log_dimensionless_jerk(xy, dt)
            speed = np.linalg.norm(np.diff(xy, axis=0), axis=1) / dt
            sal = spectral_arc_length(speed, fs=1.0 / dt)
    return MetricsReport(base_err, angle_err, arm_err, travel_h, travel_r, ms, ld, sal)


# ---------------------------------------------------------------------------
# Success checking
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SuccessCriteria:
    hand_goal_max: float = 0.1  # m
    robot_base_goal_max: float = 0.2  # m
    objective_max: float = 0.1
    handover_loss_max: float = 0.1
    clearance: float = 0.5  # m
    clearance_slack: float = 0.01  # m, tolerance on the dense check
    collision_margin: float = 0.0
    resample_factor: int = 10

    def __post_init__(self):
        for v in (self.hand_goal_max, self.robot_base_goal_max, self.objective_max,
                  self.handover_loss_max, self.clearance):
            if v <= 0:
                raise EvaluationError("success thresholds must be positive")


def _resample(xy: np.ndarray, factor: int) -> np.ndarray:
    if len(xy) < 2 or factor <= 1:
        return xy
    out = [xy[:1]]
    for a, b in zip(xy[:-1], xy[1:]):
        ts = np.linspace(0.0, 1.0, factor + 1)[1:]
        out.append(a[None, :] + ts[:, None] * (b - a)[None, :])
    return np.vstack(out)


def min_scene_distance(scene, xy: np.ndarray, factor: int) -> float:
    dense = _resample(xy, factor)
    return float(np.min(scene_sdf(scene, dense)))


def min_clearance(human_xy: np.ndarray, robot_xy: np.ndarray, factor: int) -> float:
    dh = _resample(human_xy, factor)
    dr = _resample(robot_xy, factor)
    return float(np.min(np.linalg.norm(dh - dr, axis=1)))


def joint_goal_diagnostic(problem: ProblemSpec, human_traj, robot_traj,
                          robot=DEFAULT_ROBOT):
    """Hard minimum of the pickup distances: which agent, when, how close."""
    spec = _find(problem, "joint_goal")
    if spec is None:
        raise EvaluationError("problem has no joint goal constraint")
    target = np.asarray(spec.target)
    best = None
    for t, state in enumerate(human_traj):
        d = float(np.sum((_human_palm(state, spec.palm_offset_human) - target) ** 2))
        if best is None or d < best[2]:
            best = ("human", t, d)
    for t, state in enumerate(robot_traj):
        d = float(np.sum((_robot_palm(state, robot, spec.palm_offset_robot) - target) ** 2))
        if d < best[2]:
            best = ("robot", t, d)
    return best


def check_success(problem: ProblemSpec, result: MethodResult,
                  criteria: SuccessCriteria, kind: str,
                  robot=DEFAULT_ROBOT) -> tuple[bool, list[str]]:
    """Threshold conjunction for one experiment kind; reasons name failures.

    Collision and clearance clauses evaluate the hard constraint values on a
    densely resampled base path.
    """
    reasons = []
    human, rob = result.human_traj, result.robot_traj

    def scene_clear(xy, who):
        if problem.scene is None:
            return
        d = min_scene_distance(problem.scene, xy, criteria.resample_factor)
        if d < criteria.collision_margin:
            reasons.append(f"{who}-scene-collision")

    if kind in ("goal", "collision"):
        goal = _human_goal(problem)
        if goal is not None and human is not None:
            pos, _ = forward_kinematics(DEFAULT_HUMAN_SKELETON, human[-1],
                                        _human_goal_link(problem))
            if np.linalg.norm(pos - goal) > criteria.hand_goal_max:
                reasons.append("hand-goal")
    if kind == "collision":
        rgoal = _robot_goal(problem)
        if rgoal is not None and rob is not None:
            if np.linalg.norm(rob[-1][:2] - rgoal[:2]) > criteria.robot_base_goal_max:
                reasons.append("robot-base-goal")
        if human is not None:
            scene_clear(human[:, :2], "human")
        if rob is not None:
            scene_clear(rob[:, :2], "robot")
        if human is not None and rob is not None:
            c = min_clearance(human[:, :2], rob[:, :2], criteria.resample_factor)
            if c < criteria.clearance - criteria.clearance_slack:
                reasons.append("agent-clearance")
        if result.objective > criteria.objective_max:
            reasons.append("objective")
    if kind in ("handover", "pickup_handover"):
        if human is not None:
            scene_clear(human[:, :2], "human")
        if rob is not None:
            scene_clear(rob[:, :2], "robot")
        spec = _find(problem, "handover")
        if spec is not None and human is not None and rob is not None:
            loss = handover_loss(human[-1], rob[-1], spec, robot)
            if loss > criteria.handover_loss_max:
                reasons.append("handover-loss")
        if result.objective > criteria.objective_max:
            reasons.append("objective")
    if kind == "pickup_handover":
        diag = joint_goal_diagnostic(problem, human, rob, robot)
        if diag[2] > criteria.hand_goal_max ** 2:
            reasons.append("pickup-goal")
    return (not reasons, reasons)


# ---------------------------------------------------------------------------
# Batch driver
# ---------------------------------------------------------------------------


@dataclass
class ExperimentRecord:
    problem_id: str
    method: str
    success: bool
    reasons: list[str]
    metrics: MetricsReport
    objective: float
    solver_status: str
    wall_time: float
    details: dict = field(default_factory=dict)

    def row(self) -> dict:
        doc = {
            "problem": self.problem_id,
            "method": self.method,
            "success": self.success,
            "reasons": self.reasons,
            "objective": self.objective,
            "status": self.solver_status,
            "wall_time": self.wall_time,
        }
        doc.update(self.metrics.row())
        doc.update(self.details)
        return doc


def evaluate_problem(
    problem: ProblemSpec,
    method: str,
    model,
    *,
    problem_id: str = "p0",
    kind: str = "collision",
    ground_truth: np.ndarray | None = None,
    robot=DEFAULT_ROBOT,
    sdf=None,
    criteria: SuccessCriteria = SuccessCriteria(),
    solver_config: SolverConfig = SolverConfig(),
    sample_config: SampleConfig = SampleConfig(),
    seed: int = 0,
) -> ExperimentRecord:
    t0 = time.perf_counter()
    result = run_method(problem, method, model, robot=robot, sdf=sdf,
                        solver_config=solver_config, sample_config=sample_config,
                        criteria=criteria, kind=kind, seed=seed)
    wall = time.perf_counter() - t0
    ok, reasons = check_success(problem, result, criteria, kind, robot=robot)
    metrics = compute_metrics(
        result.human_traj,
        result.robot_traj,
        ground_truth=ground_truth,
        dt=problem.weights.frame_time,
        robot_initial=problem.robot_initial,
        human_start=problem.observed_human[-1] if problem.observed_human is not None else None,
        strict_smoothness=False,
    )
    metrics.success = ok
    return ExperimentRecord(
        problem_id=problem_id,
        method=method,
        success=ok,
        reasons=reasons,
        metrics=metrics,
        objective=result.objective,
        solver_status=result.solver_status,
        wall_time=wall,
        details=result.details,
    )


def summarize(records: list[ExperimentRecord], aggregate: str = "median") -> list[dict]:
    """Per-method aggregate rows: success rate plus metric medians (or means)."""
    agg = np.median if aggregate == "median" else np.mean
    methods = sorted({r.method for r in records})
    rows = []
    for method in methods:
        own = [r for r in records if r.method == method]
        row = {"method": method, "count": len(own),
               "success_rate": 100.0 * np.mean([r.success for r in own])}
        keys = set()
        for r in own:
            keys.update(k for k, v in r.metrics.row().items()
                        if isinstance(v, (int, float)) and v is not None)
        keys.discard("success")
        for key in sorted(keys):
            vals = [r.metrics.row().get(key) for r in own]
            vals = [v for v in vals if v is not None and np.isfinite(v)]
            if vals:
                row[key] = float(agg(vals))
        rows.append(row)
    return rows
