"""Barrier + augmented-Lagrangian quasi-Newton solver over shooting variables.

The decision variables are the flattened decoder modifiers and robot controls
(both warm-started at zero, which reproduces the plain prediction and a
standing robot).  Inequalities enter through a shifted logarithmic barrier
whose weight shrinks over outer rounds; equalities through multipliers plus a
growing quadratic penalty.  Each round minimizes the resulting merit with
BFGS (dense below ``dense_limit`` variables, limited-memory above) and an
Armijo backtracking line search.

States are never decision variables: trajectories returned in the result are
re-unrolled from the returned controls, so dynamics hold by construction.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .objectives import CompiledProblem, ProblemSpec, compile_problem


@dataclass(frozen=True)
class SolverConfig:
    barrier_init: float = 1.0
    barrier_decrease: float = 0.2
    barrier_min: float = 1e-6
    penalty_init: float = 10.0
    penalty_growth: float = 5.0
    penalty_max: float = 1e6
    max_rounds: int = 8
    max_inner: int = 50
    grad_tol: float = 1e-4
    constraint_tol: float = 1e-3
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 40
    lbfgs_history: int = 20
    dense_limit: int = 2000

    def __post_init__(self):
        if not (0 < self.barrier_decrease < 1 and 0 < self.backtrack < 1):
            raise ValueError("decrease factors must lie in (0, 1)")
        for v in (self.barrier_init, self.barrier_min, self.penalty_init,
                  self.penalty_growth, self.grad_tol, self.constraint_tol, self.armijo_c):
            if v <= 0:
                raise ValueError("solver parameters must be positive")


@dataclass
class IterationRecord:
    iteration: int
    round: int
    mu: float
    rho: float
    objective: float
    max_violation: float
    step_size: float
    merit: float

    def to_line(self) -> str:
        return (
            f'{{"iteration": {self.iteration}, "round": {self.round}, "mu": {self.mu!r}, '
            f'"rho": {self.rho!r}, "objective": {self.objective!r}, '
            f'"max_violation": {self.max_violation!r}, "step_size": {self.step_size!r}, '
            f'"merit": {self.merit!r}}}'
        )


@dataclass
class SolveResult:
    status: str  # converged | max-iter | infeasible | numeric-failure
    theta: np.ndarray
    objective: float
    ineq: np.ndarray
    eq: np.ndarray
    ineq_names: list[str]
    eq_names: list[str]
    human_traj: np.ndarray | None
    robot_traj: np.ndarray | None
    modifiers: np.ndarray | None
    controls: np.ndarray | None
    iterations: int
    log: list[IterationRecord] = field(default_factory=list)

    @property
    def max_violation(self) -> float:
        parts = [0.0]
        if self.ineq.size:
            parts.append(float(np.max(self.ineq)))
        if self.eq.size:
            parts.append(float(np.max(np.abs(self.eq))))
        return max(parts)

    def succeeded(self) -> bool:
        return self.status == "converged"


def merit(compiled: CompiledProblem, theta: np.ndarray, mu: float, rho: float,
          multipliers: np.ndarray, shift: float = 0.0,
          extra_leaves: dict | None = None) -> float:
    """Barrier/multiplier merit value; +inf when a barrier argument is invalid
    (the caller backtracks)."""
    f, g, h, _ = compiled.evaluate(theta, extra_leaves)
    return _merit_value(compiled, theta, f, g, h, mu, rho, multipliers, shift)


def _merit_value(compiled, theta, f, g, h, mu, rho, lam, shift) -> float:
    if not np.isfinite(f):
        return np.inf
    total = f
    if g.size:
        args = shift - g
        if np.any(args <= 0) or not np.all(np.isfinite(args)):
            return np.inf
        total -= mu * float(np.sum(np.log(args)))
    if h.size:
        if not np.all(np.isfinite(h)):
            return np.inf
        total += float(lam @ h) + 0.5 * rho * float(h @ h)
    lo, hi = compiled.lower, compiled.upper
    finite_lo = np.isfinite(lo)
    finite_hi = np.isfinite(hi)
    if np.any(finite_lo) or np.any(finite_hi):
        dlo = theta[finite_lo] - lo[finite_lo]
        dhi = hi[finite_hi] - theta[finite_hi]
        if np.any(dlo <= 0) or np.any(dhi <= 0):
            return np.inf
        total -= mu * (float(np.sum(np.log(dlo))) + float(np.sum(np.log(dhi))))
    return total if np.isfinite(total) else np.inf


def _merit_gradient(compiled, theta, g, h, mu, rho, lam, shift, ev) -> np.ndarray:
    seed = np.empty(1 + g.size + h.size)
    seed[0] = 1.0
    if g.size:
        seed[1 : 1 + g.size] = mu / (shift - g)
    if h.size:
        seed[1 + g.size :] = lam + rho * h
    grad = compiled.gradient(seed, ev)
    lo, hi = compiled.lower, compiled.upper
    finite_lo = np.isfinite(lo)
    finite_hi = np.isfinite(hi)
    if np.any(finite_lo):
        grad[finite_lo] -= mu / (theta[finite_lo] - lo[finite_lo])
    if np.any(finite_hi):
        grad[finite_hi] += mu / (hi[finite_hi] - theta[finite_hi])
    return grad


def bfgs_update(h_inv: np.ndarray, s: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Inverse BFGS update; returns the input unchanged on a curvature fail."""
    sy = float(s @ y)
    if sy <= 1e-10 * np.linalg.norm(s) * np.linalg.norm(y):
        return h_inv
    rho = 1.0 / sy
    hy = h_inv @ y
    # (I - rho s y') H (I - rho y s') + rho s s'
    out = h_inv - rho * (np.outer(s, hy) + np.outer(hy, s))
    out += rho * rho * float(y @ hy) * np.outer(s, s) + rho * np.outer(s, s)
    return out


class _LbfgsMemory:
    """Two-loop recursion with a bounded (s, y) history."""

    def __init__(self, history: int):
        self.pairs = deque(maxlen=history)

    def clear(self):
        self.pairs.clear()

    def push(self, s, y):
        sy = float(s @ y)
        if sy > 1e-10 * np.linalg.norm(s) * np.linalg.norm(y):
            self.pairs.append((s, y, 1.0 / sy))

    def direction(self, grad):
        q = grad.copy()
        alphas = []
        for s, y, rho in reversed(self.pairs):
            a = rho * float(s @ q)
            alphas.append(a)
            q -= a * y
        if self.pairs:
            s, y, _ = self.pairs[-1]
            q *= float(s @ y) / float(y @ y)
        for (s, y, rho), a in zip(self.pairs, reversed(alphas)):
            b = rho * float(y @ q)
            q += (a - b) * s
        return -q


def _fraction_to_boundary(theta, d, lo, hi, margin=0.995) -> float:
    """Largest step keeping box-bounded coordinates strictly interior."""
    alpha = 1.0
    neg = d < 0
    pos = d > 0
    fl = neg & np.isfinite(lo)
    fh = pos & np.isfinite(hi)
    if np.any(fl):
        alpha = min(alpha, margin * float(np.min((lo[fl] - theta[fl]) / d[fl])))
    if np.any(fh):
        alpha = min(alpha, margin * float(np.min((hi[fh] - theta[fh]) / d[fh])))
    return max(alpha, 0.0)


def solve_compiled(compiled: CompiledProblem, config: SolverConfig = SolverConfig(),
                   extra_leaves: dict | None = None) -> SolveResult:
    """Run the outer barrier/multiplier rounds on an already-compiled problem."""
    n = compiled.n
    theta = np.zeros(n)
    lam = np.zeros(compiled.num_eq)
    mu = config.barrier_init
    rho = config.penalty_init

    f0, g0, h0, _ = compiled.evaluate(theta, extra_leaves)
    shift0 = 0.0
    if g0.size:
        shift0 = max(0.0, float(np.max(g0))) + 0.1
    shift = shift0

    dense = n <= config.dense_limit
    lbfgs = _LbfgsMemory(config.lbfgs_history)

    log: list[IterationRecord] = []
    iteration = 0
    best = None  # (feasible, violation, objective, theta)
    status = "max-iter"
    numeric_failure = False

    def violation(g, h):
        parts = [0.0]
        if g.size:
            parts.append(float(np.max(g)))
        if h.size:
            parts.append(float(np.max(np.abs(h))))
        return max(parts)

    def consider(theta_now, f, g, h):
        # rank feasible-enough iterates by objective plus a violation penalty
        # (infeasible ones by violation alone); ties go to the newer iterate,
        # so the final barrier-polished point wins over near-equal early ones
        nonlocal best
        v = violation(g, h)
        feasible = v <= config.constraint_tol
        flag = not feasible
        val = v if not feasible else f + config.penalty_init * v
        if best is None:
            best = ((flag, val), theta_now.copy())
            return
        bflag, bval = best[0]
        if flag < bflag:  # first feasible iterate starts a fresh ranking
            best = ((flag, val), theta_now.copy())
        elif flag == bflag and val <= bval + 1e-9 * (1.0 + abs(bval)):
            best = ((flag, min(val, bval)), theta_now.copy())

    consider(theta, f0, g0, h0)

    grad_norm = np.inf
    prev_eq_norm = np.inf
    for rnd in range(config.max_rounds):
        h_inv = np.eye(n) if dense else None
        lbfgs.clear()
        f, g, h, ev = compiled.evaluate(theta, extra_leaves)
        m_val = _merit_value(compiled, theta, f, g, h, mu, rho, lam, shift)
        if not np.isfinite(m_val):
            # barrier violated at entry (shift annealed too far): re-shift
            shift = max(shift, float(np.max(g)) + 0.1 if g.size else 0.0)
            m_val = _merit_value(compiled, theta, f, g, h, mu, rho, lam, shift)
            if not np.isfinite(m_val):
                numeric_failure = True
                break
        grad = _merit_gradient(compiled, theta, g, h, mu, rho, lam, shift, ev)

        for _ in range(config.max_inner):
            # round subproblems are minimized on the raw merit gradient; the
            # projected-gradient KKT measure is only the final status check
            grad_norm = float(np.max(np.abs(grad)))
            if grad_norm < config.grad_tol:
                break
            d = (h_inv @ -grad) if dense else lbfgs.direction(grad)
            slope = float(d @ grad)
            if not np.isfinite(slope) or slope >= 0:
                if dense:
                    h_inv = np.eye(n)
                else:
                    lbfgs.clear()
                d = -grad
                slope = float(d @ grad)
            alpha = _fraction_to_boundary(theta, d, compiled.lower, compiled.upper)
            if alpha <= 0:
                break
            accepted = False
            for _ in range(config.max_backtracks):
                trial = theta + alpha * d
                f2, g2, h2, ev2 = compiled.evaluate(trial, extra_leaves)
                m2 = _merit_value(compiled, trial, f2, g2, h2, mu, rho, lam, shift)
                if np.isfinite(m2) and m2 <= m_val + config.armijo_c * alpha * slope:
                    accepted = True
                    break
                alpha *= config.backtrack
            if not accepted:
                break
            grad2 = _merit_gradient(compiled, trial, g2, h2, mu, rho, lam, shift, ev2)
            s = trial - theta
            y = grad2 - grad
            if dense:
                h_inv = bfgs_update(h_inv, s, y)
            else:
                lbfgs.push(s, y)
            theta, f, g, h, ev, m_val, grad = trial, f2, g2, h2, ev2, m2, grad2
            iteration += 1
            consider(theta, f, g, h)
            log.append(IterationRecord(iteration, rnd, mu, rho, f, violation(g, h),
                                       alpha, m_val))

        eq_norm = float(np.max(np.abs(h))) if h.size else 0.0
        if h.size:
            lam = lam + rho * h
        finished_schedule = mu <= config.barrier_min and eq_norm <= config.constraint_tol
        if finished_schedule and grad_norm < config.grad_tol:
            break
        mu = max(mu * config.barrier_decrease, config.barrier_min)
        # grow the penalty only while the multiplier updates alone are not
        # closing the equalities fast enough; unconditional growth makes the
        # late subproblems too stiff to polish
        if h.size and eq_norm > max(0.25 * prev_eq_norm, 0.1 * config.constraint_tol):
            rho = min(rho * config.penalty_growth, config.penalty_max)
        prev_eq_norm = eq_norm
        shift = shift0 * (mu / config.barrier_init)
        if g.size and shift <= float(np.max(g)):
            shift = float(np.max(g)) + 1e-3

    theta_best = best[1] if best is not None else theta
    f, g, h, ev = compiled.evaluate(theta_best, extra_leaves)
    v = violation(g, h)
    # converged means: the final barrier subproblem was minimized to the
    # gradient tolerance (its barrier/multiplier weights are the converged
    # KKT multiplier estimates) and the returned iterate is feasible
    if numeric_failure:
        status = "numeric-failure"
    elif v > config.constraint_tol:
        status = "infeasible"
    elif grad_norm < config.grad_tol:
        status = "converged"
    else:
        status = "max-iter"

    human, robot = compiled.trajectories(ev)
    parts = compiled.split(theta_best)
    steps = len(compiled.human_state_refs or compiled.robot_state_refs or [])
    modifiers = parts.get("u_h")
    controls = parts.get("u_r")
    return SolveResult(
        status=status,
        theta=theta_best,
        objective=f,
        ineq=g,
        eq=h,
        ineq_names=compiled.ineq_names,
        eq_names=compiled.eq_names,
        human_traj=human,
        robot_traj=robot,
        modifiers=None if modifiers is None else modifiers.reshape(steps, -1),
        controls=None if controls is None else controls.reshape(steps, -1),
        iterations=iteration,
        log=log,
    )


def solve(problem: ProblemSpec, config: SolverConfig = SolverConfig(), *,
          model=None, robot=None, skeleton=None, sdf=None) -> SolveResult:
    """Compile a planning problem and solve it from the zero warm start."""
    kwargs = {}
    if skeleton is not None:
        kwargs["skeleton"] = skeleton
    compiled = compile_problem(problem, model=model, robot=robot, sdf=sdf, **kwargs)
    return solve_compiled(compiled, config)
