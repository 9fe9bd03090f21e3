"""Mobile-manipulator model: state, velocity-control dynamics and FK.

The robot is a differential-drive base carrying a small velocity-controlled
arm.  Its state is ``[x, y, heading, q_1..q_J]`` and one control step holds a
forward displacement, an angular displacement and per-joint displacements
(displacements per step; the frame time only enters metrics).

The default platform is a stand-in: a 4-joint right arm on a wheeled base,
with a configurable hand offset.  Chains are loadable from JSON so other
geometries can be swapped in.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .graph import Ref, Tape
from .kinematics import axis_angle_matrix, yaw_matrix


class RobotError(ValueError):
    pass


@dataclass(frozen=True)
class ChainLink:
    """One link: fixed translation in the parent frame, then an optional
    revolute joint about ``axis`` (None for a rigid link)."""

    name: str
    offset: tuple[float, float, float]
    axis: tuple[float, float, float] | None = None


@dataclass(frozen=True)
class RobotConfig:
    chain: tuple[ChainLink, ...]
    hand_link: str = "hand"
    max_forward_step: float = 0.15  # m per step
    max_turn_step: float = 0.3  # rad per step
    max_joint_step: float = 0.2  # rad per step

    @property
    def num_joints(self) -> int:
        return sum(1 for l in self.chain if l.axis is not None)

    @property
    def state_dim(self) -> int:
        return 3 + self.num_joints

    @property
    def control_dim(self) -> int:
        return 2 + self.num_joints

    def link_names(self) -> list[str]:
        return ["base"] + [l.name for l in self.chain]

    def control_bounds(self) -> np.ndarray:
        """Per-control symmetric bound magnitudes, shape (control_dim,)."""
        return np.array(
            [self.max_forward_step, self.max_turn_step]
            + [self.max_joint_step] * self.num_joints
        )


DEFAULT_ROBOT = RobotConfig(
    chain=(
        ChainLink("shoulderPitch", (0.05, -0.15, 0.80), (0.0, 1.0, 0.0)),
        ChainLink("shoulderRoll", (0.0, 0.0, 0.0), (1.0, 0.0, 0.0)),
        ChainLink("elbow", (0.22, 0.0, 0.0), (0.0, 1.0, 0.0)),
        ChainLink("wristPitch", (0.20, 0.0, 0.0), (0.0, 1.0, 0.0)),
        ChainLink("hand", (0.10, 0.0, 0.0), None),
    )
)


def save_robot(config: RobotConfig, path) -> None:
    doc = {
        "format": "comotion-robot",
        "version": 1,
        "chain": [
            {"name": l.name, "offset": list(l.offset),
             "axis": None if l.axis is None else list(l.axis)}
            for l in config.chain
        ],
        "hand_link": config.hand_link,
        "control_bounds": {
            "forward": config.max_forward_step,
            "turn": config.max_turn_step,
            "joint": config.max_joint_step,
        },
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)


def load_robot(path) -> RobotConfig:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != "comotion-robot":
        raise RobotError(f"{path}: not a robot config file")
    chain = tuple(
        ChainLink(l["name"], tuple(l["offset"]),
                  None if l["axis"] is None else tuple(l["axis"]))
        for l in doc["chain"]
    )
    b = doc.get("control_bounds", {})
    return RobotConfig(
        chain=chain,
        hand_link=doc.get("hand_link", "hand"),
        max_forward_step=float(b.get("forward", 0.15)),
        max_turn_step=float(b.get("turn", 0.3)),
        max_joint_step=float(b.get("joint", 0.2)),
    )


# ---------------------------------------------------------------------------
# Dynamics
# ---------------------------------------------------------------------------


def robot_step(state: np.ndarray, control: np.ndarray) -> np.ndarray:
    """One velocity-control step: heading-aligned translation, turn, joints."""
    state = np.asarray(state, dtype=np.float64)
    control = np.asarray(control, dtype=np.float64)
    if control.shape[0] != state.shape[0] - 1:
        raise RobotError(f"control dim {control.shape[0]} does not match state {state.shape[0]}")
    th = state[2]
    out = state.copy()
    out[0] += np.cos(th) * control[0]
    out[1] += np.sin(th) * control[0]
    out[2] += control[1]
    out[3:] += control[2:]
    return out


def robot_unroll(initial: np.ndarray, controls: np.ndarray) -> np.ndarray:
    """Integrate a control sequence; returns the (H, state_dim) post-step states."""
    controls = np.asarray(controls, dtype=np.float64)
    if controls.ndim != 2 or controls.shape[0] < 1:
        raise RobotError("controls must be (horizon >= 1, control_dim)")
    state = np.asarray(initial, dtype=np.float64)
    states = np.empty((controls.shape[0], state.shape[0]))
    for t, u in enumerate(controls):
        state = robot_step(state, u)
        states[t] = state
    return states


def robot_unroll_graph(tape: Tape, initial: np.ndarray, controls: Ref,
                       horizon: int, state_dim: int) -> list[Ref]:
    """Record the unrolled dynamics; ``controls`` is flat (horizon * (dim-1),)."""
    control_dim = state_dim - 1
    if controls.shape != (horizon * control_dim,):
        raise RobotError(
            f"controls ref must have shape ({horizon * control_dim},), got {controls.shape}"
        )
    state = tape.const(np.asarray(initial, dtype=np.float64))
    states = []
    for t in range(horizon):
        u = tape.slice(controls, t * control_dim, (t + 1) * control_dim)
        u0 = u[0:1]
        u1 = u[1:2]
        th = state[2:3]
        nx = tape.add(state[0:1], tape.mul(tape.cos(th), u0))
        ny = tape.add(state[1:2], tape.mul(tape.sin(th), u0))
        nth = tape.add(th, u1)
        parts = [nx, ny, nth]
        if control_dim > 2:
            parts.append(tape.add(state[3:state_dim], u[2:control_dim]))
        state = tape.concat(parts)
        states.append(state)
    return states


# ---------------------------------------------------------------------------
# Forward kinematics
# ---------------------------------------------------------------------------


def robot_fk(config: RobotConfig, state: np.ndarray, link: str):
    """World position and orientation of a robot link.

    The base link sits on the ground plane at ``(x, y, 0)`` with the base yaw.
    """
    state = np.asarray(state, dtype=np.float64)
    pos = np.array([state[0], state[1], 0.0])
    R = yaw_matrix(state[2])
    if link == "base":
        return pos, R
    qi = 3
    for l in config.chain:
        pos = pos + R @ np.asarray(l.offset)
        if l.axis is not None:
            R = R @ axis_angle_matrix(l.axis, state[qi])
            qi += 1
        if l.name == link:
            return pos, R
    raise RobotError(f"unknown link {link!r}")


def _axis_consts(axis) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(axis, dtype=np.float64)
    a = a / np.linalg.norm(a)
    K = np.array([[0, -a[2], a[1]], [a[2], 0, -a[0]], [-a[1], a[0], 0]])
    return K, K @ K


def _axis_mat_t_graph(tape: Tape, axis, angle: Ref) -> Ref:
    """Transposed Rodrigues matrix: R(a, q)^T = I - sin(q) K + (1 - cos(q)) K^2."""
    K, K2 = _axis_consts(axis)
    s = tape.mul(tape.sin(angle), tape.const(-1.0))
    c1m = tape.sub(tape.const(1.0), tape.cos(angle))
    return tape.add(
        tape.const(np.eye(3)),
        tape.add(tape.mul(s, tape.const(K)), tape.mul(c1m, tape.const(K2))),
    )


def robot_fk_graph(tape: Tape, config: RobotConfig, state: Ref, link: str):
    """Differentiable FK; returns (position ref, transposed-rotation ref)."""
    xy = state[0:2]
    pos = tape.concat([xy, tape.const(np.zeros(1))])
    mat_t = _axis_mat_t_graph(tape, (0.0, 0.0, 1.0), state[2:3])
    if link == "base":
        return pos, mat_t
    qi = 3
    for l in config.chain:
        off = tape.const(np.asarray(l.offset, dtype=np.float64))
        pos = tape.add(pos, tape.matmul(off, mat_t))
        if l.axis is not None:
            local = _axis_mat_t_graph(tape, l.axis, state[qi : qi + 1])
            mat_t = tape.matmul(local, mat_t)
            qi += 1
        if l.name == link:
            return pos, mat_t
    raise RobotError(f"unknown link {link!r}")


def heading_graph(tape: Tape, state: Ref) -> Ref:
    """Planar heading unit vector (cos, sin) of the base."""
    th = state[2:3]
    return tape.concat([tape.cos(th), tape.sin(th)])
