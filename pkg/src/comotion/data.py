"""Trajectory ingestion, preprocessing, synthetic motion and sweeps.

Canonical trajectory files are line-delimited text: a JSON header line opens
each record (subject, frame rate, joint order, annotations), followed by one
line per frame holding 87 numbers: base position (3) then 21 quaternions
(w x y z) in the canonical joint order.  Rotations are stored as quaternions
on disk and converted to the 6-D representation at load time.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .kinematics import (
    DEFAULT_HUMAN_SKELETON,
    HUMAN_JOINT_NAMES,
    NUM_JOINTS,
    STATE_DIM,
    axis_angle_matrix,
    forward_kinematics,
    matrix_to_rot6d,
    quat_from_rot6d,
    yaw_matrix,
)

FRAME_NUMBERS = 3 + 4 * NUM_JOINTS  # 87 per line on disk


class DataError(ValueError):
    pass


@dataclass
class TrajectoryRecord:
    subject: str
    fps: float
    frames: np.ndarray  # (n, 129)
    annotations: dict = field(default_factory=dict)

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 2 or self.frames.shape[1] != STATE_DIM:
            raise DataError(f"frames must be (n, {STATE_DIM}), got {self.frames.shape}")
        if self.frames.shape[0] < 2:
            raise DataError("a record needs at least 2 frames")
        if self.fps <= 0:
            raise DataError("frame rate must be positive")


# ---------------------------------------------------------------------------
# Canonical file format
# ---------------------------------------------------------------------------


def _quats_to_rot6d(quats: np.ndarray) -> np.ndarray:
    """Vectorized (…, 4) unit quaternions -> (…, 6) first-two-column form."""
    w, x, y, z = quats[..., 0], quats[..., 1], quats[..., 2], quats[..., 3]
    c1 = np.stack([1 - 2 * (y * y + z * z), 2 * (x * y + w * z), 2 * (x * z - w * y)], axis=-1)
    c2 = np.stack([2 * (x * y - w * z), 1 - 2 * (x * x + z * z), 2 * (y * z + w * x)], axis=-1)
    return np.concatenate([c1, c2], axis=-1)


def load_trajectories(path) -> list[TrajectoryRecord]:
    """Parse a canonical trajectory file; malformed lines name their number."""
    records: list[TrajectoryRecord] = []
    header = None
    rows: list[np.ndarray] = []

    def flush(line_no):
        nonlocal header, rows
        if header is None:
            return
        if len(rows) < 2:
            raise DataError(f"line {line_no}: record {header.get('subject')!r} has fewer than 2 frames")
        raw = np.stack(rows)
        quats = raw[:, 3:].reshape(len(rows), NUM_JOINTS, 4)
        norms = np.linalg.norm(quats, axis=-1, keepdims=True)
        frames = np.concatenate(
            [raw[:, :3], _quats_to_rot6d(quats / norms).reshape(len(rows), -1)], axis=1
        )
        records.append(
            TrajectoryRecord(
                subject=str(header["subject"]),
                fps=float(header["fps"]),
                frames=frames,
                annotations=header.get("annotations", {}),
            )
        )
        header, rows = None, []

    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("{"):
                flush(line_no)
                try:
                    doc = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise DataError(f"line {line_no}: bad record header: {exc}") from None
                if doc.get("format") != "comotion-trajectory":
                    raise DataError(f"line {line_no}: not a trajectory header")
                if doc.get("joints") != HUMAN_JOINT_NAMES:
                    raise DataError(f"line {line_no}: joint order differs from the canonical schema")
                header = doc
                continue
            if header is None:
                raise DataError(f"line {line_no}: frame data before any record header")
            parts = line.split()
            if len(parts) != FRAME_NUMBERS:
                raise DataError(
                    f"line {line_no}: expected {FRAME_NUMBERS} numbers, got {len(parts)}"
                )
            try:
                row = np.array([float(p) for p in parts])
            except ValueError:
                raise DataError(f"line {line_no}: non-numeric frame entry") from None
            if not np.all(np.isfinite(row)):
                raise DataError(f"line {line_no}: non-finite frame entry")
            qn = np.linalg.norm(row[3:].reshape(NUM_JOINTS, 4), axis=1)
            if np.any(qn < 1e-6):
                raise DataError(f"line {line_no}: zero-norm quaternion")
            rows.append(row)
        flush("end of file")
    return records


def save_trajectories(records: list[TrajectoryRecord], path) -> None:
    with open(path, "w") as fh:
        for rec in records:
            header = {
                "format": "comotion-trajectory",
                "version": 1,
                "subject": rec.subject,
                "fps": rec.fps,
                "joints": HUMAN_JOINT_NAMES,
                "annotations": rec.annotations,
            }
            fh.write(json.dumps(header) + "\n")
            for frame in rec.frames:
                quats = [quat_from_rot6d(frame[3 + 6 * j : 9 + 6 * j]) for j in range(NUM_JOINTS)]
                nums = list(frame[:3]) + [v for q in quats for v in q]
                fh.write(" ".join(repr(float(v)) for v in nums) + "\n")


# ---------------------------------------------------------------------------
# Preprocessing
# ---------------------------------------------------------------------------


def downsample(record: TrajectoryRecord, target_fps: float) -> TrajectoryRecord:
    """Keep every (source/target)-th frame; the ratio must be integral."""
    ratio = record.fps / target_fps
    if abs(ratio - round(ratio)) > 1e-9 or ratio < 1:
        raise DataError(f"target fps {target_fps} does not divide source fps {record.fps}")
    step = int(round(ratio))
    ann = dict(record.annotations)
    if "actions" in ann:
        ann["actions"] = [
            {**a, "start": a["start"] // step, "end": a["end"] // step} for a in ann["actions"]
        ]
    return TrajectoryRecord(record.subject, target_fps, record.frames[::step].copy(), ann)


def windows(record: TrajectoryRecord, in_frames: int, out_frames: int, stride: int = 1):
    """All contiguous (input, target) pairs; count is n - in - out + 1 at stride 1."""
    n = record.frames.shape[0]
    span = in_frames + out_frames
    pairs = []
    for s in range(0, n - span + 1, stride):
        pairs.append(
            (record.frames[s : s + in_frames].copy(),
             record.frames[s + in_frames : s + span].copy())
        )
    return pairs


def rotate_frames(frames: np.ndarray, yaw: float) -> np.ndarray:
    """Rigidly rotate a motion about the world z axis.

    Base positions and the base rotation are pre-multiplied; joint-local
    rotations are parent-relative and unchanged.
    """
    R = yaw_matrix(yaw)
    out = np.array(frames, dtype=np.float64, copy=True)
    out[..., :3] = frames[..., :3] @ R.T
    out[..., 3:6] = frames[..., 3:6] @ R.T
    out[..., 6:9] = frames[..., 6:9] @ R.T
    return out


def augment_rotation(pair, seed: int):
    """Apply one uniform random yaw to both halves of a training pair."""
    rng = np.random.default_rng(seed)
    yaw = rng.uniform(0.0, 2.0 * np.pi)
    inp, tgt = pair
    return rotate_frames(inp, yaw), rotate_frames(tgt, yaw)


# ---------------------------------------------------------------------------
# Dataset splitting
# ---------------------------------------------------------------------------


@dataclass
class DatasetSplit:
    train: list[TrajectoryRecord]
    test: list[TrajectoryRecord]
    held_out: list[TrajectoryRecord]


def split_dataset(
    records: list[TrajectoryRecord],
    held_out_subject: str,
    test_fraction: float = 0.2,
    seed: int = 0,
) -> DatasetSplit:
    """Subject-disjoint held-out split plus a per-subject train/test split."""
    held = [r for r in records if r.subject == held_out_subject]
    rest = [r for r in records if r.subject != held_out_subject]
    rng = np.random.default_rng(seed)
    train: list[TrajectoryRecord] = []
    test: list[TrajectoryRecord] = []
    subjects = sorted({r.subject for r in rest})
    for subject in subjects:
        own = [r for r in rest if r.subject == subject]
        order = rng.permutation(len(own))
        n_test = max(1, int(round(test_fraction * len(own)))) if len(own) > 1 else 0
        test += [own[i] for i in order[:n_test]]
        train += [own[i] for i in order[n_test:]]
    return DatasetSplit(train=train, test=test, held_out=held)


def verify_split(split: DatasetSplit) -> None:
    held = {r.subject for r in split.held_out}
    used = {r.subject for r in split.train} | {r.subject for r in split.test}
    if held & used:
        raise DataError(f"held-out subjects leak into train/test: {sorted(held & used)}")


# ---------------------------------------------------------------------------
# Synthetic walk-and-reach data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SynthConfig:
    num_trajectories: int = 200
    duration_frames: int = 80
    fps: float = 20.0
    min_speed: float = 0.3
    max_speed: float = 0.55  # m/s, hard clamp on base speed
    max_turn_rate: float = 0.4  # rad/s
    reach_frames: int = 20  # terminal arm-reach segment
    workspace: float = 3.0  # half-extent of the start square, m
    base_height: float = 0.93
    num_subjects: int = 6


def _smoothstep(x: float) -> float:
    x = min(max(x, 0.0), 1.0)
    return x * x * (3.0 - 2.0 * x)


def _gait_rotations(phase: float, swing: float, reach_blend: float) -> dict[str, np.ndarray]:
    """Local joint rotation matrices for one frame of the gait cycle."""
    s = np.sin(phase)
    rots = {
        "lHip": axis_angle_matrix([0, 1, 0], swing * 0.5 * s),
        "rHip": axis_angle_matrix([0, 1, 0], -swing * 0.5 * s),
        "lKnee": axis_angle_matrix([0, 1, 0], swing * 0.4 * (0.5 - 0.5 * np.cos(phase))),
        "rKnee": axis_angle_matrix([0, 1, 0], swing * 0.4 * (0.5 + 0.5 * np.cos(phase))),
        "lShoulder": axis_angle_matrix([0, 1, 0], -swing * 0.35 * s),
        "torso": axis_angle_matrix([0, 1, 0], 0.04 + 0.05 * swing),
        "lElbow": axis_angle_matrix([0, 0, 1], 0.25),
    }
    # the right arm blends from its gait swing into a forward reach
    sh_gait = axis_angle_matrix([0, 1, 0], swing * 0.35 * s)
    sh_reach = axis_angle_matrix([0, 0, 1], 1.05) @ axis_angle_matrix([0, 1, 0], -0.25)
    el_gait = axis_angle_matrix([0, 0, 1], -0.25)
    el_reach = axis_angle_matrix([0, 0, 1], -0.05)
    b = reach_blend
    rots["rShoulder"] = _blend_rotation(sh_gait, sh_reach, b)
    rots["rElbow"] = _blend_rotation(el_gait, el_reach, b)
    return rots


def _blend_rotation(Ra: np.ndarray, Rb: np.ndarray, w: float) -> np.ndarray:
    """Geodesic-ish blend: rotate Ra toward Rb by fraction w (matrix log free)."""
    if w <= 0.0:
        return Ra
    if w >= 1.0:
        return Rb
    # slerp via quaternions would pull in more machinery than the data needs;
    # normalizing a chordal blend is smooth and exact at both endpoints
    M = (1.0 - w) * Ra + w * Rb
    u, _, vt = np.linalg.svd(M)
    d = np.sign(np.linalg.det(u @ vt))
    return u @ np.diag([1.0, 1.0, d]) @ vt


def synth_generate(config: SynthConfig, seed: int) -> list[TrajectoryRecord]:
    """Procedural walk-and-reach trajectories with goal annotations.

    Each trajectory walks a smooth arc at a per-trajectory cruise speed with
    stride-locked joint oscillation, then blends the right arm into a reach
    during the final segment.  The annotated goal is the exact final wrist
    position.
    """
    rng = np.random.default_rng(seed)
    records = []
    dt = 1.0 / config.fps
    for ti in range(config.num_trajectories):
        n = config.duration_frames
        cruise = 0.0 if config.max_speed <= 0 else rng.uniform(config.min_speed, config.max_speed)
        cruise = min(cruise, config.max_speed)
        turn = rng.uniform(-config.max_turn_rate, config.max_turn_rate)
        heading = rng.uniform(0, 2 * np.pi)
        pos = np.array(
            [rng.uniform(-config.workspace, config.workspace),
             rng.uniform(-config.workspace, config.workspace)]
        )
        reach_start = n - config.reach_frames
        frames = np.empty((n, STATE_DIM))
        phase = rng.uniform(0, 2 * np.pi)
        for i in range(n):
            ramp = _smoothstep(i / 10.0)
            slow = 1.0 - 0.7 * _smoothstep((i - reach_start) / max(config.reach_frames, 1))
            speed = min(cruise * ramp * slow, config.max_speed)
            swing = min(speed / 0.6, 1.0)
            blend = _smoothstep((i - reach_start) / max(config.reach_frames, 1))
            z = config.base_height + 0.015 * swing * np.cos(2.0 * phase)
            base_rot = yaw_matrix(heading)
            frames[i, 0:2] = pos
            frames[i, 2] = z
            frames[i, 3:9] = matrix_to_rot6d(base_rot)
            rots = _gait_rotations(phase, swing, blend)
            for j, name in enumerate(HUMAN_JOINT_NAMES[1:], start=1):
                R = rots.get(name, np.eye(3))
                frames[i, 3 + 6 * j : 9 + 6 * j] = matrix_to_rot6d(R)
            pos = pos + speed * dt * np.array([np.cos(heading), np.sin(heading)])
            heading += turn * dt
            phase += 2.0 * np.pi * speed * dt / 0.6  # 0.6 m stride length
        goal, _ = forward_kinematics(DEFAULT_HUMAN_SKELETON, frames[-1], "rWrist")
        records.append(
            TrajectoryRecord(
                subject=f"synth{ti % config.num_subjects}",
                fps=config.fps,
                frames=frames,
                annotations={"goal": [float(v) for v in goal], "goal_frame": n - 1,
                             "goal_link": "rWrist"},
            )
        )
    return records


# ---------------------------------------------------------------------------
# Hyperparameter sweep
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepGrid:
    batch_sizes: tuple = (8, 32)
    layer_counts: tuple = (1, 2)
    hidden_sizes: tuple = (100,)
    seeds: tuple = (0,)

    def cells(self):
        for b in self.batch_sizes:
            for l in self.layer_counts:
                for h in self.hidden_sizes:
                    for s in self.seeds:
                        yield (b, l, h, s)


def run_sweep(
    grid: SweepGrid,
    split: DatasetSplit,
    budget_seconds: float | None = None,
    *,
    epochs: int = 30,
    base_config: "object | None" = None,
    progress=None,
):
    """Train every grid cell, keep per-epoch test losses, pick the best model.

    Returns (leaderboard, best_params).  Cell failures are recorded and the
    sweep continues; cells past the wall-clock budget are marked skipped.
    """
    from . import human_model  # runtime import; human_model.train uses this module

    verify_split(split)
    train_frames = [r.frames for r in split.train]
    test_frames = [r.frames for r in split.test]
    leaderboard = []
    best_params = None
    best_loss = np.inf
    t0 = time.monotonic()
    for batch_size, layers, hidden, seed in grid.cells():
        entry = {
            "batch_size": batch_size,
            "layers": layers,
            "hidden": hidden,
            "seed": seed,
            "status": "ok",
            "best_test_loss": float("inf"),
            "best_epoch": -1,
            "final_test_loss": float("nan"),
        }
        if budget_seconds is not None and time.monotonic() - t0 > budget_seconds:
            entry["status"] = "skipped (budget)"
            leaderboard.append(entry)
            continue
        config = replace(
            base_config if base_config is not None else human_model.ModelConfig(),
            num_layers=layers,
            hidden_size=hidden,
        )
        try:
            result = human_model.train(
                train_frames,
                config,
                seed,
                epochs=epochs,
                batch_size=batch_size,
                test_records=test_frames,
                progress=progress,
            )
        except Exception as exc:  # individual cell failures do not stop the sweep
            entry["status"] = f"failed: {exc}"
            leaderboard.append(entry)
            continue
        losses = [m.test_loss for m in result.history]
        if not any(np.isfinite(v) for v in losses):  # no test records: rank by train loss
            losses = [m.train_loss for m in result.history]
        best_epoch = int(np.nanargmin(losses)) if losses else -1
        entry["best_epoch"] = best_epoch
        entry["best_test_loss"] = float(losses[best_epoch]) if best_epoch >= 0 else float("inf")
        entry["final_test_loss"] = float(losses[-1]) if losses else float("nan")
        leaderboard.append(entry)
        if entry["best_test_loss"] < best_loss:
            best_loss = entry["best_test_loss"]
            best_params = result.best
    leaderboard.sort(key=lambda e: e["best_test_loss"])
    return leaderboard, best_params
