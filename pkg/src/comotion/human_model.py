"""Recurrent human motion predictor with controllable decoder inputs.

The model is a stack of GRU layers plus one linear output layer.  Each step
consumes the current configuration's rotation block (base position is never a
network input) concatenated with the full finite-difference velocity, and
emits a predicted velocity that is integrated onto the state by a residual
connection.  The decoder feeds its own outputs back, so a whole future
unrolls from one encoded history.

Planning perturbs the decoder inputs with per-timestep modifier vectors: the
rotation block is shifted by the modifier and the velocity input by the
modifier's finite difference.  Zero modifiers reproduce the plain prediction
bit-exactly, which is what warm-starts the optimizer.

The step arithmetic is written once against a tiny backend protocol and runs
either on plain numpy arrays (vectors or column-batched matrices) or on a
:class:`~comotion.graph.Tape`, guaranteeing that the two paths produce
bit-identical results.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

from .graph import GraphError, Ref, Tape, backward, sigmoid_array
from .kinematics import ROT_BLOCK_DIM, STATE_DIM

INPUT_DIM = ROT_BLOCK_DIM + STATE_DIM  # rotation block + velocity block
MODIFIER_DIM = STATE_DIM  # 3 base-velocity handles + 126 rotation entries


class ModelError(ValueError):
    pass


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int):
        super().__init__(f"non-finite training loss in epoch {epoch}")
        self.epoch = epoch


@dataclass(frozen=True)
class ModelConfig:
    num_layers: int = 2
    hidden_size: int = 100
    input_frames: int = 20
    output_frames: int = 20
    frame_rate: float = 20.0
    dropout: float = 0.2
    recurrent_dropout: float = 0.2

    def __post_init__(self):
        if self.num_layers < 1 or self.hidden_size < 1:
            raise ModelError("need at least one layer and one hidden unit")
        if self.input_frames < 2 or self.output_frames < 2:
            raise ModelError("horizons must be at least 2 frames")
        if self.frame_rate <= 0:
            raise ModelError("frame rate must be positive")


def _weight_names(config: ModelConfig) -> list[str]:
    names = []
    for li in range(config.num_layers):
        for gate in ("z", "r", "n"):
            names += [f"gru{li}.W{gate}", f"gru{li}.U{gate}", f"gru{li}.b{gate}"]
    names += ["out.W", "out.b"]
    return names


def _weight_shape(config: ModelConfig, name: str) -> tuple[int, ...]:
    d = config.hidden_size
    if name == "out.W":
        return (STATE_DIM, d)
    if name == "out.b":
        return (STATE_DIM,)
    li = int(name[3 : name.index(".")])
    in_dim = INPUT_DIM if li == 0 else d
    kind = name.split(".")[1][0]
    if kind == "W":
        return (d, in_dim)
    if kind == "U":
        return (d, d)
    return (d,)


@dataclass
class ModelParams:
    """Named weight arrays plus the architecture they belong to."""

    config: ModelConfig
    arrays: dict[str, np.ndarray]

    def __post_init__(self):
        for name in _weight_names(self.config):
            a = self.arrays.get(name)
            if a is None:
                raise ModelError(f"missing weight {name!r}")
            if a.shape != _weight_shape(self.config, name):
                raise ModelError(
                    f"weight {name!r} has shape {a.shape}, expected "
                    f"{_weight_shape(self.config, name)}"
                )
            if not np.all(np.isfinite(a)):
                raise ModelError(f"weight {name!r} contains non-finite values")

    def copy(self) -> "ModelParams":
        return ModelParams(self.config, {k: v.copy() for k, v in self.arrays.items()})


def init_params(config: ModelConfig, seed: int) -> ModelParams:
    """Uniform [-1/sqrt(fan_in), +1/sqrt(fan_in)] matrices, zero biases."""
    rng = np.random.default_rng(seed)
    arrays = {}
    for name in _weight_names(config):
        shape = _weight_shape(config, name)
        if name.split(".")[1][0] == "b":
            arrays[name] = np.zeros(shape)
        else:
            bound = 1.0 / np.sqrt(shape[1])
            arrays[name] = rng.uniform(-bound, bound, size=shape)
    return ModelParams(config, arrays)


# ---------------------------------------------------------------------------
# Backends: the same step arithmetic over numpy arrays or tape refs
# ---------------------------------------------------------------------------


class _NumpyBackend:
    def __init__(self, batched: bool = False):
        self.batched = batched

    def matmul(self, A, B):
        return A @ B

    def add(self, a, b):
        return a + b

    def sub(self, a, b):
        return a - b

    def mul(self, a, b):
        return a * b

    def sigmoid(self, x):
        return sigmoid_array(x)

    def tanh(self, x):
        return np.tanh(x)

    def concat(self, parts):
        return np.concatenate(parts, axis=0)

    def rows(self, x, lo, hi):
        return x[lo:hi]

    def scalar(self, v):
        return v


class _TapeBackend:
    def __init__(self, tape: Tape, batched: bool = False):
        self.tape = tape
        self.batched = batched

    def matmul(self, A, B):
        return self.tape.matmul(A, B)

    def add(self, a, b):
        return self.tape.add(a, b)

    def sub(self, a, b):
        return self.tape.sub(a, b)

    def mul(self, a, b):
        return self.tape.mul(a, b)

    def sigmoid(self, x):
        return self.tape.sigmoid(x)

    def tanh(self, x):
        return self.tape.tanh(x)

    def concat(self, parts):
        return self.tape.concat(parts)

    def rows(self, x, lo, hi):
        return self.tape.slice(x, lo, hi)

    def scalar(self, v):
        return self.tape.const(v)


class _WeightSet:
    """Resolves weight names to backend values, lazily and with caching.

    Biases are made column vectors when the math is column-batched.  On a
    tape, weights become leaves when ``trainable`` (gradients wanted) and
    constants otherwise.
    """

    def __init__(self, backend, params: ModelParams, trainable: bool = False):
        self.backend = backend
        self.params = params
        self.trainable = trainable
        self._cache: dict[str, object] = {}

    def __getitem__(self, name: str):
        hit = self._cache.get(name)
        if hit is not None:
            return hit
        arr = self.params.arrays[name]
        is_bias = arr.ndim == 1
        if isinstance(self.backend, _TapeBackend):
            tape = self.backend.tape
            ref = tape.leaf(name, arr) if self.trainable else tape.const(arr)
            if is_bias and self.backend.batched:
                ref = tape.reshape(ref, (arr.shape[0], 1))
            value = ref
        else:
            value = arr[:, None] if (is_bias and self.backend.batched) else arr
        self._cache[name] = value
        return value


def _gru_stack(be, w, config: ModelConfig, x, hiddens, masks=None):
    """One step of the GRU stack; returns (top output, new hidden list).

    Gating follows the original formulation: h' = (1-z) h + z tanh(...), with
    the candidate reset applied to the recurrent input.
    """
    one = be.scalar(1.0)
    new_hiddens = []
    inp = x
    for li in range(config.num_layers):
        h = hiddens[li]
        if masks is not None:
            xd = be.mul(inp, masks[f"x{li}"])
            hd = be.mul(h, masks[f"h{li}"])
        else:
            xd, hd = inp, h
        z = be.sigmoid(
            be.add(be.add(be.matmul(w[f"gru{li}.Wz"], xd), be.matmul(w[f"gru{li}.Uz"], hd)),
                   w[f"gru{li}.bz"])
        )
        r = be.sigmoid(
            be.add(be.add(be.matmul(w[f"gru{li}.Wr"], xd), be.matmul(w[f"gru{li}.Ur"], hd)),
                   w[f"gru{li}.br"])
        )
        n = be.tanh(
            be.add(
                be.add(be.matmul(w[f"gru{li}.Wn"], xd),
                       be.matmul(w[f"gru{li}.Un"], be.mul(r, hd))),
                w[f"gru{li}.bn"],
            )
        )
        h_new = be.add(be.mul(be.sub(one, z), h), be.mul(z, n))
        new_hiddens.append(h_new)
        inp = h_new
    return inp, new_hiddens


def _cell_core(be, w, config, state, velocity, hiddens, u_t=None, u_next=None, masks=None):
    """Shared step: returns (next_state, predicted_velocity, new_hiddens)."""
    if u_t is None:
        rot_in = be.rows(state, 3, STATE_DIM)
        vel_in = velocity
    else:
        rot_in = be.add(be.rows(state, 3, STATE_DIM), be.rows(u_t, 3, STATE_DIM))
        vel_in = be.add(velocity, be.sub(u_next, u_t))
    x = be.concat([rot_in, vel_in])
    top, new_hiddens = _gru_stack(be, w, config, x, hiddens, masks)
    vhat = be.add(be.matmul(w["out.W"], top), w["out.b"])
    if u_t is None:
        next_state = be.add(state, vhat)
    else:
        # the residual integrates onto the perturbed input state; base
        # position has no modifier slot and integrates its velocity only
        next_state = be.add(be.concat([be.rows(state, 0, 3), rot_in]), vhat)
    return next_state, vhat, new_hiddens


def _zero_hiddens(be, config: ModelConfig, batch: int | None = None):
    shape = (config.hidden_size,) if batch is None else (config.hidden_size, batch)
    zeros = np.zeros(shape)
    if isinstance(be, _TapeBackend):
        return [be.tape.const(zeros) for _ in range(config.num_layers)]
    return [zeros.copy() for _ in range(config.num_layers)]


def _encode_steps(be, w, config, frames, hiddens, masks=None):
    """Feed consecutive-frame inputs; frames is a list of per-step values."""
    for i in range(1, len(frames)):
        vel = be.sub(frames[i], frames[i - 1])
        x = be.concat([be.rows(frames[i], 3, STATE_DIM), vel])
        _, hiddens = _gru_stack(be, w, config, x, hiddens, masks)
    return hiddens


# ---------------------------------------------------------------------------
# Public prediction API (plain numpy)
# ---------------------------------------------------------------------------


def encode(params: ModelParams, observed: np.ndarray) -> list[np.ndarray]:
    """Hidden state after feeding the observed history (k >= 2 frames)."""
    observed = np.asarray(observed, dtype=np.float64)
    if observed.ndim != 2 or observed.shape[1] != STATE_DIM:
        raise ModelError(f"observed must be (k, {STATE_DIM})")
    if observed.shape[0] < 2:
        raise ModelError("need at least 2 observed frames to form a velocity")
    be = _NumpyBackend()
    w = _WeightSet(be, params)
    hiddens = _zero_hiddens(be, params.config)
    return _encode_steps(be, w, params.config, list(observed), hiddens)


def cell_step(params: ModelParams, state, velocity, hidden):
    """Uncontrolled dynamics step: (state, velocity, hidden) -> next triple."""
    be = _NumpyBackend()
    w = _WeightSet(be, params)
    return _cell_core(be, w, params.config, np.asarray(state, dtype=np.float64),
                      np.asarray(velocity, dtype=np.float64), list(hidden))


def cell_step_controlled(params: ModelParams, state, velocity, hidden, u_t, u_next):
    """Dynamics step with decoder-input modifiers applied."""
    u_t = np.asarray(u_t, dtype=np.float64)
    u_next = np.asarray(u_next, dtype=np.float64)
    if u_t.shape != (MODIFIER_DIM,) or u_next.shape != (MODIFIER_DIM,):
        raise ModelError(f"modifiers must have {MODIFIER_DIM} entries")
    be = _NumpyBackend()
    w = _WeightSet(be, params)
    return _cell_core(be, w, params.config, np.asarray(state, dtype=np.float64),
                      np.asarray(velocity, dtype=np.float64), list(hidden),
                      u_t=u_t, u_next=u_next)


def unroll_decoder(params: ModelParams, initial_state, initial_velocity, hidden,
                   modifiers: np.ndarray, horizon: int) -> np.ndarray:
    """Roll the controlled decoder out ``horizon`` steps; returns (H, 129).

    ``modifiers`` holds one row per step; the step after the horizon reuses
    the final row, so its velocity contribution vanishes there.
    """
    if horizon < 1:
        raise ModelError("horizon must be at least 1")
    modifiers = np.asarray(modifiers, dtype=np.float64)
    if modifiers.shape != (horizon, MODIFIER_DIM):
        raise ModelError(f"modifiers must be ({horizon}, {MODIFIER_DIM})")
    be = _NumpyBackend()
    w = _WeightSet(be, params)
    state = np.asarray(initial_state, dtype=np.float64)
    velocity = np.asarray(initial_velocity, dtype=np.float64)
    hiddens = list(hidden)
    states = np.empty((horizon, STATE_DIM))
    for t in range(horizon):
        u_t = modifiers[t]
        u_next = modifiers[t + 1] if t + 1 < horizon else modifiers[t]
        state, velocity, hiddens = _cell_core(
            be, w, params.config, state, velocity, hiddens, u_t=u_t, u_next=u_next
        )
        states[t] = state
    return states


def predict(params: ModelParams, observed: np.ndarray, horizon: int | None = None) -> np.ndarray:
    """Uncontrolled forecast: encode the history, unroll zero modifiers."""
    observed = np.asarray(observed, dtype=np.float64)
    if horizon is None:
        horizon = params.config.output_frames
    hiddens = encode(params, observed)
    zeros = np.zeros((horizon, MODIFIER_DIM))
    return unroll_decoder(params, observed[-1], observed[-1] - observed[-2], hiddens,
                          zeros, horizon)


# ---------------------------------------------------------------------------
# Tape recording for planning
# ---------------------------------------------------------------------------


def unroll_graph(tape: Tape, params: ModelParams, observed: np.ndarray,
                 modifiers: Ref, horizon: int) -> list[Ref]:
    """Record the controlled decoder on ``tape``; returns per-step state refs.

    The observed history is encoded outside the tape (it is not a decision
    variable); weights enter as constants.  ``modifiers`` is a flat
    ``(horizon * MODIFIER_DIM,)`` ref, one row per step.
    """
    observed = np.asarray(observed, dtype=np.float64)
    if modifiers.shape != (horizon * MODIFIER_DIM,):
        raise ModelError(
            f"modifiers ref must have shape ({horizon * MODIFIER_DIM},), got {modifiers.shape}"
        )
    hiddens_np = encode(params, observed)
    be = _TapeBackend(tape)
    w = _WeightSet(be, params, trainable=False)
    hiddens = [tape.const(h) for h in hiddens_np]
    state = tape.const(observed[-1])
    velocity = tape.const(observed[-1] - observed[-2])
    states = []
    u_rows = [
        tape.slice(modifiers, t * MODIFIER_DIM, (t + 1) * MODIFIER_DIM) for t in range(horizon)
    ]
    for t in range(horizon):
        u_t = u_rows[t]
        u_next = u_rows[t + 1] if t + 1 < horizon else u_rows[t]
        state, velocity, hiddens = _cell_core(
            be, w, params.config, state, velocity, hiddens, u_t=u_t, u_next=u_next
        )
        states.append(state)
    return states


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


def training_loss(pred: np.ndarray, truth: np.ndarray) -> float:
    """Mean squared base-position error plus mean L1 rotation error.

    Both terms are means over frames of a per-frame norm (squared Euclidean
    for the base, L1 over all 126 rotation entries).
    """
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise ModelError(f"shape mismatch {pred.shape} vs {truth.shape}")
    base = np.mean(np.sum((pred[:, :3] - truth[:, :3]) ** 2, axis=1))
    rot = np.mean(np.sum(np.abs(pred[:, 3:] - truth[:, 3:]), axis=1))
    return float(base + rot)


@dataclass
class EpochMetrics:
    epoch: int
    train_loss: float
    test_loss: float
    base_pos_error: float  # mean base distance at the final predicted frame


@dataclass
class TrainResult:
    params: ModelParams  # after the last epoch
    best: ModelParams  # lowest test loss (falls back to train loss)
    history: list[EpochMetrics]
    snapshots: list[ModelParams] = field(default_factory=list)


def _rollout_batch(be, w, config, enc_frames, horizon, masks=None):
    """Encode per-step frames then roll the decoder; returns state list."""
    batch = enc_frames[0].shape[1]
    hiddens = _zero_hiddens(be, config, batch=batch)
    hiddens = _encode_steps(be, w, config, enc_frames, hiddens, masks)
    state = enc_frames[-1]
    velocity = be.sub(enc_frames[-1], enc_frames[-2])
    states = []
    for _ in range(horizon):
        state, velocity, hiddens = _cell_core(be, w, config, state, velocity, hiddens,
                                              masks=masks)
        states.append(state)
    return states


def _batch_loss_graph(tape, states, targets):
    """Scalar loss node for per-step (129, B) predictions vs target arrays."""
    horizon = len(states)
    batch = targets[0].shape[1]
    base_acc = None
    rot_acc = None
    for t in range(horizon):
        diff = tape.sub(states[t], tape.const(targets[t]))
        b = tape.sum(tape.square(tape.slice(diff, 0, 3)))
        r = tape.sum(tape.abs(tape.slice(diff, 3, STATE_DIM)))
        base_acc = b if base_acc is None else tape.add(base_acc, b)
        rot_acc = r if rot_acc is None else tape.add(rot_acc, r)
    scale = tape.const(1.0 / (horizon * batch))
    return tape.add(tape.mul(base_acc, scale), tape.mul(rot_acc, scale))


def _batch_loss_numpy(states, targets):
    horizon = len(states)
    batch = targets[0].shape[1]
    base = sum(float(np.sum((s[:3] - t[:3]) ** 2)) for s, t in zip(states, targets))
    rot = sum(float(np.sum(np.abs(s[3:] - t[3:]))) for s, t in zip(states, targets))
    return (base + rot) / (horizon * batch)


class _Adam:
    """Standard Adam on a dict of arrays (beta1=0.9, beta2=0.999, eps=1e-8)."""

    def __init__(self, arrays, learning_rate):
        self.lr = learning_rate
        self.m = {k: np.zeros_like(v) for k, v in arrays.items()}
        self.v = {k: np.zeros_like(v) for k, v in arrays.items()}
        self.step = 0

    def update(self, arrays, grads):
        self.step += 1
        b1, b2, eps = 0.9, 0.999, 1e-8
        c1 = 1.0 - b1 ** self.step
        c2 = 1.0 - b2 ** self.step
        for name, g in grads.items():
            m = self.m[name] = b1 * self.m[name] + (1 - b1) * g
            v = self.v[name] = b2 * self.v[name] + (1 - b2) * g * g
            arrays[name] -= self.lr * (m / c1) / (np.sqrt(v / c2) + eps)


def _window_index(records, span):
    idx = []
    for ri, rec in enumerate(records):
        for s in range(0, len(rec) - span + 1):
            idx.append((ri, s))
    return idx


def _evaluate(params, config, windows_arr):
    """Test loss and final-frame base error over a (N, k+T, 129) array."""
    if windows_arr.shape[0] == 0:
        return float("nan"), float("nan")
    k, horizon = config.input_frames, config.output_frames
    be = _NumpyBackend(batched=True)
    w = _WeightSet(be, params)
    cols = windows_arr.transpose(1, 2, 0)  # (k+T, 129, N)
    enc = [cols[i] for i in range(k)]
    states = _rollout_batch(be, w, config, enc, horizon)
    targets = [cols[k + t] for t in range(horizon)]
    loss = _batch_loss_numpy(states, targets)
    err = float(np.mean(np.linalg.norm(states[-1][:3] - targets[-1][:3], axis=0)))
    return loss, err


def train(
    records: list[np.ndarray],
    config: ModelConfig,
    seed: int,
    *,
    epochs: int = 30,
    batch_size: int = 32,
    learning_rate: float = 1e-4,
    learning_rate_decay: float = 1.0,
    test_records: list[np.ndarray] | None = None,
    augment: bool = True,
    keep_snapshots: bool = False,
    progress=None,
) -> TrainResult:
    """Train the uncontrolled predictor on sliding windows of the records.

    Every contiguous window of ``input + output`` frames is a sample; each
    draw applies a fresh uniform yaw to the whole window (rigid rotation).
    Dropout and recurrent dropout masks are sampled once per batch and reused
    across timesteps.  Deterministic for a fixed seed.

    ``learning_rate_decay`` multiplies the step size once per epoch; the L1
    rotation term keeps Adam oscillating at the step-size scale, so exact
    convergence needs a decaying schedule (default keeps it constant).
    """
    from .data import rotate_frames  # runtime import, data builds on this module

    if not records:
        raise ModelError("empty training set")
    k, horizon = config.input_frames, config.output_frames
    span = k + horizon
    index = _window_index(records, span)
    if not index:
        raise ModelError(f"no record is long enough for {span}-frame windows")
    test_windows = np.zeros((0, span, STATE_DIM))
    if test_records:
        test_idx = _window_index(test_records, span)
        test_windows = np.stack([test_records[ri][s : s + span] for ri, s in test_idx])

    params = init_params(config, seed)
    names = _weight_names(config)
    adam = _Adam(params.arrays, learning_rate)
    history: list[EpochMetrics] = []
    snapshots: list[ModelParams] = []
    best: ModelParams | None = None
    best_key = np.inf
    keep = 1.0 - config.dropout
    keep_rec = 1.0 - config.recurrent_dropout

    for epoch in range(epochs):
        rng = np.random.default_rng([seed, epoch])
        order = rng.permutation(len(index))
        epoch_loss = 0.0
        nb = 0
        for lo in range(0, len(order), batch_size):
            chosen = [index[i] for i in order[lo : lo + batch_size]]
            wins = np.stack([records[ri][s : s + span] for ri, s in chosen])
            if augment:
                yaws = rng.uniform(0.0, 2.0 * np.pi, size=len(chosen))
                wins = np.stack([rotate_frames(win, yaw) for win, yaw in zip(wins, yaws)])
            cols = np.ascontiguousarray(wins.transpose(1, 2, 0))  # (span, 129, B)
            bsz = cols.shape[2]

            tape = Tape()
            be = _TapeBackend(tape, batched=True)
            w = _WeightSet(be, params, trainable=True)
            masks = {}
            if keep < 1.0 or keep_rec < 1.0:
                for li in range(config.num_layers):
                    in_dim = INPUT_DIM if li == 0 else config.hidden_size
                    mx = rng.binomial(1, keep, size=(in_dim, bsz)) / keep
                    mh = rng.binomial(1, keep_rec, size=(config.hidden_size, bsz)) / keep_rec
                    masks[f"x{li}"] = tape.const(mx)
                    masks[f"h{li}"] = tape.const(mh)
            else:
                masks = None
            enc = [tape.const(cols[i]) for i in range(k)]
            try:
                states = _rollout_batch(be, w, config, enc, horizon, masks)
                loss_ref = _batch_loss_graph(tape, states, [cols[k + t] for t in range(horizon)])
            except GraphError as exc:
                raise TrainingDiverged(epoch) from exc
            tape.set_output(loss_ref)
            loss = float(tape.output_value)
            if not np.isfinite(loss):
                raise TrainingDiverged(epoch)
            grads = backward(tape, np.asarray(1.0), wrt=names)
            adam.update(params.arrays, {n: grads[n].data for n in names})
            epoch_loss += loss
            nb += 1

        adam.lr *= learning_rate_decay
        test_loss, base_err = _evaluate(params, config, test_windows)
        metrics = EpochMetrics(epoch, epoch_loss / max(nb, 1), test_loss, base_err)
        history.append(metrics)
        if keep_snapshots:
            snapshots.append(params.copy())
        key = test_loss if np.isfinite(test_loss) else metrics.train_loss
        if key < best_key:
            best_key = key
            best = params.copy()
        if progress is not None:
            progress(metrics)

    return TrainResult(params=params, best=best if best is not None else params.copy(),
                       history=history, snapshots=snapshots)


# ---------------------------------------------------------------------------
# Weight container: magic string, JSON header, little-endian float64 payload
# ---------------------------------------------------------------------------

_MAGIC = b"COMOTION-WEIGHTS v1\n"


def save_params(params: ModelParams, path) -> None:
    names = _weight_names(params.config)
    header = {
        "config": asdict(params.config),
        "arrays": [{"name": n, "shape": list(params.arrays[n].shape)} for n in names],
    }
    blob = json.dumps(header).encode("utf-8")
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for n in names:
            fh.write(np.ascontiguousarray(params.arrays[n], dtype="<f8").tobytes())
    os.replace(tmp, path)


def load_params(path) -> ModelParams:
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise ModelError(f"{path}: not a weight file")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        config = ModelConfig(**header["config"])
        arrays = {}
        for spec in header["arrays"]:
            shape = tuple(spec["shape"])
            count = int(np.prod(shape))
            raw = fh.read(count * 8)
            if len(raw) != count * 8:
                raise ModelError(f"{path}: truncated weight payload")
            arrays[spec["name"]] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
    return ModelParams(config, arrays)
