"""Unit tests for the tape engine: primitives, replay, backward, checks."""

import numpy as np
import pytest

from comotion.graph import (
    GraphError,
    Tape,
    backward,
    gradient_check,
    record,
)


def test_identity_record():
    tape, out = record(lambda t, r: r["x"], {"x": np.array([1.0, 2.0])})
    assert np.array_equal(out.data, [1.0, 2.0])
    assert len(tape) == 1


def test_sum_of_squares_forward_and_grad():
    def f(t, r):
        return t.sum(t.mul(r["x"], r["x"]))

    tape, out = record(f, {"x": np.array([3.0, 4.0])})
    assert float(out.data) == 25.0
    grads = backward(tape, np.asarray(1.0))
    assert np.allclose(grads["x"].data, [6.0, 8.0])


def test_sum_gradient_all_ones():
    tape, _ = record(lambda t, r: t.sum(r["x"]), {"x": np.arange(5.0)})
    g = backward(tape, np.asarray(1.0))["x"].data
    assert np.array_equal(g, np.ones(5))


def test_unconnected_leaf_gets_zero_gradient():
    def f(t, r):
        return t.sum(r["x"])

    tape, _ = record(f, {"x": np.ones(3), "y": np.ones(4)})
    grads = backward(tape, np.asarray(1.0))
    assert np.array_equal(grads["y"].data, np.zeros(4))


def test_seed_linearity():
    def f(t, r):
        return t.sum(t.sin(r["x"]))

    tape, _ = record(f, {"x": np.array([0.3, -0.7, 1.1])})
    g1 = backward(tape, np.asarray(1.0))["x"].data
    g3 = backward(tape, np.asarray(3.0))["x"].data
    assert np.allclose(g3, 3.0 * g1, rtol=0, atol=1e-15)


def test_replay_bit_exact():
    rng = np.random.default_rng(0)
    x = rng.normal(size=7)

    def f(t, r):
        a = t.tanh(r["x"])
        return t.sum(t.mul(a, t.sigmoid(r["x"])))

    tape, out = record(f, {"x": x})
    replay = tape.forward({"x": x.copy()})
    assert float(replay.output) == float(out.data)


def test_replay_new_leaves_match_fresh_record():
    rng = np.random.default_rng(1)

    def f(t, r):
        return t.norm(t.sub(t.cos(r["x"]), t.sin(r["y"])))

    x0, y0 = rng.normal(size=4), rng.normal(size=4)
    tape, _ = record(f, {"x": x0, "y": y0})
    x1, y1 = rng.normal(size=4), rng.normal(size=4)
    replay = tape.forward({"x": x1, "y": y1})
    _, fresh = record(f, {"x": x1, "y": y1})
    assert float(replay.output) == float(fresh.data)


def test_record_rejects_overflow():
    def f(t, r):
        y = r["x"]
        for _ in range(20):
            y = t.square(y)
        return t.sum(y)

    with pytest.raises(GraphError, match="numeric overflow at node"):
        record(f, {"x": np.array([10.0])})


def test_backward_seed_shape_mismatch():
    tape, _ = record(lambda t, r: t.mul(r["x"], r["x"]), {"x": np.ones(3)})
    with pytest.raises(GraphError, match="seed shape"):
        backward(tape, np.ones(2))


def test_min_max_first_index_tie_break():
    x = np.array([2.0, 1.0, 1.0, 5.0, 5.0])
    tape, out = record(lambda t, r: t.min_reduce(r["x"]), {"x": x})
    assert float(out.data) == 1.0
    g = backward(tape, np.asarray(1.0))["x"].data
    assert np.array_equal(g, [0, 1, 0, 0, 0])

    tape, out = record(lambda t, r: t.max_reduce(r["x"]), {"x": x})
    assert float(out.data) == 5.0
    g = backward(tape, np.asarray(1.0))["x"].data
    assert np.array_equal(g, [0, 0, 0, 1, 0])


def test_logsumexp_bounds_max():
    rng = np.random.default_rng(2)
    for _ in range(20):
        x = rng.normal(size=9)
        tau = 10 ** rng.uniform(-3, 0)
        tape, out = record(lambda t, r: t.logsumexp(r["x"], tau), {"x": x})
        smooth = float(out.data)
        hard = float(np.max(x))
        assert smooth >= hard - 1e-12
        assert smooth <= hard + tau * np.log(x.size) + 1e-12


def test_smooth_min_bounds_min():
    rng = np.random.default_rng(3)
    x = rng.uniform(0, 4, size=11)
    tape, out = record(lambda t, r: t.smooth_min(r["x"], 0.05), {"x": x})
    smooth = float(out.data)
    hard = float(np.min(x))
    assert smooth <= hard + 1e-12
    assert smooth >= hard - 0.05 * np.log(x.size) - 1e-12


def test_clamp_subgradient():
    x = np.array([-2.0, 0.5, 3.0])
    tape, out = record(lambda t, r: t.sum(t.clamp(r["x"], 0.0, 1.0)), {"x": x})
    assert np.allclose(tape.vals[1], [0.0, 0.5, 1.0])
    g = backward(tape, np.asarray(1.0))["x"].data
    assert np.array_equal(g, [0.0, 1.0, 0.0])


def test_matmul_all_rank_combinations():
    rng = np.random.default_rng(4)
    A = rng.normal(size=(3, 4))
    B = rng.normal(size=(4, 2))
    x = rng.normal(size=4)
    y = rng.normal(size=3)

    def f(t, r):
        m = t.matmul(r["A"], r["B"])  # 2d @ 2d
        v = t.matmul(r["A"], r["x"])  # 2d @ 1d
        w = t.matmul(r["y"], r["A"])  # 1d @ 2d
        s = t.matmul(r["x"], r["x"])  # 1d @ 1d
        return t.sum(m) + t.sum(v) + t.sum(w) + s

    err = gradient_check(f, {"A": A, "B": B, "x": x, "y": y})
    assert err < 1e-8


@pytest.mark.parametrize("trial", range(10))
def test_primitive_gradients_match_finite_differences(trial):
    """Composed chain exercising every smooth primitive, 10 seeded trials."""
    rng = np.random.default_rng(100 + trial)
    x = rng.uniform(0.2, 1.5, size=6)
    y = rng.uniform(0.2, 1.5, size=6)
    W = rng.normal(size=(4, 6))

    def f(t, r):
        a = t.add(t.sin(r["x"]), t.cos(r["y"]))
        b = t.mul(a, t.sigmoid(r["y"]))
        c = t.div(b, t.add(t.square(r["x"]), t.const(np.full(6, 2.0))))
        d = t.matmul(r["W"], t.tanh(c))
        e = t.concat([d, t.sqrt(t.add(r["x"], t.const(np.full(6, 1.0))))])
        h = t.slice(e, 1, 9)
        return t.add(
            t.norm(h),
            t.add(t.logsumexp(h, 0.1), t.sum(t.reshape(h, (2, 4)))),
        )

    err = gradient_check(f, {"x": x, "y": y, "W": W}, step=1e-5)
    assert err < 1e-6


def test_min_max_gradients_at_interior_points():
    rng = np.random.default_rng(5)
    x = rng.normal(size=8)  # distinct values, away from ties

    def fmin(t, r):
        return t.min_reduce(t.mul(r["x"], r["x"]))

    def fmax(t, r):
        return t.max_reduce(t.mul(r["x"], r["x"]))

    assert gradient_check(fmin, {"x": x}) < 1e-7
    assert gradient_check(fmax, {"x": x}) < 1e-7


def test_gradient_check_linear_is_exact():
    def f(t, r):
        return t.sum(t.mul(r["x"], t.const(np.array([2.0, -3.0, 0.5]))))

    err = gradient_check(f, {"x": np.array([1.0, 2.0, 3.0])})
    assert err < 1e-10


def test_broadcast_bias_add_gradient():
    rng = np.random.default_rng(6)
    M = rng.normal(size=(3, 5))
    b = rng.normal(size=(3, 1))

    def f(t, r):
        return t.sum(t.square(t.add(r["M"], r["b"])))

    assert gradient_check(f, {"M": M, "b": b}) < 1e-7


def test_two_step_recurrent_composition_matches_manual():
    """Small 2-step gated recurrence vs. step-by-step numpy evaluation."""
    rng = np.random.default_rng(7)
    d, k = 3, 2
    Wz, Wr, Wn = (rng.normal(size=(d, k)) for _ in range(3))
    Uz, Ur, Un = (rng.normal(size=(d, d)) for _ in range(3))
    xs = rng.normal(size=(2, k))
    h0 = rng.normal(size=d)

    def sig(v):
        return 1.0 / (1.0 + np.exp(-v))

    h_ref = h0.copy()
    for x in xs:
        z = sig(Wz @ x + Uz @ h_ref)
        r = sig(Wr @ x + Ur @ h_ref)
        n = np.tanh(Wn @ x + Un @ (r * h_ref))
        h_ref = (1.0 - z) * h_ref + z * n

    def f(t, refs):
        h = refs["h0"]
        one = t.const(np.ones(d))
        for i in range(2):
            x = t.slice(refs["xs"], i * k, (i + 1) * k)
            z = t.sigmoid(t.matmul(refs["Wz"], x) + t.matmul(refs["Uz"], h))
            r = t.sigmoid(t.matmul(refs["Wr"], x) + t.matmul(refs["Ur"], h))
            n = t.tanh(t.matmul(refs["Wn"], x) + t.matmul(refs["Un"], t.mul(r, h)))
            h = t.add(t.mul(t.sub(one, z), h), t.mul(z, n))
        return h

    _, out = record(
        f,
        {
            "h0": h0,
            "xs": xs.reshape(-1),
            "Wz": Wz,
            "Wr": Wr,
            "Wn": Wn,
            "Uz": Uz,
            "Ur": Ur,
            "Un": Un,
        },
    )
    assert np.allclose(out.data, h_ref, rtol=0, atol=1e-12)


def test_grid_interp_matches_bilinear_and_gradient():
    rng = np.random.default_rng(8)
    values = rng.normal(size=(6, 5))
    origin = np.array([-1.0, -0.5])
    res = 0.25

    # exact node hit returns the stored value
    def f(t, r):
        return t.grid_interp(r["p"], values, origin, res)

    p_node = origin + res * np.array([2.0, 3.0])
    _, out = record(f, {"p": p_node})
    assert float(out.data) == pytest.approx(values[2, 3], abs=1e-15)

    # midpoint between two nodes is their mean
    p_mid = origin + res * np.array([2.5, 3.0])
    _, out = record(f, {"p": p_mid})
    assert float(out.data) == pytest.approx(0.5 * (values[2, 3] + values[3, 3]), abs=1e-14)

    # interior gradient vs finite differences
    for _ in range(50):
        p = origin + res * (0.5 + rng.uniform(0.05, 0.9, size=2) + rng.integers(0, 3, size=2))
        assert gradient_check(f, {"p": p}, step=1e-6 * res) < 1e-6


def test_duplicate_leaf_rejected():
    tape = Tape()
    tape.leaf("x", np.ones(2))
    with pytest.raises(GraphError, match="duplicate leaf"):
        tape.leaf("x", np.ones(2))


def test_cross_tape_operands_rejected():
    t1, t2 = Tape(), Tape()
    a = t1.leaf("a", np.ones(2))
    b = t2.leaf("b", np.ones(2))
    with pytest.raises(GraphError, match="different tapes"):
        t1.add(a, b)
