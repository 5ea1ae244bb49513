import zlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beamalign.nn import MLP, Adam, GruStack, ParamStore, Tape, Tensor, adam_step, clip_global_norm
from beamalign.nn import autodiff as ad
from beamalign.nn.gradcheck import gradcheck


# ---------------------------------------------------------------- autodiff primitives


def test_sum_of_squares_gradient():
    p = Tensor(np.array([1.0, -2.0, 3.0]), requires_grad=True)
    with Tape() as tape:
        loss = ad.square(p).sum()
    tape.backward(loss)
    np.testing.assert_array_equal(p.grad, 2 * p.value)


def test_unused_parameter_gets_zero_gradient():
    store = ParamStore()
    a = store.add("a", np.ones(3))
    store.add("b", np.ones(2))
    with Tape() as tape:
        loss = (a * 2.0).sum()
    tape.backward(loss)
    np.testing.assert_array_equal(store.grads()["b"], np.zeros(2))


def test_backward_without_forward_rejected():
    with pytest.raises(RuntimeError):
        Tape().backward(Tensor(1.0))
    p = Tensor(np.ones(2), requires_grad=True)
    with Tape() as t1:
        l1 = p.sum()
    with Tape() as t2:
        (p * 3.0).sum()
    with pytest.raises(RuntimeError):
        t2.backward(l1)
    t1.backward(l1)


def test_no_recording_outside_tape():
    p = Tensor(np.ones(2), requires_grad=True)
    with Tape() as tape:
        pass
    (p * 2.0).sum()
    assert len(tape) == 0


@pytest.mark.parametrize("op", ["add", "sub", "mul", "div", "matmul", "tanh", "sigmoid", "exp",
                                "log", "sqrt", "clip", "minimum", "getitem", "concat", "stack",
                                "mean", "reshape"])
def test_primitive_gradients(op):
    rng = np.random.default_rng(zlib.crc32(op.encode()))
    store = ParamStore()
    a = store.add("a", rng.uniform(0.5, 1.5, (3, 4)))
    b = store.add("b", rng.uniform(0.5, 1.5, (4,)))
    c = store.add("c", rng.uniform(-1, 1, (4, 2)))
    weights = rng.standard_normal(64)

    def loss():
        out = {
            "add": lambda: a + b,
            "sub": lambda: a - b,
            "mul": lambda: a * b,
            "div": lambda: a / b,
            "matmul": lambda: a @ c,
            "tanh": lambda: ad.tanh(a - 1.0),
            "sigmoid": lambda: ad.sigmoid(a * b),
            "exp": lambda: ad.exp(a),
            "log": lambda: ad.log(a * b),
            "sqrt": lambda: ad.sqrt(a + b),
            "clip": lambda: ad.clip(a, 0.8, 1.2),
            "minimum": lambda: ad.minimum(a, b * 1.01),
            "getitem": lambda: a[1:, ::2] * 3.0,
            "concat": lambda: ad.concat([a, ad.reshape(b, (1, 4))], axis=0),
            "stack": lambda: ad.stack([b, b * 2.0, b * b], axis=1),
            "mean": lambda: a.mean(axis=0, keepdims=True) * b,
            "reshape": lambda: ad.reshape(a, (2, 6)) * 2.0,
        }[op]()
        flat = ad.reshape(out, (-1,))
        return (flat * weights[: flat.shape[0]]).sum()

    result = gradcheck(loss, store, np.random.default_rng(0), n_coords=20)
    assert result.max_rel_error < 1e-6


# ---------------------------------------------------------------- MLP


def test_mlp_zero_weights_give_activation_of_zero():
    store = ParamStore()
    net = MLP.create(store, "m", (3, 5, 2), np.random.default_rng(0), final_activation=True)
    for name in store:
        store[name].value[...] = 0.0
    np.testing.assert_array_equal(net(np.ones((4, 3))).value, np.zeros((4, 2)))


def test_mlp_identity_linear_layer():
    store = ParamStore()
    net = MLP.create(store, "m", (3, 3), np.random.default_rng(0))
    store["m.W0"].value = np.eye(3)
    store["m.b0"].value = np.zeros(3)
    x = np.array([[1.0, -2.0, 0.5]])
    np.testing.assert_array_equal(net(x).value, x)
    np.testing.assert_array_equal(net(x[0]).value, x[0])


def test_mlp_shape_mismatch_rejected():
    store = ParamStore()
    net = MLP.create(store, "m", (3, 4), np.random.default_rng(0))
    with pytest.raises(ValueError):
        net(np.ones((2, 5)))


def test_mlp_gradient_matches_finite_differences():
    rng = np.random.default_rng(1)
    store = ParamStore()
    net = MLP.create(store, "m", (2, 16, 3), rng)
    x = rng.standard_normal((5, 2))
    target = rng.standard_normal((5, 3))
    result = gradcheck(lambda: ad.square(net(x) - target).mean(), store, rng)
    assert result.max_rel_error < 1e-4


def test_forward_is_bit_deterministic():
    rng = np.random.default_rng(1)
    store = ParamStore()
    net = MLP.create(store, "m", (2, 16, 3), rng)
    x = rng.standard_normal((5, 2))
    np.testing.assert_array_equal(net(x).value, net(x).value)


# ---------------------------------------------------------------- GRU


def test_gru_zero_weights_halve_state():
    store = ParamStore()
    gru = GruStack.create(store, "g", 2, 4, 1, np.random.default_rng(0))
    for name in store:
        store[name].value[...] = 0.0
    h0 = [np.ones((1, 4))]
    outputs, hT = gru([np.zeros((1, 2))], h0)
    np.testing.assert_allclose(hT[0].value, 0.5 * np.ones((1, 4)))


def test_gru_default_initial_state_is_zero():
    store = ParamStore()
    gru = GruStack.create(store, "g", 2, 4, 2, np.random.default_rng(0))
    x = [np.ones((3, 2))]
    a, _ = gru(x)
    b, _ = gru(x, [np.zeros((3, 4)), np.zeros((3, 4))])
    np.testing.assert_array_equal(a[0].value, b[0].value)


def test_gru_rejects_bad_shapes():
    store = ParamStore()
    gru = GruStack.create(store, "g", 2, 4, 2, np.random.default_rng(0))
    with pytest.raises(ValueError):
        gru([])
    with pytest.raises(ValueError):
        gru([np.ones((3, 5))])
    with pytest.raises(ValueError):
        gru([np.ones((3, 2))], [np.zeros((3, 4))])


def test_gru_bptt_gradient_matches_finite_differences():
    rng = np.random.default_rng(2)
    store = ParamStore()
    gru = GruStack.create(store, "g", 2, 8, 2, rng)
    for name in store:  # non-zero biases exercise every path
        if name.endswith(".b"):
            store[name].value = 0.1 * rng.standard_normal(store[name].shape)
    xs = [rng.standard_normal((3, 2)) for _ in range(5)]
    proj = rng.standard_normal((8, 1))

    def loss():
        outputs, _ = gru(xs)
        return sum((o @ proj).sum() * (t + 1) for t, o in enumerate(outputs))

    assert gradcheck(loss, store, rng).max_rel_error < 1e-4


def test_composite_mlp_gru_head_gradient():
    rng = np.random.default_rng(3)
    store = ParamStore()
    enc = MLP.create(store, "enc", (2, 6), rng, final_activation=True)
    gru = GruStack.create(store, "g", 6, 8, 1, rng)
    head = MLP.create(store, "head", (8, 4, 1), rng)
    xs = [rng.standard_normal((4, 2)) for _ in range(3)]

    def loss():
        outputs, _ = gru([enc(x) for x in xs])
        return ad.square(head(outputs[-1])).mean()

    assert gradcheck(loss, store, rng).max_rel_error < 1e-4


# ---------------------------------------------------------------- Adam / clipping


def _scalar_adam_oracle(x, lr, steps, b1=0.9, b2=0.999, eps=1e-8):
    # plain-float Adam on f(x) = x^2, independent of the array implementation
    m = v = 0.0
    out = [x]
    for t in range(1, steps + 1):
        g = 2.0 * x
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        x -= lr * (m / (1 - b1**t)) / ((v / (1 - b2**t)) ** 0.5 + eps)
        out.append(x)
    return out


def test_adam_decreases_quadratic():
    store = ParamStore()
    x = store.add("x", np.array([1.0]))
    opt = Adam(store, lr=0.1)
    trace = [x.value[0]]
    for _ in range(20):
        opt.step({"x": 2 * store["x"].value})
        trace.append(store["x"].value[0])
    np.testing.assert_allclose(trace, _scalar_adam_oracle(1.0, 0.1, 20), rtol=0, atol=1e-12)
    mag = np.abs(trace)
    # momentum carries x past zero after step 11; until then |x| falls every step
    assert np.all(np.diff(mag[:12]) < 0)
    assert mag[20] < 0.3


def test_adam_zero_gradient_keeps_params():
    p = {"w": np.array([0.3, -0.2])}
    m = {"w": np.zeros(2)}
    v = {"w": np.zeros(2)}
    out = adam_step(p, {"w": np.zeros(2)}, m, v, lr=0.1, t=1)
    np.testing.assert_array_equal(out["w"], p["w"])


@settings(max_examples=50, deadline=None)
@given(scale=st.floats(1e-4, 1e6))
def test_adam_first_step_is_about_lr(scale):
    p = {"w": np.zeros(3)}
    g = {"w": scale * np.array([1.0, -2.0, 0.5])}
    out = adam_step(p, g, {"w": np.zeros(3)}, {"w": np.zeros(3)}, lr=0.01, eps=1e-8, t=1)
    assert np.all(np.abs(out["w"]) <= 0.01 * (1 + 1e-6))
    assert np.all(np.abs(out["w"]) >= 0.01 * (1 - 1e-2))


def test_adam_rejects_bad_input():
    with pytest.raises(ValueError):
        adam_step({"w": np.zeros(1)}, {"w": np.zeros(1)}, {"w": np.zeros(1)}, {"w": np.zeros(1)}, 0.1, t=0)
    with pytest.raises(FloatingPointError):
        adam_step({"w": np.zeros(1)}, {"w": np.array([np.nan])}, {"w": np.zeros(1)}, {"w": np.zeros(1)}, 0.1)


def test_adam_is_order_independent():
    rng = np.random.default_rng(0)
    params = {k: rng.standard_normal(3) for k in "abc"}
    grads = {k: rng.standard_normal(3) for k in "abc"}
    zeros = lambda: {k: np.zeros(3) for k in "abc"}  # noqa: E731
    fwd = adam_step(params, grads, zeros(), zeros(), 0.01)
    rev_params = {k: params[k] for k in "cba"}
    rev = adam_step(rev_params, grads, zeros(), zeros(), 0.01)
    for k in "abc":
        np.testing.assert_array_equal(fwd[k], rev[k])


def test_clip_scales_large_gradients():
    g = {"a": np.array([3.0]), "b": np.array([4.0])}
    clipped, norm = clip_global_norm(g, 0.5)
    assert norm == pytest.approx(5.0)
    total = np.sqrt(sum(np.sum(v**2) for v in clipped.values()))
    assert total == pytest.approx(0.5, abs=1e-12)
    direction = np.concatenate([g["a"], g["b"]])
    after = np.concatenate([clipped["a"], clipped["b"]])
    assert np.dot(direction, after) / (np.linalg.norm(direction) * np.linalg.norm(after)) == pytest.approx(1.0)


def test_clip_leaves_small_gradients():
    g = {"a": np.array([0.06, 0.08])}
    clipped, norm = clip_global_norm(g, 0.5)
    assert norm == pytest.approx(0.1)
    np.testing.assert_array_equal(clipped["a"], g["a"])
    with pytest.raises(ValueError):
        clip_global_norm(g, 0.0)


def test_clip_is_order_independent():
    rng = np.random.default_rng(4)
    g = {k: rng.standard_normal(5) for k in "xyz"}
    a, na = clip_global_norm(g, 0.3)
    b, nb = clip_global_norm({k: g[k] for k in "zyx"}, 0.3)
    assert na == nb
    for k in g:
        np.testing.assert_array_equal(a[k], b[k])


def test_param_store_rejects_duplicates_and_bad_loads():
    store = ParamStore()
    store.add("w", np.zeros(2))
    with pytest.raises(KeyError):
        store.add("w", np.zeros(2))
    with pytest.raises(ValueError):
        store.load({"w": np.zeros(3)})
    with pytest.raises(KeyError):
        store.load({})
