import numpy as np
import pytest

from flmarket import nets
from flmarket.nets import MlpSpec, OptimizerState


def rng(seed=0):
    return np.random.default_rng(seed)


def test_spec_validation():
    with pytest.raises(ValueError):
        MlpSpec((4,))
    with pytest.raises(ValueError):
        MlpSpec((4, 0, 1))
    with pytest.raises(ValueError):
        MlpSpec((4, 1), hidden_activation="selu")


def test_init_deterministic():
    spec = MlpSpec((4, 120, 60, 1))
    a = nets.mlp_init(spec, rng(7))
    b = nets.mlp_init(spec, rng(7))
    for x, y in zip(a.arrays(), b.arrays()):
        assert np.array_equal(x, y)


def test_init_zero_bias():
    p = nets.mlp_init(MlpSpec((2, 1)), rng(3))
    assert np.all(p.biases[-1] == 0.0)


def test_init_fan_in_variance():
    spec = MlpSpec((4, 120, 60, 1))
    # pooled over 10 seeds so the small first layer has enough samples
    samples = [[] for _ in range(3)]
    fan_ins = (4, 120, 60)
    for seed in range(10):
        p = nets.mlp_init(spec, rng(seed))
        for i, w in enumerate(p.weights):
            samples[i].extend(w.ravel().tolist())
    for fan_in, vals in zip(fan_ins, samples):
        var = np.var(vals)
        assert abs(var - 2.0 / fan_in) <= 0.3 * (2.0 / fan_in)


def test_forward_zero_params():
    p = nets.mlp_init(MlpSpec((3, 5, 2)), rng(0))
    zero = p.zeros_like()
    y, _ = nets.mlp_forward(zero, np.ones(3))
    assert np.array_equal(y, np.zeros(2))


def test_forward_affine_identity():
    spec = MlpSpec((1, 1))
    p = nets.MlpParams(spec, [np.array([[2.0]])], [np.array([1.0])])
    y, _ = nets.mlp_forward(p, np.array([3.0]))
    assert y[0] == 7.0


def test_forward_pure():
    p = nets.mlp_init(MlpSpec((4, 8, 3)), rng(1))
    x = rng(2).normal(size=4)
    y1, _ = nets.mlp_forward(p, x)
    y2, _ = nets.mlp_forward(p, x)
    assert np.array_equal(y1, y2)


def test_forward_dim_mismatch():
    p = nets.mlp_init(MlpSpec((4, 2)), rng(0))
    with pytest.raises(ValueError):
        nets.mlp_forward(p, np.ones(5))


def test_backward_linear_case():
    spec = MlpSpec((1, 1))
    p = nets.MlpParams(spec, [np.array([[2.0]])], [np.array([0.0])])
    _, tape = nets.mlp_forward(p, np.array([3.0]))
    grads, gx = nets.mlp_backward(p, tape, np.array([1.0]))
    assert grads.weights[0][0, 0] == 3.0
    assert grads.biases[0][0] == 1.0
    assert gx[0] == 2.0


def test_backward_zero_gradient():
    p = nets.mlp_init(MlpSpec((3, 6, 2)), rng(4))
    _, tape = nets.mlp_forward(p, rng(5).normal(size=3))
    grads, gx = nets.mlp_backward(p, tape, np.zeros(2))
    assert all(np.all(g == 0.0) for g in grads.arrays())
    assert np.all(gx == 0.0)


def fd_check(spec, seed, h=1e-5, tol=1e-4):
    """Central finite differences on sum(output * gy) for every parameter."""
    r = rng(seed)
    p = nets.mlp_init(spec, r)
    x = r.normal(size=spec.input_size)
    gy = r.normal(size=spec.output_size)
    _, tape = nets.mlp_forward(p, x)
    grads, gx = nets.mlp_backward(p, tape, gy)

    def value(params, xv):
        y, _ = nets.mlp_forward(params, xv)
        return float(y @ gy)

    for arr, g in zip(p.arrays(), grads.arrays()):
        flat, gflat = arr.ravel(), g.ravel()
        for k in r.choice(flat.size, size=min(10, flat.size), replace=False):
            orig = flat[k]
            flat[k] = orig + h
            up = value(p, x)
            flat[k] = orig - h
            dn = value(p, x)
            flat[k] = orig
            fd = (up - dn) / (2 * h)
            denom = max(abs(fd), abs(gflat[k]), 1e-8)
            assert abs(fd - gflat[k]) / denom < tol
    for k in range(x.size):
        orig = x[k]
        x[k] = orig + h
        up = value(p, x)
        x[k] = orig - h
        dn = value(p, x)
        x[k] = orig
        fd = (up - dn) / (2 * h)
        denom = max(abs(fd), abs(gx[k]), 1e-8)
        assert abs(fd - gx[k]) / denom < tol


@pytest.mark.parametrize("hidden_act", ["relu", "tanh"])
@pytest.mark.parametrize("out_act", ["identity", "sigmoid"])
def test_backward_finite_differences(hidden_act, out_act):
    for seed in range(5):
        spec = MlpSpec((5, 9, 4), hidden_activation=hidden_act, output_activation=out_act)
        fd_check(spec, seed)


def test_backward_batched_matches_sum_of_singles():
    p = nets.mlp_init(MlpSpec((3, 7, 2)), rng(8))
    xs = rng(9).normal(size=(4, 3))
    gys = rng(10).normal(size=(4, 2))
    _, tape = nets.mlp_forward(p, xs)
    grads, gx = nets.mlp_backward(p, tape, gys)
    acc = p.zeros_like()
    for i in range(4):
        _, t = nets.mlp_forward(p, xs[i])
        g, gxi = nets.mlp_backward(p, t, gys[i])
        for a, b in zip(acc.arrays(), g.arrays()):
            a += b
        assert np.allclose(gx[i], gxi)
    for a, b in zip(acc.arrays(), grads.arrays()):
        assert np.allclose(a, b)


def test_optimizer_zero_gradient_keeps_params():
    p = nets.mlp_init(MlpSpec((2, 3)), rng(0))
    st = OptimizerState.fresh(p, lr=0.01)
    # seed the moments so decay is visible
    st.m.weights[0][0, 0] = 1.0
    newp, newst = nets.optimizer_step(p, p.zeros_like(), st)
    assert newst.m.weights[0][0, 0] == pytest.approx(0.9)
    assert newst.step == 1
    # moment decay moves the parameter slightly; the zero-moment entries stay
    assert np.array_equal(newp.weights[0][1:], p.weights[0][1:])


def test_optimizer_first_step_bias_corrected():
    spec = MlpSpec((1, 1))
    p = nets.MlpParams(spec, [np.array([[0.0]])], [np.array([0.0])])
    g = nets.MlpParams(spec, [np.array([[1.0]])], [np.array([0.0])])
    st = OptimizerState.fresh(p, lr=0.01)
    newp, _ = nets.optimizer_step(p, g, st)
    assert newp.weights[0][0, 0] == pytest.approx(-0.01, rel=1e-6)


def test_optimizer_deterministic():
    p = nets.mlp_init(MlpSpec((3, 4)), rng(1))
    g = nets.mlp_init(MlpSpec((3, 4)), rng(2))
    st = OptimizerState.fresh(p, lr=0.001)
    a = nets.optimizer_step(p, g, st)
    b = nets.optimizer_step(p, g, st)
    for x, y in zip(a[0].arrays(), b[0].arrays()):
        assert np.array_equal(x, y)


def test_optimizer_rejects_nonfinite():
    p = nets.mlp_init(MlpSpec((2, 2)), rng(0))
    g = p.zeros_like()
    g.weights[0][0, 0] = np.nan
    st = OptimizerState.fresh(p, lr=0.01)
    with pytest.raises(ValueError):
        nets.optimizer_step(p, g, st)


def test_soft_update_scalar_cases():
    spec = MlpSpec((1, 1))
    target = nets.MlpParams(spec, [np.array([[0.0]])], [np.array([0.0])])
    online = nets.MlpParams(spec, [np.array([[1.0]])], [np.array([1.0])])
    out = nets.soft_update(target, online, 0.01)
    assert out.weights[0][0, 0] == 0.01
    full = nets.soft_update(target, online, 1.0)
    assert np.array_equal(full.weights[0], online.weights[0])


def test_soft_update_geometric_series():
    spec = MlpSpec((1, 1))
    v = 3.7
    target = nets.MlpParams(spec, [np.array([[0.0]])], [np.array([0.0])])
    online = nets.MlpParams(spec, [np.array([[v]])], [np.array([0.0])])
    for _ in range(500):
        target = nets.soft_update(target, online, 0.01)
    expected = (1.0 - 0.99**500) * v
    assert target.weights[0][0, 0] == pytest.approx(expected, rel=1e-9)


def test_soft_update_contraction():
    p = nets.mlp_init(MlpSpec((4, 6, 2)), rng(11))
    q = nets.mlp_init(MlpSpec((4, 6, 2)), rng(12))
    out = nets.soft_update(p, q, 0.01)
    for t, o, n in zip(p.arrays(), q.arrays(), out.arrays()):
        # entrywise shrink by exactly (1 - tau), up to final rounding
        assert np.allclose(np.abs(n - o), 0.99 * np.abs(t - o), rtol=1e-12, atol=0.0)


def test_checkpoint_roundtrip(tmp_path):
    spec = MlpSpec((3, 120, 60, 2), output_activation="sigmoid")
    p = nets.mlp_init(spec, rng(21))
    path = tmp_path / "net.npz"
    nets.save_params(path, p)
    q = nets.load_params(path)
    assert q.spec == spec
    for a, b in zip(p.arrays(), q.arrays()):
        assert np.array_equal(a, b)
