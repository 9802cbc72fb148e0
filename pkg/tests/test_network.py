import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ssdp import optim
from ssdp.errors import ContractError, DataError, DimensionError
from ssdp.network import (
    LayerWeights,
    ModelSpec,
    backward,
    forward,
    hybrid_update,
    init_model,
    load_checkpoint,
    loss,
    loss_and_grads,
    loss_grad,
    predict,
    save_checkpoint,
    ssdp_updates,
)
from ssdp.neuron import NeuronParams, SurrogateParams
from ssdp.plasticity import SsdpConfig, first_spike_times, pairwise_dt, ssdp_gauss


def tiny_spec(**kw):
    base = dict(
        input_dim=6,
        hidden_dim=5,
        output_dim=3,
        T=8,
        neuron=NeuronParams(tau_m=4.0, v_th=0.3),
        surrogate=SurrogateParams(sigma_g=0.3),
        init_scale=2.0,
    )
    base.update(kw)
    return ModelSpec(**base)


def random_raster(T, B, N, p=0.4, seed=0):
    return (np.random.default_rng(seed).random((T, B, N)) < p).astype(np.uint8)


def scalar_lif(currents, tau_m, tau_n, v_th):
    """Loop-by-loop single neuron with subtract reset, for the hand trace."""
    alpha = math.exp(-1.0 / tau_m)
    a = 1.0 / (1.0 + math.exp(-tau_n))
    m = d = 0.0
    out = []
    for c in currents:
        d = a * d + (1 - a) * c
        u = alpha * m + (1 - alpha) * d
        s = 1 if u > v_th else 0
        m = u - v_th * s
        out.append(s)
    return out


def test_hand_trace_2_2_2():
    spec = ModelSpec(
        input_dim=2, hidden_dim=2, output_dim=2, T=6, neuron=NeuronParams(tau_m=2.0, v_th=0.2)
    )
    model = init_model(spec, dtype=np.float64)
    w1 = np.array([[2.0, 0.5], [-1.0, 3.0]])
    w2 = np.array([[4.0, 0.0], [1.0, 2.0]])
    model = model.with_params([w1, model.tau_n_hidden, w2, model.tau_n_readout])
    x = np.array([[1, 0], [1, 1], [0, 1], [0, 0], [1, 1], [0, 1]], dtype=np.uint8)[:, None, :]
    rec = forward(model, x)
    h = np.array([scalar_lif([w1[j] @ x[t, 0] for t in range(6)], 2.0, 0.0, 0.2) for j in range(2)]).T
    np.testing.assert_array_equal(rec.hidden_raster[:, 0, :], h)
    o = np.array([scalar_lif([w2[k] @ h[t] for t in range(6)], 2.0, 0.0, 0.2) for k in range(2)]).T
    np.testing.assert_array_equal(rec.readout_raster[:, 0, :], o)
    np.testing.assert_allclose(rec.logits[0], o.sum(axis=0) / 6)


def test_zero_input_zero_logits():
    model = init_model(tiny_spec(), seed=1)
    rec = forward(model, np.zeros((8, 3, 6), dtype=np.uint8))
    assert np.all(rec.logits == 0)
    assert np.all(rec.hidden_raster == 0)


def test_batch_independence():
    model = init_model(tiny_spec(), seed=1, dtype=np.float64)
    x = random_raster(8, 5, 6)
    full = forward(model, x).logits
    for b in range(5):
        np.testing.assert_array_equal(forward(model, x[:, b : b + 1]).logits[0], full[b])


def test_forward_shape_errors():
    model = init_model(tiny_spec())
    with pytest.raises(DimensionError):
        forward(model, np.zeros((7, 1, 6)))
    with pytest.raises(DimensionError):
        forward(model, np.zeros((8, 1, 5)))


def test_loss_examples():
    assert loss(np.zeros((2, 4)), [0, 3]) == pytest.approx(math.log(4))
    logits = np.array([[2.0, 0.0]])
    assert loss(logits, [0]) == pytest.approx(math.log(1 + math.exp(-2)))
    with pytest.raises(ContractError):
        loss(logits, [2])
    with pytest.raises(DimensionError):
        loss(logits, [0, 1])


@given(st.integers(0, 10_000))
@settings(max_examples=25)
def test_loss_grad_matches_finite_difference(seed):
    rng = np.random.default_rng(seed)
    logits = rng.normal(size=(3, 4))
    labels = rng.integers(0, 4, size=3)
    g = loss_grad(logits, labels)
    eps = 1e-6
    for i in range(3):
        for j in range(4):
            e = np.zeros_like(logits)
            e[i, j] = eps
            fd = (loss(logits + e, labels) - loss(logits - e, labels)) / (2 * eps)
            assert g[i, j] == pytest.approx(fd, abs=1e-7)
    np.testing.assert_allclose(g.sum(axis=1), 0, atol=1e-12)


@pytest.mark.parametrize("reset_mode", ["subtract", "zero"])
def test_smooth_gradient_check_small(reset_mode):
    spec = tiny_spec(neuron=NeuronParams(tau_m=4.0, v_th=0.3, reset_mode=reset_mode), init_scale=1.5)
    model = init_model(spec, seed=3, dtype=np.float64)
    tau = np.random.default_rng(4).normal(size=5)
    model = dataclasses.replace(model, tau_n_hidden=tau)
    x = random_raster(8, 4, 6, seed=5)
    y = np.array([0, 1, 2, 1])
    _, grads, _ = loss_and_grads(model, x, y, smooth=True)
    rng = np.random.default_rng(6)
    params = model.params()
    eps = 1e-6
    for _ in range(30):
        k = int(rng.integers(len(params)))
        idx = tuple(int(rng.integers(n)) for n in params[k].shape)

        def at(delta):
            ps = [p.copy() for p in params]
            ps[k][idx] += delta
            return loss(forward(model.with_params(ps), x, smooth=True).logits, y)

        fd = (at(eps) - at(-eps)) / (2 * eps)
        assert grads[k][idx] == pytest.approx(fd, rel=1e-4, abs=1e-9)


def test_backward_zero_input_zero_weight_grads():
    model = init_model(tiny_spec(), seed=0, dtype=np.float64)
    rec = forward(model, np.zeros((8, 2, 6)))
    grads = backward(model, rec, np.ones((2, 3)))
    assert np.all(grads[0] == 0)


def gauss_cfg(**kw):
    base = dict(variant="gauss", a_plus=0.05, a_baseline=0.01, sigma=1.0, clamp_lo=-1.0, clamp_hi=1.0)
    base.update(kw)
    return SsdpConfig(**base)


def test_hybrid_without_ssdp_equals_adam_step():
    model = init_model(tiny_spec(), seed=0, dtype=np.float64)
    x = random_raster(8, 4, 6)
    _, grads, rec = loss_and_grads(model, x, [0, 1, 2, 0])
    opt = optim.AdamState(lr=1e-2).for_params(model.params())
    new, _ = hybrid_update(model, rec, grads, 0, opt)
    _, expected = optim.adam_step(opt, model.params(), grads)
    for a, b in zip(new.params(), expected):
        np.testing.assert_array_equal(a, b)


def test_hybrid_before_start_epoch_skips_ssdp():
    spec = tiny_spec(ssdp_readout=gauss_cfg(start_epoch=5))
    model = init_model(spec, seed=0, dtype=np.float64)
    rec = forward(model, random_raster(8, 4, 6))
    assert ssdp_updates(model, rec, epoch=4) == {}
    assert set(ssdp_updates(model, rec, epoch=5)) == {"readout"}


def test_hybrid_zero_grad_is_pure_ssdp():
    cfg = gauss_cfg()
    spec = tiny_spec(ssdp_readout=cfg, ssdp_hidden=cfg)
    model = init_model(spec, seed=0, dtype=np.float64)
    model = dataclasses.replace(
        model,
        hidden=LayerWeights(np.clip(model.hidden.w, -0.9, 0.9)),
        readout=LayerWeights(np.clip(model.readout.w, -0.9, 0.9) * 0.0),
    )
    rec = forward(model, random_raster(8, 6, 6, p=0.6))
    zeros = [np.zeros_like(p) for p in model.params()]
    opt = optim.AdamState(lr=1e-2).for_params(model.params())
    new, _ = hybrid_update(model, rec, zeros, 0, opt)
    # readout weights were zero, so the clamp cannot bite
    pre, post = first_spike_times(rec.hidden_raster), first_spike_times(rec.readout_raster)
    expected = ssdp_gauss(pre.fired, post.fired, pairwise_dt(pre, post), cfg)
    np.testing.assert_allclose(new.readout.w, expected, rtol=0, atol=1e-15)


def test_hybrid_order_commutes_at_zero_grad():
    cfg = gauss_cfg()
    model = init_model(tiny_spec(ssdp_readout=cfg), seed=2, dtype=np.float64)
    rec = forward(model, random_raster(8, 4, 6, p=0.6))
    zeros = [np.zeros_like(p) for p in model.params()]
    opt = optim.AdamState(lr=1e-2).for_params(model.params())
    a, _ = hybrid_update(model, rec, zeros, 0, opt, ssdp_first=False)
    b, _ = hybrid_update(model, rec, zeros, 0, opt, ssdp_first=True)
    for p, q in zip(a.params(), b.params()):
        np.testing.assert_array_equal(p, q)


@pytest.mark.parametrize("variant", ["exp", "gauss"])
def test_ssdp_keeps_weights_in_clamp(variant):
    if variant == "exp":
        cfg = SsdpConfig(variant="exp", a_plus=0.5, a_minus=0.1, clamp_lo=-0.2, clamp_hi=0.2)
    else:
        cfg = gauss_cfg(a_plus=0.5, clamp_lo=-0.2, clamp_hi=0.2)
    model = init_model(tiny_spec(ssdp_readout=cfg, ssdp_hidden=cfg), seed=0, dtype=np.float64)
    model = dataclasses.replace(
        model,
        hidden=dataclasses.replace(model.hidden, w=np.clip(model.hidden.w, -0.2, 0.2) + 0.1),
    )
    zeros = [np.zeros_like(p) for p in model.params()]
    opt = optim.AdamState().for_params(model.params())
    for k in range(10):
        rec = forward(model, random_raster(8, 4, 6, p=0.7, seed=k))
        model, opt = hybrid_update(model, rec, zeros, 0, opt)
        for w in (model.hidden.w, model.readout.w):
            assert w.min() >= -0.2 and w.max() <= 0.2


def test_init_is_seeded():
    a = init_model(tiny_spec(), seed=7)
    b = init_model(tiny_spec(), seed=7)
    c = init_model(tiny_spec(), seed=8)
    np.testing.assert_array_equal(a.hidden.w, b.hidden.w)
    assert not np.array_equal(a.hidden.w, c.hidden.w)
    bound = 2.0 * math.sqrt(3 / 6)
    assert np.abs(a.hidden.w).max() <= bound


def test_spec_validation():
    with pytest.raises(ContractError):
        tiny_spec(hidden_dim=0)
    with pytest.raises(ContractError):
        tiny_spec(T=1)


def test_checkpoint_round_trip(tmp_path):
    spec = tiny_spec(ssdp_readout=gauss_cfg(start_epoch=2))
    model = init_model(spec, seed=4)
    path = tmp_path / "ckpt.npz"
    save_checkpoint(path, model, rng_state={"seed": 4}, meta={"epoch": 3})
    loaded, rng_state, meta = load_checkpoint(path)
    assert loaded.spec == spec
    assert rng_state == {"seed": 4} and meta == {"epoch": 3}
    for p, q in zip(model.params(), loaded.params()):
        np.testing.assert_array_equal(p, q)
        assert p.dtype == q.dtype
    x = random_raster(8, 3, 6)
    np.testing.assert_array_equal(predict(model, x), predict(loaded, x))


def test_checkpoint_bad_file(tmp_path):
    bad = tmp_path / "bad.npz"
    bad.write_bytes(b"not a zip")
    with pytest.raises(DataError):
        load_checkpoint(bad)
