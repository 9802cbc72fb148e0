"""Input -> hidden LIF -> readout LIF network trained by surrogate gradients.

The readout is decoded as spike counts: ``logits = logit_scale * count / T``.
Gradients are exact backpropagation through time of the unrolled dynamics,
with the spike nonlinearity's derivative replaced by the multi-Gaussian
surrogate (or, in ``smooth`` mode, by the derivative of the logistic that
replaces the threshold in the forward pass too).
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

import numpy as np

from . import optim
from .errors import ContractError, DataError, DimensionError
from .neuron import (
    LayerTrace,
    NeuronParams,
    SurrogateParams,
    logistic,
    run_layer,
    smooth_spike_grad,
    surrogate_grad,
)
from .plasticity import FirstSpikeTimes, SsdpConfig, apply_update, first_spike_times, ssdp_from_rasters

CHECKPOINT_VERSION = 1


@dataclass
class LayerWeights:
    w: np.ndarray  # (output, input)
    clamp_lo: float = -1.0
    clamp_hi: float = 1.0


@dataclass
class ModelSpec:
    input_dim: int = 784
    hidden_dim: int = 256
    output_dim: int = 10
    T: int = 20
    neuron: NeuronParams = field(default_factory=NeuronParams)
    surrogate: SurrogateParams = field(default_factory=SurrogateParams)
    ssdp_hidden: SsdpConfig | None = None
    ssdp_readout: SsdpConfig | None = None
    init_scale: float = 1.0
    logit_scale: float = 1.0

    def __post_init__(self):
        for name in ("input_dim", "hidden_dim", "output_dim"):
            if getattr(self, name) < 1:
                raise ContractError(f"{name} must be >= 1")
        if self.T < 2:
            raise ContractError("T must be >= 2")


@dataclass
class Model:
    spec: ModelSpec
    hidden: LayerWeights
    readout: LayerWeights
    tau_n_hidden: np.ndarray
    tau_n_readout: np.ndarray

    PARAM_NAMES = ("w_hidden", "tau_n_hidden", "w_readout", "tau_n_readout")

    def params(self):
        return [self.hidden.w, self.tau_n_hidden, self.readout.w, self.tau_n_readout]

    def with_params(self, params):
        w1, t1, w2, t2 = params
        return dataclasses.replace(
            self,
            hidden=dataclasses.replace(self.hidden, w=w1),
            readout=dataclasses.replace(self.readout, w=w2),
            tau_n_hidden=t1,
            tau_n_readout=t2,
        )

    def neuron_params(self, layer):
        tau_n = self.tau_n_hidden if layer == "hidden" else self.tau_n_readout
        return dataclasses.replace(self.spec.neuron, tau_n=tau_n)


def init_model(spec: ModelSpec, seed=0, dtype=np.float32) -> Model:
    """Uniform ``±init_scale * sqrt(3 / fan_in)`` weights."""
    rng = np.random.default_rng(seed)
    clamp = spec.ssdp_hidden or spec.ssdp_readout or SsdpConfig()

    def layer(n_out, n_in):
        bound = spec.init_scale * np.sqrt(3.0 / n_in)
        w = rng.uniform(-bound, bound, size=(n_out, n_in))
        w = w.astype(dtype)
        return LayerWeights(w, clamp.clamp_lo, clamp.clamp_hi)

    hidden = layer(spec.hidden_dim, spec.input_dim)
    readout = layer(spec.output_dim, spec.hidden_dim)
    tau0 = np.broadcast_to(spec.neuron.tau_n, ())
    return Model(
        spec,
        hidden,
        readout,
        np.full(spec.hidden_dim, float(tau0), dtype=dtype),
        np.full(spec.output_dim, float(tau0), dtype=dtype),
    )


@dataclass
class ForwardRecord:
    input_raster: np.ndarray
    hidden_raster: np.ndarray
    readout_raster: np.ndarray
    hidden_trace: LayerTrace
    readout_trace: LayerTrace
    hidden_first: FirstSpikeTimes
    readout_first: FirstSpikeTimes
    logits: np.ndarray


def forward(model: Model, encoded, *, smooth=False) -> ForwardRecord:
    """Run the network on a (T, batch, input_dim) raster or an EncodedBatch."""
    raster = getattr(encoded, "raster", encoded)
    spec = model.spec
    if raster.ndim != 3 or raster.shape[0] != spec.T or raster.shape[2] != spec.input_dim:
        raise DimensionError(
            f"expected raster (T={spec.T}, batch, {spec.input_dim}), got {raster.shape}"
        )
    x = raster.astype(model.hidden.w.dtype, copy=False)
    sigma_g = spec.surrogate.sigma_g
    h, h_trace = run_layer(x, model.hidden.w, model.neuron_params("hidden"), smooth=smooth, sigma_g=sigma_g)
    o, o_trace = run_layer(h, model.readout.w, model.neuron_params("readout"), smooth=smooth, sigma_g=sigma_g)
    logits = spec.logit_scale * o.sum(axis=0) / spec.T
    return ForwardRecord(
        input_raster=raster,
        hidden_raster=h,
        readout_raster=o,
        hidden_trace=h_trace,
        readout_trace=o_trace,
        hidden_first=first_spike_times(h),
        readout_first=first_spike_times(o),
        logits=logits,
    )


def _softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _check_labels(logits, labels):
    labels = np.asarray(labels)
    if labels.shape != (logits.shape[0],):
        raise DimensionError("need one label per sample")
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= logits.shape[1]:
        raise ContractError(f"labels must lie in [0, {logits.shape[1]})")
    return labels.astype(np.int64)


def loss(logits, labels) -> float:
    """Mean softmax cross-entropy."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = _check_labels(logits, labels)
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    return float(-logp[np.arange(len(labels)), labels].mean())


def loss_grad(logits, labels):
    logits = np.asarray(logits, dtype=np.float64)
    labels = _check_labels(logits, labels)
    g = _softmax(logits)
    g[np.arange(len(labels)), labels] -= 1.0
    return g / len(labels)


def _layer_backward(x, w, params: NeuronParams, trace: LayerTrace, raster, g_out, surrogate, need_input_grad):
    """BPTT through one LIF layer. Returns (grad_w, grad_tau_n, grad_x)."""
    T, B, N = trace.u.shape
    dtype = trace.u.dtype
    a = params.dendritic_gain.astype(dtype)
    alpha = dtype.type(params.alpha)
    v_th = params.v_th
    current = trace.extra.get("current")
    if current is None:
        current = x @ w.T
    g_m = np.zeros((B, N), dtype=dtype)
    g_d = np.zeros((B, N), dtype=dtype)
    g_a = np.zeros(N, dtype=np.float64)
    g_current = np.empty((T, B, N), dtype=dtype)
    for t in range(T - 1, -1, -1):
        u = trace.u[t]
        if trace.smooth:
            ds_du = smooth_spike_grad(u, surrogate.sigma_g, v_th)
        else:
            ds_du = surrogate_grad(u, surrogate, v_th)
        if params.reset_mode == "subtract":
            g_u = g_m + (g_out[t] - v_th * g_m) * ds_du
        else:
            s = raster[t]
            g_u = g_m * (1.0 - s) + (g_out[t] - u * g_m) * ds_du
        g_dt = g_d + (1.0 - alpha) * g_u
        d_prev = trace.d[t - 1] if t > 0 else 0.0
        g_a += (g_dt * (d_prev - current[t])).sum(axis=0)
        g_current[t] = (1.0 - a) * g_dt
        g_d = a * g_dt
        g_m = alpha * g_u
    flat_g = g_current.reshape(T * B, N)
    grad_w = flat_g.T @ x.reshape(T * B, -1)
    grad_tau = g_a * (a * (1.0 - a))
    grad_x = (g_current @ w) if need_input_grad else None
    return grad_w.astype(w.dtype), grad_tau.astype(w.dtype), grad_x


def backward(model: Model, record: ForwardRecord, dlogits):
    """Gradients of a scalar with ``d/dlogits = dlogits``, in ``Model.params()`` order."""
    spec = model.spec
    dtype = model.hidden.w.dtype
    g_counts = (spec.logit_scale / spec.T) * np.asarray(dlogits, dtype=dtype)
    g_o = np.broadcast_to(g_counts, record.readout_raster.shape)
    x = record.input_raster.astype(dtype, copy=False)
    gw2, gt2, g_h = _layer_backward(
        record.hidden_raster,
        model.readout.w,
        model.neuron_params("readout"),
        record.readout_trace,
        record.readout_raster,
        g_o,
        spec.surrogate,
        need_input_grad=True,
    )
    gw1, gt1, _ = _layer_backward(
        x,
        model.hidden.w,
        model.neuron_params("hidden"),
        record.hidden_trace,
        record.hidden_raster,
        g_h,
        spec.surrogate,
        need_input_grad=False,
    )
    return [gw1, gt1, gw2, gt2]


def loss_and_grads(model: Model, encoded, labels, *, smooth=False):
    record = forward(model, encoded, smooth=smooth)
    value = loss(record.logits, labels)
    grads = backward(model, record, loss_grad(record.logits, labels))
    return value, grads, record


def ssdp_updates(model: Model, record: ForwardRecord, scale=1.0, epoch=None):
    """SSDP weight changes per layer as ``{"hidden": dW, "readout": dW}``.

    Layers without a config, or whose ``start_epoch`` is after ``epoch``, are
    left out.
    """
    sources = {
        "hidden": (model.spec.ssdp_hidden, record.input_raster, record.hidden_raster),
        "readout": (model.spec.ssdp_readout, record.hidden_raster, record.readout_raster),
    }
    out = {}
    for name, (cfg, pre, post) in sources.items():
        if cfg is None or (epoch is not None and epoch < cfg.start_epoch):
            continue
        out[name] = ssdp_from_rasters(pre, post, cfg.scaled(scale))
    return out


def hybrid_update(
    model: Model,
    record: ForwardRecord,
    grads,
    epoch: int,
    opt: optim.AdamState,
    *,
    ssdp_scale: float = 1.0,
    ssdp_first: bool = False,
    clamp_gradient_step: bool = False,
):
    """Adam step on ``grads`` combined with SSDP on each configured layer.

    SSDP for a layer only applies once ``epoch >= cfg.start_epoch``, with its
    rates multiplied by ``ssdp_scale``. Returns ``(model, opt)``.
    """
    def gradient(m, opt):
        opt, new_params = optim.adam_step(opt, m.params(), grads)
        m = m.with_params(new_params)
        if clamp_gradient_step:
            m = dataclasses.replace(
                m,
                hidden=_clamp(m.hidden),
                readout=_clamp(m.readout),
            )
        return m, opt

    def plasticity(m):
        for name, dw in ssdp_updates(m, record, ssdp_scale, epoch).items():
            cfg = getattr(m.spec, f"ssdp_{name}")
            layer = apply_update(getattr(m, name), dw.astype(np.float64), cfg)
            m = dataclasses.replace(m, **{name: layer})
        return m

    if ssdp_first:
        model = plasticity(model)
        model, opt = gradient(model, opt)
    else:
        model, opt = gradient(model, opt)
        model = plasticity(model)
    return model, opt


def _clamp(layer: LayerWeights):
    return dataclasses.replace(layer, w=np.clip(layer.w, layer.clamp_lo, layer.clamp_hi))


def predict(model: Model, encoded) -> np.ndarray:
    """Arg-max class per sample; ties resolve to the lowest class index."""
    return forward(model, encoded).logits.argmax(axis=1)


def _spec_to_dict(spec: ModelSpec):
    d = dataclasses.asdict(spec)
    d["neuron"]["tau_n"] = float(np.mean(spec.neuron.tau_n))
    return d


def _spec_from_dict(d):
    d = dict(d)
    d["neuron"] = NeuronParams(**d["neuron"])
    d["surrogate"] = SurrogateParams(**d["surrogate"])
    for key in ("ssdp_hidden", "ssdp_readout"):
        if d[key] is not None:
            d[key] = SsdpConfig(**d[key])
    return ModelSpec(**d)


def save_checkpoint(path, model: Model, rng_state=None, meta=None):
    """Write ``model`` to an ``.npz`` archive (layout documented in README)."""
    spec = model.spec
    np.savez(
        path,
        format_version=np.int64(CHECKPOINT_VERSION),
        dims=np.array([spec.input_dim, spec.hidden_dim, spec.output_dim, spec.T], dtype=np.int64),
        w_hidden=model.hidden.w,
        w_readout=model.readout.w,
        tau_n_hidden=model.tau_n_hidden,
        tau_n_readout=model.tau_n_readout,
        clamp=np.array([model.hidden.clamp_lo, model.hidden.clamp_hi, model.readout.clamp_lo, model.readout.clamp_hi]),
        spec_json=np.array(json.dumps(_spec_to_dict(spec), sort_keys=True)),
        rng_state_json=np.array(json.dumps(rng_state, sort_keys=True)),
        meta_json=np.array(json.dumps(meta or {}, sort_keys=True)),
    )


def load_checkpoint(path):
    """Returns ``(model, rng_state, meta)``."""
    try:
        z = np.load(path, allow_pickle=False)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from exc
    with z:
        version = int(z["format_version"])
        if version != CHECKPOINT_VERSION:
            raise DataError(f"unsupported checkpoint version {version}")
        spec = _spec_from_dict(json.loads(str(z["spec_json"])))
        lo1, hi1, lo2, hi2 = z["clamp"].tolist()
        model = Model(
            spec,
            LayerWeights(z["w_hidden"].copy(), lo1, hi1),
            LayerWeights(z["w_readout"].copy(), lo2, hi2),
            z["tau_n_hidden"].copy(),
            z["tau_n_readout"].copy(),
        )
        dims = z["dims"].tolist()
        rng_state = json.loads(str(z["rng_state_json"]))
        meta = json.loads(str(z["meta_json"]))
    if dims != [spec.input_dim, spec.hidden_dim, spec.output_dim, spec.T]:
        raise DataError("checkpoint dims disagree with its stored spec")
    return model, rng_state, meta
