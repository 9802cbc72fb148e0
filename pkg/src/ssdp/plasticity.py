"""Spike-synchrony-dependent plasticity (SSDP) and a pairwise STDP baseline.

Every rule here maps binary "did it fire" indicators of a sender (input) and
receiver (output) population, plus spike-time differences, to a weight
update of shape (output, input) averaged over the batch.

Exponential variant, per sample and with ``dt >= 0``::

    dW = s_recv (x) s_send * (a_plus * exp(-dt / tau_plus) - a_minus * exp(-dt / tau_minus))

Gaussian variant, with ``sync = s_recv (x) s_send`` and ``g = exp(-dt^2 / 2 sigma^2)``::

    dW = a_plus * sync * g - a_baseline * (1 - sync) * g

Note the Gaussian depression term acts on pairs that did *not* co-fire.
The loop reference :func:`ssdp_oracle` instead gates every entry on
co-firing, so the two only agree on co-firing entries.
"""
from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ContractError, DimensionError

VARIANTS = ("exp", "gauss")


@dataclass(frozen=True)
class SsdpConfig:
    """Plasticity variant, its scalars, clamp bounds and start epoch."""

    variant: str = "exp"
    a_plus: float = 0.02
    a_minus: float | None = 0.01
    a_baseline: float | None = None
    sigma: float | None = None
    tau_plus: float | None = 20.0
    tau_minus: float | None = 20.0
    clamp_lo: float = -1.0
    clamp_hi: float = 1.0
    start_epoch: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}", "variant")
        required = (
            ("a_minus", "tau_plus", "tau_minus")
            if self.variant == "exp"
            else ("a_baseline", "sigma")
        )
        for name in required:
            if getattr(self, name) is None:
                raise ConfigError(
                    f"variant {self.variant!r} requires {name}", name
                )
        for name in ("a_plus", "a_minus", "a_baseline"):
            value = getattr(self, name)
            if value is not None and not value >= 0:
                raise ConfigError(f"{name} must be >= 0, got {value}", name)
        for name in ("sigma", "tau_plus", "tau_minus"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ConfigError(f"{name} must be > 0, got {value}", name)
        if not self.clamp_lo < self.clamp_hi:
            raise ConfigError("clamp_lo must be < clamp_hi", "clamp_lo")
        if self.start_epoch < 0:
            raise ConfigError("start_epoch must be >= 0", "start_epoch")
        if (
            self.variant == "exp"
            and self.a_plus == self.a_minus
            and self.tau_plus == self.tau_minus
        ):
            warnings.warn(
                "exp SSDP with a_plus == a_minus and tau_plus == tau_minus "
                "cancels to a zero update",
                RuntimeWarning,
                stacklevel=3,
            )

    def scaled(self, factor: float) -> "SsdpConfig":
        """Copy with every rate (a_plus, a_minus, a_baseline) multiplied by ``factor``."""
        changes = {"a_plus": self.a_plus * factor}
        if self.a_minus is not None:
            changes["a_minus"] = self.a_minus * factor
        if self.a_baseline is not None:
            changes["a_baseline"] = self.a_baseline * factor
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class FirstSpikeTimes:
    """First firing step per (sample, neuron); ``T`` marks a silent neuron."""

    t_first: np.ndarray
    T: int

    @property
    def fired(self) -> np.ndarray:
        return (self.t_first < self.T).astype(np.float64)


def first_spike_times(raster) -> FirstSpikeTimes:
    """Earliest step with a spike, from a (T, batch, neurons) raster."""
    r = np.asarray(raster) > 0
    T = r.shape[0]
    any_spike = r.any(axis=0)
    t_first = np.where(any_spike, r.argmax(axis=0), T).astype(np.int64)
    return FirstSpikeTimes(t_first, T)


def pairwise_dt(pre: FirstSpikeTimes, post: FirstSpikeTimes) -> np.ndarray:
    """``dt[b, o, i] = t_post[b, o] - t_pre[b, i]`` as floats."""
    if pre.T != post.T:
        raise DimensionError(f"rasters differ in length: {pre.T} vs {post.T}")
    if pre.t_first.shape[0] != post.t_first.shape[0]:
        raise DimensionError("pre and post batch sizes differ")
    return (
        post.t_first[:, :, None].astype(np.float64)
        - pre.t_first[:, None, :].astype(np.float64)
    )


def _check_indicators(s_send, s_recv):
    s_send = np.asarray(s_send, dtype=np.float64)
    s_recv = np.asarray(s_recv, dtype=np.float64)
    if s_send.ndim != 2 or s_recv.ndim != 2 or s_send.shape[0] != s_recv.shape[0]:
        raise DimensionError(
            f"indicators must be (batch, n) with equal batch, got "
            f"{s_send.shape} and {s_recv.shape}"
        )
    return s_send, s_recv


def _broadcast_dt(dt, batch, n_out, n_in):
    """Accept per-sample (B,), (B, 1) or pairwise (B, O, I) time differences."""
    dt = np.asarray(dt, dtype=np.float64)
    if dt.shape in ((batch,), (batch, 1)):
        return dt.reshape(batch, 1, 1)
    if dt.shape == (batch, n_out, n_in):
        return dt
    raise DimensionError(
        f"dt shape {dt.shape} is neither per-sample ({batch},) nor "
        f"pairwise ({batch}, {n_out}, {n_in})"
    )


def ssdp_exp(s_send, s_recv, dt, cfg: SsdpConfig) -> np.ndarray:
    """Exponential-kernel SSDP update. ``dt`` must be non-negative."""
    if cfg.variant != "exp":
        raise ContractError("ssdp_exp needs an exp-variant config")
    s_send, s_recv = _check_indicators(s_send, s_recv)
    batch, n_in = s_send.shape
    n_out = s_recv.shape[1]
    dt = _broadcast_dt(dt, batch, n_out, n_in)
    if np.any(dt < 0):
        raise ContractError("ssdp_exp expects absolute time differences (dt >= 0)")
    kernel = cfg.a_plus * np.exp(-dt / cfg.tau_plus) - cfg.a_minus * np.exp(
        -dt / cfg.tau_minus
    )
    if kernel.shape[1:] == (1, 1):
        return np.einsum("b,bo,bi->oi", kernel[:, 0, 0], s_recv, s_send) / batch
    return np.einsum("boi,bo,bi->oi", kernel, s_recv, s_send) / batch


def ssdp_gauss(s_send, s_recv, dt, cfg: SsdpConfig) -> np.ndarray:
    """Gaussian-kernel SSDP update with baseline depression of unsynchronised pairs."""
    if cfg.variant != "gauss":
        raise ContractError("ssdp_gauss needs a gauss-variant config")
    s_send, s_recv = _check_indicators(s_send, s_recv)
    batch, n_in = s_send.shape
    n_out = s_recv.shape[1]
    dt = _broadcast_dt(dt, batch, n_out, n_in)
    gauss = np.exp(-(dt**2) / (2.0 * cfg.sigma**2))
    gauss = np.broadcast_to(gauss, (batch, n_out, n_in))
    # sync ∈ {0, 1}, so pot - dep = g * ((a_plus + a_baseline) * sync - a_baseline)
    pot_dep = np.einsum("boi,bo,bi->oi", gauss, s_recv, s_send)
    return ((cfg.a_plus + cfg.a_baseline) * pot_dep - cfg.a_baseline * gauss.sum(0)) / batch


def ssdp(s_send, s_recv, dt, cfg: SsdpConfig) -> np.ndarray:
    """Dispatch on ``cfg.variant``. The exp variant is fed ``|dt|``."""
    if cfg.variant == "exp":
        return ssdp_exp(s_send, s_recv, np.abs(dt), cfg)
    return ssdp_gauss(s_send, s_recv, dt, cfg)


def _one_hot_times(fst: FirstSpikeTimes, mask=None):
    """(batch, neurons, T + 1) one-hot of first-spike times, optionally masked."""
    out = np.zeros(fst.t_first.shape + (fst.T + 1,))
    b, n = np.indices(fst.t_first.shape)
    out[b, n, fst.t_first] = 1.0 if mask is None else mask
    return out


def _lag_sum(post_hot, pre_hot, kernel):
    """``sum_b sum_{p,q} post_hot[b,o,p] * K[p,q] * pre_hot[b,i,q]`` as one matmul."""
    batch, n_out, steps = post_hot.shape
    filtered = pre_hot @ kernel.T  # (B, I, steps), indexed by post time
    left = post_hot.transpose(1, 0, 2).reshape(n_out, batch * steps)
    right = filtered.transpose(0, 2, 1).reshape(batch * steps, -1)
    return left @ right


def ssdp_from_rasters(pre_raster, post_raster, cfg: SsdpConfig) -> np.ndarray:
    """SSDP update straight from (T, batch, n) rasters.

    Same result as ``ssdp(pre.fired, post.fired, pairwise_dt(pre, post), cfg)``,
    but since first-spike times are integers in ``[0, T]`` the kernel is
    tabulated on the ``(T + 1) x (T + 1)`` grid of spike-time pairs and the
    batch sum becomes a matrix product, never materialising the
    (batch, output, input) lag tensor.
    """
    pre = first_spike_times(pre_raster)
    post = first_spike_times(post_raster)
    if pre.T != post.T or pre.t_first.shape[0] != post.t_first.shape[0]:
        raise DimensionError("pre and post rasters differ in length or batch")
    steps = np.arange(pre.T + 1, dtype=np.float64)
    lag = steps[:, None] - steps[None, :]  # [post time, pre time]
    batch = pre.t_first.shape[0]
    post_fired = _one_hot_times(post, post.fired)
    pre_fired = _one_hot_times(pre, pre.fired)
    if cfg.variant == "exp":
        lag = np.abs(lag)
        kernel = cfg.a_plus * np.exp(-lag / cfg.tau_plus) - cfg.a_minus * np.exp(-lag / cfg.tau_minus)
        return _lag_sum(post_fired, pre_fired, kernel) / batch
    gauss = np.exp(-(lag**2) / (2.0 * cfg.sigma**2))
    synced = _lag_sum(post_fired, pre_fired, gauss)
    every = _lag_sum(_one_hot_times(post), _one_hot_times(pre), gauss)
    return ((cfg.a_plus + cfg.a_baseline) * synced - cfg.a_baseline * every) / batch


def ssdp_oracle(s_send, s_recv, dt, cfg: SsdpConfig) -> np.ndarray:
    """Triple-loop reference that only updates co-firing (sender, receiver) pairs.

    Accepts the same ``dt`` shapes as the vectorised rules. Intended for small
    instances only.
    """
    s_send, s_recv = _check_indicators(s_send, s_recv)
    batch, n_in = s_send.shape
    n_out = s_recv.shape[1]
    dt = np.asarray(dt, dtype=np.float64)
    pairwise = dt.ndim == 3
    per_sample = np.zeros((batch, n_out, n_in))
    for b in range(batch):
        for o in range(n_out):
            for i in range(n_in):
                if s_send[b, i] == 1 and s_recv[b, o] == 1:
                    synchronized = s_recv[b, o] * s_send[b, i]
                    lag = dt[b, o, i] if pairwise else dt.reshape(batch)[b]
                    if cfg.variant == "exp":
                        pot = cfg.a_plus * synchronized * np.exp(-lag / cfg.tau_plus)
                        dep = cfg.a_minus * synchronized * np.exp(-lag / cfg.tau_minus)
                    else:
                        decay = np.exp(-(lag**2) / (2.0 * cfg.sigma**2))
                        pot = cfg.a_plus * synchronized * decay
                        dep = cfg.a_baseline * (1.0 - synchronized) * decay
                    per_sample[b, o, i] = pot - dep
                else:
                    per_sample[b, o, i] = 0.0
    total = np.zeros((n_out, n_in))
    for b in range(batch):
        total += per_sample[b]
    return total / batch


def stdp_baseline(
    pre_times: FirstSpikeTimes,
    post_times: FirstSpikeTimes,
    a_plus: float,
    a_minus: float,
    tau: float,
) -> np.ndarray:
    """Classical pair-based STDP on first-spike times, averaged over the batch.

    ``dt = t_post - t_pre``; ``dt >= 0`` potentiates by ``a_plus * exp(-dt/tau)``,
    ``dt < 0`` depresses by ``a_minus * exp(-|dt|/tau)``. Pairs with a silent
    side contribute nothing.
    """
    dt = pairwise_dt(pre_times, post_times)
    both = post_times.fired[:, :, None] * pre_times.fired[:, None, :]
    dw = np.where(
        dt >= 0, a_plus * np.exp(-dt / tau), -a_minus * np.exp(-np.abs(dt) / tau)
    )
    return (dw * both).mean(axis=0)


def apply_update(weights, dw, cfg: SsdpConfig):
    """``clamp(w + dw, clamp_lo, clamp_hi)``.

    ``weights`` may be a bare array or an object with a ``.w`` field (a new
    object of the same type is returned).
    """
    w = getattr(weights, "w", weights)
    w = np.asarray(w)
    dw = np.asarray(dw)
    if w.shape != dw.shape:
        raise DimensionError(f"update {dw.shape} does not match weights {w.shape}")
    new = np.clip(w + dw.astype(w.dtype, copy=False), cfg.clamp_lo, cfg.clamp_hi)
    if hasattr(weights, "w"):
        return dataclasses.replace(weights, w=new)
    return new
