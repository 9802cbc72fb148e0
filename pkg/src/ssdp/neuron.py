"""Discrete-time leaky integrate-and-fire neurons with dendritic filtering.

Per step, with ``a = logistic(tau_n)`` and ``alpha = exp(-dt / tau_m)``::

    d'  = a * d + (1 - a) * I
    u   = alpha * m + (1 - alpha) * d'
    s   = 1[u > v_th]
    m'  = u - v_th * s          (reset_mode="subtract")
    m'  = u * (1 - s)           (reset_mode="zero")

``u`` is the membrane before reset; it is what the surrogate derivative is
evaluated on during backpropagation.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, DimensionError, NumericError

RESET_MODES = ("subtract", "zero")


def logistic(x):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x)))


@dataclass
class NeuronParams:
    """Scalar LIF settings plus the per-neuron dendritic parameter ``tau_n``.

    ``tau_n`` is unbounded and enters the dynamics through ``logistic``; it is
    either a scalar or one value per neuron.
    """

    tau_m: float = 20.0
    dt: float = 1.0
    v_th: float = 1.0
    tau_n: np.ndarray | float = 0.0
    reset_mode: str = "subtract"

    def __post_init__(self):
        if not self.tau_m > 0:
            raise ContractError(f"tau_m must be > 0, got {self.tau_m}")
        if not self.dt > 0:
            raise ContractError(f"dt must be > 0, got {self.dt}")
        if not self.v_th > 0:
            raise ContractError(f"v_th must be > 0, got {self.v_th}")
        if self.reset_mode not in RESET_MODES:
            raise ContractError(f"reset_mode must be one of {RESET_MODES}")
        self.tau_n = np.asarray(self.tau_n, dtype=np.float64)
        if not np.all(np.isfinite(self.tau_n)):
            raise NumericError("tau_n must be finite")

    @property
    def alpha(self) -> float:
        return float(np.exp(-self.dt / self.tau_m))

    @property
    def dendritic_gain(self) -> np.ndarray:
        return logistic(self.tau_n)


@dataclass
class SurrogateParams:
    """Shape of the multi-Gaussian pseudo-derivative."""

    sigma_g: float = 0.5
    h_scale: float = 0.15
    s_ratio: float = 6.0

    def __post_init__(self):
        if not self.sigma_g > 0:
            raise ContractError("sigma_g must be > 0")
        if not self.h_scale >= 0:
            raise ContractError("h_scale must be >= 0")
        if not self.s_ratio > 1:
            raise ContractError("s_ratio must be > 1")


@dataclass
class MembraneState:
    m: np.ndarray
    d: np.ndarray

    @classmethod
    def zeros(cls, shape, dtype=np.float64):
        return cls(np.zeros(shape, dtype=dtype), np.zeros(shape, dtype=dtype))

    def copy(self):
        return MembraneState(self.m.copy(), self.d.copy())


@dataclass
class LayerTrace:
    """Per-step internals of one layer, kept for backpropagation through time.

    ``u`` is the pre-reset membrane and ``d`` the dendritic accumulator, both
    shaped (T, batch, neurons).
    """

    u: np.ndarray
    d: np.ndarray
    final: MembraneState
    smooth: bool = False
    extra: dict = field(default_factory=dict)


def _bump(v, mu, width):
    return np.exp(-((v - mu) ** 2) / (2.0 * width**2))


def surrogate_grad(v, params: SurrogateParams | None = None, v_th=1.0):
    """Multi-Gaussian pseudo-derivative of the spike nonlinearity at ``v``.

    A central bump of height ``1 + h`` at threshold minus two wider side
    bumps of height ``h`` placed ``sigma_g * s_ratio`` to either side. The
    negative side lobes push gradients away from voltages far from threshold.
    """
    p = params or SurrogateParams()
    v = np.asarray(v)
    wide = p.sigma_g * p.s_ratio
    return (
        (1.0 + p.h_scale) * _bump(v, v_th, p.sigma_g)
        - p.h_scale * _bump(v, v_th - wide, wide)
        - p.h_scale * _bump(v, v_th + wide, wide)
    )


def smooth_spike(v, sigma_g, v_th):
    """Logistic relaxation of the hard threshold (gradient-check mode)."""
    return logistic((np.asarray(v) - v_th) / sigma_g)


def smooth_spike_grad(v, sigma_g, v_th):
    s = smooth_spike(v, sigma_g, v_th)
    return s * (1.0 - s) / sigma_g


def _reset(u, s, params):
    if params.reset_mode == "subtract":
        return u - params.v_th * s
    return u * (1.0 - s)


def step(state: MembraneState, input_current, params: NeuronParams):
    """Advance one timestep. Returns ``(new_state, spikes)``."""
    current = np.asarray(input_current)
    if state.m.shape != current.shape or state.d.shape != current.shape:
        raise DimensionError(
            f"state shape {state.m.shape} does not match input {current.shape}"
        )
    if not np.all(np.isfinite(current)):
        raise NumericError("input current contains non-finite values")
    a = params.dendritic_gain
    d = a * state.d + (1.0 - a) * current
    u = params.alpha * state.m + (1.0 - params.alpha) * d
    s = (u > params.v_th).astype(u.dtype)
    return MembraneState(_reset(u, s, params), d), s


def run_layer(
    input_spikes,
    weights,
    params: NeuronParams,
    T: int | None = None,
    *,
    smooth: bool = False,
    sigma_g: float = 0.5,
    state: MembraneState | None = None,
):
    """Unroll a layer over ``T`` steps with ``I(t) = input_spikes(t) @ W.T``.

    ``weights`` is an (output, input) matrix or anything with a ``.w``
    attribute holding one. With ``smooth=True`` the hard threshold becomes
    ``logistic((u - v_th) / sigma_g)`` and the returned raster is real-valued;
    that mode only exists so gradients can be checked by finite differences.

    Returns ``(raster, trace)`` with raster shaped (T, batch, output).
    """
    w = getattr(weights, "w", weights)
    x = np.asarray(input_spikes)
    if x.ndim != 3:
        raise DimensionError(f"input raster must be (T, batch, neurons), got {x.shape}")
    if T is None:
        T = x.shape[0]
    if T < 1:
        raise ContractError("T must be >= 1")
    if x.shape[0] < T:
        raise DimensionError(f"input raster has {x.shape[0]} steps, need {T}")
    if w.ndim != 2 or w.shape[1] != x.shape[2]:
        raise DimensionError(
            f"weights {w.shape} do not accept {x.shape[2]} input neurons"
        )
    dtype = np.result_type(w.dtype, np.float32)
    current = x[:T].astype(dtype, copy=False) @ w.T.astype(dtype, copy=False)
    if not np.all(np.isfinite(current)):
        raise NumericError("input current contains non-finite values")

    batch, n_out = current.shape[1], current.shape[2]
    if state is None:
        state = MembraneState.zeros((batch, n_out), dtype=dtype)
    a = params.dendritic_gain.astype(dtype)
    alpha = dtype.type(params.alpha)
    v_th = params.v_th

    raster = np.empty((T, batch, n_out), dtype=dtype)
    us = np.empty_like(raster)
    ds = np.empty_like(raster)
    m, d = state.m, state.d
    for t in range(T):
        d = a * d + (1.0 - a) * current[t]
        u = alpha * m + (1.0 - alpha) * d
        if smooth:
            s = smooth_spike(u, sigma_g, v_th).astype(dtype)
        else:
            s = (u > v_th).astype(dtype)
        m = _reset(u, s, params)
        raster[t], us[t], ds[t] = s, u, d
    trace = LayerTrace(
        u=us, d=ds, final=MembraneState(m, d), smooth=smooth, extra={"current": current}
    )
    return raster, trace
