"""Adam and cosine annealing."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, DimensionError, NumericError


@dataclass
class AdamState:
    lr: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_params(cls, params, **hyper):
        state = cls(**hyper)
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
        return state


def adam_step(state: AdamState, params, grads):
    """One bias-corrected Adam update. Returns ``(new_state, new_params)``.

    Moment buffers are created lazily on the first call, so a fresh
    ``AdamState()`` can be used directly.
    """
    params = [np.asarray(p) for p in params]
    grads = [np.asarray(g) for g in grads]
    if len(params) != len(grads):
        raise DimensionError(f"{len(params)} params but {len(grads)} grads")
    m_prev = state.m or [np.zeros_like(p) for p in params]
    v_prev = state.v or [np.zeros_like(p) for p in params]
    for p, g, m in zip(params, grads, m_prev):
        if p.shape != g.shape or m.shape != p.shape:
            raise DimensionError(f"grad {g.shape} does not match param {p.shape}")
        if not np.all(np.isfinite(g)):
            raise NumericError("non-finite gradient")

    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1**t
    corr2 = 1.0 - b2**t
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, m_prev, v_prev):
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        update = (m / corr1) / (np.sqrt(v / corr2) + state.eps)
        new_params.append((p - state.lr * update).astype(p.dtype, copy=False))
        new_m.append(m)
        new_v.append(v)
    new_state = AdamState(
        lr=state.lr, beta1=b1, beta2=b2, eps=state.eps, step=t, m=new_m, v=new_v
    )
    return new_state, new_params


def adam_step_bound(lr, beta1, beta2, step):
    """Largest possible ``|param change|`` of Adam at a given step (``eps -> 0``).

    Follows from Cauchy-Schwarz on the bias-corrected moment sums; it equals
    ``lr`` at step 1 and tends to ``lr * (1 - beta1) / sqrt(1 - beta2)`` when
    ``beta1**2 < beta2``.
    """
    gamma = beta1**2 / beta2
    geometric = step if gamma == 1 else (1.0 - gamma**step) / (1.0 - gamma)
    return (
        lr
        * (1.0 - beta1)
        / (1.0 - beta1**step)
        * math.sqrt((1.0 - beta2**step) / (1.0 - beta2))
        * math.sqrt(geometric)
    )


@dataclass(frozen=True)
class CosineSchedule:
    v_max: float
    v_min: float = 0.0
    total_epochs: int = 1

    def __post_init__(self):
        if self.v_min > self.v_max:
            raise ContractError("v_min must be <= v_max")
        if self.total_epochs < 1:
            raise ContractError("total_epochs must be >= 1")


def cosine(schedule: CosineSchedule, epoch) -> float:
    if not 0 <= epoch <= schedule.total_epochs:
        raise ContractError(
            f"epoch {epoch} outside [0, {schedule.total_epochs}]"
        )
    span = schedule.v_max - schedule.v_min
    return schedule.v_min + 0.5 * span * (
        1.0 + math.cos(math.pi * epoch / schedule.total_epochs)
    )
