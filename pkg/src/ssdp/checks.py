"""Randomized equivalence trials between the vectorised SSDP rules and the loop oracle.

Each trial draws batch size, layer sizes and T (``B <= 8``, ``I, O <= 16``,
``T <= 32``), random spike rasters, and random rule scalars, then compares
on first-spike times taken from the rasters.

* exp: ``ssdp_exp`` against ``ssdp_oracle`` over every entry.
* gauss: the oracle only updates co-firing pairs, so per sample the
  co-firing entries are compared with the oracle and the rest with the
  closed form ``-a_baseline * exp(-dt**2 / (2 sigma**2))``; the batch result
  must equal the mean of the per-sample results.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .plasticity import SsdpConfig, first_spike_times, pairwise_dt, ssdp_exp, ssdp_gauss, ssdp_oracle

TOLERANCE = 1e-10


@dataclass
class OracleReport:
    trials: int
    seed: int
    max_deviation: dict = field(default_factory=dict)
    tolerance: float = TOLERANCE

    @property
    def passed(self) -> bool:
        return all(v <= self.tolerance for v in self.max_deviation.values())

    def lines(self):
        out = [f"trials {self.trials} seed {self.seed}"]
        for variant, dev in sorted(self.max_deviation.items()):
            verdict = "ok" if dev <= self.tolerance else "FAIL"
            out.append(f"{variant} max_abs_deviation {dev:.3e} {verdict}")
        return out


def _instance(rng):
    B = int(rng.integers(1, 9))
    n_in = int(rng.integers(1, 17))
    n_out = int(rng.integers(1, 17))
    T = int(rng.integers(2, 33))
    p = rng.uniform(0.02, 0.3)
    pre = first_spike_times((rng.random((T, B, n_in)) < p).astype(np.uint8))
    post = first_spike_times((rng.random((T, B, n_out)) < p).astype(np.uint8))
    return pre, post


def _exp_trial(rng):
    pre, post = _instance(rng)
    cfg = SsdpConfig(
        "exp",
        a_plus=rng.uniform(0, 0.1),
        a_minus=rng.uniform(0, 0.1),
        tau_plus=rng.uniform(1, 40),
        tau_minus=rng.uniform(1, 40),
    )
    dt = np.abs(pairwise_dt(pre, post))
    vec = ssdp_exp(pre.fired, post.fired, dt, cfg)
    ref = ssdp_oracle(pre.fired, post.fired, dt, cfg)
    return float(np.max(np.abs(vec - ref)))


def _gauss_trial(rng):
    pre, post = _instance(rng)
    cfg = SsdpConfig(
        "gauss",
        a_plus=rng.uniform(0, 0.1),
        a_minus=None,
        a_baseline=rng.uniform(0, 0.05),
        sigma=rng.uniform(0.3, 4),
    )
    dt = pairwise_dt(pre, post)
    s, r = pre.fired, post.fired
    worst = 0.0
    per_sample = []
    for b in range(s.shape[0]):
        sb, rb, db = s[b : b + 1], r[b : b + 1], dt[b : b + 1]
        vec = ssdp_gauss(sb, rb, db, cfg)
        ref = ssdp_oracle(sb, rb, db, cfg)
        co = (rb[0][:, None] * sb[0][None, :]) == 1
        closed = -cfg.a_baseline * np.exp(-db[0] ** 2 / (2.0 * cfg.sigma**2))
        dev = np.where(co, vec - ref, vec - closed)
        worst = max(worst, float(np.max(np.abs(dev))))
        per_sample.append(vec)
    batch = ssdp_gauss(s, r, dt, cfg)
    worst = max(worst, float(np.max(np.abs(batch - np.mean(per_sample, axis=0)))))
    return worst


_TRIALS = {"exp": _exp_trial, "gauss": _gauss_trial}


def oracle_check(trials=1000, seed=0, variants=("exp", "gauss")) -> OracleReport:
    """Run ``trials`` randomized trials per variant; deterministic in ``seed``."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    report = OracleReport(trials, seed)
    streams = np.random.SeedSequence(seed).spawn(len(variants))
    for variant, stream in zip(variants, streams):
        rng = np.random.default_rng(stream)
        report.max_deviation[variant] = max(_TRIALS[variant](rng) for _ in range(trials))
    return report
