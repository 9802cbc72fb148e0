"""Spike-timing jitter, population synchrony and training-curve exports.

Synchrony index of a (T, batch, N) raster: for each sample take the neurons
that fire at least once (the *active* set A) and every step t with at least
one spike; the coincidence at t is ``|spiking at t| / |A|``. The sample's
index is the mean coincidence over those steps, and the raster's index is
the mean over samples that have any spike (0.0 when nothing fires). It is 1
when all active neurons fire together at one step and ``1/N`` when N
neurons each fire alone at a distinct step.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import encode_latency, encode_rate
from .errors import ContractError, EmptyReportError, ExportError
from .network import forward
from .plasticity import first_spike_times

JITTER_BIN = 0.25
MAX_JITTER_NEURONS = 300


@dataclass
class JitterReport:
    neuron_ids: np.ndarray
    jitter: np.ndarray  # per reported neuron, in simulation steps
    repeats: int
    n_sampled: int
    n_silent: int
    hist_edges: np.ndarray = field(default_factory=lambda: np.zeros(0))
    hist_counts: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    @property
    def mean(self) -> float:
        return float(self.jitter.mean())


def jitter_from_first_spikes(t_first, T, max_neurons=MAX_JITTER_NEURONS, seed=0) -> JitterReport:
    """Jitter from stacked first-spike times shaped (repeats, samples, neurons).

    For each (sample, neuron) the std (ddof=0) is taken over the presentations
    where the neuron fired; it needs at least two of them. A neuron's jitter is
    its mean over the samples where that std exists. Neurons for which no sample
    qualifies count as silent and are left out. At most ``max_neurons`` neurons
    (seeded choice) are examined.
    """
    t = np.asarray(t_first, dtype=np.float64)
    if t.ndim == 2:
        t = t[:, None, :]
    repeats, _, n_neurons = t.shape
    if repeats < 2:
        raise ContractError("jitter needs at least two presentations")
    rng = np.random.default_rng(seed)
    if n_neurons > max_neurons:
        ids = np.sort(rng.choice(n_neurons, size=max_neurons, replace=False))
    else:
        ids = np.arange(n_neurons)
    t = t[:, :, ids]
    fired = t < T
    count = fired.sum(axis=0)
    valid = count >= 2
    safe = np.where(fired, t, 0.0)
    mean = safe.sum(axis=0) / np.maximum(count, 1)
    var = (np.where(fired, t - mean, 0.0) ** 2).sum(axis=0) / np.maximum(count, 1)
    std = np.sqrt(var)
    n_valid = valid.sum(axis=0)
    responsive = n_valid > 0
    if not responsive.any():
        raise EmptyReportError("no sampled neuron fired on two or more presentations")
    per_neuron = np.where(valid, std, 0.0).sum(axis=0)[responsive] / n_valid[responsive]
    top = max(JITTER_BIN, math.ceil(per_neuron.max() / JITTER_BIN) * JITTER_BIN + JITTER_BIN)
    edges = np.arange(0.0, top + JITTER_BIN / 2, JITTER_BIN)
    counts, _ = np.histogram(per_neuron, bins=edges)
    return JitterReport(
        neuron_ids=ids[responsive],
        jitter=per_neuron,
        repeats=repeats,
        n_sampled=len(ids),
        n_silent=int((~responsive).sum()),
        hist_edges=edges,
        hist_counts=counts,
    )


def jitter(
    model,
    images,
    repeats,
    seed=0,
    *,
    encoder="rate",
    max_rate=1.0,
    noise_rate=0.0,
    layer="hidden",
    max_neurons=MAX_JITTER_NEURONS,
) -> JitterReport:
    """Present ``images`` ``repeats`` times and measure first-spike jitter of a layer.

    Variability comes from the rate encoder's seeds and/or ``noise_rate``
    background input spikes; a latency encoder without noise is deterministic
    and must give zero jitter.
    """
    if repeats < 2:
        raise ContractError("repeats must be >= 2")
    T = model.spec.T
    seeds = np.random.SeedSequence(seed).spawn(repeats + 1)
    stack = []
    for k in range(repeats):
        rng = np.random.default_rng(seeds[k])
        if encoder == "rate":
            raster = encode_rate(images, T, max_rate, rng_seed=rng.integers(2**63)).raster
        else:
            raster = encode_latency(images, T).raster
        if noise_rate > 0:
            raster = raster | (rng.random(raster.shape) < noise_rate).astype(raster.dtype)
        record = forward(model, raster)
        fst = record.hidden_first if layer == "hidden" else record.readout_first
        stack.append(fst.t_first)
    pick = int(np.random.default_rng(seeds[-1]).integers(2**63))
    return jitter_from_first_spikes(np.stack(stack), T, max_neurons=max_neurons, seed=pick)


def bernoulli_first_spikes(p, T, repeats, n_neurons=1, seed=0) -> np.ndarray:
    """First-spike times of independent Bernoulli(p)-per-step neurons, (repeats, 1, n)."""
    rng = np.random.default_rng(seed)
    raster = rng.random((T, repeats, n_neurons)) < p
    return first_spike_times(raster).t_first[:, None, :]


def synchrony_index(raster) -> float:
    r = np.asarray(raster) > 0
    if r.ndim != 3 or r.size == 0:
        raise ContractError("raster must be a non-empty (T, batch, neurons) array")
    per_step = r.sum(axis=2)  # (T, B)
    active = r.any(axis=0).sum(axis=1)  # (B,)
    values = []
    for b in np.flatnonzero(active):
        steps = per_step[:, b][per_step[:, b] > 0]
        values.append(float(np.mean(steps / active[b])))
    return float(np.mean(values)) if values else 0.0


def rolling_variance(values, window=10) -> np.ndarray:
    """Population variance over the trailing ``window`` entries (fewer at the start)."""
    v = np.asarray(values, dtype=np.float64)
    out = np.empty_like(v)
    for k in range(len(v)):
        chunk = v[max(0, k - window + 1) : k + 1]
        # constant windows are exactly zero; np.var can leave rounding residue
        out[k] = 0.0 if np.all(chunk == chunk[0]) else np.var(chunk)
    return out


def stabilization_epoch(values, window=10, fraction=0.1):
    """First epoch whose full-window loss variance drops below ``fraction`` of the peak.

    Windows that are not yet full are ignored. Returns None if never reached
    or if there are fewer than ``window`` epochs.
    """
    var = rolling_variance(values, window)[window - 1 :]
    if len(var) == 0 or var.max() == 0:
        return None
    below = np.flatnonzero(var < fraction * var.max())
    if len(below) == 0:
        return None
    # the peak itself must come first
    peak = int(np.argmax(var))
    below = below[below > peak]
    return int(below[0]) + window - 1 if len(below) else None


@dataclass
class TrainingHistory:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    val_accuracy: list = field(default_factory=list)

    def record(self, train_loss, val_loss, val_accuracy=float("nan")):
        self.train_loss.append(float(train_loss))
        self.val_loss.append(float(val_loss))
        self.val_accuracy.append(float(val_accuracy))


def _fmt(x):
    return repr(float(x))


def _write_csv(path, header, rows):
    try:
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
    except OSError as exc:
        raise ExportError(f"cannot write {path}: {exc}") from exc


def export_run(
    history: TrainingHistory,
    out_dir,
    *,
    window=10,
    raster=None,
    hidden_counts=None,
    labels=None,
    jitter_report: JitterReport | None = None,
):
    """Write the run's CSV artifacts into ``out_dir``; returns the written paths.

    ``loss.csv``        epoch,train_loss,val_loss,loss_variance_window
    ``raster.csv``      sample,neuron,step (one row per spike)
    ``hidden_repr.csv`` sample,label,h0..h{N-1} (hidden spike counts)
    ``jitter.csv``      neuron,jitter
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ExportError(f"cannot create {out}: {exc}") from exc
    written = []
    var = rolling_variance(history.train_loss, window)
    rows = [
        (e, _fmt(tl), _fmt(vl), _fmt(v))
        for e, (tl, vl, v) in enumerate(zip(history.train_loss, history.val_loss, var))
    ]
    _write_csv(out / "loss.csv", ("epoch", "train_loss", "val_loss", "loss_variance_window"), rows)
    written.append(out / "loss.csv")
    if raster is not None:
        t, b, n = np.nonzero(np.asarray(raster))
        order = np.lexsort((t, n, b))
        _write_csv(out / "raster.csv", ("sample", "neuron", "step"), zip(b[order], n[order], t[order]))
        written.append(out / "raster.csv")
    if hidden_counts is not None:
        counts = np.asarray(hidden_counts)
        lab = labels if labels is not None else np.full(len(counts), -1)
        header = ("sample", "label") + tuple(f"h{k}" for k in range(counts.shape[1]))
        rows = ([s, int(lab[s])] + [int(c) for c in counts[s]] for s in range(len(counts)))
        _write_csv(out / "hidden_repr.csv", header, rows)
        written.append(out / "hidden_repr.csv")
    if jitter_report is not None:
        rows = zip(jitter_report.neuron_ids, map(_fmt, jitter_report.jitter))
        _write_csv(out / "jitter.csv", ("neuron", "jitter"), rows)
        written.append(out / "jitter.csv")
    return written
