"""Training driver: config in, run directory out.

A run directory is ``<out>/<hash12>-seed<seed>`` where ``hash12`` is the first
12 hex digits of the config hash taken with ``seed`` and ``output_dir``
blanked, so seeds of one experiment sit side by side. It holds

* ``manifest.json``  config echo, hashes, per-epoch history, final metrics
* ``best.npz``       checkpoint of the best-validation epoch
* ``loss.csv``, ``raster.csv``, ``hidden_repr.csv``  (see :func:`ssdp.analysis.export_run`)

The manifest contains nothing time- or path-dependent, so the same config and
seed give a byte-identical file.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, config as C, optim
from .analysis import TrainingHistory, export_run, stabilization_epoch
from .data import encode, load_fashion
from .errors import DataError, ExportError
from .network import (
    ModelSpec,
    forward,
    hybrid_update,
    init_model,
    load_checkpoint,
    loss,
    loss_and_grads,
    save_checkpoint,
)

MANIFEST_VERSION = 1
EVAL_CHUNK = 500


@dataclass
class Splits:
    train_images: np.ndarray
    train_labels: np.ndarray
    val_images: np.ndarray
    val_labels: np.ndarray
    test_images: np.ndarray
    test_labels: np.ndarray


def load_splits(cfg: C.RunConfig, data_root=None) -> Splits:
    """Train/val subsets are disjoint draws from the training file; test from the test file."""
    d = cfg.data
    root = data_root or d.root
    train = load_fashion(root, "train")
    test = load_fashion(root, "test")
    rng = np.random.default_rng(d.subset_seed)
    pool = rng.permutation(len(train))
    n_train = len(train) - d.val_size if d.train_subset is None else d.train_subset
    if n_train < 1 or n_train + d.val_size > len(train):
        raise DataError(
            f"training file has {len(train)} samples, need {n_train} train + {d.val_size} val"
        )
    itr, iva = pool[:n_train], pool[n_train : n_train + d.val_size]
    n_test = len(test) if d.test_subset is None else d.test_subset
    if n_test > len(test):
        raise DataError(f"test file has {len(test)} samples, need {n_test}")
    ite = rng.permutation(len(test))[:n_test]
    return Splits(
        train.images[itr], train.labels[itr],
        train.images[iva], train.labels[iva],
        test.images[ite], test.labels[ite],
    )


def build_spec(cfg: C.RunConfig, input_dim: int, output_dim: int = 10) -> ModelSpec:
    layers = C.ssdp_configs(cfg)
    return ModelSpec(
        input_dim=input_dim,
        hidden_dim=cfg.model.hidden_dim,
        output_dim=output_dim,
        T=cfg.data.T,
        neuron=C.neuron_params(cfg),
        surrogate=C.surrogate_params(cfg),
        ssdp_hidden=layers["hidden"],
        ssdp_readout=layers["readout"],
        init_scale=cfg.model.init_scale,
        logit_scale=cfg.model.logit_scale,
    )


def run_hash(cfg: C.RunConfig) -> str:
    return C.config_hash(cfg.model_copy(update={"seed": 0, "output_dir": ""}))


def run_dir_for(cfg: C.RunConfig, out=None) -> Path:
    return Path(out if out is not None else cfg.output_dir) / f"{run_hash(cfg)[:12]}-seed{cfg.seed}"


def evaluate(model, images, labels, *, encoder="latency", max_rate=1.0, seed=0):
    """Returns ``(mean loss, accuracy, predictions, hidden spike counts)``."""
    losses, preds, counts = [], [], []
    for start in range(0, len(images), EVAL_CHUNK):
        x = images[start : start + EVAL_CHUNK]
        y = labels[start : start + EVAL_CHUNK]
        raster = encode(x, model.spec.T, encoder, max_rate, rng_seed=seed + start).raster
        rec = forward(model, raster)
        losses.append(loss(rec.logits, y) * len(y))
        preds.append(np.argmax(rec.logits, axis=1))
        counts.append(rec.hidden_raster.sum(axis=0).astype(np.int64))
    preds = np.concatenate(preds)
    return (
        float(np.sum(losses) / len(labels)),
        float(np.mean(preds == labels)),
        preds,
        np.concatenate(counts),
    )


def _write_manifest(path: Path, manifest: dict):
    try:
        path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    except OSError as exc:
        raise ExportError(f"cannot write {path}: {exc}") from exc


def train(cfg: C.RunConfig, *, out=None, data_root=None, splits: Splits | None = None, log=None) -> Path:
    """Train per ``cfg`` and return the run directory.

    ``splits`` bypasses dataset loading (used by tests and demos). ``log`` is
    called with one summary string per epoch.
    """
    run_dir = run_dir_for(cfg, out)
    try:
        run_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ExportError(f"cannot create {run_dir}: {exc}") from exc
    manifest = {
        "format_version": MANIFEST_VERSION,
        "package_version": __version__,
        "config": C.to_dict(cfg),
        "config_hash": C.config_hash(cfg),
        "run_hash": run_hash(cfg),
        "seed": cfg.seed,
        "encoder": cfg.data.encoder,
        "history": {"train_loss": [], "val_loss": [], "val_acc": []},
        "metrics": None,
        "artifacts": [],
    }
    if cfg.epochs == 0:
        _write_manifest(run_dir / "manifest.json", manifest)
        return run_dir

    if splits is None:
        splits = load_splits(cfg, data_root)
    seeds = C.component_seeds(cfg.seed)
    init_seed = int(seeds["init"].generate_state(1)[0])
    enc_seed = int(seeds["encoder"].generate_state(1)[0])
    shuffle = np.random.default_rng(seeds["shuffle"])
    d = cfg.data
    input_dim = int(np.prod(splits.train_images.shape[1:]))
    spec = build_spec(cfg, input_dim, 10)
    model = init_model(spec, seed=init_seed)
    o = cfg.optimizer
    opt = optim.AdamState(lr=o.lr, beta1=o.beta1, beta2=o.beta2, eps=o.eps).for_params(model.params())
    lr_sched, ssdp_sched = C.lr_schedule(cfg), C.ssdp_schedule(cfg)

    train_x = None
    if d.encoder == "latency":
        train_x = encode(splits.train_images, d.T, "latency").raster
    n = len(splits.train_labels)
    history = TrainingHistory()
    val_acc_hist = []
    best = (-1.0, -1)
    for epoch in range(cfg.epochs):
        opt = dataclasses.replace(opt, lr=optim.cosine(lr_sched, epoch))
        factor = optim.cosine(ssdp_sched, epoch)
        order = shuffle.permutation(n)
        batch_losses = []
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            if train_x is not None:
                x = train_x[:, idx]
            else:
                x = encode(splits.train_images[idx], d.T, "rate", d.max_rate, rng_seed=enc_seed + epoch * n + start).raster
            value, grads, record = loss_and_grads(model, x, splits.train_labels[idx])
            model, opt = hybrid_update(
                model,
                record,
                grads,
                epoch,
                opt,
                ssdp_scale=factor,
                ssdp_first=cfg.ssdp.order == "ssdp_first",
                clamp_gradient_step=o.clamp_gradient_step,
            )
            batch_losses.append(value * len(idx))
        train_loss = float(np.sum(batch_losses) / n)
        val_loss, val_acc, _, _ = evaluate(
            model, splits.val_images, splits.val_labels, encoder=d.encoder, max_rate=d.max_rate, seed=enc_seed
        )
        history.record(train_loss, val_loss)
        val_acc_hist.append(val_acc)
        if val_acc > best[0]:
            best = (val_acc, epoch)
            save_checkpoint(
                run_dir / "best.npz",
                model,
                rng_state={"seed": cfg.seed, "shuffle": shuffle.bit_generator.state},
                meta={"epoch": epoch, "val_acc": val_acc, "encoder": d.encoder, "max_rate": d.max_rate, "run_hash": run_hash(cfg)},
            )
        if log is not None:
            log(f"epoch {epoch} train_loss {train_loss:.4f} val_loss {val_loss:.4f} val_acc {val_acc:.4f}")

    best_model, _, _ = load_checkpoint(run_dir / "best.npz")
    test_loss, test_acc, _, counts = evaluate(
        best_model, splits.test_images, splits.test_labels, encoder=d.encoder, max_rate=d.max_rate, seed=enc_seed
    )
    final_loss, final_acc, _, _ = evaluate(
        model, splits.test_images, splits.test_labels, encoder=d.encoder, max_rate=d.max_rate, seed=enc_seed
    )
    a = cfg.analysis
    k = min(a.raster_samples, len(splits.test_labels))
    raster_rec = forward(best_model, encode(splits.test_images[:k], d.T, d.encoder, d.max_rate, rng_seed=enc_seed).raster)
    h = min(a.hidden_repr_samples, len(splits.test_labels))
    written = export_run(
        history,
        run_dir,
        window=a.loss_window,
        raster=raster_rec.hidden_raster,
        hidden_counts=counts[:h],
        labels=splits.test_labels[:h],
    )
    manifest["history"] = {
        "train_loss": history.train_loss,
        "val_loss": history.val_loss,
        "val_acc": val_acc_hist,
    }
    manifest["metrics"] = {
        "best_epoch": best[1],
        "best_val_acc": best[0],
        "test_acc": test_acc,
        "test_loss": test_loss,
        "final_epoch_test_acc": final_acc,
        "final_epoch_test_loss": final_loss,
        "stabilization_epoch": stabilization_epoch(history.train_loss, a.loss_window),
        "n_train": n,
        "n_val": len(splits.val_labels),
        "n_test": len(splits.test_labels),
    }
    manifest["artifacts"] = sorted([p.name for p in written] + ["best.npz"])
    _write_manifest(run_dir / "manifest.json", manifest)
    return run_dir
