"""
Backprop with and without SSDP on Fashion-MNIST
===============================================

A short version of the desk-scale recipe: the default config trimmed to
3,000 training images and 5 epochs. SSDP on the readout joins in at epoch 3.
Set SSDP_DATA_DIR to the IDX directory first.
"""
import json
import sys
import tempfile

from ssdp import config as C
from ssdp.errors import DataError
from ssdp.train import train

overrides = {"epochs": 5, "data": {"train_subset": 3000, "val_size": 500, "test_subset": 1000}}
out = tempfile.mkdtemp(prefix="ssdp-demo-")

for enabled in (False, True):
    cfg = C.from_dict({**overrides, "ssdp": {"enabled": enabled}})
    print("SSDP on readout" if enabled else "backprop only")
    try:
        run_dir = train(cfg, out=out, log=lambda line: print("  " + line))
    except DataError as exc:
        sys.exit(f"{exc}\n(point SSDP_DATA_DIR at the Fashion-MNIST IDX files)")
    metrics = json.loads((run_dir / "manifest.json").read_text())["metrics"]
    print(f"  test accuracy {metrics['test_acc']:.4f} (best epoch {metrics['best_epoch']})")
    print(f"  run directory {run_dir}")
