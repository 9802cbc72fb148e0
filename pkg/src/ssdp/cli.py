"""Command line entry point: ``ssdp {train,eval,analyze,oracle-check}``.

Exit codes: 0 ok, 2 config or usage error, 3 data error, 4 check failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import config as C
from .analysis import export_run, jitter, synchrony_index, TrainingHistory
from .checks import oracle_check
from .data import encode, load_fashion
from .errors import ConfigError, ContractError, DataError, DimensionError, EmptyReportError, ExportError
from .network import forward, load_checkpoint
from .train import evaluate, train

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_CHECK = 0, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _positive(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def cmd_train(args):
    cfg = C.load_config(args.config) if args.config else C.RunConfig()
    if args.seed is not None:
        cfg = C.from_dict({**C.to_dict(cfg), "seed": args.seed})
    run_dir = train(cfg, out=args.out, data_root=args.data, log=lambda s: print(s, flush=True))
    manifest = json.loads((run_dir / "manifest.json").read_text())
    if manifest["metrics"]:
        m = manifest["metrics"]
        print(f"best epoch {m['best_epoch']} val_acc {m['best_val_acc']:.4f} test_acc {m['test_acc']:.4f}")
    print(run_dir)
    return EXIT_OK


def _load_for_eval(args):
    model, _, meta = load_checkpoint(args.checkpoint)
    data = load_fashion(args.data, args.split)
    images, labels = data.images, data.labels
    if args.limit is not None:
        images, labels = images[: args.limit], labels[: args.limit]
    dim = int(np.prod(images.shape[1:]))
    if dim != model.spec.input_dim:
        raise DataError(f"checkpoint expects {model.spec.input_dim} inputs, data has {dim}")
    if labels.max(initial=0) >= model.spec.output_dim:
        raise DataError(f"labels exceed the checkpoint's {model.spec.output_dim} classes")
    return model, meta, images, labels


def cmd_eval(args):
    model, meta, images, labels = _load_for_eval(args)
    encoder = meta.get("encoder", "latency")
    _, acc, preds, _ = evaluate(model, images, labels, encoder=encoder, max_rate=meta.get("max_rate", 1.0))
    k = model.spec.output_dim
    confusion = np.zeros((k, k), dtype=np.int64)
    np.add.at(confusion, (labels.astype(np.int64), preds), 1)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "confusion.csv", "w") as fh:
            fh.write("true," + ",".join(f"pred_{j}" for j in range(k)) + "\n")
            for i in range(k):
                fh.write(f"{i}," + ",".join(str(c) for c in confusion[i]) + "\n")
    except OSError as exc:
        raise ExportError(f"cannot write {out}: {exc}") from exc
    print(f"accuracy {acc:.4f} on {len(labels)} samples ({args.split})")
    return EXIT_OK


def cmd_analyze(args):
    model, meta, images, labels = _load_for_eval(args)
    report = jitter(
        model,
        images,
        args.repeats,
        seed=args.seed,
        encoder=args.encoder,
        max_rate=args.max_rate,
        noise_rate=args.noise_rate,
    )
    raster = encode(images, model.spec.T, meta.get("encoder", "latency"), meta.get("max_rate", 1.0)).raster
    rec = forward(model, raster)
    sync = synchrony_index(rec.hidden_raster)
    out = Path(args.out)
    export_run(TrainingHistory(), out, jitter_report=report)
    summary = {
        "jitter_mean": report.mean,
        "jitter_neurons": int(report.n_sampled),
        "silent_neurons": int(report.n_silent),
        "repeats": args.repeats,
        "synchrony_index": sync,
        "hist_edges": report.hist_edges.tolist(),
        "hist_counts": report.hist_counts.tolist(),
    }
    (out / "analysis.json").write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    print(f"jitter mean {report.mean:.4f} steps over {report.n_sampled} neurons, synchrony {sync:.4f}")
    return EXIT_OK


def cmd_oracle_check(args):
    report = oracle_check(args.trials, args.seed, tuple(args.variant))
    for line in report.lines():
        print(line)
    return EXIT_OK if report.passed else EXIT_CHECK


def build_parser():
    p = _Parser(prog="ssdp", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="train a model from a config file")
    t.add_argument("--config", help="YAML run config (defaults used if omitted)")
    t.add_argument("--seed", type=int, help="override the config seed")
    t.add_argument("--out", help="parent directory for the run directory")
    t.add_argument("--data", help="dataset directory (else config data.root, else $SSDP_DATA_DIR)")
    t.set_defaults(func=cmd_train)

    for name, func, helptext in (
        ("eval", cmd_eval, "accuracy and confusion counts of a checkpoint"),
        ("analyze", cmd_analyze, "jitter and synchrony of a checkpoint"),
    ):
        e = sub.add_parser(name, help=helptext)
        e.add_argument("--checkpoint", required=True)
        e.add_argument("--data", help="dataset directory (else $SSDP_DATA_DIR)")
        e.add_argument("--split", choices=("train", "test"), default="test")
        e.add_argument("--limit", type=_positive, help="use only the first N samples")
        e.add_argument("--out", default=".", help="directory for output files")
        e.set_defaults(func=func)
        if name == "analyze":
            e.add_argument("--repeats", type=int, default=20)
            e.add_argument("--seed", type=int, default=0)
            e.add_argument("--encoder", choices=("rate", "latency"), default="rate")
            e.add_argument("--max-rate", type=float, default=1.0)
            e.add_argument("--noise-rate", type=float, default=0.0)

    o = sub.add_parser("oracle-check", help="randomized SSDP oracle equivalence trials")
    o.add_argument("--trials", type=_positive, default=1000)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--variant", nargs="+", choices=("exp", "gauss"), default=["exp", "gauss"])
    o.set_defaults(func=cmd_oracle_check)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, DimensionError, ExportError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ContractError, EmptyReportError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
