"""Command-line entry points: build, gen-data, train, eval, bench.

Every run writes its outputs under a run directory together with a
``manifest.json`` recording the command, package version, the full
configuration and the artifact paths involved. Exit codes: 0 success,
2 configuration error, 3 validation error, 4 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bench import BenchSpec, run_bench, write_csv
from .config import ExperimentConfig, default_config_yaml, load_config
from .datasets import load_dataset, make_dataset, save_dataset
from .errors import ConfigError, ValidationError
from .pipeline import evaluate, experiment_cubes, fit_readout
from .readout import load_model, save_model
from .topology import build, load_topology, save_topology

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VALIDATION = 3
EXIT_RUNTIME = 4


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    """Re-derive the config with CLI flag overrides folded in."""
    raw = cfg.to_dict()
    if getattr(args, "seed", None) is not None:
        for section in ("reservoir", "encoder", "readout", "dataset"):
            raw[section]["seed"] = args.seed
    if getattr(args, "tw", None) is not None:
        window = raw["encoder"]["window"]
        if args.tw < 1 or window % args.tw != 0:
            raise ConfigError(
                f"--tw {args.tw} must divide the encoding window ({window})"
            )
        raw["readout"]["w"] = window // args.tw
    if getattr(args, "c_out", None) is not None:
        raw["readout"]["c_out"] = args.c_out
    if getattr(args, "mask", None) is not None:
        raw["mask"] = args.mask
    from .config import config_from_dict

    return config_from_dict(raw)


def _load_experiment(args) -> ExperimentConfig:
    return _apply_overrides(load_config(args.config), args)


def _ensure_outdir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(outdir: Path, command: str, cfg: ExperimentConfig | None,
                    inputs: dict, outputs: dict, extra: dict | None = None) -> None:
    manifest = {
        "command": command,
        "package": "lsmkit",
        "version": __version__,
        "config": cfg.to_dict() if cfg is not None else None,
        "inputs": inputs,
        "outputs": outputs,
    }
    if extra:
        manifest.update(extra)
    with open(outdir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _check_topology_matches(cfg: ExperimentConfig, topo) -> None:
    if topo.config.to_dict() != cfg.reservoir.to_dict():
        raise ValidationError(
            "topology file was built from a different reservoir configuration"
        )


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_build(args) -> int:
    cfg = _load_experiment(args)
    outdir = _ensure_outdir(args.out)
    topo = build(cfg.reservoir)
    topo_path = outdir / "topology.npz"
    save_topology(topo_path, topo)

    counts = topo.connection_counts()
    n = topo.n_neurons
    print(f"topology: {n} neurons on {'x'.join(map(str, cfg.reservoir.dims))} grid")
    print(
        f"excitatory: {int(topo.is_excitatory.sum())} "
        f"(primary {int(topo.is_primary.sum())}), "
        f"inhibitory: {int((~topo.is_excitatory).sum())}"
    )
    total = sum(counts.values())
    print(
        "connections: "
        + " ".join(f"{k}={v}" for k, v in counts.items())
        + f" total={total} (density {total / max(n * (n - 1), 1):.4f})"
    )
    hist = topo.delay_histogram()
    print("delay histogram: " + (" ".join(f"{d}:{c}" for d, c in sorted(hist.items())) or "empty"))
    print(f"t_max: {topo.t_max}")
    print(f"wrote {topo_path}")
    _write_manifest(outdir, "build", cfg, {"config": str(args.config)},
                    {"topology": topo_path.name},
                    extra={"summary": {"connections": counts, "t_max": topo.t_max}})
    return EXIT_OK


def cmd_gen_data(args) -> int:
    cfg = _load_experiment(args)
    spec = cfg.dataset
    task = args.task or spec.task
    outdir = _ensure_outdir(args.out)
    total = spec.n_train + spec.n_test
    ds = make_dataset(
        task, total, spec.n_steps, cfg.reservoir.input_size,
        n_classes=spec.n_classes, noise=spec.noise, seed=spec.seed,
    )
    train_path = outdir / "train.npz"
    test_path = outdir / "test.npz"
    if spec.n_test:
        train, test = ds.split(spec.n_train)
        save_dataset(train_path, train)
        save_dataset(test_path, test)
        written = {"train": train_path.name, "test": test_path.name}
    else:
        save_dataset(train_path, ds)
        written = {"train": train_path.name}
    print(f"task '{task}': {spec.n_train} train / {spec.n_test} test sequences, "
          f"{spec.n_steps} steps x {cfg.reservoir.input_size} features")
    for name, fname in written.items():
        print(f"wrote {outdir / fname} ({name})")
    _write_manifest(outdir, "gen-data", cfg, {"config": str(args.config)}, written)
    return EXIT_OK


def _metrics_jsonable(metrics: dict) -> dict:
    return {
        "accuracy": metrics["accuracy"],
        "n_windows": metrics["n_windows"],
        "mask": metrics["mask"],
        "confusion": metrics["confusion"].tolist(),
    }


def cmd_train(args) -> int:
    cfg = _load_experiment(args)
    topo = load_topology(args.topology)
    _check_topology_matches(cfg, topo)
    dataset = load_dataset(args.data)
    outdir = _ensure_outdir(args.out)

    print(f"building activation cubes for {dataset.n_sequences} sequences ...")
    cube_data = experiment_cubes(cfg, topo, dataset)
    print(f"training readout: {cfg.readout.epochs} epochs, lr {cfg.readout.lr}")
    model, losses = fit_readout(cfg, cube_data)
    metrics = evaluate(model, cube_data, mask_enabled=cfg.mask)

    model_path = outdir / "model.npz"
    save_model(model_path, model)
    curve_path = outdir / "loss_curve.csv"
    with open(curve_path, "w") as fh:
        fh.write("epoch,loss\n")
        for i, loss in enumerate(losses):
            fh.write(f"{i},{loss!r}\n")
    metrics_path = outdir / "metrics.json"
    with open(metrics_path, "w") as fh:
        json.dump(_metrics_jsonable(metrics), fh, indent=2, sort_keys=True)
        fh.write("\n")

    if losses:
        print(f"final epoch loss: {losses[-1]:.4f}")
    print(f"train-set window accuracy (mask={'on' if cfg.mask else 'off'}): "
          f"{metrics['accuracy']:.3f}")
    print(f"confusion (rows=true):\n{metrics['confusion']}")
    print(f"wrote {model_path}")
    _write_manifest(
        outdir, "train", cfg,
        {"config": str(args.config), "topology": str(args.topology), "data": str(args.data)},
        {"model": model_path.name, "loss_curve": curve_path.name, "metrics": metrics_path.name},
    )
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _load_experiment(args)
    topo = load_topology(args.topology)
    _check_topology_matches(cfg, topo)
    dataset = load_dataset(args.data)
    model = load_model(args.model)
    outdir = _ensure_outdir(args.out)

    cube_data = experiment_cubes(cfg, topo, dataset)
    metrics = evaluate(model, cube_data, mask_enabled=cfg.mask)

    metrics_path = outdir / "metrics.json"
    with open(metrics_path, "w") as fh:
        json.dump(_metrics_jsonable(metrics), fh, indent=2, sort_keys=True)
        fh.write("\n")
    pred_path = outdir / "predictions.csv"
    with open(pred_path, "w") as fh:
        fh.write("sequence,window,label,prediction\n")
        window_pos = {}
        for i, sid in enumerate(cube_data.seq_ids):
            w = window_pos.get(int(sid), 0)
            window_pos[int(sid)] = w + 1
            fh.write(f"{sid},{w},{cube_data.labels[i]},{metrics['predictions'][i]}\n")

    print(f"window accuracy (mask={'on' if cfg.mask else 'off'}): {metrics['accuracy']:.3f}")
    print(f"confusion (rows=true):\n{metrics['confusion']}")
    _write_manifest(
        outdir, "eval", cfg,
        {"config": str(args.config), "topology": str(args.topology),
         "data": str(args.data), "model": str(args.model)},
        {"metrics": metrics_path.name, "predictions": pred_path.name},
    )
    return EXIT_OK


def cmd_bench(args) -> int:
    spec = BenchSpec(
        neuron_counts=tuple(args.counts),
        batch_sizes=tuple(args.batches),
        batch_layer_size=args.batch_layer_size,
        train_length=args.train_length,
        repetitions=args.reps,
        warmup=args.warmup,
        seed=args.seed if args.seed is not None else 0,
    )
    outdir = _ensure_outdir(args.out)
    results = run_bench(spec, progress=lambda msg: print(f"  {msg}", file=sys.stderr))
    csv_path = outdir / "bench.csv"
    write_csv(csv_path, results, spec)
    print(f"{'impl':<11} {'L':>6} {'B':>4} {'median':>12} {'iqr':>10}")
    for r in results:
        print(f"{r.impl:<11} {r.n_neurons:>6} {r.batch:>4} "
              f"{r.median_ns / 1e6:>10.3f}ms {r.iqr_ns / 1e6:>8.3f}ms")
    print(f"wrote {csv_path}")
    _write_manifest(outdir, "bench", None, {}, {"csv": csv_path.name},
                    extra={"spec": {
                        "neuron_counts": list(spec.neuron_counts),
                        "batch_sizes": list(spec.batch_sizes),
                        "batch_layer_size": spec.batch_layer_size,
                        "train_length": spec.train_length,
                        "repetitions": spec.repetitions,
                        "warmup": spec.warmup,
                        "seed": spec.seed,
                    }})
    return EXIT_OK


def cmd_init_config(args) -> int:
    text = default_config_yaml()
    if args.out == "-":
        print(text, end="")
    else:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_common_experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="experiment YAML file")
    p.add_argument("--out", required=True, help="run/output directory")
    p.add_argument("--seed", type=int, default=None,
                   help="override every section seed with this value")
    p.add_argument("--tw", type=int, default=None,
                   help="override temporal precision (cube channels per window)")
    p.add_argument("--c-out", dest="c_out", type=int, default=None,
                   help="override the number of conv channels")
    p.add_argument("--mask", action=argparse.BooleanOptionalAction, default=None,
                   help="force the semantic output mask on/off")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lsmkit",
        description="spiking-reservoir experiments: build, gen-data, train, eval, bench",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="sample a reservoir topology from a config")
    _add_common_experiment_flags(p)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("gen-data", help="generate a synthetic sequence dataset")
    _add_common_experiment_flags(p)
    p.add_argument("--task", choices=("patterns", "staged"), default=None,
                   help="override the configured task")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train the readout on a dataset")
    _add_common_experiment_flags(p)
    p.add_argument("--topology", required=True, help="topology .npz from 'build'")
    p.add_argument("--data", required=True, help="dataset .npz from 'gen-data'")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained readout")
    _add_common_experiment_flags(p)
    p.add_argument("--topology", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True, help="model .npz from 'train'")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="time scalar vs vectorized LIF layers")
    p.add_argument("--out", required=True)
    p.add_argument("--counts", type=int, nargs="+",
                   default=[10, 50, 200, 500, 1000, 2000, 5000])
    p.add_argument("--batches", type=int, nargs="+", default=[1, 8, 32, 128])
    p.add_argument("--batch-layer-size", type=int, default=500)
    p.add_argument("--train-length", type=int, default=100)
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--warmup", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("init-config", help="print or write the default config")
    p.add_argument("--out", default="-", help="target file, '-' for stdout")
    p.set_defaults(func=cmd_init_config)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except ValidationError as err:
        print(f"validation error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as err:  # noqa: BLE001 - boundary of the program
        print(f"error: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
