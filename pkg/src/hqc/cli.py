"""Command-line entry points for the experiment suite.

Commands:
  train         seeded training runs for one task/classifier combination
  noise-sweep   depolarizing-noise robustness of a trained checkpoint
  entropy-hist  entanglement-entropy histograms of the synthetic states
  export-qasm   OpenQASM 2.0 emission of a trained simple/real checkpoint
  baseline      logistic-regression reference accuracy

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import data as hdata
from . import experiments as ex
from . import sim, topology
from .gradients import cost_arrays
from .training import TrainConfig, load_checkpoint, save_checkpoint


def _add_data_dir(p):
    p.add_argument(
        "--data-dir",
        default=None,
        help="dataset root (default: $HQC_DATA_DIR or ./data)",
    )


def build_parser():
    parser = argparse.ArgumentParser(prog="hqc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run seeded trainings and write a result summary")
    p.add_argument("--task", required=True, choices=ex.ALL_TASKS)
    p.add_argument("--layout", required=True, choices=["ttn", "mera", "hybrid"])
    p.add_argument("--kind", required=True, choices=["simple", "general", "ancilla"])
    p.add_argument("--field", required=True, choices=["real", "complex"])
    p.add_argument("--seeds", type=int, default=5, help="number of seeds (0..K-1)")
    p.add_argument("--config", default=None, help="JSON file overriding TrainConfig fields")
    p.add_argument("--out", default=None, help="result JSON path")
    p.add_argument("--checkpoint-out", default=None, help="save the best seed's model here")
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--per-class", type=int, default=5000, help="quantum tasks: samples per class")
    _add_data_dir(p)

    p = sub.add_parser("noise-sweep", help="accuracy vs depolarizing strength")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--lambda-max", type=float, default=0.2)
    p.add_argument("--lambda-step", type=float, default=0.01)
    p.add_argument("--shots", type=int, default=401)
    p.add_argument("--repeats", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="CSV path (lambda,mean,std)")
    _add_data_dir(p)

    p = sub.add_parser("entropy-hist", help="max bipartite entropy histograms per class")
    p.add_argument("--classes", default="1,2,3,5,10")
    p.add_argument("--count", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-qubits", type=int, default=8)
    p.add_argument("--bins", type=int, default=64)
    p.add_argument("--out", required=True, help="CSV path (class,bin_lo,bin_hi,count)")

    p = sub.add_parser("export-qasm", help="emit OpenQASM 2.0 for a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    _add_data_dir(p)

    p = sub.add_parser("baseline", help="logistic-regression reference")
    p.add_argument("--task", required=True, choices=ex.ALL_TASKS)
    p.add_argument("--pca", choices=["on", "off"], default="on")
    p.add_argument("--max-iters", type=int, default=100000)
    p.add_argument("--out", default=None)
    p.add_argument("--split-seed", type=int, default=0)
    _add_data_dir(p)

    return parser


def _load_config_overrides(task, path):
    config = ex.default_config(task)
    if path:
        with open(path, encoding="utf-8") as fh:
            overrides = json.load(fh)
        for key, value in overrides.items():
            if not hasattr(config, key):
                raise ValueError(f"unknown TrainConfig field {key!r}")
            setattr(config, key, value)
    return config


def cmd_train(args, parser):
    if args.layout == "hybrid" and args.kind == "simple":
        parser.error("hybrid initialization requires --kind general or ancilla")
    config = _load_config_overrides(args.task, args.config)
    result, best = ex.run_experiment(
        args.task,
        args.layout,
        args.kind,
        args.field,
        seeds=range(args.seeds),
        config=config,
        data_dir=args.data_dir,
        split_seed=args.split_seed,
        per_class=args.per_class,
    )
    if args.out:
        ex.save_result(result, args.out)
    if args.checkpoint_out:
        save_checkpoint(
            best.model,
            best.params,
            args.checkpoint_out,
            train_config={
                "task": args.task,
                "split_seed": args.split_seed,
                "per_class": args.per_class,
                "learning_rate": config.learning_rate,
                "batch_size": config.batch_size,
                "max_iters": config.max_iters,
            },
            metrics={"test_acc_pct": 100.0 * best.test_acc},
        )
    std = "n/a" if result["std_pct"] is None else f"{result['std_pct']:.2f}"
    print(f"{args.task} {args.layout}/{args.kind}/{args.field}: "
          f"{result['mean_pct']:.2f} +- {std} over {args.seeds} seed(s)")
    return 0


def _dataset_from_checkpoint(doc, data_dir):
    cfg = doc.get("train_config", {})
    task = cfg.get("task")
    if not task:
        raise ValueError("checkpoint does not record its training task")
    return ex.prepare_task(
        task,
        data_dir=data_dir,
        split_seed=int(cfg.get("split_seed", 0)),
        per_class=int(cfg.get("per_class", 5000)),
    )


def cmd_noise_sweep(args, parser):
    model, params, doc = load_checkpoint(args.checkpoint)
    dataset = _dataset_from_checkpoint(doc, args.data_dir)
    steps = int(round(args.lambda_max / args.lambda_step))
    lambdas = [i * args.lambda_step for i in range(steps + 1)]
    rows = ex.noise_sweep(
        model, params, dataset, lambdas, shots=args.shots, repeats=args.repeats, seed=args.seed
    )
    lines = ["lambda,mean_accuracy,std_accuracy"]
    lines += [f"{lam:.4f},{mean:.6f},{std:.6f}" for lam, mean, std in rows]
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_entropy_hist(args, parser):
    classes = [int(c) for c in args.classes.split(",") if c]
    edges, hists = ex.entropy_histograms(
        classes, args.count, args.seed, n_qubits=args.n_qubits, bins=args.bins
    )
    lines = ["class,bin_lo,bin_hi,count"]
    for depth in classes:
        for i, count in enumerate(hists[depth]):
            lines.append(f"{depth},{edges[i]:.6f},{edges[i + 1]:.6f},{int(count)}")
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"wrote {len(classes)} histograms x {args.bins} bins to {args.out}")
    return 0


def cmd_export_qasm(args, parser):
    model, params, doc = load_checkpoint(args.checkpoint)
    text = topology.export_qasm(model, params)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(text)
    dataset = _dataset_from_checkpoint(doc, args.data_dir)
    test_amps, test_labels = dataset.subset("test")
    p0 = topology.predict_expectation_batch(model, params, test_amps)
    acc = float(np.mean((p0 >= 0.5).astype(int) == test_labels))
    cost = cost_arrays(model, params, test_amps, test_labels)
    print(f"wrote {args.out}; test accuracy {100 * acc:.2f}%, test cost {cost:.4f}")
    return 0


def cmd_baseline(args, parser):
    if args.task in ex.QUANTUM_TASKS:
        parser.error("baseline expects a classical task (iris-* or mnist-*)")
    data_dir = args.data_dir or ex.default_data_dir()
    if args.task in ex.IRIS_TASKS:
        raw = hdata.load_iris()
        binary = hdata.make_binary_task(raw, ex.IRIS_TASKS[args.task])
        tagged = hdata.split_dataset(binary, "iris", seed=args.split_seed)
    else:
        raw = hdata.load_mnist_dataset(data_dir)
        tagged = hdata.split_dataset(raw, "mnist", seed=args.split_seed)
        tagged = hdata.make_binary_task(tagged, ex.MNIST_TASKS[args.task])
    features = tagged.features
    if args.pca == "on" and args.task in ex.MNIST_TASKS:
        pca = hdata.fit_pca(features[tagged.split == hdata.SPLIT_TRAIN], k=8)
        features = hdata.apply_pca(pca, features)
    acc = hdata.logistic_baseline(features, tagged.labels, tagged.split, max_iters=args.max_iters)
    result = {
        "schema_version": ex.RESULT_SCHEMA_VERSION,
        "task": args.task,
        "classifier": "logistic",
        "pca": args.pca,
        "test_accuracy_pct": 100.0 * acc,
    }
    if args.out:
        ex.save_result(result, args.out)
    print(f"logistic baseline {args.task} (pca={args.pca}): {100 * acc:.2f}%")
    return 0


_COMMANDS = {
    "train": cmd_train,
    "noise-sweep": cmd_noise_sweep,
    "entropy-hist": cmd_entropy_hist,
    "export-qasm": cmd_export_qasm,
    "baseline": cmd_baseline,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args, parser)
    except BrokenPipeError:
        return 1
    except Exception as exc:  # surface a one-line error, not a traceback
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
