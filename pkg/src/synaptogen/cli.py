"""Command-line front end: sample | run | experiment.

`sample` dumps a kernel bank as PGM images plus a stats CSV, `run` trains
and evaluates one (dataset, arm, seed) cell, and `experiment` produces the
full comparison grid as a Markdown table, a full-precision CSV, and a
manifest JSON that records everything needed to reproduce each number.

Exit codes: 0 success, 1 missing input file, 2 bad usage or config,
3 experiment finished with failed cells.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from datetime import datetime, timezone
from os import environ
from pathlib import Path

from . import __version__
from .data import LabeledDataset, load_cifar10_bin, load_idx, pad_to_32
from .numerics import fnv1a64
from .sampling import (
    CENTER_SURROUND,
    LOGNORMAL,
    NORMAL,
    SynapseDistribution,
    export_kernels_pgm,
    generate_kernel_bank,
    kernel_stats,
    write_stats_csv,
)
from .training import (
    DEFAULT_ARMS,
    FULLY_TRAINED,
    TrainConfig,
    run_experiment,
    single_run,
)

EXIT_OK = 0
EXIT_MISSING_INPUT = 1
EXIT_USAGE = 2
EXIT_PARTIAL_FAILURE = 3

DATASET_NAMES = ("mnist", "cifar10", "svhn")
DATASET_DISPLAY = {"mnist": "MNIST", "cifar10": "CIFAR-10", "svhn": "SVHN"}
ARM_DISPLAY = {
    NORMAL: "Normal",
    LOGNORMAL: "Log-Normal",
    CENTER_SURROUND: "Center-Surround",
    FULLY_TRAINED: "Fully Trained",
}

# every config key with its type and documented default; parse_config
# resolves all of them so the manifest snapshot is complete
CONFIG_SCHEMA = {
    "learning_rate": (float, 0.01),
    "momentum": (float, 0.9),
    "batch_size": (int, 32),
    "epochs": (int, 60),
    "per_class": (int, 38),
    "n_runs": (int, 3),
    "base_seed": (int, 0),
    "jobs": (int, 1),
    "fc_init": (str, "glorot"),
    "scale_to_unit_fanin": (bool, False),
    "lognormal_sign_flip": (bool, False),
    "mu": (float, -0.702),
    "sigma2": (float, 0.9355),
    "sigma_center": (float, 1.0),
    "sigma_surround": (float, 2.5),
    "surround_weight": (float, 0.9 * (1.0 / 2.5) ** 2),
    "jitter": (float, 1e-8),
    "data_dir": (str, ""),
    "svhn_format": (str, "cifar-bin"),
}


class ConfigError(ValueError):
    """Bad config file or flag value; maps to exit code 2."""


class MissingInputError(FileNotFoundError):
    """A required input file is absent; maps to exit code 1."""


def _parse_bool(raw: str) -> bool:
    low = raw.lower()
    if low in ("true", "false"):
        return low == "true"
    raise ValueError(raw)


def parse_config(path: str | None) -> dict:
    """Resolve a flat ``key = value`` file against the full default schema."""
    resolved = {key: default for key, (_, default) in CONFIG_SCHEMA.items()}
    if path is None:
        return resolved
    try:
        text = Path(path).read_text()
    except FileNotFoundError:
        raise MissingInputError(path)
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {stripped!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip().strip("'\"")
        if key not in CONFIG_SCHEMA:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        kind, _ = CONFIG_SCHEMA[key]
        try:
            resolved[key] = _parse_bool(raw) if kind is bool else kind(raw)
        except ValueError:
            raise ConfigError(
                f"{path}:{lineno}: key {key!r} expects {kind.__name__}, got {raw!r}"
            )
    return resolved


_FLAG_TO_KEY = {
    "lr": "learning_rate",
    "momentum": "momentum",
    "batch": "batch_size",
    "epochs": "epochs",
    "per_class": "per_class",
    "jobs": "jobs",
    "base_seed": "base_seed",
}


def resolve_config(args) -> dict:
    """Config file values with command-line flags layered on top."""
    cfg = parse_config(getattr(args, "config", None))
    for flag, key in _FLAG_TO_KEY.items():
        value = getattr(args, flag, None)
        if value is not None:
            cfg[key] = value
    return cfg


def train_config_from(cfg: dict) -> TrainConfig:
    return TrainConfig(
        learning_rate=cfg["learning_rate"],
        momentum=cfg["momentum"],
        batch_size=cfg["batch_size"],
        epochs=cfg["epochs"],
        fc_init=cfg["fc_init"],
        scale_to_unit_fanin=cfg["scale_to_unit_fanin"],
    )


def distribution_from(cfg: dict, variant: str) -> SynapseDistribution:
    if variant == NORMAL:
        return SynapseDistribution.normal()
    if variant == LOGNORMAL:
        return SynapseDistribution.lognormal(
            mu=cfg["mu"], sigma2=cfg["sigma2"], sign_flip=cfg["lognormal_sign_flip"]
        )
    if variant == CENTER_SURROUND:
        return SynapseDistribution.center_surround(
            sigma_center=cfg["sigma_center"],
            sigma_surround=cfg["sigma_surround"],
            surround_weight=cfg["surround_weight"],
            jitter=cfg["jitter"],
        )
    raise ConfigError(f"unknown distribution {variant!r}")


def distributions_from(cfg: dict) -> dict:
    return {v: distribution_from(cfg, v) for v in (NORMAL, LOGNORMAL, CENTER_SURROUND)}


# ---------------------------------------------------------------- datasets


def data_root(cfg: dict) -> Path:
    root = cfg["data_dir"] or environ.get("SYNAPTOGEN_DATA_DIR", "")
    if not root:
        raise MissingInputError(
            "no dataset root: set SYNAPTOGEN_DATA_DIR or the data_dir config key"
        )
    return Path(root)


def _require(path: Path) -> Path:
    if not path.is_file():
        raise MissingInputError(str(path))
    return path


def file_digest(path: Path) -> str:
    return f"0x{fnv1a64(path.read_bytes()):016x}"


def load_dataset(name: str, cfg: dict):
    """Load one dataset's (train, test) splits padded/shaped to 32x32.

    Returns ``(train, test, digests)`` where digests maps each file path to
    its 64-bit FNV-1a digest for the manifest.
    """
    root = data_root(cfg) / name
    if name == "mnist":
        files = {
            "train_images": _require(root / "train-images-idx3-ubyte"),
            "train_labels": _require(root / "train-labels-idx1-ubyte"),
            "test_images": _require(root / "t10k-images-idx3-ubyte"),
            "test_labels": _require(root / "t10k-labels-idx1-ubyte"),
        }
        train = load_idx(files["train_images"], files["train_labels"], name, "train")
        test = load_idx(files["test_images"], files["test_labels"], name, "test")
        train, test = pad_to_32(train), pad_to_32(test)
        paths = list(files.values())
    elif name == "cifar10":
        batches = [_require(root / f"data_batch_{i}.bin") for i in range(1, 6)]
        test_file = _require(root / "test_batch.bin")
        train = load_cifar10_bin(batches, name, "train")
        test = load_cifar10_bin([test_file], name, "test")
        paths = batches + [test_file]
    elif name == "svhn":
        layout = cfg["svhn_format"]
        if layout == "cifar-bin":
            train_file = _require(root / "train_batch.bin")
            test_file = _require(root / "test_batch.bin")
            train = load_cifar10_bin([train_file], name, "train")
            test = load_cifar10_bin([test_file], name, "test")
        elif layout == "idx":
            train_file = _require(root / "train-images-idx3-ubyte")
            train_labels = _require(root / "train-labels-idx1-ubyte")
            test_file = _require(root / "test-images-idx3-ubyte")
            test_labels = _require(root / "test-labels-idx1-ubyte")
            train = load_idx(train_file, train_labels, name, "train")
            test = load_idx(test_file, test_labels, name, "test")
            if train.images.shape[-1] == 28:
                train, test = pad_to_32(train), pad_to_32(test)
            paths = [train_file, train_labels, test_file, test_labels]
            digests = {str(p): file_digest(p) for p in paths}
            return train, test, digests
        else:
            raise ConfigError(f"svhn_format must be cifar-bin or idx, got {layout!r}")
        paths = [train_file, test_file]
    else:
        raise ConfigError(f"unknown dataset {name!r}; expected one of {DATASET_NAMES}")
    digests = {str(p): file_digest(p) for p in paths}
    return train, test, digests


# ---------------------------------------------------------------- outputs


def utc_stamp() -> str:
    return datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ")


def resolve_out_dir(args, prefix: str) -> Path:
    out = Path(args.out) if args.out else Path("results") / f"{prefix}-{utc_stamp()}"
    out.mkdir(parents=True, exist_ok=True)
    return out


def results_csv_text(results) -> str:
    lines = ["dataset,arm,seed,accuracy"]
    for res in results:
        for seed, acc in zip(res.seeds, res.per_seed_accuracy):
            lines.append(f"{res.dataset},{res.arm},{seed},{acc!r}")
    return "\n".join(lines) + "\n"


def markdown_table(results, dataset_order, arm_order) -> str:
    by_cell = {(r.dataset, r.arm): r for r in results}
    header = "| Dataset | " + " | ".join(ARM_DISPLAY[a] for a in arm_order) + " |"
    rule = "|---" * (len(arm_order) + 1) + "|"
    lines = [header, rule]
    for name in dataset_order:
        cells = []
        for arm in arm_order:
            res = by_cell[(name, arm)]
            if res.failed:
                cells.append("FAIL")
            else:
                cells.append(f"{res.mean_pct:.2f} ± {res.std_pct:.2f}")
        lines.append(f"| {DATASET_DISPLAY.get(name, name)} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def manifest_payload(command: str, cfg: dict, extra: dict, digests: dict, cells) -> dict:
    return {
        "version": __version__,
        "command": command,
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "config": {**cfg, **extra},
        "dataset_digests": digests,
        "cells": [
            {
                "dataset": res.dataset,
                "arm": res.arm,
                "seeds": res.seeds,
                "per_seed_accuracy": res.per_seed_accuracy,
                "mean_pct": None if res.failed else res.mean_pct,
                "std_pct": None if res.failed else res.std_pct,
                "n_test": res.n_test,
                "error": res.error,
                "duration_s": res.duration_s,
            }
            for res in cells
        ],
    }


def write_manifest(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------- commands


def cmd_sample(args) -> int:
    cfg = resolve_config(args)
    dist = distribution_from(cfg, args.dist)
    bank = generate_kernel_bank(dist, channels=args.channels, seed=args.seed)
    out = resolve_out_dir(args, f"sample-{args.dist}")
    paths = export_kernels_pgm(bank, out)
    stats = kernel_stats(bank)
    bank_id = f"{args.dist}-seed{args.seed}"
    write_stats_csv(out / "stats.csv", [(bank_id, stats)])
    print(
        f"{bank_id}: {len(paths)} kernel images in {out}; "
        f"mean {stats.mean:.4f} var {stats.var:.4f} min {stats.min:.4f} max {stats.max:.4f}"
    )
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = resolve_config(args)
    train_raw, test_raw, digests = load_dataset(args.dataset, cfg)
    started = time.perf_counter()
    accuracy = single_run(
        train_raw, test_raw, args.arm, args.seed,
        per_class=cfg["per_class"],
        base_config=train_config_from(cfg),
        distributions=distributions_from(cfg),
    )
    duration = time.perf_counter() - started
    out = resolve_out_dir(args, f"run-{args.dataset}-{args.arm}")
    cell = {
        "dataset": args.dataset,
        "arm": args.arm,
        "seeds": [args.seed],
        "per_seed_accuracy": [accuracy],
        "mean_pct": accuracy * 100.0,
        "std_pct": 0.0,
        "n_test": len(test_raw),
        "error": None,
        "duration_s": duration,
    }
    payload = {
        "version": __version__,
        "command": "run",
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "config": {**cfg, "dataset": args.dataset, "arm": args.arm, "seed": args.seed},
        "dataset_digests": digests,
        "cells": [cell],
    }
    write_manifest(out / "manifest.json", payload)
    print(f"{args.dataset} {args.arm} {args.seed} {accuracy * 100.0:.2f}%")
    return EXIT_OK


def cmd_experiment(args) -> int:
    cfg = resolve_config(args)
    dataset_names = args.datasets
    arm_order = tuple(args.arms)
    datasets, digests = {}, {}
    for name in dataset_names:
        train_raw, test_raw, file_digests = load_dataset(name, cfg)
        datasets[name] = (train_raw, test_raw)
        digests.update(file_digests)

    started = time.perf_counter()
    results = run_experiment(
        datasets,
        arms=arm_order,
        n_runs=cfg["n_runs"],
        base_seed=cfg["base_seed"],
        per_class=cfg["per_class"],
        base_config=train_config_from(cfg),
        distributions=distributions_from(cfg),
        jobs=cfg["jobs"],
    )
    total = time.perf_counter() - started

    out = resolve_out_dir(args, "experiment")
    table = markdown_table(results, dataset_names, arm_order)
    (out / "results.md").write_text(table)
    (out / "results.csv").write_text(results_csv_text(results))
    extra = {"datasets": list(dataset_names), "arms": list(arm_order), "total_duration_s": total}
    write_manifest(out / "manifest.json", manifest_payload("experiment", cfg, extra, digests, results))

    print(table, end="")
    print(f"results written to {out}")
    if any(res.failed for res in results):
        for res in results:
            if res.failed:
                print(f"FAILED {res.dataset}/{res.arm}: {res.error}", file=sys.stderr)
        return EXIT_PARTIAL_FAILURE
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _csv_list(valid, what):
    def parse(raw: str):
        items = [part.strip() for part in raw.split(",") if part.strip()]
        for item in items:
            if item not in valid:
                raise argparse.ArgumentTypeError(
                    f"unknown {what} {item!r}; expected one of {', '.join(valid)}"
                )
        return items

    return parse


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="synaptogen",
        description="Frozen sampled conv synapses vs a fully trained baseline on tiny datasets.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--out", help="output directory (default: results/<UTC timestamp>)")

    def add_train_flags(p):
        p.add_argument("--per-class", dest="per_class", type=int, help="training samples per class")
        p.add_argument("--epochs", type=int)
        p.add_argument("--lr", type=float, help="learning rate")
        p.add_argument("--momentum", type=float)
        p.add_argument("--batch", type=int, help="mini-batch size")

    p_sample = sub.add_parser("sample", help="dump a sampled kernel bank as PGMs + stats CSV")
    add_common(p_sample)
    p_sample.add_argument("--dist", required=True, choices=(NORMAL, LOGNORMAL, CENTER_SURROUND))
    p_sample.add_argument("--seed", type=int, default=0)
    p_sample.add_argument("--channels", type=int, default=1, choices=(1, 3))
    p_sample.set_defaults(func=cmd_sample)

    p_run = sub.add_parser("run", help="train and evaluate one (dataset, arm, seed) cell")
    add_common(p_run)
    add_train_flags(p_run)
    p_run.add_argument("--dataset", required=True, choices=DATASET_NAMES)
    p_run.add_argument("--arm", required=True, choices=DEFAULT_ARMS)
    p_run.add_argument("--seed", type=int, default=0)
    p_run.set_defaults(func=cmd_run)

    p_exp = sub.add_parser("experiment", help="run the full comparison grid")
    add_common(p_exp)
    add_train_flags(p_exp)
    p_exp.add_argument(
        "--datasets", type=_csv_list(DATASET_NAMES, "dataset"),
        default=list(DATASET_NAMES), help="comma-separated subset of mnist,cifar10,svhn",
    )
    p_exp.add_argument(
        "--arms", type=_csv_list(DEFAULT_ARMS, "arm"),
        default=list(DEFAULT_ARMS), help="comma-separated subset of the four arms",
    )
    p_exp.add_argument("--base-seed", dest="base_seed", type=int, help="grid base seed")
    p_exp.add_argument("--jobs", type=int, help="concurrent experiment cells")
    p_exp.set_defaults(func=cmd_experiment)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except MissingInputError as exc:
        print(f"missing input: {exc}", file=sys.stderr)
        return EXIT_MISSING_INPUT
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
