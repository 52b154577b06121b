"""Command-line entry point: datagen, train, encode, evaluate, ablate.

Options resolve as built-in defaults < ``--config`` file (flat key=value) <
command-line flags, and every run writes a manifest next to its outputs.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from . import __version__
from .core_types import MEDIAN, Ablation, TrainConfig
from .datagen import (SynthSpec, generate, load_features, load_labels, load_synth,
                      save_synth)
from .evaluation import mean_average_precision
from .experiment import ablation_config, pools_for, run, split_digest
from .network import load_tower, save_tower
from .retrieval import HammingIndex, encode, load_codes, save_codes
from .training import TrainingDiverged, train

log = logging.getLogger("transhash")

EXIT_USAGE = 2
EXIT_IO = 3
EXIT_DIVERGED = 4

VARIANTS = (Ablation.FULL, Ablation.IP, Ablation.NO_MMD, Ablation.NO_QUANT)


class UsageError(Exception):
    pass


def read_config_file(path) -> dict[str, str]:
    out = {}
    for k, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}: line {k} is not key=value")
        key, value = line.split("=", 1)
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def write_manifest(path, subcommand: str, resolved: dict, paths: dict) -> None:
    lines = [f"subcommand={subcommand}", f"version={__version__}"]
    lines += [f"{k}={v}" for k, v in resolved.items()]
    lines += [f"path.{k}={v}" for k, v in paths.items()]
    # Kept on its own line so manifests of repeated runs differ only here.
    lines.append(f"timestamp={time.strftime('%Y-%m-%dT%H:%M:%S')}")
    Path(path).write_text("\n".join(lines) + "\n")


def _ints(text) -> tuple[int, ...]:
    text = str(text).strip()
    return tuple(int(t) for t in text.replace(",", " ").split()) if text else ()


def _gamma(text):
    return MEDIAN if str(text) == MEDIAN else float(text)


# option name -> (converter, default); None default means "take the dataclass default".
SPEC_OPTIONS = {f.name: (type(f.default), f.default) for f in fields(SynthSpec)}
TRAIN_OPTIONS = {
    "bits": (int, 16),
    "lam": (float, TrainConfig.lam),
    "mu": (float, TrainConfig.mu),
    "gamma": (_gamma, MEDIAN),
    "learning_rate": (float, TrainConfig.learning_rate),
    "momentum": (float, 0.9),
    "batch_size": (int, TrainConfig.batch_size),
    "epochs": (int, TrainConfig.epochs),
    "seed": (int, 0),
    "hidden_x": (_ints, TrainConfig.hidden_sizes_x),
    "hidden_y": (_ints, TrainConfig.hidden_sizes_y),
    "hash_lr_mult": (float, TrainConfig.hash_lr_mult),
    "ablation": (Ablation, Ablation.FULL),
    "n_hat": (int, -1),
    "m_hat": (int, -1),
}


def _add_options(p: argparse.ArgumentParser, options: dict) -> None:
    for name, (conv, default) in options.items():
        p.add_argument("--" + name.replace("_", "-"), dest=name, default=None,
                       help=f"default: {default}")


def _resolve(args, options: dict) -> dict:
    file_values = read_config_file(args.config) if args.config else {}
    unknown = set(file_values) - set(options)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    out = {}
    for name, (conv, default) in options.items():
        raw = getattr(args, name)
        if raw is None:
            raw = file_values.get(name)
        try:
            out[name] = default if raw is None else conv(raw)
        except (TypeError, ValueError) as exc:
            raise UsageError(f"invalid value for --{name.replace('_', '-')}: {raw!r}") from exc
    return out


def _train_config(opts: dict) -> TrainConfig:
    try:
        cfg = TrainConfig(bits=opts["bits"], lam=opts["lam"], mu=opts["mu"], gamma=opts["gamma"],
                          learning_rate=opts["learning_rate"], momentum=opts["momentum"],
                          batch_size=opts["batch_size"], epochs=opts["epochs"], seed=opts["seed"],
                          hidden_sizes_x=opts["hidden_x"], hidden_sizes_y=opts["hidden_y"],
                          hash_lr_mult=opts["hash_lr_mult"])
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return ablation_config(cfg, opts["ablation"])


def _config_echo(cfg: TrainConfig) -> dict:
    d = asdict(cfg)
    d["ablation"] = cfg.ablation.value
    d["hidden_sizes_x"] = ",".join(map(str, cfg.hidden_sizes_x))
    d["hidden_sizes_y"] = ",".join(map(str, cfg.hidden_sizes_y))
    return d


def _target_counts(opts, data):
    n_hat = len(data.query) if opts["n_hat"] < 0 else opts["n_hat"]
    m_hat = len(data.database) if opts["m_hat"] < 0 else opts["m_hat"]
    return n_hat, m_hat


def cmd_datagen(args) -> int:
    opts = _resolve(args, SPEC_OPTIONS)
    try:
        spec = SynthSpec(**opts)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    out = Path(args.out)
    save_synth(generate(spec), out)
    write_manifest(out / "manifest.txt", "datagen", asdict(spec), {"out": out})
    log.info("wrote synthetic data to %s", out)
    return 0


def cmd_train(args) -> int:
    opts = _resolve(args, TRAIN_OPTIONS)
    cfg = _train_config(opts)
    data = load_synth(args.data)
    n_hat, m_hat = _target_counts(opts, data)
    try:
        sets = pools_for(data, cfg.seed, n_hat, m_hat)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    tx, ty, train_log = train(sets, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_tower(tx, out / "tower_x.ckpt")
    save_tower(ty, out / "tower_y.ckpt")
    (out / "train_log.txt").write_text("\n".join(train_log.lines()) + "\n")
    resolved = _config_echo(cfg) | {"n_hat": n_hat, "m_hat": m_hat, "split": split_digest(sets)}
    write_manifest(out / "manifest.txt", "train", resolved, {"data": args.data, "out": out})
    return 0


def cmd_encode(args) -> int:
    tower = load_tower(args.checkpoint)
    ds = load_features(args.features)
    if ds.dim != tower.d_in:
        raise UsageError(f"feature dimension {ds.dim} ({args.features}) does not match "
                         f"checkpoint input dimension {tower.d_in} ({args.checkpoint})")
    save_codes(encode(tower, ds.features), args.out)
    manifest = Path(args.out).with_name(Path(args.out).name + ".manifest")
    write_manifest(manifest, "encode", {"n": len(ds), "bits": tower.bits},
                   {"checkpoint": args.checkpoint, "features": args.features, "out": args.out})
    return 0


def cmd_evaluate(args) -> int:
    q = load_codes(args.query_codes)
    db = load_codes(args.db_codes)
    ql = load_labels(args.query_labels)
    dl = load_labels(args.db_labels)
    if len(ql) != len(q) or len(dl) != len(db):
        raise UsageError(f"label counts ({len(ql)}, {len(dl)}) do not match code counts "
                         f"({len(q)}, {len(db)})")
    if q.bits != db.bits:
        raise UsageError(f"code widths differ: {q.bits} vs {db.bits} bits")
    top_r = args.top_r if args.top_r and args.top_r > 0 else None
    report = mean_average_precision(q, ql, HammingIndex(db), dl, top_r)
    report.save(args.out)
    write_manifest(Path(args.out).with_name(Path(args.out).name + ".manifest"), "evaluate",
                   {"map": f"{report.map:.17g}", "top_r": top_r or "full"},
                   {"query_codes": args.query_codes, "db_codes": args.db_codes})
    print(f"MAP {report.map:.6f} ({report.n_queries} queries, {report.n_database} items, "
          f"{report.bits} bits)")
    return 0


def cmd_ablate(args) -> int:
    opts = _resolve(args, TRAIN_OPTIONS)
    base = _train_config(opts)
    bits_list = _ints(args.bits_list)
    seeds = _ints(args.seeds)
    if not bits_list or not seeds:
        raise UsageError("--bits-list and --seeds need at least one value")
    data = load_synth(args.data)
    n_hat, m_hat = _target_counts(opts, data)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    table = {}
    run_lines = ["variant bits seed split x_to_y y_to_x quantization_gap"]
    for variant in VARIANTS:
        for bits in bits_list:
            xy, yx = [], []
            for seed in seeds:
                cfg = ablation_config(base.with_(bits=bits, seed=seed), variant)
                res = run(data, cfg, n_hat, m_hat)
                xy.append(res.x_to_y.map)
                yx.append(res.y_to_x.map)
                run_lines.append(f"{variant.value} {bits} {seed} {res.split} "
                                 f"{res.x_to_y.map:.17g} {res.y_to_x.map:.17g} "
                                 f"{res.quantization_gap:.17g}")
                log.info("%s b=%d seed=%d: X->Y %.4f Y->X %.4f", variant.value, bits, seed,
                         xy[-1], yx[-1])
            table[variant, bits] = (float(np.mean(xy)), float(np.mean(yx)))
    header = "variant " + " ".join(f"XtoY@{b} YtoX@{b}" for b in bits_list)
    rows = [header]
    for variant in VARIANTS:
        cells = " ".join(f"{table[variant, b][0]:.4f} {table[variant, b][1]:.4f}"
                         for b in bits_list)
        rows.append(f"{variant.value} {cells}")
    (out / "ablation_table.txt").write_text("\n".join(rows) + "\n")
    (out / "ablation_runs.txt").write_text("\n".join(run_lines) + "\n")
    write_manifest(out / "manifest.txt", "ablate",
                   _config_echo(base) | {"bits_list": ",".join(map(str, bits_list)),
                                         "seeds": ",".join(map(str, seeds))},
                   {"data": args.data, "out": out})
    print("\n".join(rows))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="transhash", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("datagen", help="generate a synthetic two-domain dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    _add_options(p, SPEC_OPTIONS)
    p.set_defaults(func=cmd_datagen)

    p = sub.add_parser("train", help="train both towers")
    p.add_argument("--data", required=True, help="directory written by datagen")
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    _add_options(p, TRAIN_OPTIONS)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("encode", help="hash a feature file with a trained tower")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("evaluate", help="MAP and precision-recall of Hamming ranking")
    p.add_argument("--query-codes", required=True)
    p.add_argument("--query-labels", required=True)
    p.add_argument("--db-codes", required=True)
    p.add_argument("--db-labels", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--top-r", type=int, default=0, help="MAP cutoff; 0 ranks the full database")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="compare full, ip, no-mmd and no-quant variants")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--bits-list", default="16")
    p.add_argument("--seeds", default="0,1,2")
    _add_options(p, TRAIN_OPTIONS)
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else 0
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TrainingDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
