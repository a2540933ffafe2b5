"""Command-line front end wiring the pipeline stages together.

One verb per stage: augment captions, embed them, build a hypergraph,
train the adapters, evaluate retrieval, report entropies, verify
gradients, and run the synthetic benchmark.  Exit codes: 0 success,
1 usage error, 2 data or configuration error, 3 runtime failure.

``--config`` points at a JSON object whose keys mirror the training
and augmentation configs plus a few paths; unknown keys are rejected.
Explicit flags override config-file values.  Every subcommand that
takes ``--seed`` is bit-reproducible: the same seed yields the same
bytes on disk and the same report.

Data directories (``--data``) hold ``captions.jsonl`` and
``images.emb``, optionally ``images.ids`` with one image id per line
in row order; without an ids file, image ids are the row indices as
strings.  ``train`` and ``gradcheck`` fall back to a small built-in
planted corpus when no data directory is given.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

from . import __version__
from .adapter import load_checkpoint
from .augment import (
    AugmentConfig,
    augment_records,
    load_offline_synonyms,
)
from .bench import BenchConfig, bench_report_json, make_synthetic_corpus, run_bench
from .dataio import (
    embed_texts,
    load_captions_jsonl,
    parse_emb_file,
    write_captions_jsonl,
    write_emb_file,
)
from .errors import ConfigError, DataError, OshgError, ShapeError
from .hypergraph import TAG_ORIGINAL, auto_k, knn_hyperedges, save_hypergraph_json
from .infotheory import modality_entropy_report, nmi_alpha, report_to_json
from .matrix import Rng
from .retrieval import evaluate, format_report_table, report_json
from .training import (
    Corpus,
    Model,
    TrainConfig,
    build_corpus,
    finite_diff_check,
    load_model,
    train,
)

__all__ = ["dispatch", "entrypoint"]

TRAIN_KEYS = tuple(f.name for f in dataclasses.fields(TrainConfig))
AUGMENT_KEYS = tuple(f.name for f in dataclasses.fields(AugmentConfig))
PATH_KEYS = ("data", "out", "captions", "images", "source", "cache", "c")
CONFIG_KEYS = frozenset(TRAIN_KEYS) | frozenset(AUGMENT_KEYS) | frozenset(PATH_KEYS)


class _UsageError(Exception):
    def __init__(self, parser: argparse.ArgumentParser, message: str):
        super().__init__(message)
        self.parser = parser
        self.message = message


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage problems; route them to exit code 1 instead
    def error(self, message):
        raise _UsageError(self, message)


def load_cli_config(path) -> dict:
    """Strictly parsed JSON config; any key outside the schema fails."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"config {path}: {exc}") from exc
    if not isinstance(obj, dict):
        raise DataError(f"config {path} must hold a JSON object")
    unknown = sorted(set(obj) - CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return obj


def _merged(args, keys, file_config) -> dict:
    """Flag value if given, else config-file value, else absent."""
    out = {}
    for key in keys:
        flag = getattr(args, key, None)
        if flag is not None:
            out[key] = flag
        elif key in file_config:
            out[key] = file_config[key]
    return out


def _setting(args, name, file_config, default=None):
    flag = getattr(args, name, None)
    if flag is not None:
        return flag
    return file_config.get(name, default)


def _load_ids(path, n: int) -> list[str]:
    with open(path, "r", encoding="utf-8") as fh:
        ids = [line.strip() for line in fh if line.strip()]
    if len(ids) != n:
        raise DataError(f"{path} lists {len(ids)} ids for {n} image rows")
    if len(set(ids)) != len(ids):
        raise DataError(f"{path} contains duplicate image ids")
    return ids


def _load_data_dir(data_dir, c: int, l: int, seed: int):
    """Read captions.jsonl + images.emb (+ images.ids) into a corpus.

    The joint dimension is the image feature width; caption texts hash
    into it, synonym slots into ``c`` dims.
    """
    records = load_captions_jsonl(os.path.join(data_dir, "captions.jsonl"))
    feats = parse_emb_file(os.path.join(data_dir, "images.emb"))
    ids_path = os.path.join(data_dir, "images.ids")
    if os.path.exists(ids_path):
        ids = _load_ids(ids_path, feats.shape[0])
    else:
        ids = [str(i) for i in range(feats.shape[0])]
    corpus = build_corpus(records, ids, feats, b=feats.shape[1], c=c, l=l,
                          seed=seed)
    return records, corpus


def _builtin_corpus(seed: int, l: int) -> Corpus:
    """Small planted corpus so train/gradcheck run without input files."""
    cfg = BenchConfig(n_images=30, n_regions=2, dim=16, syn_dim=8,
                      caps_per_image=3, n_clusters=6, l=max(l, 0),
                      seeds=(seed,))
    return make_synthetic_corpus(cfg, seed)


def _print_json(payload: dict) -> None:
    print(json.dumps(payload, sort_keys=True, indent=1))


# ------------------------------------------------------------- subcommands

def _cmd_augment(args) -> int:
    file_config = load_cli_config(args.config) if args.config else {}
    cfg = AugmentConfig(**_merged(args, AUGMENT_KEYS, file_config))
    records = load_captions_jsonl(
        _require(args, "captions", file_config))
    source = None
    source_path = _setting(args, "source", file_config)
    if cfg.mode == "offline":
        if source_path is None:
            raise ConfigError("offline mode needs --source pointing at a "
                              "captions JSONL with synonyms")
        source = load_offline_synonyms(source_path)
    out_path = _require(args, "out", file_config)
    cache = _setting(args, "cache", file_config)
    augmented = augment_records(records, cfg, source=source, cache_dir=cache,
                                max_in_flight=args.max_in_flight)
    write_captions_jsonl(out_path, augmented)
    with_syn = sum(1 for rec in augmented if rec.synonyms)
    if args.json:
        _print_json({"captions": len(augmented), "with_synonyms": with_syn,
                     "out": str(out_path)})
    else:
        print(f"augmented {len(augmented)} captions "
              f"({with_syn} with synonyms) -> {out_path}")
    return 0


def _cmd_embed(args) -> int:
    records = load_captions_jsonl(args.captions)
    matrix = embed_texts([rec.text for rec in records], args.dim, args.seed)
    write_emb_file(args.out, matrix, binary=args.binary)
    if args.json:
        _print_json({"captions": len(records), "dim": args.dim,
                     "out": str(args.out)})
    else:
        print(f"embedded {len(records)} captions into {args.dim} dims "
              f"-> {args.out}")
    return 0


def _cmd_build_hg(args) -> int:
    feats = parse_emb_file(args.features)
    n, d = feats.shape
    # by default clamp the neighbor count the same way the adapter does,
    # with the feature width standing in for both dimension knobs
    k = args.k if args.k is not None else auto_k(d, 0, n)
    hg = knn_hyperedges(feats, k, tag=args.tag)
    save_hypergraph_json(args.out, hg)
    if args.json:
        _print_json({"vertices": hg.n_vertices, "edges": hg.n_edges,
                     "k": k, "out": str(args.out)})
    else:
        print(f"hypergraph with {hg.n_vertices} vertices, {hg.n_edges} "
              f"edges (k={k}) -> {args.out}")
    return 0


def _cmd_train(args) -> int:
    file_config = load_cli_config(args.config) if args.config else {}
    config = TrainConfig(**_merged(args, TRAIN_KEYS, file_config))
    data_dir = _setting(args, "data", file_config)
    out_dir = _setting(args, "out", file_config, default="oshg-run")
    c_dim = int(_setting(args, "c", file_config, default=16))
    if data_dir:
        _, corpus = _load_data_dir(data_dir, c=c_dim, l=config.l,
                                   seed=config.seed)
    else:
        corpus = _builtin_corpus(config.seed, config.l)
    result = train(config, corpus, out_dir=out_dir)
    last = result.epochs[-1]
    if args.json:
        _print_json({"epochs": len(result.epochs), "loss": last.loss,
                     "rsum": last.rsum, "grad_dev": last.grad_dev,
                     "alpha": last.alpha, "out": str(out_dir)})
    else:
        print(f"trained {len(result.epochs)} epochs: loss {last.loss:.4f}  "
              f"rsum {last.rsum:.1f}  alpha {last.alpha:.4f}")
        print(f"checkpoint and log -> {out_dir}")
    return 0


def _cmd_eval(args) -> int:
    if args.checkpoint:
        manifest, _ = load_checkpoint(args.checkpoint)
        for key in ("c", "l", "seed"):
            if key not in manifest:
                raise DataError(f"checkpoint manifest lacks field {key!r}")
        c_dim, l, seed = manifest["c"], manifest["l"], manifest["seed"]
    else:
        c_dim = args.c if args.c is not None else 16
        l = args.l if args.l is not None else 4
        seed = args.seed if args.seed is not None else 0
    _, corpus = _load_data_dir(args.data, c=c_dim, l=l, seed=seed)
    if args.checkpoint:
        model = load_model(args.checkpoint, corpus)
        t_final, v_final = model.embeddings()
        report = evaluate(v_final, t_final, corpus.cap_owner)
    else:
        report = evaluate(corpus.v_features, corpus.t_dataset,
                          corpus.cap_owner)
    if args.json:
        sys.stdout.write(report_json(report))
    else:
        print(format_report_table(report))
    return 0


def _cmd_entropy(args) -> int:
    records = load_captions_jsonl(args.captions)
    feats = parse_emb_file(args.images)
    alpha = None
    if args.alpha:
        if args.ids:
            ids = _load_ids(args.ids, feats.shape[0])
        else:
            ids = [str(i) for i in range(feats.shape[0])]
        row_of = {iid: i for i, iid in enumerate(ids)}
        try:
            owner = [row_of[rec.image_id] for rec in records]
        except KeyError as exc:
            raise DataError(f"caption references unknown image {exc}") from exc
        texts = embed_texts([rec.text for rec in records], feats.shape[1],
                            args.seed)
        alpha = nmi_alpha(texts, feats[owner], args.bins)
    report = modality_entropy_report(records, feats, bins=args.bins,
                                     alpha=alpha)
    sys.stdout.write(report_to_json(report, per_item=args.per_item))
    return 0


def _cmd_gradcheck(args) -> int:
    if args.data:
        _, corpus = _load_data_dir(args.data, c=16, l=2, seed=args.seed)
    else:
        corpus = _builtin_corpus(args.seed, l=2)
    model = Model(corpus, TrainConfig(seed=args.seed, l=2, kernel=args.kernel))
    batch = Rng(args.seed).spawn(11).choice(
        corpus.n_captions, min(48, corpus.n_captions))
    report = finite_diff_check(model, batch, h=args.h, tol=args.tol,
                               coords_per_block=args.coords, seed=args.seed)
    if args.json:
        _print_json(dataclasses.asdict(report))
    else:
        for name in sorted(report.block_errors):
            print(f"{name:14s} max rel err {report.block_errors[name]:.3e}  "
                  f"checked {report.checked[name]:3d}  "
                  f"excluded {report.excluded[name]:3d}")
        verdict = "PASSED" if report.passed else "FAILED"
        print(f"gradient check {verdict} (h={report.h:g}, tol={report.tol:g})")
    return 0 if report.passed else 3


def _cmd_bench(args) -> int:
    cfg = BenchConfig(
        n_images=args.images, n_regions=args.regions, dim=args.dim,
        syn_dim=args.syn_dim, caps_per_image=args.caps,
        n_clusters=args.clusters, l=args.l, epochs=args.epochs,
        batch=args.batch, lr=args.lr,
        seeds=tuple(int(s) for s in args.seeds.split(",") if s != ""),
    )
    report = run_bench(cfg)
    payload = bench_report_json(report)
    if args.json:
        _print_json(payload)
    else:
        print(f"RSUM adapter on : {payload['rsum_on']:7.1f}")
        print(f"RSUM adapter off: {payload['rsum_off']:7.1f}")
        print(f"RSUM gap        : {payload['rsum_gap']:+7.1f}")
        print(f"grad deviation  : beta=alpha {payload['dev_beta_alpha']:.3f}"
              f"  beta=0 {payload['dev_beta_zero']:.3f}")
        print(f"elapsed         : {payload['elapsed_s']:.1f}s over "
              f"{len(payload['seeds'])} seeds")
    return 0


def _require(args, name: str, file_config):
    value = _setting(args, name, file_config)
    if value is None:
        raise ConfigError(f"--{name} is required (flag or config file)")
    return value


# ------------------------------------------------------------------ parser

def _add_json_flag(parser):
    parser.add_argument("--json", action="store_true",
                        help="emit a JSON report instead of text")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="oshg",
                     description="hypergraph-adapter retrieval pipeline")
    parser.add_argument("--version", action="version",
                        version=f"oshg {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("augment", help="fill caption synonyms from a file "
                                       "or completion endpoint")
    p.add_argument("--captions", help="input captions JSONL")
    p.add_argument("--out", help="output captions JSONL")
    p.add_argument("--mode", choices=("offline", "http"), dest="mode")
    p.add_argument("--source", help="captions JSONL with synonyms "
                                    "(offline mode)")
    p.add_argument("--endpoint", dest="endpoint_url",
                   help="completion endpoint URL (http mode)")
    p.add_argument("--l", type=int, help="synonyms per caption")
    p.add_argument("--timeout-ms", type=int, dest="timeout_ms")
    p.add_argument("--retries", type=int)
    p.add_argument("--cache", help="response cache directory")
    p.add_argument("--max-in-flight", type=int, default=4)
    p.add_argument("--config", help="JSON config file")
    _add_json_flag(p)
    p.set_defaults(func=_cmd_augment)

    p = sub.add_parser("embed", help="hash-embed caption texts to an EMB file")
    p.add_argument("--captions", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--binary", action="store_true",
                   help="write the binary EMB1 variant")
    _add_json_flag(p)
    p.set_defaults(func=_cmd_embed)

    p = sub.add_parser("build-hg", help="build a KNN hypergraph from features")
    p.add_argument("--features", required=True, help="EMB feature file")
    p.add_argument("--out", required=True, help="output hypergraph JSON")
    p.add_argument("--k", type=int, help="neighbors per edge "
                                         "(default: feature width, clamped)")
    p.add_argument("--tag", default=TAG_ORIGINAL, help="edge block tag")
    _add_json_flag(p)
    p.set_defaults(func=_cmd_build_hg)

    p = sub.add_parser("train", help="train the adapters")
    p.add_argument("--data", help="directory with captions.jsonl + "
                                  "images.emb (default: built-in corpus)")
    p.add_argument("--out", help="output directory (default oshg-run)")
    p.add_argument("--seed", type=int, dest="seed")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--margin", type=float)
    p.add_argument("--alpha-mode", choices=("fixed", "nmi"), dest="alpha_mode")
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--l", type=int, help="synonym slots")
    p.add_argument("--knn-k", type=int, dest="knn_k")
    p.add_argument("--activation", choices=("relu", "identity"))
    p.add_argument("--init-gain", type=float, dest="init_gain")
    p.add_argument("--kernel",
                   choices=("hypergraph", "pairwise_graph",
                            "avg_pool", "max_pool"))
    p.add_argument("--c", type=int, help="synonym embedding width")
    p.add_argument("--config", help="JSON config file")
    _add_json_flag(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="retrieval recalls on a data directory")
    p.add_argument("--data", required=True,
                   help="directory with captions.jsonl + images.emb")
    p.add_argument("--checkpoint", help="apply a trained checkpoint")
    p.add_argument("--c", type=int)
    p.add_argument("--l", type=int)
    p.add_argument("--seed", type=int)
    _add_json_flag(p)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("entropy", help="modality entropy report (JSON)")
    p.add_argument("--captions", required=True)
    p.add_argument("--images", required=True, help="EMB feature file")
    p.add_argument("--bins", type=int, default=64)
    p.add_argument("--alpha", action="store_true",
                   help="also compute the NMI fusion ratio")
    p.add_argument("--ids", help="image id file for --alpha pairing")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--per-item", action="store_true", dest="per_item")
    p.set_defaults(func=_cmd_entropy)

    p = sub.add_parser("gradcheck", help="verify gradients against central "
                                         "differences")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--h", type=float, default=1e-6)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--coords", type=int, default=25,
                   help="coordinates sampled per parameter block")
    p.add_argument("--data", help="optional data directory")
    p.add_argument("--kernel", default="hypergraph",
                   choices=("hypergraph", "pairwise_graph",
                            "avg_pool", "max_pool"))
    _add_json_flag(p)
    p.set_defaults(func=_cmd_gradcheck)

    p = sub.add_parser("bench", help="synthetic end-to-end benchmark")
    p.add_argument("--images", type=int, default=200)
    p.add_argument("--regions", type=int, default=4)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--syn-dim", type=int, default=16, dest="syn_dim")
    p.add_argument("--caps", type=int, default=5,
                   help="captions per image")
    p.add_argument("--clusters", type=int, default=25)
    p.add_argument("--l", type=int, default=4)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--lr", type=float, default=0.002)
    p.add_argument("--seeds", default="0,1,2",
                   help="comma-separated seed list")
    _add_json_flag(p)
    p.set_defaults(func=_cmd_bench)

    return parser


def dispatch(argv) -> int:
    """Parse and run one command; return the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        exc.parser.print_usage(sys.stderr)
        print(f"oshg: error: {exc.message}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version print and leave
        return 0 if exc.code in (0, None) else 1
    if getattr(args, "func", None) is None:
        parser.print_help(sys.stderr)
        return 1
    try:
        return args.func(args)
    except (DataError, ConfigError, ShapeError) as exc:
        print(f"oshg: error: {exc}", file=sys.stderr)
        return 2
    except OshgError as exc:
        print(f"oshg: error: {exc}", file=sys.stderr)
        return 3
    except (OSError, ValueError) as exc:
        print(f"oshg: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - last resort
        print(f"oshg: unexpected error: {exc}", file=sys.stderr)
        return 3


def entrypoint() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    entrypoint()
