"""Command-line pipeline over the library.

Subcommands mirror the processing stages: ``simulate`` produces synthetic
latent corpora, ``train-encoder`` fits the bridge encoder on hidden states,
``estimate-sigma`` fits the diffusion coefficient, ``score`` computes
BBScores, ``shuffle-eval`` / ``sigma-sweep`` run the shuffle protocols,
``classify`` / ``detect-llm`` run the discrimination protocols, and
``trajectories`` profiles latent paths.

Configuration resolves in three layers (later wins): built-in defaults,
a TOML config file (``--config``, section per subcommand), explicit flags.
Every report embeds the resolved config and sha256 digests of its inputs;
identical config + seed produces byte-identical reports.

Exit codes: 0 ok, 1 usage, 2 data error, 3 numeric failure.
"""

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

import numpy as np

from . import bridge, classify, encoder, metrics, shuffles, storage
from .errors import BbscoreError, DataError, NumericError, StorageError


class UsageError(BbscoreError):
    """Bad flags or config; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _threads_default() -> int:
    raw = os.environ.get("BBSCORE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise UsageError(f"BBSCORE_THREADS must be an integer, got {raw!r}")


def map_ordered(fn, items, threads: int):
    """Apply ``fn`` across ``items`` with up to ``threads`` workers; results
    come back in input order so downstream reductions are order-fixed."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# flag declarations: (flag, argparse kwargs); defaults live in DEFAULTS so the
# config file can slot in between defaults and explicit flags
# ---------------------------------------------------------------------------

_COMMON = [
    ("--input", dict(help="input corpus file")),
    ("--output", dict(help="report/output path (stdout when omitted)")),
    ("--format", dict(choices=["bbx", "jsonl"], help="corpus file format")),
    ("--seed", dict(type=int, help="rng seed")),
    ("--threads", dict(type=int, help="worker cap (default: BBSCORE_THREADS or 1)")),
]

COMMANDS = {
    "simulate": _COMMON + [
        ("--docs", dict(type=int, help="number of documents")),
        ("--length", dict(help="rows per document: N or LO:HI (inclusive)")),
        ("--dim", dict(type=int, help="latent dimension")),
        ("--sigma-sq", dict(type=float, help="diffusion coefficient")),
        ("--noise-std", dict(type=float, help="interior observation noise std")),
        ("--endpoints", dict(choices=["zero", "gauss"], help="endpoint mode")),
        ("--endpoint-scale", dict(type=float, help="endpoint draw scale")),
    ],
    "train-encoder": _COMMON + [
        ("--epochs", dict(type=int)),
        ("--lr", dict(type=float, help="learning rate")),
        ("--momentum", dict(type=float)),
        ("--batch-size", dict(type=int)),
        ("--hidden-dim", dict(type=int)),
        ("--output-dim", dict(type=int)),
        ("--negatives", dict(choices=["in_batch", "cross_doc_only"])),
        ("--model-out", dict(help="where to write the trained encoder JSON")),
    ],
    "estimate-sigma": _COMMON + [
        ("--encoder", dict(help="encoder JSON; input is then hidden states")),
    ],
    "score": _COMMON + [
        ("--encoder", dict(help="encoder JSON; input is then hidden states")),
        ("--sigma-sq", dict(type=float, help="score at this coefficient")),
        ("--sigma-file", dict(help="estimate report from estimate-sigma")),
        ("--windows", dict(help="windowed-score half-widths, e.g. 1,2,4,8")),
    ],
    "shuffle-eval": _COMMON + [
        ("--encoder", dict(help="encoder JSON; input is then hidden states")),
        ("--kind", dict(choices=["global", "local"], help="shuffle family")),
        ("--b", dict(type=int, help="block size (global kind)")),
        ("--windows", dict(type=int, help="window count (local kind)")),
        ("--window-size", dict(type=int)),
        ("--n-shuffles", dict(type=int)),
        ("--sigma-sq", dict(type=float)),
        ("--sigma-file", dict(help="estimate report from estimate-sigma")),
        ("--manifest-out", dict(help="write the shuffle dataset manifest JSONL")),
    ],
    "sigma-sweep": _COMMON + [
        ("--encoder", dict(help="encoder JSON; input is then hidden states")),
        ("--kind", dict(choices=["global", "local"])),
        ("--b", dict(type=int)),
        ("--windows", dict(type=int)),
        ("--window-size", dict(type=int)),
        ("--n-shuffles", dict(type=int)),
        ("--grid", dict(help="sigma_sq grid: comma list or logspace:LO:HI:N")),
        ("--csv", dict(help="also write sigma,auc rows here")),
    ],
    "classify": _COMMON + [
        ("--mode", dict(choices=["train", "predict"])),
        ("--labeled", dict(action="append", metavar="LABEL=PATH",
                           help="training corpus for LABEL (repeatable)")),
        ("--model", dict(help="trained classifier JSON (predict mode)")),
        ("--model-out", dict(help="where to write the trained classifier")),
        ("--sigma-sq", dict(type=float)),
        ("--sigma-file", dict(help="estimate report from estimate-sigma")),
        ("--epochs", dict(type=int)),
        ("--lr", dict(type=float)),
        ("--momentum", dict(type=float)),
    ],
    "detect-llm": _COMMON + [
        ("--profile", dict(action="append", metavar="LABEL=PATH",
                           help="training corpus for source LABEL (repeatable)")),
        ("--test", dict(action="append", metavar="LABEL=PATH",
                        help="test corpus for LABEL (repeatable)")),
        ("--top-k", dict(type=int)),
        ("--per-document", dict(action="store_true",
                                help="singleton per-document distances")),
        ("--csv", dict(help="also write the normalized matrix here")),
    ],
    "trajectories": _COMMON + [
        ("--length", dict(type=int, help="profile length L")),
        ("--csv", dict(help="also write pos,dim,mean,var rows here")),
    ],
}

DEFAULTS = {
    "simulate": {"format": "bbx", "seed": 0, "docs": 100, "length": "64", "dim": 8,
                 "sigma_sq": 1.0, "noise_std": 0.0, "endpoints": "zero",
                 "endpoint_scale": 1.0},
    "train-encoder": {"format": "bbx", "seed": 0, "epochs": 10, "lr": 1e-4,
                      "momentum": 0.9, "batch_size": 32, "hidden_dim": 128,
                      "output_dim": 8, "negatives": "in_batch"},
    "estimate-sigma": {"format": "bbx"},
    "score": {"format": "bbx"},
    "shuffle-eval": {"format": "bbx", "seed": 0, "kind": "global", "b": 1,
                     "windows": 1, "window_size": 3, "n_shuffles": 20},
    "sigma-sweep": {"format": "bbx", "seed": 0, "kind": "global", "b": 1,
                    "windows": 1, "window_size": 3, "n_shuffles": 20,
                    "grid": "0.25,0.5,1.0,2.0,4.0"},
    "classify": {"format": "bbx", "seed": 0, "mode": "train", "epochs": 500,
                 "lr": 1e-3, "momentum": 0.9},
    "detect-llm": {"format": "bbx", "top_k": 2, "per_document": False},
    "trajectories": {"format": "bbx", "length": 32},
}


def build_parser() -> _Parser:
    parser = _Parser(prog="bbscore",
                     description="Brownian-bridge coherence scoring pipeline")
    parser.add_argument("--config", help="TOML config file (section per subcommand)")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    for name, flags in COMMANDS.items():
        p = sub.add_parser(name, argument_default=argparse.SUPPRESS)
        for flag, kwargs in flags:
            p.add_argument(flag, **kwargs)
    return parser


def resolve_config(command: str, namespace_dict: dict, config_path) -> dict:
    """defaults <- config file section <- explicit flags."""
    cfg = dict(DEFAULTS.get(command, {}))
    cfg.setdefault("threads", _threads_default())
    if config_path:
        try:
            with open(config_path, "rb") as fh:
                table = tomllib.load(fh)
        except FileNotFoundError:
            raise UsageError(f"config file not found: {config_path}")
        except tomllib.TOMLDecodeError as exc:
            raise UsageError(f"bad config file {config_path}: {exc}")
        section = table.get(command, {})
        if not isinstance(section, dict):
            raise UsageError(f"config section [{command}] must be a table")
        for key, value in section.items():
            cfg[key.replace("-", "_")] = value
    for key, value in namespace_dict.items():
        if key not in ("command", "config"):
            cfg[key] = value
    return cfg


def _require(cfg: dict, key: str):
    if cfg.get(key) in (None, ""):
        raise UsageError(f"missing required option --{key.replace('_', '-')}")
    return cfg[key]


def _parse_length(raw):
    if isinstance(raw, int):
        return raw
    text = str(raw)
    if ":" in text:
        lo, hi = text.split(":", 1)
        return (int(lo), int(hi))
    return int(text)


def _parse_grid(raw) -> list:
    if isinstance(raw, (list, tuple)):
        return [float(v) for v in raw]
    text = str(raw)
    if text.startswith("logspace:"):
        try:
            _, lo, hi, n = text.split(":")
            return list(np.geomspace(float(lo), float(hi), int(n)))
        except ValueError:
            raise UsageError(f"bad grid spec {text!r}; want logspace:LO:HI:N")
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"bad grid spec {text!r}")


def _parse_labeled(entries, flag: str) -> list:
    out = []
    for entry in entries:
        label, sep, path = str(entry).partition("=")
        if not sep or not label or not path:
            raise UsageError(f"--{flag} expects LABEL=PATH, got {entry!r}")
        out.append((label, path))
    return out


def _load_latents(cfg: dict, path, inputs: dict, artifacts: dict):
    """Read a corpus; with --encoder, treat it as hidden states and encode."""
    inputs[str(path)] = storage.sha256_file(path)
    enc_path = cfg.get("encoder")
    if enc_path:
        artifacts["encoder"] = storage.sha256_file(enc_path)
        enc = storage.load_encoder(enc_path)
        hidden = storage.read_corpus(path, cfg["format"], as_hidden=True)
        return map_ordered(lambda h: encoder.encode(enc, h), hidden, cfg["threads"])
    return storage.read_corpus(path, cfg["format"])


def _resolve_sigma(cfg: dict, corpus, inputs: dict):
    """Priority: --sigma-sq, --sigma-file, else estimate from the corpus."""
    if cfg.get("sigma_sq") is not None:
        value = float(cfg["sigma_sq"])
        if value <= 0:
            raise UsageError(f"--sigma-sq must be positive, got {value}")
        return value, "flag"
    if cfg.get("sigma_file"):
        path = cfg["sigma_file"]
        inputs[str(path)] = storage.sha256_file(path)
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        try:
            value = float(doc["sigma_sq"])
        except (KeyError, TypeError, ValueError):
            raise DataError(f"{path}: no usable 'sigma_sq' field")
        return max(value, bridge.SIGMA_FLOOR), "file"
    est = bridge.estimate_sigma_sq_corpus(corpus)
    return est.scoring_sigma_sq, "estimated"


def _emit(report: dict, cfg: dict) -> None:
    out = cfg.get("output")
    if out:
        storage.write_report(report, out)
    else:
        json.dump(report, sys.stdout, sort_keys=True, indent=2)
        sys.stdout.write("\n")


def _echo(cfg: dict) -> dict:
    return {k: v for k, v in sorted(cfg.items())}


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_simulate(cfg: dict) -> None:
    out = _require(cfg, "output")
    docs = bridge.simulate_corpus(
        n_docs=int(cfg["docs"]), length=_parse_length(cfg["length"]),
        dim=int(cfg["dim"]), sigma_sq=float(cfg["sigma_sq"]),
        seed=int(cfg["seed"]), endpoints=cfg["endpoints"],
        endpoint_scale=float(cfg["endpoint_scale"]),
        noise_std=float(cfg["noise_std"]))
    storage.write_corpus(docs, out, cfg["format"])
    print(f"wrote {len(docs)} simulated docs (dim={cfg['dim']}, "
          f"sigma_sq={cfg['sigma_sq']}) to {out}")


def cmd_train_encoder(cfg: dict) -> None:
    inputs, artifacts = {}, {}
    path = _require(cfg, "input")
    model_out = _require(cfg, "model_out")
    inputs[str(path)] = storage.sha256_file(path)
    corpus = storage.read_corpus(path, cfg["format"], as_hidden=True)
    train_cfg = encoder.TrainConfig(
        epochs=int(cfg["epochs"]), seed=int(cfg["seed"]),
        learning_rate=float(cfg["lr"]), momentum=float(cfg["momentum"]),
        batch_size=int(cfg["batch_size"]), hidden_dim=int(cfg["hidden_dim"]),
        output_dim=int(cfg["output_dim"]), negatives=cfg["negatives"])
    enc, trace = encoder.train_encoder(corpus, train_cfg)
    storage.save_encoder(enc, model_out)
    artifacts["encoder"] = storage.sha256_file(model_out)
    _emit({
        "task": "train-encoder",
        "loss_trace": trace,
        "final_loss": trace[-1] if trace else None,
        "encoder": {"input_dim": enc.input_dim, "hidden_dim": enc.hidden_dim,
                    "output_dim": enc.output_dim},
        "config": _echo(cfg), "inputs": inputs, "artifacts": artifacts,
    }, cfg)


def cmd_estimate_sigma(cfg: dict) -> None:
    inputs, artifacts = {}, {}
    corpus = _load_latents(cfg, _require(cfg, "input"), inputs, artifacts)
    est = bridge.estimate_sigma_sq_corpus(corpus)
    _emit({
        "task": "estimate-sigma",
        "sigma_sq": est.sigma_sq,
        "degenerate": est.degenerate,
        "n_docs": est.n_docs,
        "dim": est.dim,
        "per_doc": [[doc_id, value] for doc_id, value in est.per_doc],
        "config": _echo(cfg), "inputs": inputs, "artifacts": artifacts,
    }, cfg)


def _parse_window_list(raw) -> list:
    if isinstance(raw, (list, tuple)):
        widths = [int(w) for w in raw]
    else:
        try:
            widths = [int(w) for w in str(raw).split(",") if w.strip()]
        except ValueError:
            raise UsageError(f"bad --windows list {raw!r}")
    if any(w < 1 for w in widths):
        raise UsageError(f"window half-widths must be >= 1, got {widths}")
    return widths


def cmd_score(cfg: dict) -> None:
    inputs, artifacts = {}, {}
    corpus = _load_latents(cfg, _require(cfg, "input"), inputs, artifacts)
    sigma_sq, sigma_source = _resolve_sigma(cfg, corpus, inputs)
    widths = _parse_window_list(cfg["windows"]) if cfg.get("windows") else []

    def score_one(doc):
        entry = {"doc_id": doc.doc_id, "bbscore": bridge.bbscore(doc, sigma_sq)}
        if widths:
            entry["windowed"] = {
                str(w): (bridge.bbscore_windowed(doc, sigma_sq, w)
                         if doc.length >= 2 * w + 1 else None)
                for w in widths}
        return entry

    entries = map_ordered(score_one, corpus, cfg["threads"])
    _emit({
        "task": "score",
        "sigma_sq": sigma_sq,
        "sigma_source": sigma_source,
        "per_doc": entries,
        "aggregates": {"mean_bbscore": float(np.mean([e["bbscore"] for e in entries])),
                       "n_docs": len(entries)},
        "config": _echo(cfg), "inputs": inputs, "artifacts": artifacts,
    }, cfg)


def _build_dataset(cfg: dict, corpus) -> shuffles.ShuffleDataset:
    kind = {"global": "global_block", "local": "local_window"}[cfg["kind"]]
    param = int(cfg["b"]) if kind == "global_block" else int(cfg["windows"])
    return shuffles.make_shuffle_dataset(
        corpus, kind, param, n_shuffles=int(cfg["n_shuffles"]),
        seed=int(cfg["seed"]), window_size=int(cfg["window_size"]))


def cmd_shuffle_eval(cfg: dict) -> None:
    inputs, artifacts = {}, {}
    corpus = _load_latents(cfg, _require(cfg, "input"), inputs, artifacts)
    dataset = _build_dataset(cfg, corpus)
    if cfg.get("manifest_out"):
        shuffles.write_manifest(dataset, cfg["manifest_out"])
    sigma_sq, sigma_source = _resolve_sigma(cfg, corpus, inputs)
    by_id = {doc.doc_id: doc for doc in corpus}
    orig_score = {doc_id: score for doc_id, score in zip(
        by_id, bridge.score_corpus(list(by_id.values()), sigma_sq))}
    shuf_scores = bridge.score_corpus([p.shuffled for p in dataset.pairs], sigma_sq)
    pairs = [[p.doc_id, orig_score[p.doc_id], float(s)]
             for p, s in zip(dataset.pairs, shuf_scores)]
    represented = sorted({p.doc_id for p in dataset.pairs})
    report_auc = metrics.auc([row[2] for row in pairs],
                             [orig_score[d] for d in represented])
    acc = metrics.pairwise_accuracy([[row[1], row[2]] for row in pairs])
    _emit({
        "task": "shuffle-eval",
        "sigma_sq": sigma_sq,
        "sigma_source": sigma_source,
        "aggregates": {"auc": report_auc, "pairwise_accuracy": acc,
                       "n_pairs": len(pairs), "n_docs": len(represented)},
        "dataset": dataset.stats(),
        "pairs": pairs,
        "config": _echo(cfg), "inputs": inputs, "artifacts": artifacts,
    }, cfg)


def cmd_sigma_sweep(cfg: dict) -> None:
    inputs, artifacts = {}, {}
    corpus = _load_latents(cfg, _require(cfg, "input"), inputs, artifacts)
    dataset = _build_dataset(cfg, corpus)
    grid = _parse_grid(_require(cfg, "grid"))
    result = metrics.sigma_sweep(corpus, dataset, grid)
    if cfg.get("csv"):
        metrics.sweep_to_csv(result, cfg["csv"])
    _emit({
        "task": "sigma-sweep",
        "sweep": result.to_dict(),
        "dataset": dataset.stats(),
        "config": _echo(cfg), "inputs": inputs, "artifacts": artifacts,
    }, cfg)


def cmd_classify(cfg: dict) -> None:
    inputs, artifacts = {}, {}
    if cfg["mode"] == "train":
        labeled_specs = _parse_labeled(_require(cfg, "labeled"), "labeled")
        model_out = _require(cfg, "model_out")
        corpora = [(label, _load_latents(cfg, path, inputs, artifacts))
                   for label, path in labeled_specs]
        pooled = [doc for _, corpus in corpora for doc in corpus]
        sigma_sq, sigma_source = _resolve_sigma(cfg, pooled, inputs)
        examples = []
        for label, corpus in corpora:
            feats = map_ordered(
                lambda d: classify.extract_features(d, sigma_sq),
                corpus, cfg["threads"])
            examples.extend((f, label) for f in feats)
        model, trace = classify.train_mlp3(
            examples, classify.Mlp3Config(
                epochs=int(cfg["epochs"]), learning_rate=float(cfg["lr"]),
                momentum=float(cfg["momentum"]), seed=int(cfg["seed"])))
        storage.save_mlp3(model, model_out)
        artifacts["model"] = storage.sha256_file(model_out)
        correct = sum(
            model.labels[int(np.argmax(classify.predict(model, f)))] == label
            for f, label in examples)
        _emit({
            "task": "classify-train",
            "sigma_sq": sigma_sq,
            "sigma_source": sigma_source,
            "labels": model.labels,
            "n_examples": len(examples),
            "train_accuracy": correct / len(examples),
            "final_loss": trace[-1] if trace else None,
            "config": _echo(cfg), "inputs": inputs, "artifacts": artifacts,
        }, cfg)
        return
    model_path = _require(cfg, "model")
    artifacts["model"] = storage.sha256_file(model_path)
    model = storage.load_mlp3(model_path)
    corpus = _load_latents(cfg, _require(cfg, "input"), inputs, artifacts)
    sigma_sq, sigma_source = _resolve_sigma(cfg, corpus, inputs)
    feats = map_ordered(lambda d: classify.extract_features(d, sigma_sq),
                        corpus, cfg["threads"])
    per_doc = []
    for f in feats:
        probs = classify.predict(model, f)
        per_doc.append({"doc_id": f.doc_id,
                        "label": model.labels[int(np.argmax(probs))],
                        "probs": {lab: float(p)
                                  for lab, p in zip(model.labels, probs)}})
    _emit({
        "task": "classify-predict",
        "sigma_sq": sigma_sq,
        "sigma_source": sigma_source,
        "per_doc": per_doc,
        "config": _echo(cfg), "inputs": inputs, "artifacts": artifacts,
    }, cfg)


def cmd_detect_llm(cfg: dict) -> None:
    inputs, artifacts = {}, {}
    profile_specs = _parse_labeled(_require(cfg, "profile"), "profile")
    test_specs = _parse_labeled(_require(cfg, "test"), "test")
    profiles = [classify.SigmaProfile.from_corpus(
        label, _load_latents(cfg, path, inputs, artifacts))
        for label, path in profile_specs]
    tests = [(label, _load_latents(cfg, path, inputs, artifacts))
             for label, path in test_specs]
    report = classify.llm_detect(profiles, tests, top_k=int(cfg["top_k"]),
                                 per_document=bool(cfg.get("per_document")))
    if cfg.get("csv"):
        classify.detect_to_csv(report, cfg["csv"])
    _emit({
        "task": "detect-llm",
        "detection": report.to_dict(),
        "config": _echo(cfg), "inputs": inputs, "artifacts": artifacts,
    }, cfg)


def cmd_trajectories(cfg: dict) -> None:
    inputs, artifacts = {}, {}
    corpus = _load_latents(cfg, _require(cfg, "input"), inputs, artifacts)
    profile = metrics.trajectory_profile(corpus, int(cfg["length"]))
    if cfg.get("csv"):
        metrics.profile_to_csv(profile, cfg["csv"])
    _emit({
        "task": "trajectories",
        "profile": profile.to_dict(),
        "config": _echo(cfg), "inputs": inputs, "artifacts": artifacts,
    }, cfg)


HANDLERS = {
    "simulate": cmd_simulate,
    "train-encoder": cmd_train_encoder,
    "estimate-sigma": cmd_estimate_sigma,
    "score": cmd_score,
    "shuffle-eval": cmd_shuffle_eval,
    "sigma-sweep": cmd_sigma_sweep,
    "classify": cmd_classify,
    "detect-llm": cmd_detect_llm,
    "trajectories": cmd_trajectories,
}


def _error_report(code: int, exc: Exception) -> int:
    json.dump({"error": type(exc).__name__, "message": str(exc), "exit_code": code},
              sys.stderr, sort_keys=True)
    sys.stderr.write("\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        if not getattr(ns, "command", None):
            raise UsageError("no subcommand given (see --help)")
        cfg = resolve_config(ns.command, vars(ns), getattr(ns, "config", None))
        HANDLERS[ns.command](cfg)
        return 0
    except UsageError as exc:
        return _error_report(1, exc)
    except FileNotFoundError as exc:
        return _error_report(2, DataError(f"file not found: {exc.filename}"))
    except (StorageError, DataError) as exc:
        return _error_report(2, exc)
    except (NumericError, FloatingPointError) as exc:
        return _error_report(3, exc)


if __name__ == "__main__":
    sys.exit(main())
