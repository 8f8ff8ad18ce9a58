"""Stage functions over files, and the cached end-to-end pipeline runner.

Each stage reads and writes plain files so the CLI subcommands and the
pipeline share one code path. The runner hashes every stage's inputs and
parameters, skips stages whose key and outputs are unchanged, and records
everything in ``manifest.json``.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .community import (
    label_binary, louvain, read_labels, read_partition, summaries_from_json, summaries_to_json,
    suggest_antivaxx_community, summarize_communities, write_labels, write_partition,
)
from .corpus import build_documents, read_corpus, write_corpus
from .evaluation import EvalReport, build_report, evaluate_scores, merge_reports
from .features import (
    BOW, SEQ, LabeledSet, Vocabulary, balanced_sample, bow_matrix, build_vocabulary, encode_sequence, read_archive,
    train_test_split, vectorize_bow, vectorize_set, write_archive,
)
from .graph import build_network, principal_wcc, read_network, write_edges, write_nodes
from .ingest import (
    KeywordFilter, filter_by_keywords, filter_retweet_only_users, parse_dataset, read_dataset, write_dataset,
)
from .models import MODEL_NAMES, REPRESENTATION, default_config, defaults_hash, predict_scores, train_model
from .models.config import load_defaults
from .models.io import load_model, save_model
from .termscatter import (
    compute_coordinates, count_terms, default_dictionary, default_stopwords, export_scatter, load_wordlist,
)

log = logging.getLogger(__name__)

DATA_DIR_ENV = "VAXNET_DATA_DIR"
EXIT_OK, EXIT_CONFIG, EXIT_STAGE = 0, 2, 3
STAGES = ("ingest", "network", "communities", "label", "corpus", "scatter", "featurize", "train",
          "evaluate", "score")


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: str):
        self.stage = stage
        super().__init__(f"stage {stage!r} failed: {cause}")


def stage_seed(global_seed: int, stage: str) -> int:
    """Per-stage seed derived from the global seed and the stage name."""
    digest = hashlib.sha256(f"{global_seed}:{stage}".encode()).hexdigest()
    return int(digest[:8], 16) & 0x7FFFFFFF


def file_hash(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _open_w(path):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    return open(path, "w", encoding="utf-8", newline="\n")


# --- stages ---------------------------------------------------------------

def run_ingest(input_path, out, keywords_path=None, strict=False, drop_retweet_only=True) -> dict:
    data = read_dataset(input_path, strict=strict)
    kw = KeywordFilter.default() if keywords_path is None else KeywordFilter.from_lines(
        Path(keywords_path).read_text("utf-8").splitlines())
    n_in = len(data)
    data = filter_by_keywords(data, kw)
    n_kw = len(data)
    if drop_retweet_only:
        data = filter_retweet_only_users(data)
    with _open_w(out) as fh:
        write_dataset(data, fh)
    return {"read": n_in, "skipped": data.skipped, "after_keywords": n_kw, "kept": len(data)}


def _load_dataset(path):
    with open(path, encoding="utf-8") as fh:
        return parse_dataset(fh, strict=True, provenance=str(path))


def run_network(dataset_path, edges_out, nodes_out=None, prune_wcc=True) -> dict:
    g = build_network(_load_dataset(dataset_path))
    if prune_wcc:
        g = principal_wcc(g)
    with _open_w(edges_out) as fh:
        write_edges(g, fh)
    if nodes_out:
        with _open_w(nodes_out) as fh:
            write_nodes(g, fh)
    return {"nodes": len(g.nodes), "edges": len(g.edges), "weight": g.total_weight}


def _load_network(edges_path, nodes_path=None):
    with open(edges_path, encoding="utf-8") as ef:
        if nodes_path and Path(nodes_path).exists():
            with open(nodes_path, encoding="utf-8") as nf:
                return read_network(ef, nf)
        return read_network(ef)


def run_communities(edges_path, out, seed, resolution=1.0, nodes_path=None, dataset_path=None,
                    summary_out=None, top_k=10) -> dict:
    g = _load_network(edges_path, nodes_path)
    history: list[float] = []
    part = louvain(g, seed=seed, resolution=resolution, history=history)
    with _open_w(out) as fh:
        write_partition(part, fh)
    info = {"communities": part.community_count, "modularity": history[-1] if history else 0.0}
    if summary_out:
        if dataset_path is None:
            raise ValueError("community summaries need the dataset")
        summaries = summarize_communities(g, part, _load_dataset(dataset_path), top_k)
        with _open_w(summary_out) as fh:
            summaries_to_json(summaries, fh)
    return info


def run_label(partition_path, out, antivaxx_id="suggest", summary_path=None) -> dict:
    with open(partition_path, encoding="utf-8") as fh:
        part = read_partition(fh)
    if antivaxx_id == "suggest":
        if summary_path is None:
            raise ValueError("suggesting the antivaxx community needs the community summary")
        with open(summary_path, encoding="utf-8") as fh:
            antivaxx_id = suggest_antivaxx_community(summaries_from_json(fh))
    labels = label_binary(part, int(antivaxx_id))
    with _open_w(out) as fh:
        write_labels(labels, fh)
    return {"antivaxx_id": int(antivaxx_id), "positives": sum(v == "Antivaxx" for v in labels.values()),
            "labelled": len(labels)}


def run_corpus(dataset_path, out) -> dict:
    docs = build_documents(_load_dataset(dataset_path))
    with _open_w(out) as fh:
        write_corpus(docs, fh)
    return {"documents": len(docs)}


def _load_corpus(path):
    with open(path, encoding="utf-8") as fh:
        return read_corpus(fh)


def _load_labels(path):
    with open(path, encoding="utf-8") as fh:
        return read_labels(fh)


def run_scatter(corpus_path, labels_path, out, fmt="tsv", min_count=1, ngram_max=2,
                stopwords_path=None, dictionary=None) -> dict:
    """``dictionary`` is a wordlist path, ``"default"`` for the bundled list, or None."""
    stop = default_stopwords() if stopwords_path is None else load_wordlist(stopwords_path)
    if dictionary == "default":
        vocab = default_dictionary()
    else:
        vocab = None if dictionary is None else load_wordlist(dictionary)
    counts = count_terms(_load_corpus(corpus_path), _load_labels(labels_path), ngram_max, min_count, stop, vocab)
    stats = compute_coordinates(counts)
    export_scatter(stats, out, fmt)
    return {"terms": len(stats)}


def run_featurize(corpus_path, labels_path, representation, out, seed, max_len=256, vocab_path=None,
                  vocab_out=None, train_fraction=0.8, min_df=2, max_size=20000) -> dict:
    """Balanced sample, stratified split, vectorized archive.

    The vocabulary comes from ``vocab_path`` when given, otherwise it is
    built from the training split and written to ``vocab_out``.
    """
    data = balanced_sample(_load_corpus(corpus_path), _load_labels(labels_path), seed)
    train, test = train_test_split(data, train_fraction, seed)
    if vocab_path:
        with open(vocab_path, encoding="utf-8") as fh:
            vocab = Vocabulary.read(fh)
    else:
        vocab = build_vocabulary(train.samples, min_df, max_size)
        with _open_w(vocab_out or f"{out}.vocab.tsv") as fh:
            vocab.write(fh)
    parts = {"train": vectorize_set(train, vocab, representation, max_len),
             "test": vectorize_set(test, vocab, representation, max_len)}
    with _open_w(out) as fh:
        write_archive(parts, fh)
    return {"train": len(train), "test": len(test), "vocab_size": vocab.size}


def load_archive(path, vocab_path) -> tuple[dict[str, LabeledSet], Vocabulary]:
    with open(vocab_path, encoding="utf-8") as fh:
        vocab = Vocabulary.read(fh)
    with open(path, encoding="utf-8") as fh:
        parts = read_archive(fh, vocab.size)
    if not parts:
        raise ValueError(f"{path}: empty archive")
    return parts, vocab


def run_train(data_path, vocab_path, model_name, out, seed, overrides: dict | None = None) -> dict:
    parts, vocab = load_archive(data_path, vocab_path)
    train = parts.get("train") or parts.get("all")
    if train is None:
        raise ValueError(f"{data_path}: archive has no train split")
    cfg = default_config(model_name, seed, overrides)
    model = train_model(model_name, train, cfg)
    meta = {"model": model_name, "seed": seed, "n_train": len(train)}
    if train.representation == SEQ:
        meta["max_len"] = int(train.matrix().shape[1])
    save_model(model, out, vocab, meta)
    return meta


def _config_echo(model, meta) -> dict:
    cfg = model.config if hasattr(model, "config") else None
    echo = {"model": meta.get("model", model.family), "defaults_hash": defaults_hash()}
    if hasattr(cfg, "to_dict"):
        echo["train"] = cfg.to_dict()
    elif hasattr(model, "alpha"):
        echo["train"] = {"alpha": model.alpha}
    return echo


def run_evaluate(model_path, data_path, out, vocab_path=None) -> EvalReport:
    model, vocab, meta = load_model(model_path)
    if vocab is None and vocab_path is None:
        raise ValueError("model file carries no vocabulary; pass one explicitly")
    if vocab_path is not None:
        with open(vocab_path, encoding="utf-8") as fh:
            vocab = Vocabulary.read(fh)
    with open(data_path, encoding="utf-8") as fh:
        parts = read_archive(fh, vocab.size)
    test = parts.get("test") or parts.get("all")
    if test is None:
        raise ValueError(f"{data_path}: archive has no test split")
    name = meta.get("model", model.family)
    row = evaluate_scores(name, predict_scores(model, test), test.labels)
    report = build_report([row], meta.get("seed"), _config_echo(model, meta))
    with _open_w(out) as fh:
        report.write_json(fh)
    return report


def run_report(inputs, out) -> EvalReport:
    reports = []
    for p in inputs:
        with open(p, encoding="utf-8") as fh:
            reports.append(EvalReport.read_json(fh))
    merged = merge_reports(reports)
    text = merged.to_markdown()
    if str(out).endswith(".json"):
        with _open_w(out) as fh:
            merged.write_json(fh)
    else:
        with _open_w(out) as fh:
            fh.write(text)
    return merged


def run_score(model_path, corpus_path, out) -> dict:
    model, vocab, meta = load_model(model_path)
    if vocab is None:
        raise ValueError("model file carries no vocabulary")
    docs = _load_corpus(corpus_path)
    if model.representation == BOW:
        X = bow_matrix([vectorize_bow(d, vocab) for d in docs], vocab.size)
    else:
        max_len = int(meta.get("max_len", 256))
        X = np.asarray([encode_sequence(d, vocab, max_len) for d in docs], dtype=np.int64).reshape(len(docs), max_len)
    scores = predict_scores(model, X) if docs else np.zeros(0)
    with _open_w(out) as fh:
        fh.write("author_id\tscore\n")
        for d, s in zip(docs, scores.tolist()):
            fh.write(f"{d.author_id}\t{s!r}\n")
    return {"scored": len(docs)}


# --- configuration --------------------------------------------------------

_TOP_KEYS = {"seed", "input", "data_dir", "out_dir", "keywords", "strict", "drop_retweet_only", "community",
             "antivaxx_id", "scatter", "features", "models", "train"}


@dataclass
class PipelineConfig:
    input: Path
    out_dir: Path
    seed: int = 0
    keywords: Path | None = None
    strict: bool = False
    drop_retweet_only: bool = True
    community: dict = field(default_factory=dict)
    antivaxx_id: int | str = "suggest"
    scatter: dict = field(default_factory=dict)
    features: dict = field(default_factory=dict)
    models: tuple[str, ...] = MODEL_NAMES
    train: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path, seed: int | None = None, antivaxx_id=None) -> "PipelineConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text("utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        if seed is not None:
            raw["seed"] = seed
        if antivaxx_id is not None:
            raw["antivaxx_id"] = antivaxx_id
        return cls.from_dict(raw, path.resolve().parent)

    @classmethod
    def from_dict(cls, raw: dict, base: Path = Path(".")) -> "PipelineConfig":
        unknown = set(raw) - _TOP_KEYS
        if unknown:
            raise ConfigError(f"unknown config key(s): {sorted(unknown)}")
        if "input" not in raw:
            raise ConfigError("config needs an 'input' dataset path")
        data_dir = Path(os.environ.get(DATA_DIR_ENV) or base / raw.get("data_dir", "."))
        inp = data_dir / raw["input"]
        if not inp.is_file():
            raise ConfigError(f"input dataset not found: {inp}")
        kw = raw.get("keywords")
        kw = None if kw is None else data_dir / kw
        if kw is not None and not kw.is_file():
            raise ConfigError(f"keyword list not found: {kw}")
        models = tuple(raw.get("models", MODEL_NAMES))
        bad = [m for m in models if m not in MODEL_NAMES]
        if bad:
            raise ConfigError(f"unknown model(s) {bad}; choose from {list(MODEL_NAMES)}")
        aid = raw.get("antivaxx_id", "suggest")
        if aid != "suggest":
            try:
                aid = int(aid)
            except (TypeError, ValueError):
                raise ConfigError("antivaxx_id must be an integer or 'suggest'") from None
        try:
            seed = int(raw.get("seed", 0))
        except (TypeError, ValueError):
            raise ConfigError("seed must be an integer") from None
        for key in ("community", "scatter", "features", "train"):
            if not isinstance(raw.get(key, {}), dict):
                raise ConfigError(f"'{key}' must be an object")
        for name, ov in raw.get("train", {}).items():
            if name not in MODEL_NAMES:
                raise ConfigError(f"train overrides for unknown model {name!r}")
            try:
                default_config(name, 0, ov)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"train overrides for {name}: {exc}") from exc
        scatter = dict(raw.get("scatter", {}))
        for key in ("stopwords", "dictionary"):
            val = scatter.get(key)
            if val not in (None, "default"):
                scatter[key] = str(data_dir / val)
        return cls(
            input=inp,
            out_dir=base / raw.get("out_dir", "run"),
            seed=seed,
            keywords=kw,
            strict=bool(raw.get("strict", False)),
            drop_retweet_only=bool(raw.get("drop_retweet_only", True)),
            community=dict(raw.get("community", {})),
            antivaxx_id=aid,
            scatter=scatter,
            features=dict(raw.get("features", {})),
            models=models,
            train=dict(raw.get("train", {})),
            raw=raw,
        )


# --- runner ---------------------------------------------------------------

@dataclass
class Stage:
    name: str
    inputs: list[Path]
    outputs: list[Path]
    params: dict
    action: Callable[[], object]


def _stages(cfg: PipelineConfig) -> list[Stage]:
    d = load_defaults()
    o = cfg.out_dir
    comm = {"resolution": 1.0, "top_k": 10, **cfg.community}
    seed_comm = int(comm.pop("seed", stage_seed(cfg.seed, "communities")))
    sc = {"min_count": d["scatter"]["min_count"], "ngram_max": d["scatter"]["ngram_max"],
          "formats": ["tsv", "svg"], "stopwords": None, "dictionary": None, **cfg.scatter}
    ft = {**d["features"], **cfg.features}
    seed_feat = stage_seed(cfg.seed, "featurize")
    p = {
        "dataset": o / "dataset.jsonl", "edges": o / "edges.tsv", "nodes": o / "nodes.tsv",
        "partition": o / "partition.tsv", "summary": o / "communities.json", "labels": o / "labels.tsv",
        "corpus": o / "corpus.jsonl", "vocab": o / "vocab.tsv", BOW: o / "bow.jsonl", SEQ: o / "seq.jsonl",
    }
    scatter_out = [o / f"scatter.{f}" for f in sc["formats"]]

    def scatter_all():
        for f, path in zip(sc["formats"], scatter_out):
            run_scatter(p["corpus"], p["labels"], path, f, sc["min_count"], sc["ngram_max"], sc["stopwords"],
                        sc["dictionary"])

    def featurize_all():
        kw = dict(train_fraction=ft["train_fraction"], min_df=ft["min_df"], max_size=ft["max_size"],
                  max_len=ft["max_len"])
        run_featurize(p["corpus"], p["labels"], BOW, p[BOW], seed_feat, vocab_out=p["vocab"], **kw)
        run_featurize(p["corpus"], p["labels"], SEQ, p[SEQ], seed_feat, vocab_path=p["vocab"], **kw)

    model_paths = {m: o / "models" / f"{m}.json" for m in cfg.models}
    report_paths = {m: o / "reports" / f"{m}.json" for m in cfg.models}
    score_paths = {m: o / "scores" / f"{m}.tsv" for m in cfg.models}
    train_seeds = {m: stage_seed(cfg.seed, f"train:{m}") for m in cfg.models}

    def train_all():
        for m in cfg.models:
            run_train(p[REPRESENTATION[m]], p["vocab"], m, model_paths[m], train_seeds[m], cfg.train.get(m))

    def evaluate_all():
        for m in cfg.models:
            run_evaluate(model_paths[m], p[REPRESENTATION[m]], report_paths[m])
        run_report([report_paths[m] for m in cfg.models], o / "report.md")
        run_report([report_paths[m] for m in cfg.models], o / "report.json")

    def score_all():
        for m in cfg.models:
            run_score(model_paths[m], p["corpus"], score_paths[m])

    keywords = [cfg.keywords] if cfg.keywords else []
    return [
        Stage("ingest", [cfg.input, *keywords], [p["dataset"]],
              {"strict": cfg.strict, "drop_retweet_only": cfg.drop_retweet_only},
              lambda: run_ingest(cfg.input, p["dataset"], cfg.keywords, cfg.strict, cfg.drop_retweet_only)),
        Stage("network", [p["dataset"]], [p["edges"], p["nodes"]], {"prune_wcc": True},
              lambda: run_network(p["dataset"], p["edges"], p["nodes"], True)),
        Stage("communities", [p["edges"], p["nodes"], p["dataset"]], [p["partition"], p["summary"]],
              {"seed": seed_comm, **comm},
              lambda: run_communities(p["edges"], p["partition"], seed_comm, comm["resolution"], p["nodes"],
                                      p["dataset"], p["summary"], comm["top_k"])),
        Stage("label", [p["partition"], p["summary"]], [p["labels"]], {"antivaxx_id": cfg.antivaxx_id},
              lambda: run_label(p["partition"], p["labels"], cfg.antivaxx_id, p["summary"])),
        Stage("corpus", [p["dataset"]], [p["corpus"]], {}, lambda: run_corpus(p["dataset"], p["corpus"])),
        Stage("scatter", [p["corpus"], p["labels"]], scatter_out, sc, scatter_all),
        Stage("featurize", [p["corpus"], p["labels"]], [p["vocab"], p[BOW], p[SEQ]],
              {"seed": seed_feat, **ft}, featurize_all),
        Stage("train", [p["vocab"], p[BOW], p[SEQ]], list(model_paths.values()),
              {"seeds": train_seeds, "overrides": cfg.train, "defaults_hash": defaults_hash()}, train_all),
        Stage("evaluate", [p["vocab"], p[BOW], p[SEQ], *model_paths.values()],
              [*report_paths.values(), o / "report.md", o / "report.json"], {}, evaluate_all),
        Stage("score", [p["corpus"], *model_paths.values()], list(score_paths.values()), {}, score_all),
    ]


def _rel(pth: Path, root: Path) -> str:
    try:
        return str(Path(pth).relative_to(root))
    except ValueError:
        return str(pth)


def _stage_key(stage: Stage, root: Path) -> tuple[str, dict]:
    inputs = {_rel(pth, root): file_hash(pth) for pth in stage.inputs}
    blob = json.dumps({"params": stage.params, "inputs": inputs, "version": __version__},
                      sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest(), inputs


def _write_manifest(path: Path, manifest: dict) -> None:
    with _open_w(path) as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")


@dataclass
class PipelineResult:
    status: int
    ran: list[str]
    skipped: list[str]
    manifest: dict
    error: str | None = None


def run_pipeline(cfg: PipelineConfig, force: bool = False) -> PipelineResult:
    """Run every stage in order, reusing outputs whose inputs are unchanged."""
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    root = cfg.out_dir
    manifest_path = root / "manifest.json"
    previous: dict = {}
    if manifest_path.exists() and not force:
        try:
            previous = json.loads(manifest_path.read_text("utf-8")).get("stages", {})
        except (json.JSONDecodeError, AttributeError):
            previous = {}
    manifest = {
        "format": "vaxnet-manifest",
        "vaxnet_version": __version__,
        "defaults_hash": defaults_hash(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "seed": cfg.seed,
        "config": cfg.raw,
        "started": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "stages": {},
    }
    ran, skipped = [], []
    for stage in _stages(cfg):
        entry: dict = {"params": stage.params}
        manifest["stages"][stage.name] = entry
        try:
            key, inputs = _stage_key(stage, root)
            entry.update(key=key, inputs=inputs)
            old = previous.get(stage.name, {})
            if old.get("key") == key and old.get("status") in ("ok", "skipped"):
                recorded = old.get("outputs", {})
                present = all(pth.exists() for pth in stage.outputs)
                if present and set(recorded) == {_rel(pth, root) for pth in stage.outputs}:
                    changed = [pth for pth, h in recorded.items() if file_hash(root / pth) != h]
                    if changed:
                        raise StageError(stage.name, f"output {changed[0]} was modified after it was written; "
                                                     "restore it or rerun with --force")
                    entry.update(status="skipped", outputs=recorded)
                    skipped.append(stage.name)
                    log.info("%s: unchanged, skipped", stage.name)
                    continue
            log.info("%s: running", stage.name)
            info = stage.action()
        except StageError as exc:
            entry["status"] = "failed"
            entry["error"] = str(exc)
            _write_manifest(manifest_path, manifest)
            return PipelineResult(EXIT_STAGE, ran, skipped, manifest, str(exc))
        except Exception as exc:  # noqa: BLE001 - any stage failure aborts with its name
            err = StageError(stage.name, f"{type(exc).__name__}: {exc}")
            entry["status"] = "failed"
            entry["error"] = str(err)
            entry["partial_outputs"] = [_rel(pth, root) for pth in stage.outputs if pth.exists()]
            _write_manifest(manifest_path, manifest)
            return PipelineResult(EXIT_STAGE, ran, skipped, manifest, str(err))
        entry.update(status="ok", outputs={_rel(pth, root): file_hash(pth) for pth in stage.outputs})
        if isinstance(info, dict):
            entry["info"] = info
        ran.append(stage.name)
    _write_manifest(manifest_path, manifest)
    return PipelineResult(EXIT_OK, ran, skipped, manifest)
