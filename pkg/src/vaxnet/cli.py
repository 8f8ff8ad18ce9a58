"""Command-line entry point: one subcommand per stage plus ``pipeline``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from . import pipeline as pl
from .community import write_partition, Partition
from .features import BOW, SEQ
from .ingest import SynthConfig, generate_synthetic, read_dataset, top_authors, write_dataset
from .models import MODEL_NAMES, TrainingDiverged, defaults_hash
from .models.config import load_defaults

log = logging.getLogger("vaxnet")


def _json_file(path) -> dict:
    if path is None:
        return {}
    try:
        raw = json.loads(Path(path).read_text("utf-8"))
    except OSError as exc:
        raise pl.ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise pl.ConfigError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise pl.ConfigError(f"{path} must hold a JSON object")
    return raw


def _print_info(info) -> None:
    if isinstance(info, dict):
        print(json.dumps(info, sort_keys=True))


# --- handlers -------------------------------------------------------------

def cmd_ingest(a):
    _print_info(pl.run_ingest(a.input, a.out, a.keywords, a.strict, not a.keep_retweet_only))


def cmd_synth(a):
    raw = _json_file(a.config)
    try:
        cfg = SynthConfig.from_dict(raw)
    except TypeError as exc:
        raise pl.ConfigError(f"synthetic config: {exc}") from exc
    data = generate_synthetic(cfg, a.seed)
    with pl._open_w(a.out) as fh:
        write_dataset(data, fh)
    planted = a.planted_out or f"{a.out}.planted.tsv"
    with pl._open_w(planted) as fh:
        write_partition(Partition(dict(data.planted)), fh)
    _print_info({"posts": len(data), "users": cfg.n_users, "planted": str(planted)})


def cmd_top_authors(a):
    data = read_dataset(a.input, strict=a.strict)
    for author, count in top_authors(data, a.n, a.by):
        print(f"{author}\t{count}")


def cmd_network(a):
    _print_info(pl.run_network(a.input, a.out, a.nodes_out, a.prune_wcc))


def cmd_communities(a):
    if a.summary_out and not a.dataset:
        raise pl.ConfigError("--summary-out needs --dataset")
    top_k = load_defaults()["community"]["top_k"]
    _print_info(pl.run_communities(a.edges, a.out, a.seed, a.resolution, a.nodes, a.dataset, a.summary_out, top_k))


def cmd_label(a):
    aid = a.antivaxx_id
    if aid != "suggest":
        try:
            aid = int(aid)
        except ValueError:
            raise pl.ConfigError("--antivaxx-id must be an integer or 'suggest'") from None
    _print_info(pl.run_label(a.partition, a.out, aid, a.summary))


def cmd_corpus(a):
    _print_info(pl.run_corpus(a.input, a.out))


def cmd_scatter(a):
    fmt = a.format or Path(a.out).suffix.lstrip(".") or "tsv"
    _print_info(pl.run_scatter(a.corpus, a.labels, a.out, fmt, a.min_count, a.ngram_max, a.stopwords,
                               a.dictionary))


def cmd_featurize(a):
    ft = load_defaults()["features"]
    _print_info(pl.run_featurize(
        a.corpus, a.labels, a.repr, a.out, a.seed,
        max_len=a.max_len or ft["max_len"], vocab_path=a.vocab, vocab_out=a.vocab_out,
        train_fraction=a.train_fraction or ft["train_fraction"],
        min_df=a.min_df or ft["min_df"], max_size=ft["max_size"],
    ))


def cmd_train(a):
    overrides = _json_file(a.config)
    for key in ("epochs", "learning_rate", "batch_size"):
        val = getattr(a, key)
        if val is not None:
            overrides[key] = val
    vocab = a.vocab or f"{a.data}.vocab.tsv"
    _print_info(pl.run_train(a.data, vocab, a.model, a.out, a.seed, overrides))


def cmd_score(a):
    _print_info(pl.run_score(a.model, a.corpus, a.out))


def cmd_evaluate(a):
    report = pl.run_evaluate(a.model, a.data, a.out, a.vocab)
    sys.stdout.write(report.to_markdown())


def cmd_report(a):
    report = pl.run_report(a.inputs, a.out)
    sys.stdout.write(report.to_markdown())


def cmd_pipeline(a):
    cfg = pl.PipelineConfig.load(a.config, a.seed, a.antivaxx_id)
    result = pl.run_pipeline(cfg, force=a.force)
    for name in result.ran:
        print(f"ran      {name}")
    for name in result.skipped:
        print(f"skipped  {name}")
    if result.error:
        print(f"error: {result.error}", file=sys.stderr)
    return result.status


# --- parser ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vaxnet", description=__doc__)
    p.add_argument("--version", action="version",
                   version=f"vaxnet {__version__} (defaults {defaults_hash()})")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", help="parse, keyword-filter and triage a post dump")
    s.add_argument("--input", required=True)
    s.add_argument("--keywords", help="keyword list (default: bundled list)")
    s.add_argument("--strict", action="store_true", help="fail on the first malformed line")
    s.add_argument("--keep-retweet-only", action="store_true", help="keep authors who never posted an original")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("synth", help="generate a planted-community dataset")
    s.add_argument("--config", help="JSON generator options")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--planted-out", help="planted communities TSV (default: <out>.planted.tsv)")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("top-authors", help="most active or most retweeted authors")
    s.add_argument("--input", required=True)
    s.add_argument("--n", type=int, default=50)
    s.add_argument("--by", choices=("originals", "retweets", "times_retweeted"), default="originals")
    s.add_argument("--strict", action="store_true")
    s.set_defaults(func=cmd_top_authors)

    s = sub.add_parser("network", help="build the retweet network")
    s.add_argument("--input", required=True)
    s.add_argument("--out", required=True, help="edge list TSV")
    s.add_argument("--nodes-out", help="node metadata TSV")
    s.add_argument("--prune-wcc", action="store_true", help="keep only the principal weak component")
    s.set_defaults(func=cmd_network)

    s = sub.add_parser("communities", help="Louvain communities of a network")
    s.add_argument("--edges", required=True)
    s.add_argument("--nodes")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--resolution", type=float, default=1.0)
    s.add_argument("--dataset", help="dataset used for community summaries")
    s.add_argument("--summary-out", help="JSON community summaries")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_communities)

    s = sub.add_parser("label", help="binary Antivaxx/Other labels from a partition")
    s.add_argument("--partition", required=True)
    s.add_argument("--antivaxx-id", default="suggest", help="community id, or 'suggest' (needs --summary)")
    s.add_argument("--summary")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_label)

    s = sub.add_parser("corpus", help="one token document per author")
    s.add_argument("--input", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_corpus)

    s = sub.add_parser("scatter", help="term-association scatter data")
    s.add_argument("--corpus", required=True)
    s.add_argument("--labels", required=True)
    s.add_argument("--min-count", type=int, default=load_defaults()["scatter"]["min_count"])
    s.add_argument("--ngram-max", type=int, default=2, choices=(1, 2))
    s.add_argument("--stopwords", help="stopword list (default: bundled list)")
    s.add_argument("--dictionary", help="wordlist path, or 'default' for the bundled English list")
    s.add_argument("--format", choices=("tsv", "json", "svg"))
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_scatter)

    s = sub.add_parser("featurize", help="balanced sample, split and vectorize")
    s.add_argument("--corpus", required=True)
    s.add_argument("--labels", required=True)
    s.add_argument("--repr", choices=(BOW, SEQ), required=True)
    s.add_argument("--max-len", type=int)
    s.add_argument("--min-df", type=int)
    s.add_argument("--train-fraction", type=float)
    s.add_argument("--vocab", help="reuse this vocabulary instead of building one")
    s.add_argument("--vocab-out", help="where a new vocabulary goes (default: <out>.vocab.tsv)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_featurize)

    s = sub.add_parser("train", help="train one classifier")
    s.add_argument("--data", required=True, help="featurized archive")
    s.add_argument("--vocab", help="vocabulary TSV (default: <data>.vocab.tsv)")
    s.add_argument("--model", choices=MODEL_NAMES, required=True)
    s.add_argument("--config", help="JSON training overrides")
    s.add_argument("--epochs", type=int)
    s.add_argument("--learning-rate", type=float)
    s.add_argument("--batch-size", type=int)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("score", help="score every author of a corpus")
    s.add_argument("--model", required=True)
    s.add_argument("--corpus", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_score)

    s = sub.add_parser("evaluate", help="accuracy and AUC on an archive's test split")
    s.add_argument("--model", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--vocab")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("report", help="merge evaluation reports into one table")
    s.add_argument("--inputs", nargs="+", required=True)
    s.add_argument("--out", required=True, help=".md for a table, .json for a merged report")
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("pipeline", help="run every stage from one config file")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--antivaxx-id")
    s.add_argument("--force", action="store_true", help="ignore the manifest and rerun every stage")
    s.set_defaults(func=cmd_pipeline)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        status = args.func(args)
    except pl.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return pl.EXIT_CONFIG
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return pl.EXIT_CONFIG
    except (TrainingDiverged, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return pl.EXIT_STAGE
    return status or pl.EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
