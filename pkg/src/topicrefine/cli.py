"""Command line entry point: ``topicrefine {lda,refine,eval,classify,pipeline}``.

Exit codes: 0 success, 1 usage or configuration error, 2 data/format error,
3 backend failure. Errors also print an ``error_code: <code>`` line on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from topicrefine import __version__
from topicrefine._io import atomic_write_json, atomic_write_text, dump_json
from topicrefine.classify import load_vector_rows, run_classification
from topicrefine.corpus import (
    PreprocessConfig,
    load_vocabulary,
    preprocess_corpus,
    read_corpus_file,
    save_vocabulary,
    tokenize,
)
from topicrefine.embeddings import load_embeddings
from topicrefine.errors import ConfigError, TopicRefineError
from topicrefine.lda import fit_gibbs_lda, top_words
from topicrefine.llm import LlmClient, LlmConfig, MockOracle
from topicrefine.metrics import (
    DEFAULT_WINDOW,
    EPSILON,
    build_cooccurrence,
    compute_quality,
    delta_report,
    format_per_word_csv,
    render_delta_markdown,
)
from topicrefine.refine import RefineOptions, refine_topic_set
from topicrefine.topics import format_topic_set, load_topic_set

logger = logging.getLogger("topicrefine")

SUBCOMMANDS = ("lda", "refine", "eval", "classify", "pipeline")
DEFAULT_SEED = 42
REQUEST_FRAMING = "whole prompt sent as a single user message"


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    subcommand: str = "pipeline"
    inputs: dict = field(default_factory=lambda: {
        "corpus": None, "labels": None, "topics": None, "baseline": None, "vocab": None,
        "embeddings": None, "reference": None, "doc_embeddings": None, "topic_embeddings": None,
    })
    llm: dict = field(default_factory=lambda: asdict(LlmConfig()))
    preprocess: dict = field(default_factory=lambda: PreprocessConfig().to_dict())
    lda: dict = field(default_factory=lambda: {
        "K": 20, "alpha": None, "beta": 0.01, "iterations": 1000, "n_words": 10})
    refine: dict = field(default_factory=lambda: {
        "context": "original", "mock_threshold": 0.5, "parse_retries": 2})
    metrics: dict = field(default_factory=lambda: {"window": DEFAULT_WINDOW, "epsilon": EPSILON})
    classify: dict = field(default_factory=lambda: {"train_fraction": 0.8})
    seed: int = DEFAULT_SEED
    jobs: int = field(default_factory=lambda: os.cpu_count() or 1)
    deterministic: bool = False

    def to_dict(self) -> dict:
        return asdict(self)

    def merge(self, overrides: dict) -> None:
        for key, value in overrides.items():
            if key not in self.__dataclass_fields__:
                raise ConfigError(f"unknown config key {key!r}")
            current = getattr(self, key)
            if isinstance(current, dict):
                if not isinstance(value, dict):
                    raise ConfigError(f"config key {key!r} must be an object")
                unknown = set(value) - set(current)
                if unknown:
                    raise ConfigError(f"unknown keys under {key!r}: {sorted(unknown)}")
                current.update(value)
            else:
                setattr(self, key, value)

    def llm_config(self) -> LlmConfig:
        return LlmConfig(**self.llm)

    def preprocess_config(self) -> PreprocessConfig:
        return PreprocessConfig.from_dict(self.preprocess)

    def require(self, *names: str) -> None:
        missing = [n for n in names if not self.inputs.get(n)]
        if missing:
            raise UsageError(f"{self.subcommand}: missing required input(s): "
                             + ", ".join("--" + n.replace("_", "-") for n in missing))


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _add_common(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--config", default=S, help="JSON file mirroring the run configuration")
    p.add_argument("--out", default=S, help="output directory")
    p.add_argument("--seed", type=int, default=S, dest="seed")
    p.add_argument("--jobs", type=int, default=S, dest="jobs",
                   help="worker threads for topic-level parallelism")
    p.add_argument("--deterministic", action="store_true", default=S,
                   help="single worker and no wall-clock timestamps in outputs")
    p.add_argument("--log-level", default="WARNING", help=argparse.SUPPRESS)


def _add_preprocess(p):
    S = argparse.SUPPRESS
    p.add_argument("--stopwords", default=S, dest="preprocess.stopwords_path")
    p.add_argument("--min-doc-freq", type=int, default=S, dest="preprocess.min_doc_freq")
    p.add_argument("--max-doc-freq-ratio", type=float, default=S, dest="preprocess.max_doc_freq_ratio")
    p.add_argument("--min-token-length", type=int, default=S, dest="preprocess.min_token_length")


def _add_lda(p):
    S = argparse.SUPPRESS
    p.add_argument("--k", "--num-topics", type=int, default=S, dest="lda.K")
    p.add_argument("--alpha", type=float, default=S, dest="lda.alpha")
    p.add_argument("--beta", type=float, default=S, dest="lda.beta")
    p.add_argument("--iterations", type=int, default=S, dest="lda.iterations")
    p.add_argument("--n-words", type=int, default=S, dest="lda.n_words")


def _add_llm(p):
    S = argparse.SUPPRESS
    p.add_argument("--backend", choices=("remote", "mock"), default=S, dest="llm.backend")
    p.add_argument("--model", default=S, dest="llm.model_id")
    p.add_argument("--temperature", type=float, default=S, dest="llm.temperature")
    p.add_argument("--max-retries", type=int, default=S, dest="llm.max_retries")
    p.add_argument("--timeout", type=float, default=S, dest="llm.timeout")
    p.add_argument("--cache-dir", default=S, dest="llm.cache_dir")
    p.add_argument("--context", choices=("original", "refined"), default=S, dest="refine.context")
    p.add_argument("--mock-threshold", type=float, default=S, dest="refine.mock_threshold")


def _add_metrics(p):
    S = argparse.SUPPRESS
    p.add_argument("--window", type=int, default=S, dest="metrics.window")
    p.add_argument("--reference", default=S, dest="inputs.reference")


def _input(p, name, help=None):
    p.add_argument("--" + name.replace("_", "-"), default=argparse.SUPPRESS,
                   dest="inputs." + name, help=help)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="topicrefine", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"topicrefine {__version__}")
    sub = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")
    sub.required = True

    p = sub.add_parser("lda", help="fit collapsed-Gibbs LDA and write a topic-set file")
    _input(p, "corpus"); _input(p, "labels")
    _add_preprocess(p); _add_lda(p); _add_common(p)

    p = sub.add_parser("refine", help="refine a topic set with an LLM (or the mock oracle)")
    _input(p, "topics"); _input(p, "vocab"); _input(p, "embeddings")
    _add_llm(p); _add_common(p)

    p = sub.add_parser("eval", help="NPMI/UCI coherence, S and D, per-word NPMI")
    _input(p, "topics"); _input(p, "baseline"); _input(p, "embeddings")
    _add_metrics(p); _add_preprocess(p); _add_common(p)

    p = sub.add_parser("classify", help="topic-distribution features + linear SVM")
    _input(p, "corpus"); _input(p, "labels"); _input(p, "topics"); _input(p, "embeddings")
    _input(p, "doc_embeddings", "one row of floats per corpus line")
    _input(p, "topic_embeddings", "one row of floats per topic (pairs with --doc-embeddings)")
    _add_preprocess(p); _add_common(p)

    p = sub.add_parser("pipeline", help="lda -> refine -> eval -> classify")
    _input(p, "corpus"); _input(p, "labels"); _input(p, "embeddings")
    _add_preprocess(p); _add_lda(p); _add_llm(p); _add_metrics(p); _add_common(p)
    return parser


def resolve_config(ns: argparse.Namespace) -> tuple[RunConfig, Path]:
    """Defaults, then the config file, then explicit flags."""
    cfg = RunConfig(subcommand=ns.subcommand)
    args = vars(ns)
    if "config" in args:
        try:
            data = json.loads(Path(args["config"]).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from None
        data.pop("subcommand", None)
        cfg.merge(data)
    nested: dict = {}
    for key, value in args.items():
        if key in ("subcommand", "config", "out", "log_level"):
            continue
        section, _, name = key.rpartition(".")
        if section:
            nested.setdefault(section, {})[name] = value
        else:
            nested[name] = value
    cfg.merge(nested)
    if cfg.deterministic:
        cfg.jobs = 1
    if "out" not in args:
        raise UsageError("--out is required")
    return cfg, Path(args["out"])


# -- stages -----------------------------------------------------------------------


class Run:
    """Collects stage summaries and writes ``config.json`` / ``manifest.json``."""

    def __init__(self, cfg: RunConfig, out: Path):
        self.cfg = cfg
        self.out = out
        self.stages: dict = {}
        self.token_usage: dict | None = None
        self.started = self._now()

    def _now(self):
        if self.cfg.deterministic:
            return None
        return datetime.now(timezone.utc).isoformat(timespec="seconds")

    def finish(self) -> dict:
        snapshot = self.cfg.to_dict()
        atomic_write_text(self.out / "config.json", dump_json(snapshot))
        manifest = {
            "version": __version__,
            "subcommand": self.cfg.subcommand,
            "config": snapshot,
            "started_at": self.started,
            "finished_at": self._now(),
            "stages": self.stages,
            "token_usage": self.token_usage,
        }
        atomic_write_json(self.out / "manifest.json", manifest)
        return manifest


def _corpus(cfg: RunConfig):
    cfg.require("corpus")
    raw = read_corpus_file(cfg.inputs["corpus"], cfg.inputs.get("labels"))
    return preprocess_corpus(raw, cfg.preprocess_config())


def stage_lda(cfg: RunConfig, out: Path, corpus=None):
    corpus = corpus or _corpus(cfg)
    p = cfg.lda
    state = fit_gibbs_lda(corpus, p["K"], p["alpha"], p["beta"], p["iterations"], cfg.seed)
    topics = top_words(state, p["n_words"])
    atomic_write_text(out / "topics.txt", format_topic_set(topics))
    atomic_write_text(out / "vocab.txt", save_vocabulary(corpus.vocabulary))
    meta = {
        "K": state.K, "alpha": state.alpha, "beta": state.beta, "iterations": state.iterations,
        "seed": state.rng_seed, "n_words": p["n_words"],
        "corpus": asdict(corpus.stats), "vocabulary_size": len(corpus.vocabulary),
        "log_likelihood": [{"sweep": it, "value": ll} for it, ll in state.log_likelihood],
    }
    atomic_write_json(out / "lda_run.json", meta)
    summary = {"K": state.K, "N": topics.N, "documents": corpus.stats.doc_count,
               "vocabulary_size": len(corpus.vocabulary),
               "final_log_likelihood": state.log_likelihood[-1][1] if state.log_likelihood else None}
    return corpus, topics, summary


def _llm_client(cfg: RunConfig, vocab, store) -> LlmClient:
    llm_cfg = cfg.llm_config()
    oracle = None
    if llm_cfg.backend == "mock":
        oracle = MockOracle(store, vocab, cfg.refine["mock_threshold"])
    return LlmClient(llm_cfg, oracle=oracle)


def stage_refine(cfg: RunConfig, out: Path, topics=None, vocab=None, store=None):
    if topics is None:
        cfg.require("topics", "vocab", "embeddings")
        topics = load_topic_set(cfg.inputs["topics"])
        vocab = load_vocabulary(cfg.inputs["vocab"])
    if store is None:
        cfg.require("embeddings")
        store = load_embeddings(cfg.inputs["embeddings"], restrict_to=set(vocab) | topics.words())
    client = _llm_client(cfg, vocab, store)
    options = RefineOptions(context=cfg.refine["context"],
                            parse_retries=cfg.refine["parse_retries"], jobs=cfg.jobs)
    try:
        result = refine_topic_set(topics, vocab, store, client, options)
    finally:
        client.close()
    atomic_write_text(out / "topics.txt", format_topic_set(result.topics))
    atomic_write_text(out / "records.jsonl", "".join(
        json.dumps(r.to_dict(), ensure_ascii=False, sort_keys=True) + "\n" for r in result.records))
    summary = dict(result.summary)
    summary["model_id"] = client.config.model_id
    summary["backend"] = client.config.backend
    summary["temperature"] = client.config.temperature
    summary["request_framing"] = REQUEST_FRAMING
    summary["backend_calls"] = client.stats.calls
    summary["transport_retries"] = client.stats.retries
    summary["cache_hits"] = client.stats.cache_hits
    atomic_write_json(out / "summary.json", summary)
    return result, summary


def token_usage(records, n_topics: int) -> dict:
    p = sum(r.prompt_tokens for r in records)
    c = sum(r.completion_tokens for r in records)
    return {
        "prompt_tokens_total": p,
        "completion_tokens_total": c,
        "topics": n_topics,
        "avg_prompt_tokens_per_topic": p / n_topics if n_topics else 0.0,
        "avg_completion_tokens_per_topic": c / n_topics if n_topics else 0.0,
    }


def _reference_docs(cfg: RunConfig, path: str):
    pp = cfg.preprocess_config()
    stop = pp.load_stopwords()
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [tokenize(line, pp.lowercase, pp.min_token_length, stop) for line in lines]


def stage_eval(cfg: RunConfig, out: Path, topics=None, baseline=None, store=None, reference=None):
    if topics is None:
        cfg.require("topics", "embeddings", "reference")
        topics = load_topic_set(cfg.inputs["topics"])
        if cfg.inputs.get("baseline"):
            baseline = load_topic_set(cfg.inputs["baseline"])
    words = topics.words() | (baseline.words() if baseline is not None else set())
    if store is None:
        cfg.require("embeddings")
        store = load_embeddings(cfg.inputs["embeddings"], restrict_to=words)
    if reference is None:
        cfg.require("reference")
        reference = _reference_docs(cfg, cfg.inputs["reference"])
    stats = build_cooccurrence(reference, cfg.metrics["window"], words, cfg.metrics["epsilon"])
    report = compute_quality(topics, stats, store)
    atomic_write_json(out / "quality.json", report.to_dict())
    atomic_write_text(out / "per_word_npmi.csv", format_per_word_csv(report.per_word_npmi))
    summary = {"aggregate": report.aggregate, "window": cfg.metrics["window"],
               "reference_windows": stats.total_windows}
    if baseline is not None:
        before = compute_quality(baseline, stats, store)
        delta = delta_report(before, report)
        atomic_write_json(out / "baseline_quality.json", before.to_dict())
        atomic_write_text(out / "per_word_npmi_baseline.csv", format_per_word_csv(before.per_word_npmi))
        atomic_write_json(out / "delta.json", delta)
        atomic_write_text(out / "delta.md", render_delta_markdown(delta))
        summary["delta"] = {m: row["delta"] for m, row in delta.items()}
    return report, summary


def stage_classify(cfg: RunConfig, out: Path, corpus=None, topic_sets=None, store=None):
    if corpus is None:
        cfg.require("corpus", "labels", "topics", "embeddings")
        corpus = _corpus(cfg)
        topic_sets = {"topics": load_topic_set(cfg.inputs["topics"])}
    if store is None:
        words = set(corpus.vocabulary).union(*(t.words() for t in topic_sets.values()))
        store = load_embeddings(cfg.inputs["embeddings"], restrict_to=words)
    doc_emb = topic_emb = None
    if cfg.inputs.get("doc_embeddings"):
        doc_emb = load_vector_rows(cfg.inputs["doc_embeddings"])
    if cfg.inputs.get("topic_embeddings"):
        topic_emb = load_vector_rows(cfg.inputs["topic_embeddings"])
    results = {}
    for name, topics in topic_sets.items():
        outcome = run_classification(corpus, topics, store, cfg.seed,
                                     cfg.classify["train_fraction"], doc_emb, topic_emb)
        results[name] = outcome.to_dict()
    atomic_write_json(out / "classification.json", results)
    return results


# -- subcommands ------------------------------------------------------------------


def cmd_lda(cfg, out):
    run = Run(cfg, out)
    _, _, run.stages["lda"] = stage_lda(cfg, out)
    return run


def cmd_refine(cfg, out):
    run = Run(cfg, out)
    result, run.stages["refine"] = stage_refine(cfg, out)
    run.token_usage = token_usage(result.records, result.topics.K - len(result.failures))
    return run


def cmd_eval(cfg, out):
    run = Run(cfg, out)
    _, run.stages["eval"] = stage_eval(cfg, out)
    return run


def cmd_classify(cfg, out):
    run = Run(cfg, out)
    run.stages["classify"] = stage_classify(cfg, out)
    return run


def cmd_pipeline(cfg, out):
    cfg.require("corpus", "embeddings")
    run = Run(cfg, out)
    corpus, base, run.stages["lda"] = stage_lda(cfg, out / "lda")
    store = load_embeddings(cfg.inputs["embeddings"], restrict_to=set(corpus.vocabulary))
    result, run.stages["refine"] = stage_refine(cfg, out / "refine", base, corpus.vocabulary, store)
    run.token_usage = token_usage(result.records, result.topics.K - len(result.failures))
    reference = _reference_docs(cfg, cfg.inputs.get("reference") or cfg.inputs["corpus"])
    _, run.stages["eval"] = stage_eval(cfg, out / "eval", result.topics, base, store, reference)
    if cfg.inputs.get("labels"):
        run.stages["classify"] = stage_classify(
            cfg, out / "classify", corpus, {"base": base, "refined": result.topics}, store)
    return run


COMMANDS = {"lda": cmd_lda, "refine": cmd_refine, "eval": cmd_eval,
            "classify": cmd_classify, "pipeline": cmd_pipeline}


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}\nerror_code: usage_error", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=getattr(logging, str(ns.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg, out = resolve_config(ns)
        print(dump_json(cfg.to_dict()), end="")
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[cfg.subcommand](cfg, out).finish()
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}\nerror_code: usage_error", file=sys.stderr)
        return 1
    except TopicRefineError as exc:
        print(f"error: {exc}\nerror_code: {exc.error_code}", file=sys.stderr)
        return exc.exit_code
    except (OSError, ValueError) as exc:
        print(f"error: {exc}\nerror_code: data_error", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(run())
