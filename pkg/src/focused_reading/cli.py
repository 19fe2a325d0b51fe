"""Command-line front end: one binary, one subcommand per pipeline stage.

Every command writes a ``manifest.json`` next to its outputs holding the fully
resolved configuration, so a run can be repeated from the manifest alone.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .corpus import load_corpus, save_index
from .dataset import generate_problems, read_splits, write_splits
from .embeddings import load_embeddings
from .environment import EnvConfig, FocusedReadingEnv, RewardConfig, read_problems
from .errors import ConfigurationError, DataError, FocusedReadingError
from .evaluation import EvaluationReport, compare_reports, evaluate, render_markdown
from .extraction import build_gold_kg
from .policies import BASELINES
from .topics import LdaModel, topic_purity, train_lda

log = logging.getLogger("focused_reading")

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3


def output_dir(args, command) -> Path:
    if args.out:
        out = Path(args.out)
    else:
        out = Path(os.environ.get("FR_DATA_DIR", "runs")) / command
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_manifest(out: Path, command: str, args, **extra) -> dict:
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "command")}
    manifest = {"command": command, "version": __version__, "config": config}
    manifest.update(extra)
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    return manifest


def _existing(path) -> Path:
    p = Path(path)
    if not p.exists():
        raise DataError(f"no such file: {p}")
    return p


def _env_config(args) -> EnvConfig:
    reward = RewardConfig(args.success_reward, args.doc_cost, args.empty_cost)
    return EnvConfig(n_per_template=args.n, max_steps=args.max_steps, reward=reward)


def _build_env(args, env_config: EnvConfig) -> FocusedReadingEnv:
    index = load_corpus(_existing(args.corpus), stem=getattr(args, "stem", False))
    store = load_embeddings(_existing(args.embeddings))
    lda = LdaModel.load(_existing(args.lda)) if args.lda else None
    return FocusedReadingEnv(index, store, lda, env_config)


def _problems(args, split):
    path = Path(args.problems)
    if path.is_dir():
        path = path / f"{split}.jsonl"
    return read_problems(_existing(path))


# commands

def cmd_synth(args) -> int:
    from .synthetic import write_synthetic

    out = output_dir(args, "synth")
    write_synthetic(out, n_docs=args.docs, n_entities=args.entities, n_themes=args.themes,
                    dimension=args.dimension, bridge_rate=args.bridge_rate,
                    sentences=(args.min_sentences, args.max_sentences),
                    mentions=(args.min_mentions, args.max_mentions), seed=args.seed)
    write_manifest(out, "synth", args, files={"corpus": "corpus.jsonl", "embeddings": "embeddings.txt"})
    print(f"wrote {out / 'corpus.jsonl'} and {out / 'embeddings.txt'}")
    return EXIT_OK


def cmd_ingest(args) -> int:
    index = load_corpus(_existing(args.corpus), stem=args.stem)
    out = output_dir(args, "ingest")
    save_index(index, out / "index.pkl")
    stats = index.stats()
    write_manifest(out, "ingest", args, stats=stats, files={"index": "index.pkl"})
    print(f"documents {stats['documents']}  entities {stats['entities']}  vocabulary {stats['vocabulary']}")
    return EXIT_OK


def cmd_topics(args) -> int:
    index = load_corpus(_existing(args.corpus), stem=args.stem)
    model = train_lda(index, num_topics=args.topics, iterations=args.iterations, seed=args.seed,
                      alpha=args.alpha, beta=args.beta)
    out = output_dir(args, "topics")
    model.save(out / "lda.json")
    labels = {d: doc.label for d, doc in index.documents.items() if doc.label is not None}
    extra = {"files": {"model": "lda.json"}}
    if labels:
        purity = topic_purity(model, labels)
        extra["purity"] = purity
        print(f"purity {purity:.4f} over {len(set(labels.values()))} labels")
    write_manifest(out, "topics", args, **extra)
    print(f"wrote {out / 'lda.json'}")
    return EXIT_OK


def cmd_dataset(args) -> int:
    index = load_corpus(_existing(args.corpus), stem=args.stem)
    gold = build_gold_kg(index)
    splits = generate_problems(gold, (args.train, args.dev, args.test), args.min_hops, args.max_hops, args.seed)
    out = output_dir(args, "dataset")
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "command")}
    manifest = write_splits(splits, out, {"command": "dataset", "version": __version__, "config": config,
                                          "seed": args.seed, "min_hops": args.min_hops, "max_hops": args.max_hops})
    print(" ".join(f"{k} {v}" for k, v in manifest["counts"].items()))
    return EXIT_OK


def _train_config(args):
    from .agent import DEFAULT_HIDDEN, TrainConfig

    hidden = tuple(int(h) for h in args.hidden.split(",")) if args.hidden else DEFAULT_HIDDEN
    emb = args.embedding_dropout if args.embedding_dropout == "none" else float(args.embedding_dropout)
    ablate = tuple(g for g in args.ablate.split(",") if g) if args.ablate else ()
    return TrainConfig(minibatch=args.minibatch, iterations=args.iterations, gamma=args.gamma,
                       learning_rate=args.learning_rate, seed=args.seed, hidden=hidden, dropout=args.dropout,
                       embedding_dropout=emb, ablate=ablate, n_envs=args.n_envs,
                       entropy_coef=args.entropy_coef, value_coef=args.value_coef)


def cmd_train(args) -> int:
    from .agent import train, write_curve

    cfg = _train_config(args)
    env = _build_env(args, _env_config(args))
    problems = _problems(args, "train")

    def progress(point):
        if args.log_every and (point.iteration + 1) % args.log_every == 0:
            log.info("iteration %d  mean return %.1f  policy %.4f  value %.4f", point.iteration + 1,
                     point.mean_return, point.policy_loss, point.value_loss)

    agent = train(env, problems, cfg, progress)
    out = output_dir(args, "train")
    agent.save(out / "model.bin")
    write_curve(agent.curve, out / "curve.csv")
    write_manifest(out, "train", args, train_config=asdict(cfg), env_config=asdict(env.config),
                   files={"model": "model.bin", "curve": "curve.csv"})
    print(f"wrote {out / 'model.bin'} ({agent.net.parameter_count()} parameters)")
    return EXIT_OK


def resolve_policy(spec: str, mode: str = "greedy"):
    """Return (policy, env_config or None). ``a2c:<path>`` loads a trained model."""
    if spec in BASELINES:
        return BASELINES[spec](), None
    if spec.startswith("a2c:"):
        from .agent import load_model

        agent = load_model(_existing(spec[4:]))
        return agent.policy(mode), agent.env_config
    valid = ", ".join(list(BASELINES) + ["a2c:<model path>"])
    raise ConfigurationError(f"unknown policy {spec!r}; valid policies: {valid}")


def cmd_evaluate(args) -> int:
    policy, model_env = resolve_policy(args.policy, args.a2c_mode)
    env_config = model_env or _env_config(args)
    env = _build_env(args, env_config)
    problems = _problems(args, args.split)
    seeds = [args.seed + i for i in range(args.seeds)]
    report = evaluate(env, policy, problems, seeds, workers=args.workers or os.cpu_count() or 1,
                      keep_trace=args.traces)
    out = output_dir(args, "evaluate")
    (out / "report.json").write_text(report.to_json() + "\n", encoding="utf-8")
    reports, reference, pvalues = [report], None, None
    if args.compare:
        reference = EvaluationReport.load(_existing(args.compare))
        pvalues = {report.policy: compare_reports(report, reference, args.resamples, args.seed)}
        reports = [reference, report]
    table = render_markdown(reports, reference, pvalues, args.alpha)
    (out / "report.md").write_text(table, encoding="utf-8")
    write_manifest(out, "evaluate", args, seeds=seeds, env_config=asdict(env_config), pvalues=pvalues,
                   files={"report": "report.json", "table": "report.md"})
    print(table, end="")
    return EXIT_OK


def cmd_compare(args) -> int:
    reports = [EvaluationReport.load(_existing(p)) for p in args.reports]
    reference = EvaluationReport.load(_existing(args.reference))
    pvalues = {r.policy: compare_reports(r, reference, args.resamples, args.seed) for r in reports}
    table = render_markdown([reference] + reports, reference, pvalues, args.alpha)
    out = output_dir(args, "compare")
    (out / "comparison.md").write_text(table, encoding="utf-8")
    write_manifest(out, "compare", args, pvalues=pvalues, files={"table": "comparison.md"})
    print(table, end="")
    return EXIT_OK


# parser

def _env_options(p):
    p.add_argument("--corpus", required=True, help="corpus JSONL or a cached index (.pkl)")
    p.add_argument("--embeddings", required=True, help="word vectors, one 'token v1 ... vd' per line")
    p.add_argument("--lda", help="topic model from the topics command; topic features are zero without it")
    p.add_argument("--problems", required=True, help="problem JSONL, or a dataset output directory")
    p.add_argument("--n", type=int, default=15, help="beam width per query template")
    p.add_argument("--max-steps", type=int, default=10)
    p.add_argument("--success-reward", type=float, default=1000.0)
    p.add_argument("--doc-cost", type=float, default=10.0)
    p.add_argument("--empty-cost", type=float, default=100.0)
    p.add_argument("--stem", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="focused-reading", description="Focused reading experiments.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        p.add_argument("--out", help="output directory (default: $FR_DATA_DIR/<command>)")
        if seed:
            p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("synth", help="generate a synthetic annotated corpus and word vectors")
    common(p)
    p.add_argument("--docs", type=int, default=500)
    p.add_argument("--entities", type=int, default=150)
    p.add_argument("--themes", type=int, default=6)
    p.add_argument("--dimension", type=int, default=32)
    p.add_argument("--bridge-rate", type=float, default=0.05)
    p.add_argument("--min-sentences", type=int, default=12)
    p.add_argument("--max-sentences", type=int, default=20)
    p.add_argument("--min-mentions", type=int, default=2)
    p.add_argument("--max-mentions", type=int, default=5)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="index an annotated corpus")
    common(p, seed=False)
    p.add_argument("--corpus", required=True)
    p.add_argument("--stem", action="store_true")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("topics", help="train an LDA topic model")
    common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--stem", action="store_true")
    p.add_argument("--topics", type=int, default=50)
    p.add_argument("--iterations", type=int, default=200)
    p.add_argument("--alpha", type=float, default=None, help="default 50 / topics")
    p.add_argument("--beta", type=float, default=0.01)
    p.set_defaults(func=cmd_topics)

    p = sub.add_parser("dataset", help="generate endpoint-disjoint search problems")
    common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--stem", action="store_true")
    p.add_argument("--train", type=int, default=230)
    p.add_argument("--dev", type=int, default=500)
    p.add_argument("--test", type=int, default=670)
    p.add_argument("--min-hops", type=int, default=2)
    p.add_argument("--max-hops", type=int, default=4)
    p.set_defaults(func=cmd_dataset)

    p = sub.add_parser("train", help="train the actor-critic policy")
    common(p)
    _env_options(p)
    p.add_argument("--iterations", type=int, default=2000)
    p.add_argument("--minibatch", type=int, default=100)
    p.add_argument("--n-envs", type=int, default=10)
    p.add_argument("--gamma", type=float, default=0.99)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--hidden", default=None, help="comma-separated hidden widths")
    p.add_argument("--dropout", type=float, default=0.2)
    p.add_argument("--embedding-dropout", default="0.2", help="0.2, 0.5 or 'none'")
    p.add_argument("--ablate", default="", help="comma-separated feature groups to zero")
    p.add_argument("--entropy-coef", type=float, default=0.01)
    p.add_argument("--value-coef", type=float, default=0.5)
    p.add_argument("--workers", type=int, default=1, help="accepted for symmetry; rollouts are serial")
    p.add_argument("--log-every", type=int, default=100)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a policy over several seeds")
    common(p)
    _env_options(p)
    p.add_argument("--policy", required=True, help="random, conditional, cascade or a2c:<model path>")
    p.add_argument("--a2c-mode", choices=("greedy", "sample"), default="sample")
    p.add_argument("--split", default="test")
    p.add_argument("--seeds", type=int, default=5, help="number of evaluation seeds")
    p.add_argument("--workers", type=int, default=None, help="default: available CPUs")
    p.add_argument("--traces", action="store_true", help="keep per-step traces in the report")
    p.add_argument("--compare", help="baseline report.json to test against")
    p.add_argument("--resamples", type=int, default=10_000)
    p.add_argument("--alpha", type=float, default=0.05)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="significance table for saved reports")
    common(p)
    p.add_argument("reports", nargs="+")
    p.add_argument("--reference", required=True)
    p.add_argument("--resamples", type=int, default=10_000)
    p.add_argument("--alpha", type=float, default=0.05)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FocusedReadingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
