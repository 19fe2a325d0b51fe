"""Episode runner, summary metrics and the paired bootstrap test."""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .environment import FocusedReadingEnv, Outcome, SearchProblem
from .errors import ContractViolation, DataError

METRICS = (
    "success_rate",
    "processed_documents",
    "documents_per_success",
    "avg_steps_overall",
    "avg_steps_successes",
    "avg_steps_failures",
)
METRIC_TITLES = {
    "success_rate": "Success Rate",
    "processed_documents": "Processed Documents",
    "documents_per_success": "Documents per Success",
    "avg_steps_overall": "Avg Steps Overall",
    "avg_steps_successes": "Avg Steps Successes",
    "avg_steps_failures": "Avg Steps Failures",
}
# +1: larger is better, -1: smaller is better; only these get significance stars
TESTED_METRICS = {"success_rate": +1, "processed_documents": -1, "documents_per_success": -1}
UNDEFINED = None


@dataclass
class EpisodeRecord:
    source: str
    destination: str
    outcome: str
    steps: int
    documents: int
    total_reward: float
    path: dict | None = None
    trace: list | None = None

    @property
    def success(self) -> bool:
        return self.outcome == Outcome.SUCCESS.value

    def to_dict(self):
        d = {
            "source": self.source,
            "destination": self.destination,
            "outcome": self.outcome,
            "steps": self.steps,
            "documents": self.documents,
            "total_reward": self.total_reward,
            "path": self.path,
        }
        if self.trace is not None:
            d["trace"] = self.trace
        return d


def run_episode(env: FocusedReadingEnv, problem: SearchProblem, policy, rng, keep_trace: bool = False) -> EpisodeRecord:
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    state = env.reset(problem)
    while not state.done:
        actions = env.candidate_actions(state)
        action = policy.choose(env, state, actions, rng)
        env.step(state, action)
    return EpisodeRecord(
        source=problem.source,
        destination=problem.destination,
        outcome=state.outcome.value,
        steps=state.iteration,
        documents=state.docs_processed,
        total_reward=state.total_reward,
        path=state.path.to_dict() if state.path else None,
        trace=[r.to_dict() for r in state.trace] if keep_trace else None,
    )


def episode_rng(seed: int, problem_index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(problem_index)])


def summarize(records: list[EpisodeRecord]) -> dict:
    n = len(records)
    succ = [r for r in records if r.success]
    fail = [r for r in records if not r.success]
    docs = sum(r.documents for r in records)
    return {
        "problems": n,
        "successes": len(succ),
        "success_rate": 100.0 * len(succ) / n if n else UNDEFINED,
        "processed_documents": docs,
        "documents_per_success": docs / len(succ) if succ else UNDEFINED,
        "avg_steps_overall": float(np.mean([r.steps for r in records])) if records else UNDEFINED,
        "avg_steps_successes": float(np.mean([r.steps for r in succ])) if succ else UNDEFINED,
        "avg_steps_failures": float(np.mean([r.steps for r in fail])) if fail else UNDEFINED,
    }


def _mean_std(values):
    vals = [v for v in values if v is not None]
    if not vals:
        return {"mean": UNDEFINED, "std": UNDEFINED}
    std = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
    return {"mean": float(np.mean(vals)), "std": std}


@dataclass
class EvaluationReport:
    policy: str
    seeds: list[int]
    problems: list[dict]
    per_seed: list[dict]
    aggregate: dict
    records: list[list[EpisodeRecord]] = field(repr=False, default_factory=list)

    def to_dict(self):
        return {
            "policy": self.policy,
            "seeds": self.seeds,
            "problems": self.problems,
            "per_seed": self.per_seed,
            "aggregate": self.aggregate,
            "records": [[r.to_dict() for r in rs] for rs in self.records],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    @classmethod
    def from_dict(cls, d) -> "EvaluationReport":
        try:
            records = [[EpisodeRecord(**r) for r in rs] for rs in d["records"]]
            return cls(d["policy"], list(d["seeds"]), d["problems"], d["per_seed"], d["aggregate"], records)
        except (KeyError, TypeError) as exc:
            raise DataError(f"malformed evaluation report: {exc}") from None

    @classmethod
    def load(cls, path) -> "EvaluationReport":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def per_problem(self) -> np.ndarray:
        """(problems, 2) array of [success fraction, mean documents] averaged over seeds."""
        succ = np.array([[float(r.success) for r in rs] for rs in self.records])
        docs = np.array([[float(r.documents) for r in rs] for rs in self.records])
        return np.stack([succ.mean(axis=0), docs.mean(axis=0)], axis=1)


def _evaluate_chunk(args):
    env, policy, problems, seed, keep_trace, offset = args
    return [run_episode(env, p, policy, episode_rng(seed, offset + i), keep_trace) for i, p in enumerate(problems)]


def evaluate(env: FocusedReadingEnv, policy, problems, seeds, workers: int = 1, keep_trace: bool = False,
             name: str | None = None) -> EvaluationReport:
    """Run every problem once per seed; metrics per seed, then mean/std across seeds."""
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise ContractViolation("evaluate needs at least one seed")
    problems = list(problems)
    all_records = []
    for seed in seeds:
        if workers > 1 and len(problems) > 1:
            chunks = np.array_split(np.arange(len(problems)), workers)
            jobs = [(env, policy, [problems[i] for i in c], seed, keep_trace, int(c[0]))
                    for c in chunks if len(c)]
            with ProcessPoolExecutor(max_workers=workers) as pool:
                records = [r for part in pool.map(_evaluate_chunk, jobs) for r in part]
        else:
            records = _evaluate_chunk((env, policy, problems, seed, keep_trace, 0))
        all_records.append(records)
    per_seed = [dict(seed=s, **summarize(rs)) for s, rs in zip(seeds, all_records)]
    aggregate = {m: _mean_std([ps[m] for ps in per_seed]) for m in METRICS}
    return EvaluationReport(
        policy=name or getattr(policy, "name", type(policy).__name__),
        seeds=seeds,
        problems=[p.to_dict() for p in problems],
        per_seed=per_seed,
        aggregate=aggregate,
        records=all_records,
    )


def bootstrap_test(samples_a, samples_b, resamples: int = 10_000, seed: int = 0, statistic=None,
                   alternative: str = "greater") -> float:
    """Paired bootstrap over problem indices.

    Returns the share of resamples in which ``statistic(b) - statistic(a)``
    falls on the unfavorable side of zero (``alternative="greater"`` means b
    should be larger). Exact ties count one half, so identical inputs give 0.5.
    """
    a = np.asarray(samples_a, dtype=np.float64)
    b = np.asarray(samples_b, dtype=np.float64)
    if a.shape != b.shape:
        raise ContractViolation(f"paired samples differ in shape: {a.shape} vs {b.shape}")
    if a.shape[0] == 0:
        raise ContractViolation("bootstrap needs at least one paired sample")
    if alternative not in ("greater", "less"):
        raise ContractViolation("alternative must be 'greater' or 'less'")
    rng = np.random.default_rng(seed)
    n = a.shape[0]
    idx = rng.integers(0, n, size=(resamples, n))
    if statistic is None:
        diff = b[idx].mean(axis=1) - a[idx].mean(axis=1)
    else:
        diff = np.array([statistic(b[i]) - statistic(a[i]) for i in idx])
    if alternative == "less":
        diff = -diff
    unfavorable = np.count_nonzero(diff < 0)
    ties = np.count_nonzero(diff == 0)
    return float((unfavorable + 0.5 * ties) / resamples)


def _metric_statistic(metric):
    if metric == "success_rate":
        return lambda rows: 100.0 * rows[:, 0].mean()
    if metric == "processed_documents":
        return lambda rows: rows[:, 1].sum()

    def docs_per_success(rows):
        s = rows[:, 0].sum()
        return rows[:, 1].sum() / s if s > 0 else math.inf

    return docs_per_success


def compare_reports(candidate: EvaluationReport, reference: EvaluationReport, resamples: int = 10_000,
                    seed: int = 0) -> dict[str, float]:
    """p-values that ``candidate`` beats ``reference`` on each tested metric."""
    if candidate.problems != reference.problems:
        raise ContractViolation("reports were produced on different problem lists")
    a = reference.per_problem()
    b = candidate.per_problem()
    out = {}
    for metric, direction in TESTED_METRICS.items():
        stat = _metric_statistic(metric)
        if metric == "success_rate":
            out[metric] = bootstrap_test(a[:, 0] * 100.0, b[:, 0] * 100.0, resamples, seed, alternative="greater")
        elif metric == "processed_documents":
            out[metric] = bootstrap_test(a[:, 1], b[:, 1], resamples, seed, alternative="less")
        else:
            out[metric] = bootstrap_test(a, b, resamples, seed, statistic=stat,
                                         alternative="greater" if direction > 0 else "less")
    return out


def _fmt(cell, metric):
    if cell["mean"] is None:
        return "n/a"
    if metric == "processed_documents":
        return f"{cell['mean']:,.1f} ({cell['std']:,.2f})"
    return f"{cell['mean']:.2f} ({cell['std']:.2f})"


def render_markdown(reports, reference: EvaluationReport | None = None, pvalues: dict | None = None,
                    alpha: float = 0.05) -> str:
    """Table with one row per report; stars mark p <= alpha against ``reference``."""
    pvalues = pvalues or {}
    lines = ["| Policy | " + " | ".join(METRIC_TITLES[m] for m in METRICS) + " |",
             "|---" * (len(METRICS) + 1) + "|"]
    for rep in reports:
        cells = []
        for m in METRICS:
            text = _fmt(rep.aggregate[m], m)
            p = pvalues.get(rep.policy, {}).get(m)
            if reference is not None and rep is not reference and p is not None and p <= alpha:
                text += "*"
            cells.append(text)
        lines.append(f"| {rep.policy} | " + " | ".join(cells) + " |")
    if reference is not None:
        lines.append("")
        lines.append(f"\\* bootstrap p <= {alpha} in favor of the policy versus {reference.policy}.")
    return "\n".join(lines) + "\n"
