"""Search-problem generation with endpoint-disjoint train/dev/test splits."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .environment import SearchProblem, read_problems, write_problems
from .errors import ConfigurationError, ShortfallError
from .graph import KnowledgeGraph

SPLITS = ("train", "dev", "test")
DEFAULT_SIZES = (230, 500, 670)


@dataclass
class ProblemSplits:
    train: list[SearchProblem] = field(default_factory=list)
    dev: list[SearchProblem] = field(default_factory=list)
    test: list[SearchProblem] = field(default_factory=list)

    def split(self, name) -> list[SearchProblem]:
        return getattr(self, name)

    def endpoints(self, name) -> set[str]:
        return {e for p in self.split(name) for e in (p.source, p.destination)}


def eligible_pairs(gold: KnowledgeGraph, min_hops: int, max_hops: int) -> list[tuple[str, str, int]]:
    """All unordered vertex pairs (a < b) whose shortest path has min_hops..max_hops edges."""
    out = []
    for a in gold.sorted_vertices():
        for b, d in gold.hop_distances(a, max_hops).items():
            if a < b and min_hops <= d <= max_hops:
                out.append((a, b, d))
    out.sort()
    return out


def generate_problems(gold: KnowledgeGraph, sizes=DEFAULT_SIZES, min_hops: int = 2, max_hops: int = 4,
                      seed: int = 0) -> ProblemSplits:
    """Shuffle eligible pairs, then assign greedily so no endpoint is shared across splits."""
    if min_hops < 2:
        raise ConfigurationError("min_hops must be at least 2 (problems are multi-hop)")
    if max_hops < min_hops:
        raise ConfigurationError("max_hops must be >= min_hops")
    sizes = tuple(int(s) for s in sizes)
    if len(sizes) != 3 or min(sizes) < 0:
        raise ConfigurationError("sizes must be three non-negative counts (train, dev, test)")
    rng = np.random.default_rng(seed)
    pairs = eligible_pairs(gold, min_hops, max_hops)
    order = rng.permutation(len(pairs))
    owner: dict[str, int] = {}
    chosen: list[list[SearchProblem]] = [[], [], []]
    for k in order:
        if all(len(chosen[s]) >= sizes[s] for s in range(3)):
            break
        a, b, _ = pairs[k]
        owners = {owner[e] for e in (a, b) if e in owner}
        if len(owners) > 1:
            continue
        if owners:
            s = owners.pop()
            if len(chosen[s]) >= sizes[s]:
                continue
        else:
            open_splits = [s for s in range(3) if len(chosen[s]) < sizes[s]]
            # fill the split with the largest remaining share first; index breaks ties
            s = max(open_splits, key=lambda s: ((sizes[s] - len(chosen[s])) / sizes[s], -s))
        if rng.random() < 0.5:
            a, b = b, a
        chosen[s].append(SearchProblem(a, b))
        owner[a] = owner[b] = s
    achieved = {name: len(c) for name, c in zip(SPLITS, chosen)}
    if any(len(chosen[s]) < sizes[s] for s in range(3)):
        raise ShortfallError(
            f"only {achieved} problems achievable from {len(pairs)} eligible pairs; requested "
            f"{dict(zip(SPLITS, sizes))}",
            achieved,
        )
    return ProblemSplits(*chosen)


def write_splits(splits: ProblemSplits, outdir, manifest: dict) -> dict:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    files = {}
    for name in SPLITS:
        path = outdir / f"{name}.jsonl"
        write_problems(splits.split(name), path)
        files[name] = path.name
    manifest = dict(manifest)
    manifest["files"] = files
    manifest["counts"] = {name: len(splits.split(name)) for name in SPLITS}
    with open(outdir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return manifest


def read_splits(outdir) -> ProblemSplits:
    outdir = Path(outdir)
    return ProblemSplits(*(read_problems(outdir / f"{name}.jsonl") for name in SPLITS))
