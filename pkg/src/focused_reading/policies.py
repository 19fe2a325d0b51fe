"""Non-learned baseline policies.

Every policy exposes ``choose(env, state, actions, rng) -> Action``. Baselines
only ever pick query actions; they never stop early.
"""

from __future__ import annotations

import numpy as np

from .corpus import Query, Template
from .environment import Action, EpisodeState, FocusedReadingEnv
from .errors import ContractViolation

TEMPLATE_ORDER = (Template.CONJUNCTION, Template.DISJUNCTION, Template.SINGLETON)


def _query_indices(candidates):
    idx = [i for i, a in enumerate(candidates) if not a.is_stop]
    if not idx:
        raise ContractViolation("no query actions to choose from")
    return idx


def random_policy(candidates: list[Action], rng: np.random.Generator) -> int:
    """Uniform over the query actions."""
    idx = _query_indices(candidates)
    return idx[int(rng.integers(len(idx)))]


def conditional_policy(candidates: list[Action], rng: np.random.Generator) -> int:
    """Uniform over the templates present, then uniform within the chosen template."""
    _query_indices(candidates)
    by_template = {t: [i for i, a in enumerate(candidates) if a.template is t] for t in TEMPLATE_ORDER}
    present = [t for t in TEMPLATE_ORDER if by_template[t]]
    group = by_template[present[int(rng.integers(len(present)))]]
    return group[int(rng.integers(len(group)))]


def cascade_policy(candidates: list[Action], env: FocusedReadingEnv, state: EpisodeState,
                   rng: np.random.Generator, all_pairs: bool = True) -> Action:
    """Conjunction on a random entity pair; disjunction of the same pair if it adds no unseen document."""
    if all_pairs:
        verts = state.kg.sorted_vertices()
        if len(verts) < 2:
            return candidates[random_policy(candidates, rng)]
        i, j = rng.choice(len(verts), size=2, replace=False)
        a, b = sorted((verts[int(i)], verts[int(j)]))
        conj = Action(Query(Template.CONJUNCTION, (a, b)), env.similarity(a, b))
        disj = Action(Query(Template.DISJUNCTION, (a, b)), conj.rank_score)
    else:
        conjs = [a for a in candidates if a.template is Template.CONJUNCTION]
        if not conjs:
            singles = [a for a in candidates if a.template is Template.SINGLETON]
            return singles[int(rng.integers(len(singles)))] if singles else candidates[random_policy(candidates, rng)]
        conj = conjs[int(rng.integers(len(conjs)))]
        matches = [a for a in candidates
                   if a.template is Template.DISJUNCTION and a.query.params == conj.query.params]
        if not matches:
            raise ContractViolation(f"no disjunction paired with {conj}")
        disj = matches[0]
    if env.new_documents(state, conj.query):
        return conj
    return disj


class RandomPolicy:
    name = "random"

    def choose(self, env, state, actions, rng):
        return actions[random_policy(actions, rng)]


class ConditionalPolicy:
    name = "conditional"

    def choose(self, env, state, actions, rng):
        return actions[conditional_policy(actions, rng)]


class CascadePolicy:
    name = "cascade"

    def __init__(self, all_pairs: bool = True):
        self.all_pairs = all_pairs

    def choose(self, env, state, actions, rng):
        return cascade_policy(actions, env, state, rng, self.all_pairs)


class EarlyStopPolicy:
    """Stops immediately; useful as a degenerate reference."""

    name = "stop"

    def choose(self, env, state, actions, rng):
        return actions[-1]


BASELINES = {
    "random": RandomPolicy,
    "conditional": ConditionalPolicy,
    "cascade": CascadePolicy,
}
