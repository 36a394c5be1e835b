"""
Стратегии драфтинга:

  draft_static  — статическое дерево EAGLE (форма задана шаблоном)
  draft_eagle2  — beam search фиксированной глубины (EAGLE-2)
  draft_ddd     — Dynamic Depth Decoding: тот же beam search, но на шагах из S
                  считается H = log Σ exp(logprobsum[i]); если H < x — стоп.

Соглашение о шагах: шаг 0 — прогон драфт-модели на промпте (посев луча),
проверка для шага `step` выполняется ДО раскрытия этого шага. Поэтому
остановка на шаге 5 означает ровно 5 раундов скоринга драфт-моделью.
"""

from typing import Iterable, List, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .draft_tree import DraftTree
from .errors import ConfigError, InputError
from .lm_core import tree_logprobs
from .models import ROOT, Beam, DddConfig, DraftOutcome, HeuristicCheck, StaticTreeTemplate
from .toy_models.base import ToyModel

LOGPROB_TOL = 1e-9


def heuristic(logprobsums: Sequence[float]) -> float:
    """H = log Σ exp(logprobsum[i]); −∞ в сумму не входят."""
    values = np.asarray(logprobsums, dtype=np.float64)
    if values.size == 0:
        raise InputError("heuristic: пустой список logprobsum")
    if np.isnan(values).any():
        raise InputError("heuristic: NaN в logprobsum")
    if (values > LOGPROB_TOL).any():
        raise InputError(f"heuristic: logprobsum должны быть ≤ 0, max = {values.max()}")
    return float(logsumexp(values))


def top_tokens(logprobs: np.ndarray, k: int) -> np.ndarray:
    """k лучших токенов по убыванию logprob; равные — по возрастанию id."""
    return np.argsort(-logprobs, kind="stable")[:k]


def _root_beam(tree: DraftTree, draft: ToyModel, w: int) -> Beam:
    lp = draft.next_logprobs(tree.root_context)
    members = []
    for t in top_tokens(lp, w):
        node = tree.add_child(ROOT, int(t), float(lp[t]))
        members.append((node, tree.nodes[node].cum_logprob))
    return Beam(tuple(members))


def expand_beam(tree: DraftTree, beam: Beam, draft: ToyModel, w: int) -> Beam:
    """
    Один шаг beam search: скоринг фронтира, кандидаты (узел, токен) со
    score = logprobsum узла + logprob токена, отбор top-w.
    Равенство score: меньший токен, затем меньший индекс родителя.
    Выбранные узлы добавляются в дерево в порядке ранга.
    """
    if w < 1:
        raise ConfigError(f"ширина луча должна быть ≥ 1, получено {w}")
    nodes = beam.nodes()
    dists = tree_logprobs(draft, tree, nodes)
    vocab = draft.vocab_size

    parents = np.repeat(np.asarray(nodes, dtype=np.int64), vocab)
    tokens = np.tile(np.arange(vocab, dtype=np.int64), len(nodes))
    logprobs = np.concatenate(dists)
    scores = np.repeat(np.asarray(beam.logprobsums(), dtype=np.float64), vocab) + logprobs

    order = np.lexsort((parents, tokens, -scores))[:w]
    members = []
    for idx in order:
        node = tree.add_child(int(parents[idx]), int(tokens[idx]), float(logprobs[idx]))
        members.append((node, tree.nodes[node].cum_logprob))
    return Beam(tuple(members))


def _beam_draft(root_context: Sequence[int], draft: ToyModel, w: int, n: int,
                check_steps: Iterable[int] = (), threshold: float = -np.inf) -> DraftOutcome:
    tree = DraftTree(root_context, draft.vocab_size)
    beam = _root_beam(tree, draft, w)
    checks: List[HeuristicCheck] = []
    check_steps = set(check_steps)
    steps = 1
    for step in range(1, n):
        if step in check_steps:
            h = heuristic(beam.logprobsums())
            go_on = not h < threshold
            checks.append(HeuristicCheck(step, h, go_on))
            if not go_on:
                break
        beam = expand_beam(tree, beam, draft, w)
        steps += 1
    return DraftOutcome(tree=tree, steps_executed=steps, heuristic_checks=checks)


def draft_eagle2(root_context: Sequence[int], draft: ToyModel,
                 w: int, depth: int) -> DraftOutcome:
    """EAGLE-2: посев top-w, затем ровно depth−1 раскрытий луча."""
    if w < 1:
        raise ConfigError(f"ширина луча должна быть ≥ 1, получено {w}")
    if depth < 1:
        raise ConfigError(f"глубина должна быть ≥ 1, получено {depth}")
    return _beam_draft(root_context, draft, w, depth)


def draft_ddd(root_context: Sequence[int], draft: ToyModel, config: DddConfig) -> DraftOutcome:
    config.validate()
    return _beam_draft(root_context, draft, config.beam_width, config.max_steps,
                       config.check_steps, config.threshold)


def draft_static(root_context: Sequence[int], draft: ToyModel,
                 template: StaticTreeTemplate,
                 max_depth: Optional[int] = None) -> DraftOutcome:
    """
    Статическое дерево: каждый узел глубины d раскрывает
    children_per_depth[d] лучших по logprob детей. Форма зависит только от шаблона.
    """
    template.validate()
    if max_depth is not None and template.depth > max_depth:
        raise ConfigError(f"шаблон глубины {template.depth} превышает бюджет {max_depth}")
    tree = DraftTree(root_context, draft.vocab_size)
    frontier = [ROOT]
    for k in template.children_per_depth:
        if frontier == [ROOT]:
            dists = [draft.next_logprobs(tree.root_context)]
        else:
            dists = tree_logprobs(draft, tree, frontier)
        expanded = []
        for node, lp in zip(frontier, dists):
            for t in top_tokens(lp, k):
                expanded.append(tree.add_child(node, int(t), float(lp[t])))
        frontier = expanded
    return DraftOutcome(tree=tree, steps_executed=template.depth)
