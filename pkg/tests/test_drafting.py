#!/usr/bin/env python3
"""
Тесты дерева драфта и стратегий драфтинга: эвристика H, шаг beam search,
EAGLE-2 фиксированной глубины, Dynamic Depth Decoding, статическое дерево.

Запуск:
    python tests/test_drafting.py       # встроенный runner
    python -m pytest tests/ -v          # через pytest
"""

import sys
import os
import json
import math

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from specdec.draft_tree import DraftTree
from specdec.drafting import draft_ddd, draft_eagle2, draft_static, expand_beam, heuristic, top_tokens
from specdec.errors import ConfigError, InputError, StructuralError
from specdec.lm_core import greedy_next, make_toy_pair, next_logprobs
from specdec.models import ROOT, Beam, DddConfig, ModelSpec, StaticTreeTemplate

SPEC = ModelSpec(vocab_size=64, context_order=2, seed=1, draft_noise=0.3)
_, DRAFT = make_toy_pair(SPEC)


def prompts(count, vocab=64, length=8, seed=0):
    rng = np.random.default_rng(seed)
    return [[int(t) for t in rng.integers(0, vocab, length)] for _ in range(count)]


def structure(tree):
    return [(n.parent, n.depth) for n in tree.nodes]


def last_beam(tree):
    """Узлы последнего шага beam search — это текущий луч в порядке ранга."""
    depth = tree.nodes[-1].depth
    return Beam(tuple((i, n.cum_logprob) for i, n in enumerate(tree.nodes) if n.depth == depth))


# ═══════════════════════════════════════════════
# DraftTree
# ═══════════════════════════════════════════════

def test_tree_add_child_depth_and_cum():
    tree = DraftTree([1, 2, 3], 16)
    a = tree.add_child(ROOT, 5, -0.5)
    b = tree.add_child(a, 6, -0.25)
    assert (a, b) == (0, 1)
    assert tree.node(a).depth == 1 and tree.node(a).cum_logprob == -0.5
    assert tree.node(b).depth == 2 and tree.node(b).cum_logprob == -0.75
    assert tree.children(ROOT) == [a]
    assert tree.children(a) == [b]
    assert tree.children(b) == []


def test_tree_paths():
    tree = DraftTree([1, 2, 3], 16)
    a = tree.add_child(ROOT, 7, -0.1)
    b = tree.add_child(a, 8, -0.1)
    c = tree.add_child(b, 9, -0.1)
    tree.add_child(a, 10, -2.0)
    assert tree.path_to_root(c) == [7, 8, 9]
    assert tree.context_of(c) == [1, 2, 3, 7, 8, 9]
    assert tree.context_of(ROOT) == [1, 2, 3]
    assert tree.tail_context(c, 2) == (8, 9)
    assert tree.tail_context(a, 3) == (2, 3, 7)
    assert tree.tail_context(a, 0) == ()


def test_tree_errors():
    tree = DraftTree([1], 16)
    with pytest.raises(StructuralError):
        tree.add_child(3, 1, -0.1)
    with pytest.raises(InputError):
        tree.add_child(ROOT, 1, 0.5)
    with pytest.raises(InputError):
        tree.add_child(ROOT, 16, -0.1)
    with pytest.raises(InputError):
        tree.add_child(ROOT, 1, float("nan"))
    with pytest.raises(StructuralError):
        tree.node(0)
    with pytest.raises(StructuralError):
        tree.path_to_root(4)
    with pytest.raises(InputError):
        DraftTree([1, 99], 16)


def test_tree_prefix():
    tree = draft_eagle2([1, 2], DRAFT, 4, 3).tree
    half = tree.prefix(6)
    assert half.nodes == tree.nodes[:6]
    assert half.root_context == tree.root_context
    assert len(tree.prefix(0)) == 0
    with pytest.raises(StructuralError):
        tree.prefix(len(tree) + 1)


def test_tree_dumps():
    tree = draft_eagle2([1, 2], DRAFT, 2, 2).tree
    data = json.loads(tree.to_json())
    assert data["root_context"] == [1, 2]
    assert [r["parent"] for r in data["nodes"]] == [n.parent for n in tree.nodes]
    text = tree.to_text()
    assert text.startswith("ROOT")
    assert len(text.splitlines()) == len(tree) + 1


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 10_000), st.integers(0, 15),
                          st.floats(min_value=-20.0, max_value=0.0)), max_size=40))
def test_tree_invariants_random_inserts(inserts):
    """Любая последовательность допустимых вставок даёт корректное дерево."""
    tree = DraftTree([3, 4], 16)
    for pick, token, logprob in inserts:
        parent = pick % (len(tree) + 1) - 1
        tree.add_child(parent, token, logprob)
    tree.validate()
    for i, node in enumerate(tree.nodes):
        assert node.parent < i
        path = []
        j = i
        while j != ROOT:
            path.append(tree.nodes[j].logprob)
            j = tree.nodes[j].parent
        assert node.depth == len(path) == len(tree.path_to_root(i))
        assert abs(node.cum_logprob - math.fsum(path)) <= 1e-9


# ═══════════════════════════════════════════════
# Эвристика H
# ═══════════════════════════════════════════════

def test_heuristic_values():
    assert heuristic([0.0]) == 0.0
    assert abs(heuristic([math.log(0.1)] * 10)) < 1e-12
    assert heuristic([math.log(0.5), math.log(0.25)]) == pytest.approx(math.log(0.75), abs=1e-12)
    assert heuristic([-math.inf, math.log(0.5)]) == pytest.approx(math.log(0.5), abs=1e-12)
    assert heuristic([-math.inf, -math.inf]) == -math.inf


def test_heuristic_bad_input():
    with pytest.raises(InputError):
        heuristic([])
    with pytest.raises(InputError):
        heuristic([-0.1, 0.2])
    with pytest.raises(InputError):
        heuristic([float("nan")])


def test_heuristic_oracle():
    """10 000 случайных входов против прямого log(fsum(exp)) со сдвигом на максимум."""
    rng = np.random.default_rng(7)
    for _ in range(10_000):
        values = -rng.exponential(3.0, rng.integers(1, 21))
        values[rng.random(values.size) < 0.1] = -np.inf
        finite = [float(v) for v in values if np.isfinite(v)]
        if not finite:
            assert heuristic(values) == -math.inf
            continue
        m = max(finite)
        expected = m + math.log(math.fsum(math.exp(v - m) for v in finite))
        assert abs(heuristic(values) - expected) <= 1e-9


def test_heuristic_not_above_zero():
    rng = np.random.default_rng(8)
    for _ in range(1000):
        probs = rng.dirichlet(np.ones(rng.integers(1, 12)))
        assert heuristic(np.log(probs)) <= 1e-9


# ═══════════════════════════════════════════════
# Шаг beam search
# ═══════════════════════════════════════════════

def test_top_tokens_tie_order():
    lp = np.log(np.array([0.25, 0.25, 0.4, 0.1]))
    assert list(top_tokens(lp, 3)) == [2, 0, 1]


def test_expand_width_one_is_greedy():
    tree = draft_eagle2([5, 6], DRAFT, 1, 1).tree
    beam = last_beam(tree)
    (node, score), = expand_beam(tree, beam, DRAFT, 1).members
    lp = next_logprobs(DRAFT, tree.context_of(0))
    assert tree.nodes[node].token == int(np.argmax(lp))
    assert tree.nodes[node].parent == 0
    assert score == tree.nodes[0].cum_logprob + float(lp.max())


def test_expand_small_exhaustive():
    """V = 4, луч из 2 узлов, w = 3: 8 кандидатов, берём 3 лучших."""
    target, draft = make_toy_pair(ModelSpec(vocab_size=4, seed=2, sharpness=3.0))
    tree = draft_eagle2([1, 2], draft, 2, 1).tree
    beam = last_beam(tree)
    candidates = []
    for node, lps in beam.members:
        lp = next_logprobs(draft, tree.context_of(node))
        candidates += [(-(lps + float(lp[t])), t, node) for t in range(4)]
    expected = [(node, t) for _, t, node in sorted(candidates)[:3]]
    new = expand_beam(tree, beam, draft, 3)
    assert [(tree.nodes[i].parent, tree.nodes[i].token) for i in new.nodes()] == expected


def test_expand_oracle():
    """1000 случайных состояний (V ≤ 16, w ≤ 8): совпадение с полным перебором кандидатов."""
    rng = np.random.default_rng(9)
    for trial in range(1000):
        vocab = int(rng.integers(2, 17))
        _, draft = make_toy_pair(ModelSpec(vocab_size=vocab, seed=trial, context_order=2,
                                           sharpness=float(rng.uniform(0.5, 8.0)), draft_noise=0.5))
        ctx = [int(t) for t in rng.integers(0, vocab, 3)]
        tree = draft_eagle2(ctx, draft, int(rng.integers(1, 9)), int(rng.integers(1, 4))).tree
        beam = last_beam(tree)
        w = int(rng.integers(1, 9))

        candidates = []
        for node, lps in beam.members:
            lp = next_logprobs(draft, tree.context_of(node))
            candidates += [(-(lps + float(lp[t])), t, node) for t in range(vocab)]
        expected = [(node, t, -score) for score, t, node in sorted(candidates)[:w]]

        before = len(tree)
        new = expand_beam(tree, beam, draft, w)
        assert new.nodes() == list(range(before, len(tree)))
        got = [(tree.nodes[i].parent, tree.nodes[i].token, s) for i, s in new.members]
        assert got == expected, f"trial {trial}"
        assert max(new.logprobsums()) <= max(beam.logprobsums())


def test_expand_bad_width():
    tree = draft_eagle2([1], DRAFT, 2, 1).tree
    with pytest.raises(ConfigError):
        expand_beam(tree, last_beam(tree), DRAFT, 0)


# ═══════════════════════════════════════════════
# EAGLE-2 (фиксированная глубина)
# ═══════════════════════════════════════════════

def test_eagle2_depth_one():
    outcome = draft_eagle2([1, 2], DRAFT, 10, 1)
    assert outcome.steps_executed == 1
    assert outcome.heuristic_checks == []
    assert len(outcome.tree) == 10
    assert all(n.parent == ROOT and n.depth == 1 for n in outcome.tree.nodes)


def test_eagle2_counts():
    for prompt in prompts(20):
        outcome = draft_eagle2(prompt, DRAFT, 10, 6)
        assert outcome.steps_executed == 6
        assert len(outcome.tree) == 60
        depths = [n.depth for n in outcome.tree.nodes]
        assert depths == sorted(depths)
        assert all(depths.count(d) == 10 for d in range(1, 7))
        outcome.tree.validate()


def test_eagle2_small_vocab():
    """V < w: посев даёт V узлов, каждый следующий шаг — ровно w."""
    _, draft = make_toy_pair(ModelSpec(vocab_size=5, seed=3))
    tree = draft_eagle2([1], draft, 10, 4).tree
    assert len(tree) == 5 + 10 * 3
    tree.validate()


def test_eagle2_deeper_is_extension():
    """Дерево глубины d — префикс дерева глубины d + 1."""
    for prompt in prompts(10, seed=1):
        trees = [draft_eagle2(prompt, DRAFT, 10, d).tree for d in range(1, 8)]
        for a, b in zip(trees, trees[1:]):
            assert b.nodes[:len(a)] == a.nodes


def test_eagle2_bad_params():
    with pytest.raises(ConfigError):
        draft_eagle2([1], DRAFT, 0, 3)
    with pytest.raises(ConfigError):
        draft_eagle2([1], DRAFT, 3, 0)


# ═══════════════════════════════════════════════
# Dynamic Depth Decoding
# ═══════════════════════════════════════════════

def test_ddd_no_checks_equals_eagle2():
    for prompt in prompts(20, seed=2):
        ddd = draft_ddd(prompt, DRAFT, DddConfig(max_steps=11, beam_width=10, check_steps=()))
        eagle2 = draft_eagle2(prompt, DRAFT, 10, 11)
        assert ddd.tree.nodes == eagle2.tree.nodes
        assert ddd.steps_executed == 11
        assert ddd.heuristic_checks == []


def test_ddd_threshold_plus_one_stops_at_first_check():
    """x = +1 недостижим (H ≤ 0): стоп на первой проверке."""
    config = DddConfig(max_steps=11, beam_width=10, check_steps=(5, 7, 9), threshold=1.0)
    for prompt in prompts(20, seed=3):
        outcome = draft_ddd(prompt, DRAFT, config)
        assert outcome.steps_executed == 5
        assert len(outcome.tree) == 50
        assert [(c.step, c.continued) for c in outcome.heuristic_checks] == [(5, False)]


def test_ddd_threshold_minus_inf_never_stops():
    config = DddConfig(max_steps=11, beam_width=10, check_steps=(5, 7, 9), threshold=-math.inf)
    for prompt in prompts(20, seed=4):
        outcome = draft_ddd(prompt, DRAFT, config)
        assert outcome.steps_executed == 11
        assert outcome.tree.nodes == draft_eagle2(prompt, DRAFT, 10, 11).tree.nodes
        assert [c.step for c in outcome.heuristic_checks] == [5, 7, 9]
        assert all(c.continued for c in outcome.heuristic_checks)


def test_ddd_check_at_step_one():
    """S = {1}: проверяется посевной луч."""
    config = DddConfig(max_steps=11, beam_width=10, check_steps=(1,), threshold=1.0)
    prompt = [3, 4]
    outcome = draft_ddd(prompt, DRAFT, config)
    assert outcome.steps_executed == 1
    assert len(outcome.tree) == 10
    (check,) = outcome.heuristic_checks
    lp = next_logprobs(DRAFT, prompt)
    assert check.value == pytest.approx(heuristic(np.sort(lp)[::-1][:10]), abs=1e-12)


def test_ddd_default_stop_depths():
    """1000 циклов на умолчаниях: остановка только в {5, 7, 9, 11}, по правилам чекпоинтов."""
    config = DddConfig()
    assert (config.max_steps, config.beam_width, config.check_steps, config.threshold) == \
        (11, 10, (5, 7, 9), -0.3)
    seen = set()
    for prompt in prompts(1000, seed=5):
        outcome = draft_ddd(prompt, DRAFT, config)
        steps = outcome.steps_executed
        seen.add(steps)
        assert steps in (5, 7, 9, 11)
        checks = outcome.heuristic_checks
        assert [c.step for c in checks] == [s for s in (5, 7, 9) if s <= steps]
        assert all(c.value <= 1e-9 for c in checks)
        assert all(c.continued == (c.value >= config.threshold) for c in checks)
        if steps < 11:
            assert checks[-1].step == steps and not checks[-1].continued
        assert all(c.continued for c in checks[:-1])
        assert len(outcome.tree) == 10 * steps
    assert len(seen) > 1


def test_ddd_heuristic_matches_beam():
    """Значение H в проверке — logsumexp logprobsum узлов последнего шага."""
    config = DddConfig(check_steps=(3, 6), threshold=-math.inf)
    outcome = draft_ddd([7, 8, 9], DRAFT, config)
    for check in outcome.heuristic_checks:
        beam = [n.cum_logprob for n in outcome.tree.nodes if n.depth == check.step]
        assert check.value == pytest.approx(heuristic(beam), abs=1e-12)


def test_ddd_higher_threshold_not_deeper():
    """При большем x цикл останавливается не позже (на тех же контекстах)."""
    thresholds = [-math.inf, -2.0, -0.5, -0.3, -0.1, 1.0]
    for prompt in prompts(100, seed=6):
        steps = [draft_ddd(prompt, DRAFT, DddConfig(threshold=x)).steps_executed for x in thresholds]
        assert steps == sorted(steps, reverse=True)
        assert steps[0] == 11 and steps[-1] == 5


def test_ddd_config_validation():
    with pytest.raises(ConfigError):
        draft_ddd([1], DRAFT, DddConfig(max_steps=11, check_steps=(5, 11)))
    with pytest.raises(ConfigError):
        draft_ddd([1], DRAFT, DddConfig(check_steps=(0,)))
    with pytest.raises(ConfigError):
        draft_ddd([1], DRAFT, DddConfig(beam_width=0))
    with pytest.raises(ConfigError):
        draft_ddd([1], DRAFT, DddConfig(max_steps=0, check_steps=()))
    assert DddConfig(check_steps=(9, 5, 7, 5)).check_steps == (5, 7, 9)


# ═══════════════════════════════════════════════
# Статическое дерево EAGLE
# ═══════════════════════════════════════════════

def test_static_chain_is_greedy():
    outcome = draft_static([1, 2], DRAFT, StaticTreeTemplate((1, 1, 1)))
    tree = outcome.tree
    assert structure(tree) == [(ROOT, 1), (0, 2), (1, 3)]
    context = [1, 2]
    for node in tree.nodes:
        assert node.token == greedy_next(DRAFT, context)
        context.append(node.token)


def test_static_small_template():
    tree = draft_static([1], DRAFT, StaticTreeTemplate((2, 1))).tree
    assert structure(tree) == [(ROOT, 1), (ROOT, 1), (0, 2), (1, 2)]
    lp = next_logprobs(DRAFT, [1])
    assert [tree.nodes[0].token, tree.nodes[1].token] == list(np.argsort(-lp, kind="stable")[:2])


def test_static_default_shape():
    template = StaticTreeTemplate()
    outcome = draft_static([1, 2, 3], DRAFT, template)
    assert template.node_count() == 76
    assert len(outcome.tree) == 76
    assert outcome.steps_executed == 6
    assert outcome.heuristic_checks == []
    depths = [n.depth for n in outcome.tree.nodes]
    assert [depths.count(d) for d in range(1, 7)] == [4, 8, 16, 16, 16, 16]


def test_static_shape_independent_of_model():
    other = make_toy_pair(ModelSpec(vocab_size=64, seed=99, draft_noise=1.0))[1]
    a = draft_static([1, 2], DRAFT, StaticTreeTemplate()).tree
    b = draft_static([5, 6, 7], other, StaticTreeTemplate()).tree
    assert structure(a) == structure(b)


def test_static_bad_template():
    with pytest.raises(ConfigError):
        draft_static([1], DRAFT, StaticTreeTemplate(()))
    with pytest.raises(ConfigError):
        draft_static([1], DRAFT, StaticTreeTemplate((2, 0)))
    with pytest.raises(ConfigError):
        draft_static([1], DRAFT, StaticTreeTemplate(), max_depth=5)


if __name__ == "__main__":
    from tests._runner import run_tests

    run_tests(globals(), {
        "DraftTree": ["test_tree_"],
        "Эвристика H": ["heuristic"],
        "Шаг beam search": ["top_tokens", "expand_"],
        "EAGLE-2": ["eagle2_"],
        "Dynamic Depth Decoding": ["ddd_"],
        "Статическое дерево": ["static_"],
    })
