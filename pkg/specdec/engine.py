"""
Циклы декодирования (обычный и спекулятивный), учёт вызовов и модель стоимости.

Спекулятивный цикл: драфт → verify_greedy → коммит (принятые + бонус),
пока не набрано ≥ num_tokens; затем усечение до num_tokens. Результат
обязан совпадать с decode_vanilla токен в токен.
"""

import time
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import config
from .drafting import draft_ddd, draft_eagle2, draft_static
from .errors import ConfigError
from .models import CostModel, DddConfig, DecodeMetrics, DraftOutcome, StaticTreeTemplate
from .toy_models.base import ToyModel
from .verify import verify_greedy

STRATEGY_KINDS = ("static", "eagle2", "ddd")

STRATEGY_NAMES = {
    "eagle": ("static", False),
    "eagle2": ("eagle2", False),
    "ddd": ("ddd", False),
    "eagle2-strict": ("eagle2", True),
    "ddd-strict": ("ddd", True),
}


@dataclass(frozen=True)
class Strategy:
    """
    Стратегия драфтинга. strict — разрыв ленивого вычисления на каждом
    вызове драфт-модели: для eagle2 это forced_syncs на каждом шаге, для ddd —
    проверка эвристики на каждом шаге (S = {1, ..., n−1}).
    """
    kind: str
    name: str = ""
    template: StaticTreeTemplate = field(default_factory=StaticTreeTemplate)
    beam_width: int = config.BEAM_WIDTH
    depth: int = config.EAGLE2_DEPTH
    ddd: DddConfig = field(default_factory=DddConfig)
    strict: bool = False

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ConfigError(f"неизвестная стратегия: {self.kind!r}")
        if not self.name:
            object.__setattr__(self, "name", self.kind + ("-strict" if self.strict else ""))
        if self.kind == "ddd" and self.strict:
            every_step = tuple(range(1, self.ddd.max_steps))
            object.__setattr__(self, "ddd", replace(self.ddd, check_steps=every_step))

    @classmethod
    def static_tree(cls, template: Optional[StaticTreeTemplate] = None) -> "Strategy":
        return cls(kind="static", name="eagle", template=template or StaticTreeTemplate())

    @classmethod
    def eagle2(cls, w: int = config.BEAM_WIDTH, depth: int = config.EAGLE2_DEPTH,
               strict: bool = False) -> "Strategy":
        return cls(kind="eagle2", beam_width=w, depth=depth, strict=strict)

    @classmethod
    def dynamic_depth(cls, ddd: Optional[DddConfig] = None, strict: bool = False) -> "Strategy":
        return cls(kind="ddd", ddd=ddd or DddConfig(), strict=strict)

    def validate(self) -> "Strategy":
        if self.kind == "static":
            self.template.validate()
        elif self.kind == "eagle2":
            if self.beam_width < 1 or self.depth < 1:
                raise ConfigError(f"eagle2: w={self.beam_width}, depth={self.depth} должны быть ≥ 1")
        else:
            self.ddd.validate()
        return self

    def draft(self, root_context: Sequence[int], draft_model: ToyModel) -> DraftOutcome:
        if self.kind == "static":
            return draft_static(root_context, draft_model, self.template)
        if self.kind == "eagle2":
            return draft_eagle2(root_context, draft_model, self.beam_width, self.depth)
        return draft_ddd(root_context, draft_model, self.ddd)


def strategy_from_name(name: str, ddd: Optional[DddConfig] = None,
                       eagle2_depth: int = config.EAGLE2_DEPTH,
                       template: Optional[StaticTreeTemplate] = None) -> Strategy:
    """Имя из отчёта (eagle, eagle2, ddd, eagle2-strict, ddd-strict) → Strategy."""
    if name not in STRATEGY_NAMES:
        raise ConfigError(f"неизвестная стратегия {name!r}, доступны: {', '.join(STRATEGY_NAMES)}")
    kind, strict = STRATEGY_NAMES[name]
    ddd = ddd or DddConfig()
    if kind == "static":
        return Strategy.static_tree(template)
    if kind == "eagle2":
        return Strategy.eagle2(ddd.beam_width, eagle2_depth, strict=strict)
    return Strategy.dynamic_depth(ddd, strict=strict)


def decode_vanilla(target: ToyModel, prompt: Sequence[int], num_tokens: int,
                   metrics: Optional[DecodeMetrics] = None) -> List[int]:
    """Обычное авторегрессионное жадное декодирование: один вызов целевой модели на токен."""
    if num_tokens < 0:
        raise ConfigError(f"num_tokens должен быть ≥ 0, получено {num_tokens}")
    target.check_tokens(prompt)
    metrics = metrics if metrics is not None else DecodeMetrics()
    started = time.perf_counter()
    context = list(prompt)
    out: List[int] = []
    for _ in range(num_tokens):
        token = int(np.argmax(target.next_logprobs(context)))
        metrics.target_calls += 1
        metrics.tokens_generated += 1
        out.append(token)
        context.append(token)
    metrics.wall_time += time.perf_counter() - started
    return out


def decode_speculative(target: ToyModel, draft: ToyModel, strategy: Strategy,
                       prompt: Sequence[int], num_tokens: int) -> Tuple[List[int], DecodeMetrics]:
    if num_tokens < 0:
        raise ConfigError(f"num_tokens должен быть ≥ 0, получено {num_tokens}")
    strategy.validate()
    target.check_tokens(prompt)
    metrics = DecodeMetrics()
    started = time.perf_counter()
    context = list(prompt)
    out: List[int] = []
    while len(out) < num_tokens:
        outcome = strategy.draft(context, draft)
        metrics.draft_calls += outcome.steps_executed
        metrics.heuristic_checks += len(outcome.heuristic_checks)
        if strategy.strict and strategy.kind != "ddd":
            metrics.forced_syncs += outcome.steps_executed
        metrics.depth_histogram[outcome.steps_executed] += 1

        result = verify_greedy(target, outcome.tree)
        metrics.target_calls += 1
        metrics.tokens_generated += result.tokens_emitted
        metrics.accepted_length_histogram[len(result.accepted)] += 1

        out.extend(result.tokens)
        context.extend(result.tokens)
    metrics.wall_time += time.perf_counter() - started
    return out[:num_tokens], metrics


def modeled_speedup(metrics: DecodeMetrics, cost: CostModel,
                    baseline_tokens: Optional[int] = None) -> float:
    """
    (baseline_tokens · c_target) /
    (target_calls·c_target + draft_calls·c_draft + (heuristic_checks + forced_syncs)·c_sync)
    """
    cost.validate()
    if baseline_tokens is None:
        baseline_tokens = metrics.tokens_generated
    syncs = metrics.heuristic_checks + metrics.forced_syncs
    denom = metrics.target_calls * cost.c_target + metrics.draft_calls * cost.c_draft
    if syncs:
        denom += syncs * cost.c_sync
    if not denom > 0:
        raise ConfigError("модель стоимости: нулевой знаменатель (нет вызовов или все стоимости 0)")
    return baseline_tokens * cost.c_target / denom
