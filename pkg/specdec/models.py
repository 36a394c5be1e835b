from collections import Counter
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Dict, List, Tuple

from . import config
from .errors import ConfigError

if TYPE_CHECKING:
    from .draft_tree import DraftTree

MODEL_KINDS = ("hashed-logit", "ngram")

ROOT = -1


@dataclass(frozen=True)
class ModelSpec:
    """Описание игрушечной пары моделей (целевая + драфт)."""
    vocab_size: int = config.VOCAB_SIZE
    kind: str = config.MODEL_KIND            # "hashed-logit" | "ngram"
    context_order: int = config.CONTEXT_ORDER
    seed: int = config.MODEL_SEED
    draft_noise: float = config.DRAFT_NOISE  # в единицах разброса логитов
    sharpness: float = config.SHARPNESS      # масштаб логитов, 0 → равномерное
    corpus: str = ""                         # обучающий текст для ngram

    def validate(self) -> "ModelSpec":
        if self.vocab_size < 2:
            raise ConfigError(f"vocab_size должен быть ≥ 2, получено {self.vocab_size}")
        if self.kind not in MODEL_KINDS:
            raise ConfigError(f"неизвестный тип модели: {self.kind!r} (ожидается {MODEL_KINDS})")
        if self.seed < 0:
            raise ConfigError(f"seed должен быть ≥ 0, получено {self.seed}")
        if self.context_order < 1:
            raise ConfigError(f"context_order должен быть ≥ 1, получено {self.context_order}")
        if self.draft_noise < 0:
            raise ConfigError(f"draft_noise должен быть ≥ 0, получено {self.draft_noise}")
        if self.sharpness < 0:
            raise ConfigError(f"sharpness должен быть ≥ 0, получено {self.sharpness}")
        return self

    def as_config(self) -> Dict[str, str]:
        return {
            "model-kind": self.kind,
            "vocab-size": str(self.vocab_size),
            "context-order": str(self.context_order),
            "seed": str(self.seed),
            "draft-noise": repr(self.draft_noise),
            "sharpness": repr(self.sharpness),
        }

    @property
    def label(self) -> str:
        return f"{self.kind}-v{self.vocab_size}-k{self.context_order}"

    @classmethod
    def from_config(cls, values: Dict[str, str], corpus: str = "") -> "ModelSpec":
        return cls(
            vocab_size=config.parse_int("vocab-size", values.get("vocab-size", config.VOCAB_SIZE)),
            kind=str(values.get("model-kind", config.MODEL_KIND)).strip(),
            context_order=config.parse_int("context-order", values.get("context-order", config.CONTEXT_ORDER)),
            seed=config.parse_int("seed", values.get("seed", config.MODEL_SEED)),
            draft_noise=config.parse_float("draft-noise", values.get("draft-noise", config.DRAFT_NOISE)),
            sharpness=config.parse_float("sharpness", values.get("sharpness", config.SHARPNESS)),
            corpus=corpus,
        ).validate()


@dataclass(frozen=True)
class DraftNode:
    """Узел дерева драфта. parent == ROOT для узлов глубины 1."""
    token: int
    parent: int
    depth: int
    logprob: float
    cum_logprob: float      # logprobsum пути от корня


@dataclass(frozen=True)
class StaticTreeTemplate:
    """Статическое дерево EAGLE: сколько лучших детей раскрывает каждый узел глубины d."""
    children_per_depth: Tuple[int, ...] = config.STATIC_TEMPLATE

    @property
    def depth(self) -> int:
        return len(self.children_per_depth)

    def node_count(self) -> int:
        total, width = 0, 1
        for k in self.children_per_depth:
            width *= k
            total += width
        return total

    def validate(self) -> "StaticTreeTemplate":
        if not self.children_per_depth:
            raise ConfigError("шаблон статического дерева пуст")
        if any(k < 1 for k in self.children_per_depth):
            raise ConfigError(f"все элементы шаблона должны быть ≥ 1: {self.children_per_depth}")
        return self

    def as_config(self) -> Dict[str, str]:
        return {"static-template": ",".join(str(k) for k in self.children_per_depth)}


@dataclass(frozen=True)
class DddConfig:
    """Параметры Dynamic Depth Decoding: n, w, S, x."""
    max_steps: int = config.DDD_MAX_STEPS
    beam_width: int = config.BEAM_WIDTH
    check_steps: Tuple[int, ...] = config.DDD_CHECK_STEPS
    threshold: float = config.DDD_THRESHOLD

    def __post_init__(self):
        object.__setattr__(self, "check_steps", tuple(sorted(set(self.check_steps))))

    def validate(self) -> "DddConfig":
        if self.max_steps < 1:
            raise ConfigError(f"max_steps должен быть ≥ 1, получено {self.max_steps}")
        if self.beam_width < 1:
            raise ConfigError(f"beam_width должен быть ≥ 1, получено {self.beam_width}")
        bad = [s for s in self.check_steps if not 1 <= s <= self.max_steps - 1]
        if bad:
            raise ConfigError(
                f"шаги проверки {bad} вне диапазона [1, {self.max_steps - 1}]"
            )
        if self.threshold != self.threshold:
            raise ConfigError("threshold не может быть NaN")
        return self

    def as_config(self) -> Dict[str, str]:
        return {
            "max-steps": str(self.max_steps),
            "beam-width": str(self.beam_width),
            "check-steps": ",".join(str(s) for s in self.check_steps) or "none",
            "ddd-threshold": repr(self.threshold),
        }


@dataclass(frozen=True)
class Beam:
    """Фронтир beam search: (индекс узла, logprobsum), по убыванию logprobsum."""
    members: Tuple[Tuple[int, float], ...]

    def __len__(self) -> int:
        return len(self.members)

    def nodes(self) -> List[int]:
        return [node for node, _ in self.members]

    def logprobsums(self) -> List[float]:
        return [lps for _, lps in self.members]


@dataclass(frozen=True)
class HeuristicCheck:
    step: int
    value: float
    continued: bool


@dataclass
class DraftOutcome:
    """Результат одной фазы драфтинга."""
    tree: "DraftTree"
    steps_executed: int
    heuristic_checks: List[HeuristicCheck] = field(default_factory=list)

    def to_record(self) -> dict:
        return {
            "steps_executed": self.steps_executed,
            "heuristic_checks": [
                {"step": c.step, "H": c.value, "continued": c.continued}
                for c in self.heuristic_checks
            ],
            "nodes": self.tree.to_records(),
        }


@dataclass
class VerifyResult:
    accepted: List[int]           # индексы узлов принятого пути
    accepted_tokens: List[int]
    bonus: int

    @property
    def tokens_emitted(self) -> int:
        return len(self.accepted) + 1

    @property
    def tokens(self) -> List[int]:
        return self.accepted_tokens + [self.bonus]


METRIC_FIELDS = [
    "target_calls", "draft_calls", "heuristic_checks", "forced_syncs",
    "tokens_generated", "tokens_per_call", "mean_depth", "mean_accepted",
    "depth_histogram", "accepted_length_histogram",
]


@dataclass
class DecodeMetrics:
    """Учёт вызовов одной (или агрегированной) сессии декодирования."""
    target_calls: int = 0
    draft_calls: int = 0           # раундов скоринга драфт-моделью
    heuristic_checks: int = 0
    forced_syncs: int = 0          # strict-режим: разрыв ленивого вычисления на каждом шаге
    tokens_generated: int = 0      # сумма tokens_emitted до финального усечения
    depth_histogram: Counter = field(default_factory=Counter)
    accepted_length_histogram: Counter = field(default_factory=Counter)
    wall_time: float = 0.0

    @property
    def tokens_per_call(self) -> float:
        return self.tokens_generated / self.target_calls if self.target_calls else 0.0

    @property
    def mean_depth(self) -> float:
        n = sum(self.depth_histogram.values())
        return sum(d * c for d, c in self.depth_histogram.items()) / n if n else 0.0

    @property
    def mean_accepted(self) -> float:
        n = sum(self.accepted_length_histogram.values())
        return sum(a * c for a, c in self.accepted_length_histogram.items()) / n if n else 0.0

    def merge(self, other: "DecodeMetrics") -> "DecodeMetrics":
        self.target_calls += other.target_calls
        self.draft_calls += other.draft_calls
        self.heuristic_checks += other.heuristic_checks
        self.forced_syncs += other.forced_syncs
        self.tokens_generated += other.tokens_generated
        self.depth_histogram.update(other.depth_histogram)
        self.accepted_length_histogram.update(other.accepted_length_histogram)
        self.wall_time += other.wall_time
        return self

    def as_record(self) -> dict:
        return {
            "target_calls": self.target_calls,
            "draft_calls": self.draft_calls,
            "heuristic_checks": self.heuristic_checks,
            "forced_syncs": self.forced_syncs,
            "tokens_generated": self.tokens_generated,
            "tokens_per_call": round(self.tokens_per_call, 4),
            "mean_depth": round(self.mean_depth, 4),
            "mean_accepted": round(self.mean_accepted, 4),
            "depth_histogram": _format_histogram(self.depth_histogram),
            "accepted_length_histogram": _format_histogram(self.accepted_length_histogram),
        }


def _format_histogram(hist: Counter) -> str:
    """{5: 3, 11: 2} → '5:3;11:2'."""
    return ";".join(f"{k}:{hist[k]}" for k in sorted(hist))


@dataclass(frozen=True)
class CostModel:
    """Параметрическая стоимость вместо GPU-времени."""
    c_target: float = config.C_TARGET
    c_draft: float = config.C_DRAFT
    c_sync: float = config.C_SYNC    # штраф за каждую проверку эвристики

    def validate(self) -> "CostModel":
        for name in ("c_target", "c_draft", "c_sync"):
            value = getattr(self, name)
            if not value >= 0:
                raise ConfigError(f"{name} должен быть ≥ 0, получено {value}")
        return self

    def as_config(self) -> Dict[str, str]:
        return {"c-target": repr(self.c_target), "c-draft": repr(self.c_draft), "c-sync": repr(self.c_sync)}
