"""
Бенчмарк-харнесс: загрузка промптов, конфигурация эксперимента,
сравнение стратегий, свипы параметров, CSV / текстовые таблицы.

Промпты: текстовый файл, один промпт на строку, токены = байты UTF-8 mod V;
либо N синтетических промптов из сидированного генератора.
"""

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import config
from .engine import STRATEGY_NAMES, decode_speculative, decode_vanilla, modeled_speedup, strategy_from_name
from .errors import ConfigError
from .lm_core import make_toy_pair
from .models import CostModel, DddConfig, DecodeMetrics, DraftOutcome, ModelSpec, StaticTreeTemplate
from .toy_models.ngram import encode_text

OUTPUT_FORMATS = ("text", "csv")

CONFIG_KEYS = (
    "model-kind", "vocab-size", "context-order", "seed", "draft-noise", "sharpness",
    "train-corpus", "models", "corpus", "synthetic", "prompt-length", "num-tokens", "strategies",
    "max-steps", "beam-width", "check-steps", "ddd-threshold", "eagle2-depth",
    "static-template", "c-target", "c-draft", "c-sync", "output", "format", "workers", "timing",
)

REPORT_COLUMNS = [
    "model", "strategy", "prompts", "target_calls", "draft_calls", "heuristic_checks", "forced_syncs",
    "tokens_generated", "tokens_per_call", "mean_depth", "mean_accepted", "modeled_speedup",
    "lossless_passes", "lossless_total", "depth_histogram",
]
TIMING_COLUMNS = ["wall_time_s", "ms_per_target_call"]

SWEEP_PARAMETERS = {
    # параметр → стратегия по умолчанию
    "threshold": "ddd",
    "beam-width": "eagle2",
    "max-steps": "ddd",
    "check-steps": "ddd",
    "draft-noise": "ddd",
    "eagle2-depth": "eagle2",
}


# ─────────────────────────────────────────────────────────────
# Конфигурация
# ─────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelSpec = field(default_factory=ModelSpec)
    train_corpus: str = ""                   # путь, откуда прочитан model.corpus
    presets: Tuple[str, ...] = ()            # пусто → одна модель self.model
    corpus_path: str = ""                    # пусто → синтетические промпты
    synthetic: int = config.SYNTHETIC_PROMPTS
    prompt_length: int = config.PROMPT_LENGTH
    num_tokens: int = config.NUM_TOKENS
    strategies: Tuple[str, ...] = config.STRATEGIES
    ddd: DddConfig = field(default_factory=DddConfig)
    eagle2_depth: int = config.EAGLE2_DEPTH
    template: StaticTreeTemplate = field(default_factory=StaticTreeTemplate)
    cost: CostModel = field(default_factory=CostModel)
    output: str = ""
    fmt: str = config.OUTPUT_FORMAT
    workers: int = config.WORKERS
    timing: bool = False

    def model_specs(self) -> List[Tuple[str, ModelSpec]]:
        """(имя, модель) для каждой модели эксперимента: пресеты поверх self.model."""
        if not self.presets:
            return [(self.model.label, self.model)]
        unknown = [p for p in self.presets if p not in config.MODEL_PRESETS]
        if unknown:
            raise ConfigError(f"неизвестные пресеты моделей: {unknown}; доступны: {', '.join(config.MODEL_PRESETS)}")
        return [(name, replace(self.model, **config.MODEL_PRESETS[name])) for name in self.presets]

    def validate(self) -> "ExperimentConfig":
        self.model.validate()
        specs = self.model_specs()
        for _, spec in specs:
            spec.validate()
        if len(set(self.presets)) != len(self.presets):
            raise ConfigError(f"пресеты моделей повторяются: {self.presets}")
        if (self.train_corpus or self.model.corpus) and not any(s.kind == "ngram" for _, s in specs):
            raise ConfigError("train-corpus задан, но ни одна модель не ngram: корпус не будет использован")
        self.ddd.validate()
        self.template.validate()
        self.cost.validate()
        if not self.strategies:
            raise ConfigError("нужна хотя бы одна стратегия")
        unknown = [s for s in self.strategies if s not in STRATEGY_NAMES]
        if unknown:
            raise ConfigError(f"неизвестные стратегии: {unknown}; доступны: {', '.join(STRATEGY_NAMES)}")
        if self.num_tokens < 1:
            raise ConfigError(f"num-tokens должен быть ≥ 1, получено {self.num_tokens}")
        if self.eagle2_depth < 1:
            raise ConfigError(f"eagle2-depth должен быть ≥ 1, получено {self.eagle2_depth}")
        if not self.corpus_path and self.synthetic < 1:
            raise ConfigError("нет источника промптов: задайте corpus или synthetic ≥ 1")
        if self.prompt_length < 0:
            raise ConfigError(f"prompt-length должен быть ≥ 0, получено {self.prompt_length}")
        if self.fmt not in OUTPUT_FORMATS:
            raise ConfigError(f"формат {self.fmt!r} не поддерживается: {OUTPUT_FORMATS}")
        if self.workers < 1:
            raise ConfigError(f"workers должен быть ≥ 1, получено {self.workers}")
        return self

    def as_config(self) -> Dict[str, str]:
        """Обратно к плоскому словарю: from_values(cfg.as_config()) == cfg."""
        return {
            **self.model.as_config(),
            "train-corpus": self.train_corpus,
            "models": ",".join(self.presets),
            "corpus": self.corpus_path,
            "synthetic": str(self.synthetic),
            "prompt-length": str(self.prompt_length),
            "num-tokens": str(self.num_tokens),
            "strategies": ",".join(self.strategies),
            **self.ddd.as_config(),
            "eagle2-depth": str(self.eagle2_depth),
            **self.template.as_config(),
            **self.cost.as_config(),
            "output": self.output,
            "format": self.fmt,
            "workers": str(self.workers),
            "timing": "true" if self.timing else "false",
        }

    @classmethod
    def from_values(cls, values: Dict[str, str]) -> "ExperimentConfig":
        """Плоский словарь ключ → строка (конфиг-файл + флаги CLI) → конфиг."""
        values = {config.normalize_key(k): v for k, v in values.items() if v is not None}
        unknown = sorted(set(values) - set(CONFIG_KEYS))
        if unknown:
            raise ConfigError(f"неизвестные ключи конфига: {', '.join(unknown)}")

        corpus_text = ""
        train_path = str(values.get("train-corpus", "")).strip()
        if train_path:
            corpus_text = _read_text(train_path, "train-corpus")

        ddd = DddConfig(
            max_steps=config.parse_int("max-steps", values.get("max-steps", config.DDD_MAX_STEPS)),
            beam_width=config.parse_int("beam-width", values.get("beam-width", config.BEAM_WIDTH)),
            check_steps=config.parse_int_list("check-steps", values.get("check-steps", config.DDD_CHECK_STEPS)),
            threshold=config.parse_float("ddd-threshold", values.get("ddd-threshold", config.DDD_THRESHOLD)),
        )
        strategies = values.get("strategies", ",".join(config.STRATEGIES))
        return cls(
            model=ModelSpec.from_config(values, corpus=corpus_text),
            train_corpus=train_path,
            presets=_split_names(values.get("models", "")),
            corpus_path=str(values.get("corpus", "")).strip(),
            synthetic=config.parse_int("synthetic", values.get("synthetic", config.SYNTHETIC_PROMPTS)),
            prompt_length=config.parse_int("prompt-length", values.get("prompt-length", config.PROMPT_LENGTH)),
            num_tokens=config.parse_int("num-tokens", values.get("num-tokens", config.NUM_TOKENS)),
            strategies=_split_names(strategies),
            ddd=ddd,
            eagle2_depth=config.parse_int("eagle2-depth", values.get("eagle2-depth", config.EAGLE2_DEPTH)),
            template=StaticTreeTemplate(config.parse_int_list(
                "static-template", values.get("static-template", config.STATIC_TEMPLATE))),
            cost=CostModel(
                c_target=config.parse_float("c-target", values.get("c-target", config.C_TARGET)),
                c_draft=config.parse_float("c-draft", values.get("c-draft", config.C_DRAFT)),
                c_sync=config.parse_float("c-sync", values.get("c-sync", config.C_SYNC)),
            ),
            output=str(values.get("output", "")).strip(),
            fmt=str(values.get("format", config.OUTPUT_FORMAT)).strip().lower(),
            workers=config.parse_int("workers", values.get("workers", config.WORKERS)),
            timing=config.parse_bool("timing", values.get("timing", False)),
        ).validate()


def _split_names(raw) -> Tuple[str, ...]:
    return tuple(s.strip() for s in str(raw).split(",") if s.strip())


def format_config(values: Dict[str, str]) -> str:
    """Словарь as_config() → текст в формате config.load_config_file."""
    return "".join(f"{key} = {value}\n" for key, value in values.items())


def _read_text(path: str, what: str) -> str:
    try:
        with open(path, encoding="utf-8") as f:
            return f.read()
    except (OSError, UnicodeDecodeError) as e:
        raise ConfigError(f"{what}: не удалось прочитать {path}: {e}")


def load_prompts(cfg: ExperimentConfig, model: Optional[ModelSpec] = None) -> List[List[int]]:
    """Корпус (строка → байты mod V) или cfg.synthetic сидированных промптов в словаре model."""
    model = model or cfg.model
    vocab = model.vocab_size
    if cfg.corpus_path:
        text = _read_text(cfg.corpus_path, "corpus")
        prompts = [encode_text(line, vocab) for line in text.splitlines() if line.strip()]
        if not prompts:
            raise ConfigError(f"corpus: в {cfg.corpus_path} нет непустых строк")
        return prompts
    return [
        [int(t) for t in np.random.default_rng([model.seed, i]).integers(0, vocab, cfg.prompt_length)]
        for i in range(cfg.synthetic)
    ]


# ─────────────────────────────────────────────────────────────
# Прогон эксперимента
# ─────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class LosslessCheck:
    model: str
    prompt: int
    strategy: str
    passed: bool


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    models: List[str] = field(default_factory=list)
    rows: List[dict] = field(default_factory=list)
    metrics: Dict[Tuple[str, str], DecodeMetrics] = field(default_factory=dict)   # (модель, стратегия)
    speedups: Dict[Tuple[str, str], float] = field(default_factory=dict)
    checks: List[LosslessCheck] = field(default_factory=list)
    log: List[str] = field(default_factory=list)

    def add_log(self, msg: str):
        self.log.append(msg)

    @property
    def all_lossless(self) -> bool:
        return all(c.passed for c in self.checks)

    def metrics_for(self, strategy: str, model: Optional[str] = None) -> DecodeMetrics:
        return self.metrics[(model or self.models[0], strategy)]

    def speedup_for(self, strategy: str, model: Optional[str] = None) -> float:
        return self.speedups[(model or self.models[0], strategy)]

    def depth_distribution(self, strategy: str, model: Optional[str] = None) -> Dict[int, int]:
        return dict(sorted(self.metrics_for(strategy, model).depth_histogram.items()))

    @property
    def columns(self) -> List[str]:
        return REPORT_COLUMNS + (TIMING_COLUMNS if self.config.timing else [])


def aggregate_row(model: str, name: str, metrics: DecodeMetrics, cost: CostModel,
                  prompts: int, passes: int, timing: bool = False) -> dict:
    rec = metrics.as_record()
    row = {
        "model": model,
        "strategy": name,
        "prompts": prompts,
        "target_calls": rec["target_calls"],
        "draft_calls": rec["draft_calls"],
        "heuristic_checks": rec["heuristic_checks"],
        "forced_syncs": rec["forced_syncs"],
        "tokens_generated": rec["tokens_generated"],
        "tokens_per_call": f"{metrics.tokens_per_call:.4f}",
        "mean_depth": f"{metrics.mean_depth:.4f}",
        "mean_accepted": f"{metrics.mean_accepted:.4f}",
        "modeled_speedup": f"{modeled_speedup(metrics, cost):.4f}",
        "lossless_passes": passes,
        "lossless_total": prompts,
        "depth_histogram": rec["depth_histogram"],
    }
    if timing:
        row["wall_time_s"] = f"{metrics.wall_time:.4f}"
        per_call = metrics.wall_time / metrics.target_calls * 1000 if metrics.target_calls else 0.0
        row["ms_per_target_call"] = f"{per_call:.4f}"
    return row


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """
    Все тройки (модель, промпт, стратегия), детерминированно. Для каждого
    промпта спекулятивный выход сверяется с обычным жадным декодированием.
    Строки отчёта идут по моделям, внутри модели — по стратегиям.
    """
    cfg.validate()
    report = ExperimentReport(config=cfg)
    report.add_log("[конфиг] " + " ".join(f"{k}={v}" for k, v in cfg.as_config().items()))
    strategies = [strategy_from_name(n, cfg.ddd, cfg.eagle2_depth, cfg.template) for n in cfg.strategies]
    report.add_log(f"[стратегии] {', '.join(s.name for s in strategies)}")
    for label, spec in cfg.model_specs():
        report.models.append(label)
        _run_model(cfg, report, label, spec, strategies)
    return report


def _run_model(cfg: ExperimentConfig, report: ExperimentReport, label: str,
               spec: ModelSpec, strategies: list):
    target, draft = make_toy_pair(spec)
    prompts = load_prompts(cfg, spec)

    source = cfg.corpus_path or f"synthetic x{cfg.synthetic} (len {cfg.prompt_length})"
    report.add_log(f"[модель {label}] {target!r}")
    report.add_log(f"[драфт]  {draft!r}")
    report.add_log(f"[промпты] {len(prompts)} из {source}, по {cfg.num_tokens} токенов")

    def run_prompt(item):
        index, prompt = item
        vanilla = decode_vanilla(target, prompt, cfg.num_tokens)
        out = []
        for strategy in strategies:
            tokens, metrics = decode_speculative(target, draft, strategy, prompt, cfg.num_tokens)
            out.append((strategy.name, tokens == vanilla, metrics))
        return index, out

    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        results = list(pool.map(run_prompt, enumerate(prompts)))

    totals = {s.name: DecodeMetrics() for s in strategies}
    passes = {s.name: 0 for s in strategies}
    for index, per_strategy in results:
        for name, ok, metrics in per_strategy:
            totals[name].merge(metrics)
            passes[name] += int(ok)
            report.checks.append(LosslessCheck(label, index, name, ok))
            if not ok:
                report.add_log(f"  ❌ {label}, промпт {index}, {name}: выход расходится с обычным декодированием")

    for strategy in strategies:
        name = strategy.name
        metrics = totals[name]
        report.metrics[(label, name)] = metrics
        report.speedups[(label, name)] = modeled_speedup(metrics, cfg.cost)
        report.rows.append(aggregate_row(label, name, metrics, cfg.cost, len(prompts), passes[name], cfg.timing))
        report.add_log(f"  {name:<14} ток./вызов {metrics.tokens_per_call:.3f}  "
                       f"глубина {metrics.mean_depth:.2f}  "
                       f"ускорение {report.speedups[(label, name)]:.3f}x  "
                       f"без потерь {passes[name]}/{len(prompts)}")


# ─────────────────────────────────────────────────────────────
# Свипы
# ─────────────────────────────────────────────────────────────

@dataclass
class SweepTable:
    parameter: str
    strategy: str
    columns: List[str]
    rows: List[dict] = field(default_factory=list)
    reports: List[ExperimentReport] = field(default_factory=list)

    @property
    def all_lossless(self) -> bool:
        return all(r.all_lossless for r in self.reports)


def parse_grid(parameter: str, raw: str) -> list:
    """'5,10,20' → [5, 10, 20]; для check-steps точки разделяются ';': '5,7,9;1,2,3'."""
    if parameter not in SWEEP_PARAMETERS:
        raise ConfigError(f"свип по {parameter!r} не поддерживается: {', '.join(SWEEP_PARAMETERS)}")
    if parameter == "check-steps":
        points = [config.parse_int_list(parameter, p) for p in str(raw).split(";")]
    elif parameter in ("threshold", "draft-noise"):
        points = [config.parse_float(parameter, p) for p in str(raw).split(",") if p.strip()]
    else:
        points = [config.parse_int(parameter, p) for p in str(raw).split(",") if p.strip()]
    if not points:
        raise ConfigError(f"пустая сетка для {parameter}")
    return points


def with_parameter(cfg: ExperimentConfig, parameter: str, value) -> ExperimentConfig:
    if parameter == "threshold":
        cfg = replace(cfg, ddd=replace(cfg.ddd, threshold=float(value)))
    elif parameter == "beam-width":
        cfg = replace(cfg, ddd=replace(cfg.ddd, beam_width=int(value)))
    elif parameter == "max-steps":
        n = int(value)
        # шаги проверки за пределами [1, n−1] недостижимы
        kept = tuple(s for s in cfg.ddd.check_steps if s < n)
        cfg = replace(cfg, ddd=replace(cfg.ddd, max_steps=n, check_steps=kept))
    elif parameter == "check-steps":
        cfg = replace(cfg, ddd=replace(cfg.ddd, check_steps=tuple(value)))
    elif parameter == "draft-noise":
        cfg = replace(cfg, model=replace(cfg.model, draft_noise=float(value)))
    elif parameter == "eagle2-depth":
        cfg = replace(cfg, eagle2_depth=int(value))
    else:
        raise ConfigError(f"свип по {parameter!r} не поддерживается")
    return cfg.validate()


def format_value(value) -> str:
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float) and math.isinf(value):
        return "-inf" if value < 0 else "inf"
    return str(value)


def sweep(cfg: ExperimentConfig, parameter: str, grid: Sequence,
          strategy: Optional[str] = None) -> SweepTable:
    """Строка на (точку сетки, модель): агрегаты и моделируемое ускорение одной стратегии."""
    if parameter not in SWEEP_PARAMETERS:
        raise ConfigError(f"свип по {parameter!r} не поддерживается: {', '.join(SWEEP_PARAMETERS)}")
    if not grid:
        raise ConfigError(f"пустая сетка для {parameter}")
    name = strategy or SWEEP_PARAMETERS[parameter]
    points = [replace(with_parameter(cfg, parameter, v), strategies=(name,)).validate() for v in grid]

    columns = ["parameter", "value"] + REPORT_COLUMNS + (TIMING_COLUMNS if cfg.timing else [])
    table = SweepTable(parameter=parameter, strategy=name, columns=columns)
    for value, point in zip(grid, points):
        report = run_experiment(point)
        table.reports.append(report)
        table.rows.extend({"parameter": parameter, "value": format_value(value), **row} for row in report.rows)
    return table


def dump_tree(cfg: ExperimentConfig, strategy: str = "ddd", prompt_index: int = 0) -> DraftOutcome:
    """Один цикл драфтинга на промпте prompt_index, первая модель эксперимента (отладка)."""
    cfg.validate()
    _, spec = cfg.model_specs()[0]
    _, draft = make_toy_pair(spec)
    prompts = load_prompts(cfg, spec)
    if not 0 <= prompt_index < len(prompts):
        raise ConfigError(f"промпт {prompt_index} вне [0, {len(prompts)})")
    chosen = strategy_from_name(strategy, cfg.ddd, cfg.eagle2_depth, cfg.template)
    return chosen.draft(prompts[prompt_index], draft)


# ─────────────────────────────────────────────────────────────
# Вывод
# ─────────────────────────────────────────────────────────────

def render_csv(columns: List[str], rows: List[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def render_text(columns: List[str], rows: List[dict], title: str = "") -> str:
    widths = {c: max([len(c)] + [len(str(r.get(c, ""))) for r in rows]) for c in columns}
    total = sum(widths.values()) + 2 * (len(columns) - 1)
    lines = []
    if title:
        lines += ["=" * total, f"  {title}", "=" * total]
    lines.append("  ".join(f"{c:<{widths[c]}}" for c in columns))
    lines.append("  ".join("-" * widths[c] for c in columns))
    for r in rows:
        lines.append("  ".join(
            f"{str(r.get(c, '')):<{widths[c]}}" if c in ("model", "strategy", "parameter", "depth_histogram")
            else f"{str(r.get(c, '')):>{widths[c]}}"
            for c in columns
        ))
    return "\n".join(lines) + "\n"


def render(columns: List[str], rows: List[dict], fmt: str, title: str = "") -> str:
    if fmt == "csv":
        return render_csv(columns, rows)
    return render_text(columns, rows, title)


def write_output(text: str, path: str):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(text)
