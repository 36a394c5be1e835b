#!/usr/bin/env python3
"""
Точка входа: сравнение стратегий спекулятивного декодирования.

  python run.py run                          # EAGLE / EAGLE-2 / DDD (+ strict) на умолчаниях
  python run.py sweep --parameter beam-width --grid 5,10,20,50,75,100
  python run.py sweep --parameter threshold --grid -inf,-0.3,1
  python run.py run --models hashed-small,ngram-2 --format csv
  python run.py dump-tree --strategy ddd

Приоритет настроек: умолчания < конфиг (--config или $SPECDEC_CONFIG) < флаги.
Коды выхода: 0 — всё без потерь, 1 — расхождение с обычным декодированием,
2 — ошибка конфигурации / корпуса.
"""

import argparse
import json
import sys
from typing import List

from specdec import config
from specdec.bench import (CONFIG_KEYS, SWEEP_PARAMETERS, ExperimentConfig, dump_tree, parse_grid,
                           render, run_experiment, sweep, write_output)
from specdec.engine import STRATEGY_NAMES
from specdec.errors import SpecDecError

FLAG_HELP = {
    "model-kind": "hashed-logit | ngram",
    "vocab-size": f"размер словаря (по умолчанию {config.VOCAB_SIZE})",
    "context-order": f"порядок контекста модели (по умолчанию {config.CONTEXT_ORDER})",
    "seed": "сид моделей и синтетических промптов",
    "draft-noise": f"шум драфт-модели (по умолчанию {config.DRAFT_NOISE})",
    "sharpness": f"масштаб логитов hashed-logit (по умолчанию {config.SHARPNESS})",
    "train-corpus": "текст для обучения ngram-модели",
    "models": f"пресеты моделей через запятую: {', '.join(config.MODEL_PRESETS)}",
    "corpus": "файл промптов, один на строку",
    "synthetic": f"N синтетических промптов (по умолчанию {config.SYNTHETIC_PROMPTS})",
    "prompt-length": "длина синтетического промпта",
    "num-tokens": f"токенов на промпт (по умолчанию {config.NUM_TOKENS})",
    "strategies": f"через запятую из: {', '.join(STRATEGY_NAMES)}",
    "max-steps": f"DDD: n (по умолчанию {config.DDD_MAX_STEPS})",
    "beam-width": f"w для EAGLE-2 и DDD (по умолчанию {config.BEAM_WIDTH})",
    "check-steps": "DDD: S, например 5,7,9",
    "ddd-threshold": f"DDD: x (по умолчанию {config.DDD_THRESHOLD}), допускаются -inf и inf",
    "eagle2-depth": f"глубина EAGLE-2 (по умолчанию {config.EAGLE2_DEPTH})",
    "static-template": "шаблон дерева EAGLE, например 4,2,2,1,1,1",
    "c-target": "стоимость вызова целевой модели",
    "c-draft": "стоимость раунда драфт-модели",
    "c-sync": "стоимость проверки эвристики / синхронизации",
    "output": "файл для отчёта (иначе stdout)",
    "format": "text | csv",
    "workers": "параллельных промптов",
    "timing": "флаг: добавить измеренное время (отчёт перестаёт быть побайтово воспроизводимым)",
}

VALUE_FLAGS = {f"--{key}" for key in CONFIG_KEYS if key != "timing"} | {"--grid", "--prompt-index"}


def print_header(title: str):
    width = 70
    print(file=sys.stderr)
    print("=" * width, file=sys.stderr)
    print(f"  {title}", file=sys.stderr)
    print("=" * width, file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=config.SPECDEC_CONFIG,
                        help="плоский конфиг 'ключ = значение' (по умолчанию $SPECDEC_CONFIG)")
    common.add_argument("-v", "--verbose", action="store_true", help="лог прогона в stderr")
    for key in CONFIG_KEYS:
        if key == "timing":
            common.add_argument("--timing", nargs="?", const="true", default=None, help=FLAG_HELP[key])
            continue
        common.add_argument(f"--{key}", dest=key.replace("-", "_"), default=None, help=FLAG_HELP.get(key))

    parser = argparse.ArgumentParser(description="Спекулятивное декодирование: EAGLE / EAGLE-2 / DDD")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("run", parents=[common], help="сравнить стратегии")

    p_sweep = sub.add_parser("sweep", parents=[common], help="свип одного параметра")
    p_sweep.add_argument("--parameter", required=True, choices=sorted(SWEEP_PARAMETERS))
    p_sweep.add_argument("--grid", required=True,
                         help="значения через запятую; для check-steps точки через ';'")
    p_sweep.add_argument("--strategy", choices=sorted(STRATEGY_NAMES), default=None)

    p_dump = sub.add_parser("dump-tree", parents=[common], help="один цикл драфтинга, печать дерева")
    p_dump.add_argument("--strategy", choices=sorted(STRATEGY_NAMES), default="ddd")
    p_dump.add_argument("--prompt-index", type=int, default=0)
    p_dump.add_argument("--dump-format", choices=("text", "json"), default="text")
    return parser


def _is_number_list(token: str) -> bool:
    try:
        float(token.replace(";", ",").split(",")[0])
    except ValueError:
        return False
    return True


def join_negative_values(argv: List[str]) -> List[str]:
    """
    ['--ddd-threshold', '-inf'] → ['--ddd-threshold=-inf']: argparse принимает
    значение, начинающееся с '-', за флаг, если это не простое отрицательное число.
    """
    out, i = [], 0
    while i < len(argv):
        token = argv[i]
        if token in VALUE_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-") \
                and _is_number_list(argv[i + 1]):
            out.append(f"{token}={argv[i + 1]}")
            i += 2
            continue
        out.append(token)
        i += 1
    return out


def collect_values(args: argparse.Namespace) -> dict:
    values = {}
    if args.config:
        values.update(config.load_config_file(args.config))
    for key in CONFIG_KEYS:
        flag = getattr(args, key.replace("-", "_"))
        if flag is not None:
            values[key] = flag
    return values


def emit(text: str, cfg: ExperimentConfig):
    if cfg.output:
        write_output(text, cfg.output)
    else:
        sys.stdout.write(text)


def cmd_run(cfg: ExperimentConfig, verbose: bool) -> int:
    report = run_experiment(cfg)
    if verbose:
        print_header("ПРОГОН: стратегии × промпты")
        for line in report.log:
            print(f"  {line}", file=sys.stderr)
    emit(render(report.columns, report.rows, cfg.fmt, title="Моделируемое ускорение по стратегиям"), cfg)
    if not report.all_lossless:
        failed = [c for c in report.checks if not c.passed]
        print(f"ОШИБКА: {len(failed)} прогонов не совпали с обычным декодированием", file=sys.stderr)
        return 1
    return 0


def cmd_sweep(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    grid = parse_grid(args.parameter, args.grid)
    table = sweep(cfg, args.parameter, grid, strategy=args.strategy)
    if args.verbose:
        print_header(f"СВИП: {table.parameter} ({table.strategy}), точек: {len(grid)}")
        for report in table.reports:
            for line in report.log:
                print(f"  {line}", file=sys.stderr)
    emit(render(table.columns, table.rows, cfg.fmt,
                title=f"Свип {table.parameter}, стратегия {table.strategy}"), cfg)
    if not table.all_lossless:
        print("ОШИБКА: есть расхождения с обычным декодированием", file=sys.stderr)
        return 1
    return 0


def cmd_dump_tree(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    outcome = dump_tree(cfg, args.strategy, args.prompt_index)
    if args.dump_format == "json":
        text = json.dumps(outcome.to_record(), ensure_ascii=False, indent=1) + "\n"
    else:
        checks = ", ".join(f"шаг {c.step}: H={c.value:.4f} {'→' if c.continued else 'стоп'}"
                           for c in outcome.heuristic_checks) or "—"
        text = (f"стратегия: {args.strategy}, шагов драфта: {outcome.steps_executed}\n"
                f"проверки: {checks}\n{outcome.tree.to_text()}\n")
    emit(text, cfg)
    return 0


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(join_negative_values(argv))
    try:
        cfg = ExperimentConfig.from_values(collect_values(args))
        if args.command == "run":
            return cmd_run(cfg, args.verbose)
        if args.command == "sweep":
            return cmd_sweep(cfg, args)
        return cmd_dump_tree(cfg, args)
    except (SpecDecError, OSError) as e:
        print(f"ошибка: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
