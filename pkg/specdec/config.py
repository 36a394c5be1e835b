import os

from .errors import ConfigError

BASE_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
PROMPTS_DIR = os.path.join(BASE_DIR, "prompts")

# Загружаем .env если есть
_env_path = os.path.join(BASE_DIR, ".env")
if os.path.exists(_env_path):
    with open(_env_path) as f:
        for line in f:
            line = line.strip()
            if line and not line.startswith("#") and "=" in line:
                key, _, val = line.partition("=")
                os.environ.setdefault(key.strip(), val.strip())

# Путь к конфигу эксперимента по умолчанию (перекрывается --config)
SPECDEC_CONFIG = os.environ.get("SPECDEC_CONFIG", "")

SAMPLE_CORPUS = os.path.join(PROMPTS_DIR, "sample.txt")

# Игрушечные модели
MODEL_KIND = "hashed-logit"
VOCAB_SIZE = 64
CONTEXT_ORDER = 2
MODEL_SEED = 0
SHARPNESS = 8.0
DRAFT_NOISE = 0.3
MODEL_CACHE_SIZE = 1 << 16     # распределений на модель, LRU

# Пресеты для ключа models: поля ModelSpec поверх базовой модели.
# seed и draft-noise берутся из базовой модели.
MODEL_PRESETS = {
    "hashed-small": {"kind": "hashed-logit", "vocab_size": 64, "context_order": 2, "sharpness": 8.0},
    "hashed-large": {"kind": "hashed-logit", "vocab_size": 256, "context_order": 2, "sharpness": 10.0},
    "ngram-2": {"kind": "ngram", "vocab_size": 64, "context_order": 2},
    "ngram-3": {"kind": "ngram", "vocab_size": 64, "context_order": 3},
}

# Параметры драфтинга (EAGLE-2 и DDD)
BEAM_WIDTH = 10
EAGLE2_DEPTH = 6
DDD_MAX_STEPS = 11
DDD_CHECK_STEPS = (5, 7, 9)
DDD_THRESHOLD = -0.3
STATIC_TEMPLATE = (4, 2, 2, 1, 1, 1)

# Модель стоимости, в единицах одного вызова целевой модели
C_TARGET = 1.0
C_DRAFT = 0.05
C_SYNC = 0.02

# Эксперимент
NUM_TOKENS = 256
SYNTHETIC_PROMPTS = 10
PROMPT_LENGTH = 8
STRATEGIES = ("eagle", "eagle2", "ddd", "eagle2-strict", "ddd-strict")
OUTPUT_FORMAT = "text"
WORKERS = 1


def normalize_key(key: str) -> str:
    """'--beam_width' → 'beam-width'."""
    return key.strip().lstrip("-").replace("_", "-").lower()


def load_config_file(path: str) -> dict:
    """
    Плоский конфиг эксперимента: строки `ключ = значение`, `#` — комментарий.
    Значения возвращаются строками, разбор типов — в bench.ExperimentConfig.
    """
    if not os.path.exists(path):
        raise ConfigError(f"конфиг не найден: {path}")
    values = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: ожидается 'ключ = значение'")
            key, _, val = line.partition("=")
            values[normalize_key(key)] = val.split("#", 1)[0].strip()
    return values


def parse_int(key: str, raw) -> int:
    try:
        return int(str(raw).strip())
    except (ValueError, TypeError):
        raise ConfigError(f"{key}: ожидается целое, получено {raw!r}")


def parse_float(key: str, raw) -> float:
    """Понимает 'inf', '-inf', '+1', '-0.3'."""
    try:
        value = float(str(raw).strip())
    except (ValueError, TypeError):
        raise ConfigError(f"{key}: ожидается число, получено {raw!r}")
    if value != value:
        raise ConfigError(f"{key}: NaN недопустим")
    return value


def parse_int_list(key: str, raw) -> tuple:
    """'5,7,9' → (5, 7, 9); пустая строка или 'none' → ()."""
    if isinstance(raw, (list, tuple, set, frozenset)):
        return tuple(parse_int(key, v) for v in raw)
    text = str(raw).strip()
    if not text or text.lower() in ("none", "{}", "[]"):
        return ()
    return tuple(parse_int(key, part) for part in text.strip("[]{}").split(",") if part.strip())


def parse_bool(key: str, raw) -> bool:
    if isinstance(raw, bool):
        return raw
    text = str(raw).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off", ""):
        return False
    raise ConfigError(f"{key}: ожидается true/false, получено {raw!r}")
