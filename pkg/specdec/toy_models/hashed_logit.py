"""
Hashed-logit модель: логит кандидата — функция 64-битного хэша
(seed, последние context_order токенов, кандидат).

  z  = Φ⁻¹(u(hash))                    — гауссов логит целевой модели
  ε  = Φ⁻¹(u(hash с солью шума))       — независимый шум
  logits = sharpness · (z + noise · ε)

Целевая модель — noise = 0; драфт — noise = draft_noise. При draft_noise = 0
драфт побитово совпадает с целевой моделью.
"""

from typing import Tuple

import numpy as np
from scipy.special import log_softmax, ndtri

from .. import config
from .base import ToyModel

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_NOISE_SALT = 0xD1B54A32D192ED03

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def mix64(x: int) -> int:
    """Финализатор splitmix64 на python int."""
    x &= MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def _mix64_array(x: np.ndarray) -> np.ndarray:
    # умножение uint64-массивов идёт по модулю 2**64
    x = (x ^ (x >> np.uint64(30))) * _M1
    x = (x ^ (x >> np.uint64(27))) * _M2
    return x ^ (x >> np.uint64(31))


def context_key(seed: int, tail: Tuple[int, ...], salt: int = 0) -> int:
    h = mix64(seed * _GOLDEN + salt)
    for tok in tail:
        h = mix64(h ^ ((tok + 1) * _GOLDEN & MASK64))
    return h


def gaussian_logits(key: int, vocab_size: int) -> np.ndarray:
    """Детерминированные N(0,1) значения для всех кандидатов словаря."""
    cand = np.arange(1, vocab_size + 1, dtype=np.uint64) * np.uint64(_GOLDEN)
    bits = _mix64_array(cand ^ np.uint64(key))
    u = ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53
    return ndtri(u)


class HashedLogitModel(ToyModel):
    kind = "hashed-logit"

    def __init__(self, vocab_size: int, order: int, seed: int,
                 sharpness: float, noise: float = 0.0, cache_size: int = config.MODEL_CACHE_SIZE):
        super().__init__(vocab_size, order, cache_size)
        self.seed = seed
        self.sharpness = sharpness
        self.noise = noise

    def _compute(self, tail):
        z = gaussian_logits(context_key(self.seed, tail), self.vocab_size)
        eps = gaussian_logits(context_key(self.seed, tail, _NOISE_SALT), self.vocab_size)
        return log_softmax(self.sharpness * (z + self.noise * eps))

    def __repr__(self):
        return (f"HashedLogitModel(V={self.vocab_size}, order={self.order}, "
                f"seed={self.seed}, sharpness={self.sharpness}, noise={self.noise})")
