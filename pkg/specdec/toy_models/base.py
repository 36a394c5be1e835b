from functools import lru_cache
from typing import Sequence, Tuple

import numpy as np

from .. import config
from ..errors import InputError


class ToyModel:
    """
    Общая часть игрушечных моделей: выход зависит только от последних
    `order` токенов контекста, поэтому распределения кэшируются по хвосту
    (LRU, не больше cache_size хвостов). Короткий контекст дополняется слева токеном 0.
    """

    kind = ""

    def __init__(self, vocab_size: int, order: int, cache_size: int = config.MODEL_CACHE_SIZE):
        self.vocab_size = vocab_size
        self.order = order
        self._cached = lru_cache(maxsize=cache_size)(self._compute_frozen)

    def tail(self, context: Sequence[int]) -> Tuple[int, ...]:
        if self.order == 0:
            return ()
        tail = tuple(int(t) for t in context[-self.order:])
        if len(tail) < self.order:
            tail = (0,) * (self.order - len(tail)) + tail
        return tail

    def check_tokens(self, tokens: Sequence[int]):
        for t in tokens:
            if not 0 <= t < self.vocab_size:
                raise InputError(f"токен {t} вне словаря [0, {self.vocab_size})")

    def _compute_frozen(self, tail: Tuple[int, ...]) -> np.ndarray:
        self.check_tokens(tail)
        lp = self._compute(tail)
        lp.flags.writeable = False
        return lp

    def logprobs_for_tail(self, tail: Tuple[int, ...]) -> np.ndarray:
        return self._cached(tail)

    def cache_info(self):
        return self._cached.cache_info()

    def next_logprobs(self, context: Sequence[int]) -> np.ndarray:
        return self.logprobs_for_tail(self.tail(context))

    def _compute(self, tail: Tuple[int, ...]) -> np.ndarray:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}(V={self.vocab_size}, order={self.order})"
