"""
N-gram модель со сглаживанием Лапласа (add-one):

  P(t | ctx) = (c(ctx, t) + 1) / (c(ctx) + V)

Корпус токенизируется побайтово: байт UTF-8 mod V.
"""

from collections import defaultdict
from typing import List, Sequence

import numpy as np

from .. import config
from .base import ToyModel

SYNTHETIC_CORPUS_LEN = 20_000


def encode_text(text: str, vocab_size: int) -> List[int]:
    return [b % vocab_size for b in text.encode("utf-8")]


def synthetic_corpus(vocab_size: int, seed: int, length: int = SYNTHETIC_CORPUS_LEN) -> List[int]:
    """Корпус из разреженной случайной марковской цепи (строки Dirichlet(0.1))."""
    rng = np.random.default_rng(seed)
    cdf = np.cumsum(rng.dirichlet(np.full(vocab_size, 0.1), size=vocab_size), axis=1)
    draws = rng.random(length)
    tokens = [int(rng.integers(vocab_size))]
    for u in draws[1:]:
        nxt = int(np.searchsorted(cdf[tokens[-1]], u * cdf[tokens[-1], -1], side="right"))
        tokens.append(min(nxt, vocab_size - 1))
    return tokens


class NgramModel(ToyModel):
    kind = "ngram"

    def __init__(self, vocab_size: int, order: int, corpus: Sequence[int],
                 cache_size: int = config.MODEL_CACHE_SIZE):
        super().__init__(vocab_size, order, cache_size)
        self.check_tokens(corpus)
        self._counts = defaultdict(lambda: np.zeros(vocab_size, dtype=np.float64))
        padded = [0] * order + list(corpus)
        for i, tok in enumerate(corpus):
            self._counts[tuple(padded[i:i + order])][tok] += 1
        self._counts = dict(self._counts)

    def _compute(self, tail):
        counts = self._counts.get(tail)
        if counts is None:
            return np.full(self.vocab_size, -np.log(self.vocab_size))
        return np.log1p(counts) - np.log(counts.sum() + self.vocab_size)
