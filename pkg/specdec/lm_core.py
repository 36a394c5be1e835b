"""
Абстракция языковой модели для драфта и верификации.

Модель — любой объект с полями vocab_size, order и методами
logprobs_for_tail(tail) / tail(context) (см. toy_models.base.ToyModel).
Все выходы — чистые функции (ModelSpec, контекст).
"""

from typing import List, Optional, Sequence, Tuple

import numpy as np

from .draft_tree import DraftTree
from .errors import ConfigError
from .models import ModelSpec
from .toy_models.base import ToyModel
from .toy_models.hashed_logit import HashedLogitModel
from .toy_models.ngram import NgramModel, encode_text, synthetic_corpus


def next_logprobs(model: ToyModel, context: Sequence[int]) -> np.ndarray:
    """Нормированный вектор log-вероятностей следующего токена (только для чтения)."""
    model.check_tokens(context)
    return model.next_logprobs(context)


def greedy_next(model: ToyModel, context: Sequence[int]) -> int:
    """argmax next_logprobs; при равенстве — наименьший TokenId (np.argmax берёт первый)."""
    return int(np.argmax(next_logprobs(model, context)))


def tree_logprobs(model: ToyModel, tree: DraftTree,
                  nodes: Optional[Sequence[int]] = None) -> List[np.ndarray]:
    """
    Скоринг дерева «за один проход»: элемент i равен
    next_logprobs(model, root_context ++ path_to_root(i)).

    nodes — подмножество узлов (фронтир beam search); по умолчанию все.
    """
    tree.validate(model.vocab_size)
    if nodes is None:
        nodes = range(len(tree))
    return [model.logprobs_for_tail(model.tail(tree.tail_context(i, model.order))) for i in nodes]


def make_toy_pair(spec: ModelSpec) -> Tuple[ToyModel, ToyModel]:
    """
    (целевая, драфт). hashed-logit: драфт = те же логиты + сидированный шум
    величины draft_noise. ngram: драфт обучен на том же корпусе с порядком на 1 меньше
    (при draft_noise > 0).
    """
    spec.validate()
    if spec.kind == "hashed-logit":
        target = HashedLogitModel(spec.vocab_size, spec.context_order, spec.seed, spec.sharpness)
        draft = HashedLogitModel(spec.vocab_size, spec.context_order, spec.seed,
                                 spec.sharpness, noise=spec.draft_noise)
        return target, draft
    if spec.kind == "ngram":
        if spec.corpus:
            corpus = encode_text(spec.corpus, spec.vocab_size)
        else:
            corpus = synthetic_corpus(spec.vocab_size, spec.seed)
        target = NgramModel(spec.vocab_size, spec.context_order, corpus)
        # draft_noise = 0 → драфт совпадает с целевой моделью
        draft_order = spec.context_order - 1 if spec.draft_noise > 0 else spec.context_order
        draft = NgramModel(spec.vocab_size, draft_order, corpus)
        return target, draft
    raise ConfigError(f"неизвестный тип модели: {spec.kind!r}")
