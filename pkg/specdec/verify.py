"""
Жадная (temperature = 0) верификация дерева драфта целевой моделью.

Один проход: tree_logprobs по всему дереву + скоринг корневого контекста,
затем линейный спуск по дереву вдоль argmax целевой модели. Объём работы
целевой модели не зависит от того, какой путь будет принят.
"""

import numpy as np

from .draft_tree import DraftTree
from .errors import StructuralError
from .lm_core import tree_logprobs
from .models import ROOT, VerifyResult
from .toy_models.base import ToyModel


def verify_greedy(target: ToyModel, tree: DraftTree) -> VerifyResult:
    node_lps = tree_logprobs(target, tree)
    want = int(np.argmax(target.next_logprobs(tree.root_context)))

    accepted, tokens = [], []
    current = ROOT
    while True:
        matches = [c for c in tree.children(current) if tree.nodes[c].token == want]
        if not matches:
            break
        if len(matches) > 1:
            raise StructuralError(
                f"у узла {current} несколько детей с токеном {want}: {matches}"
            )
        current = matches[0]
        accepted.append(current)
        tokens.append(want)
        want = int(np.argmax(node_lps[current]))

    return VerifyResult(accepted=accepted, accepted_tokens=tokens, bonus=want)
