"""
Дерево драфта: общий объект для всех стратегий драфтинга и для верификации.

Узлы только добавляются (append-only); порядок списка топологический —
родитель всегда раньше ребёнка. «Обрезка» дерева строит новое дерево.
"""

import json
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import InputError, StructuralError
from .models import ROOT, DraftNode

CUM_TOL = 1e-12


class DraftTree:
    def __init__(self, root_context: Sequence[int], vocab_size: Optional[int] = None):
        self.root_context: Tuple[int, ...] = tuple(int(t) for t in root_context)
        self.vocab_size = vocab_size
        self.nodes: List[DraftNode] = []
        self._children: Dict[int, List[int]] = {ROOT: []}
        self._checked = 0
        self._checked_vocab: Optional[int] = None
        if vocab_size is not None:
            self._check_token_range(self.root_context, vocab_size)

    def __len__(self) -> int:
        return len(self.nodes)

    def __repr__(self):
        return f"DraftTree(root_context=<{len(self.root_context)} tok>, nodes={len(self.nodes)})"

    # ── построение ──

    def add_child(self, parent: int, token: int, logprob: float) -> int:
        if parent != ROOT and not 0 <= parent < len(self.nodes):
            raise StructuralError(f"родитель {parent} не существует (узлов: {len(self.nodes)})")
        if logprob != logprob or logprob > 0:
            raise InputError(f"logprob должен быть ≤ 0, получено {logprob}")
        if self.vocab_size is not None and not 0 <= token < self.vocab_size:
            raise InputError(f"токен {token} вне словаря [0, {self.vocab_size})")
        if parent == ROOT:
            depth, cum = 1, logprob
        else:
            p = self.nodes[parent]
            depth, cum = p.depth + 1, p.cum_logprob + logprob
        self.nodes.append(DraftNode(int(token), parent, depth, float(logprob), float(cum)))
        index = len(self.nodes) - 1
        self._children[parent].append(index)
        self._children[index] = []
        return index

    def prefix(self, count: int) -> "DraftTree":
        """Новое дерево из первых count узлов."""
        if not 0 <= count <= len(self.nodes):
            raise StructuralError(f"префикс {count} вне [0, {len(self.nodes)}]")
        tree = DraftTree(self.root_context, self.vocab_size)
        for node in self.nodes[:count]:
            tree.add_child(node.parent, node.token, node.logprob)
        return tree

    # ── навигация ──

    def node(self, index: int) -> DraftNode:
        if not 0 <= index < len(self.nodes):
            raise StructuralError(f"узел {index} не существует (узлов: {len(self.nodes)})")
        return self.nodes[index]

    def children(self, index: int) -> List[int]:
        if index != ROOT:
            self.node(index)
        return list(self._children[index])

    def path_to_root(self, index: int) -> List[int]:
        """Токены от узла глубины 1 до узла включительно."""
        path = []
        while index != ROOT:
            node = self.node(index)
            path.append(node.token)
            index = node.parent
        path.reverse()
        return path

    def context_of(self, index: int) -> List[int]:
        """root_context ++ path_to_root(index); ROOT → root_context."""
        if index == ROOT:
            return list(self.root_context)
        return list(self.root_context) + self.path_to_root(index)

    def tail_context(self, index: int, k: int) -> Tuple[int, ...]:
        """Последние k токенов context_of(index) без построения всего контекста."""
        if k == 0:
            return ()
        rev = []
        while index != ROOT and len(rev) < k:
            node = self.node(index)
            rev.append(node.token)
            index = node.parent
        rev.reverse()
        need = k - len(rev)
        head = self.root_context[-need:] if need and self.root_context else ()
        return tuple(head) + tuple(rev)

    # ── проверка инвариантов ──

    def validate(self, vocab_size: Optional[int] = None) -> "DraftTree":
        """Топологический порядок, глубины, cum_logprob и диапазон токенов. Инкрементально."""
        vocab_size = vocab_size if vocab_size is not None else self.vocab_size
        if vocab_size != self._checked_vocab:
            self._checked = 0
            if vocab_size is not None:
                self._check_token_range(self.root_context, vocab_size)
            self._checked_vocab = vocab_size
        for i in range(self._checked, len(self.nodes)):
            node = self.nodes[i]
            if node.parent == ROOT:
                exp_depth, exp_cum = 1, node.logprob
            elif 0 <= node.parent < i:
                parent = self.nodes[node.parent]
                exp_depth, exp_cum = parent.depth + 1, parent.cum_logprob + node.logprob
            else:
                raise StructuralError(f"узел {i}: родитель {node.parent} не предшествует узлу")
            if node.depth != exp_depth:
                raise StructuralError(f"узел {i}: глубина {node.depth}, ожидалась {exp_depth}")
            if abs(node.cum_logprob - exp_cum) > CUM_TOL and node.cum_logprob != exp_cum:
                raise StructuralError(f"узел {i}: cum_logprob {node.cum_logprob} ≠ {exp_cum}")
            if vocab_size is not None and not 0 <= node.token < vocab_size:
                raise StructuralError(f"узел {i}: токен {node.token} вне словаря")
        self._checked = len(self.nodes)
        return self

    @staticmethod
    def _check_token_range(tokens: Sequence[int], vocab_size: int):
        for t in tokens:
            if not 0 <= t < vocab_size:
                raise InputError(f"токен контекста {t} вне словаря [0, {vocab_size})")

    # ── дампы ──

    def to_records(self) -> List[dict]:
        return [
            {"index": i, "token": n.token, "parent": n.parent, "depth": n.depth,
             "logprob": n.logprob, "cum_logprob": n.cum_logprob}
            for i, n in enumerate(self.nodes)
        ]

    def to_json(self) -> str:
        return json.dumps({"root_context": list(self.root_context), "nodes": self.to_records()},
                          ensure_ascii=False)

    def to_text(self) -> str:
        lines = [f"ROOT (контекст: {len(self.root_context)} ток., узлов: {len(self.nodes)})"]

        def walk(index: int):
            for child in self._children[index]:
                n = self.nodes[child]
                lines.append(f"{'  ' * n.depth}[{child}] tok={n.token} "
                             f"lp={n.logprob:.4f} cum={n.cum_logprob:.4f}")
                walk(child)

        walk(ROOT)
        return "\n".join(lines)
