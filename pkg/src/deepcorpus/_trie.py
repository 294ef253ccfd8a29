"""Integer-keyed prefix trie shared by the gazetteer and the subword encoder.

Keys are sequences of non-negative ints (token ids or code points). Each
terminal node carries a payload index. Two views of the same trie are kept:
nested dicts for the pure-Python scanner and flat CSR arrays (children sorted
by key) for the compiled one.
"""
from __future__ import annotations

from typing import Iterable, Iterator, Sequence

import numpy as np


class TokenTrie:
    __slots__ = ("children", "payload", "ptr", "keys", "child", "out", "max_depth")

    def __init__(self, entries: Iterable[tuple[Sequence[int], int]] = ()):
        self.children: list[dict[int, int]] = [{}]
        self.payload: list[int] = [-1]
        self.max_depth = 0
        for key, value in entries:
            self._insert(key, value)
        self._freeze()

    def _insert(self, key: Sequence[int], value: int) -> None:
        if len(key) == 0:
            raise ValueError("empty key")
        node = 0
        for sym in key:
            if sym < 0:
                raise ValueError(f"negative symbol {sym}")
            nxt = self.children[node].get(sym)
            if nxt is None:
                nxt = len(self.children)
                self.children[node][sym] = nxt
                self.children.append({})
                self.payload.append(-1)
            node = nxt
        if self.payload[node] != -1 and self.payload[node] != value:
            raise ValueError(f"key {tuple(key)} inserted twice with different payloads")
        self.payload[node] = value
        self.max_depth = max(self.max_depth, len(key))

    def _freeze(self) -> None:
        n = len(self.children)
        ptr = np.zeros(n + 1, dtype=np.int64)
        keys: list[int] = []
        child: list[int] = []
        for i, ch in enumerate(self.children):
            for sym in sorted(ch):
                keys.append(sym)
                child.append(ch[sym])
            ptr[i + 1] = len(keys)
        self.ptr = ptr
        self.keys = np.asarray(keys, dtype=np.int64)
        self.child = np.asarray(child, dtype=np.int64)
        self.out = np.asarray(self.payload, dtype=np.int64)

    def __len__(self) -> int:
        return sum(1 for p in self.payload if p >= 0)

    def get(self, key: Sequence[int]) -> int:
        """Payload of an exact key, or -1."""
        node = 0
        for sym in key:
            node = self.children[node].get(sym, -1)
            if node < 0:
                return -1
        return self.payload[node]

    def items(self) -> Iterator[tuple[tuple[int, ...], int]]:
        """Every accepted key with its payload, depth-first in key order."""
        stack: list[tuple[int, tuple[int, ...]]] = [(0, ())]
        while stack:
            node, prefix = stack.pop()
            if self.payload[node] >= 0:
                yield prefix, self.payload[node]
            for sym in sorted(self.children[node], reverse=True):
                stack.append((self.children[node][sym], prefix + (sym,)))
