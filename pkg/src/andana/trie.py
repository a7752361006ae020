"""Component-wise name trie used for longest-prefix match and subtree scans."""

from __future__ import annotations

from typing import Any, Iterator

from .names import Name

_MISSING = object()


class _Node:
    __slots__ = ("children", "value")

    def __init__(self):
        self.children: dict[bytes, _Node] = {}
        self.value: Any = _MISSING


class NameTrie:
    def __init__(self):
        self._root = _Node()
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def __contains__(self, name: Name) -> bool:
        node = self._find(name)
        return node is not None and node.value is not _MISSING

    def _find(self, name: Name) -> _Node | None:
        node = self._root
        for c in name.components:
            node = node.children.get(c)
            if node is None:
                return None
        return node

    def __setitem__(self, name: Name, value: Any) -> None:
        node = self._root
        for c in name.components:
            node = node.children.setdefault(c, _Node())
        if node.value is _MISSING:
            self._size += 1
        node.value = value

    def __getitem__(self, name: Name) -> Any:
        node = self._find(name)
        if node is None or node.value is _MISSING:
            raise KeyError(name)
        return node.value

    def get(self, name: Name, default: Any = None) -> Any:
        node = self._find(name)
        if node is None or node.value is _MISSING:
            return default
        return node.value

    def __delitem__(self, name: Name) -> None:
        path = [self._root]
        for c in name.components:
            nxt = path[-1].children.get(c)
            if nxt is None:
                raise KeyError(name)
            path.append(nxt)
        if path[-1].value is _MISSING:
            raise KeyError(name)
        path[-1].value = _MISSING
        self._size -= 1
        # prune empty branches
        for depth in range(len(name.components), 0, -1):
            node = path[depth]
            if node.children or node.value is not _MISSING:
                break
            del path[depth - 1].children[name.components[depth - 1]]

    def longest_prefix(self, name: Name) -> tuple[Name, Any] | None:
        """Entry with the longest key that is a prefix of ``name``."""
        node = self._root
        best = (0, node.value) if node.value is not _MISSING else None
        for depth, c in enumerate(name.components, 1):
            node = node.children.get(c)
            if node is None:
                break
            if node.value is not _MISSING:
                best = (depth, node.value)
        if best is None:
            return None
        return Name(name.components[:best[0]]), best[1]

    def descendants(self, name: Name) -> Iterator[tuple[Name, Any]]:
        """Entries whose key has ``name`` as a prefix, in depth-first order."""
        start = self._find(name)
        if start is None:
            return
        stack = [(name.components, start)]
        while stack:
            comps, node = stack.pop()
            if node.value is not _MISSING:
                yield Name(comps), node.value
            for c in sorted(node.children, reverse=True):
                stack.append((comps + (c,), node.children[c]))

    def items(self) -> Iterator[tuple[Name, Any]]:
        return self.descendants(Name())
