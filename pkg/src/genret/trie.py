"""Digit trie over corpus docids, used to mask decoding to valid identifiers."""

from __future__ import annotations

from typing import Iterable

from .errors import ContractViolation


class TrieNode:
    __slots__ = ("children", "terminal")

    def __init__(self):
        self.children: dict[int, TrieNode] = {}
        self.terminal = False


class DocidTrie:
    """Every corpus docid is a root-to-terminal digit path.

    A docid may be a strict prefix of another (e.g. naive ids "1" and "11");
    the terminal flag disambiguates, so the decoder can emit either the
    end-of-id symbol or continue along a longer id.
    """

    def __init__(self, docids: Iterable[str]):
        self.root = TrieNode()
        count = 0
        for docid in docids:
            if not docid or not docid.isdigit():
                raise ContractViolation(f"docid {docid!r} is not a digit string")
            node = self.root
            for ch in docid:
                digit = ord(ch) - ord("0")
                node = node.children.setdefault(digit, TrieNode())
            node.terminal = True
            count += 1
        if count == 0:
            raise ContractViolation("trie needs at least one docid")
        self.n_docids = count

    def step(self, node: TrieNode, digit: int) -> TrieNode | None:
        return node.children.get(digit)

    def valid_digits(self, node: TrieNode) -> list[int]:
        return sorted(node.children)

    def contains(self, docid: str) -> bool:
        node = self.root
        for ch in docid:
            node = node.children.get(ord(ch) - ord("0"))
            if node is None:
                return False
        return node.terminal

    def iter_docids(self) -> Iterable[str]:
        """All stored docids in lexicographic digit order."""

        def walk(node: TrieNode, prefix: str):
            if node.terminal:
                yield prefix
            for digit in sorted(node.children):
                yield from walk(node.children[digit], prefix + str(digit))

        yield from walk(self.root, "")
