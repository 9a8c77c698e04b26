"""Hypernym taxonomy: a rooted DAG of words with child -> parent edges.

The question target word is the lowest common hypernym (LCH) of the
classifier's top-k predictions: the deepest node, by shortest hop count
from the root, that is an ancestor of every input word. Ancestor sets
include the word itself, so LCH({w, ancestor-of-w}) is the ancestor.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from pathlib import Path

from .errors import InvalidTaxonomyError, NotFoundError
from .uncertainty import SoftmaxDistribution

SUPPORTED_K = (2, 3)


@dataclass(frozen=True)
class TargetWord:
    word: str
    depth: int
    source_labels: tuple
    k: int


class Taxonomy:
    def __init__(self, edges: list, root: str | None = None):
        """Build and validate the DAG from (child, parent) pairs."""
        self.parents: dict[str, set] = {}
        self.children: dict[str, set] = {}
        words = set()
        for child, parent in edges:
            if child == parent:
                raise InvalidTaxonomyError(f"self-loop at {child!r}")
            words.update((child, parent))
            self.parents.setdefault(child, set()).add(parent)
            self.children.setdefault(parent, set()).add(child)
        if root is not None:
            words.add(root)
        for w in words:
            self.parents.setdefault(w, set())
            self.children.setdefault(w, set())

        parentless = sorted(w for w in words if not self.parents[w])
        if not words:
            raise InvalidTaxonomyError("taxonomy has no words (no edges, no root)")
        if len(parentless) != 1:
            raise InvalidTaxonomyError(
                f"expected a unique root, found parentless nodes: {parentless}")
        if root is not None and root != parentless[0]:
            raise InvalidTaxonomyError(
                f"declared root {root!r} but {parentless[0]!r} has no parent")
        self.root = parentless[0]

        self._check_acyclic()
        self._depth = self._compute_depths()
        unreachable = sorted(words - set(self._depth))
        if unreachable:
            raise InvalidTaxonomyError(f"node {unreachable[0]!r} cannot reach the root")

    def _check_acyclic(self) -> None:
        # Kahn's algorithm over child -> parent edges; leftovers form a cycle.
        remaining = {w: len(self.children[w]) for w in self.parents}
        queue = deque(w for w, deg in remaining.items() if deg == 0)
        seen = 0
        while queue:
            w = queue.popleft()
            seen += 1
            for parent in self.parents[w]:
                remaining[parent] -= 1
                if remaining[parent] == 0:
                    queue.append(parent)
        if seen != len(remaining):
            member = sorted(w for w, deg in remaining.items() if deg > 0)[0]
            raise InvalidTaxonomyError(f"cycle detected involving {member!r}")

    def _compute_depths(self) -> dict:
        depth = {self.root: 0}
        queue = deque([self.root])
        while queue:
            w = queue.popleft()
            for child in self.children[w]:
                if child not in depth:
                    depth[child] = depth[w] + 1
                    queue.append(child)
        return depth

    def __contains__(self, word: str) -> bool:
        return word in self.parents

    def __len__(self) -> int:
        return len(self.parents)

    @property
    def words(self) -> list:
        return sorted(self.parents)

    def leaves(self) -> list:
        return sorted(w for w in self.parents if not self.children[w])

    def edges(self) -> list:
        return sorted((c, p) for c, ps in self.parents.items() for p in ps)

    def depth(self, word: str) -> int:
        """Shortest hop count from the root."""
        if word not in self:
            raise NotFoundError(f"word {word!r} not in taxonomy")
        return self._depth[word]

    def ancestor_set(self, word: str) -> set:
        """All hypernyms of a word, including the word itself."""
        if word not in self:
            raise NotFoundError(f"word {word!r} not in taxonomy")
        seen = {word}
        stack = [word]
        while stack:
            for parent in self.parents[stack.pop()]:
                if parent not in seen:
                    seen.add(parent)
                    stack.append(parent)
        return seen

    def lowest_common_hypernym(self, words: list, k: int | None = None) -> TargetWord:
        """Deepest common ancestor; depth ties break lexicographically."""
        if not words:
            raise NotFoundError("need at least one word")
        common = self.ancestor_set(words[0])
        for w in words[1:]:
            common &= self.ancestor_set(w)
        # The root is an ancestor of everything, so common is never empty.
        best = min(common, key=lambda w: (-self._depth[w], w))
        return TargetWord(word=best, depth=self._depth[best],
                          source_labels=tuple(words), k=k if k is not None else len(words))


def load_taxonomy(path) -> Taxonomy:
    """Load a TSV edge list (child<TAB>parent, '#' comments), root inferred."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise InvalidTaxonomyError(f"taxonomy file not found: {path}")
    edges = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2 or not parts[0] or not parts[1]:
            raise InvalidTaxonomyError(f"line {lineno}: expected 'child<TAB>parent'")
        edges.append((parts[0], parts[1]))
    return Taxonomy(edges)


def save_taxonomy(taxonomy: Taxonomy, path) -> None:
    lines = [f"{c}\t{p}" for c, p in taxonomy.edges()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def select_target_word(dist: SoftmaxDistribution, k: int, taxonomy: Taxonomy) -> TargetWord:
    """LCH of the k most confident predicted labels."""
    if not 1 <= k <= dist.k:
        raise NotFoundError(f"k={k} out of range for {dist.k} classes")
    top = dist.top_labels(k)
    missing = [w for w in top if w not in taxonomy]
    if missing:
        raise NotFoundError(f"labels missing from taxonomy: {missing}")
    return taxonomy.lowest_common_hypernym(top, k=k)
