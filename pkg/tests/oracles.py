"""Independent reference computations the tests compare against.

Every oracle here recomputes its quantity by the most direct route
available: plain loops, exhaustive search, exact fractions. None of them
share code with the package, so an agreement is evidence rather than
tautology.
"""

from fractions import Fraction
import math


def entropy_direct(probs) -> float:
    """Shannon entropy in bits by straightforward summation."""
    total = 0.0
    for p in probs:
        if p > 0.0:
            total -= p * math.log2(p)
    return total


def otsu_exhaustive(values):
    """Exhaustive Otsu over the 256-bin quantization, in exact arithmetic.

    Returns (theta, degenerate). Between-class variance per split k is
    w0*w1*(mu0-mu1)^2 computed with Fractions; ties go to the lowest k.
    """
    hist = [0] * 256
    for v in values:
        hist[min(int(v * 256), 255)] += 1
    n = sum(hist)
    best_k = None
    best_var = Fraction(-1)
    for k in range(255):
        w0 = sum(hist[: k + 1])
        w1 = n - w0
        if w0 == 0 or w1 == 0:
            continue
        mu0 = Fraction(sum(i * hist[i] for i in range(k + 1)), w0)
        mu1 = Fraction(sum(i * hist[i] for i in range(k + 1, 256)), w1)
        var = Fraction(w0, n) * Fraction(w1, n) * (mu0 - mu1) ** 2
        if var > best_var:
            best_var = var
            best_k = k
    if best_k is None:
        return float(min(values)), True
    return (best_k + 1) / 256, False


def f_from_confusion(outcomes) -> float:
    """F measure from an independently tallied confusion matrix.

    outcomes holds (truth, verdict) pairs where truth is a label or None
    and verdict exposes .is_unknown / .label.
    """
    counts = {"tp": 0, "fp": 0, "fn": 0}
    for truth, verdict in outcomes:
        predicted = "unknown" if verdict.is_unknown else verdict.label
        if truth is None:
            if predicted != "unknown":
                counts["fn"] += 1
        elif predicted == truth:
            counts["tp"] += 1
        else:
            counts["fp"] += 1
    denom = 2 * counts["tp"] + counts["fp"] + counts["fn"]
    if denom == 0:
        return 0.0
    return 2 * counts["tp"] / denom


def brute_ancestors(edges, word):
    """Ancestor set (self included) by repeated expansion over the edge list."""
    parents = {}
    for child, parent in edges:
        parents.setdefault(child, []).append(parent)
    result = {word}
    frontier = [word]
    while frontier:
        current = frontier.pop()
        for p in parents.get(current, []):
            if p not in result:
                result.add(p)
                frontier.append(p)
    return result

def brute_depths(edges, root):
    """Shortest hop count from the root, breadth-first over child links."""
    children = {}
    for child, parent in edges:
        children.setdefault(parent, []).append(child)
    depth = {root: 0}
    queue = [root]
    while queue:
        nxt = []
        for node in queue:
            for c in children.get(node, []):
                if c not in depth:
                    depth[c] = depth[node] + 1
                    nxt.append(c)
        queue = nxt
    return depth


def brute_lch(edges, root, words):
    """Deepest common ancestor; depth ties broken lexicographically."""
    common = brute_ancestors(edges, words[0])
    for w in words[1:]:
        common &= brute_ancestors(edges, w)
    depth = brute_depths(edges, root)
    return sorted(common, key=lambda w: (-depth[w], w))[0]


def random_dag(rng, max_nodes=50, max_parents=3):
    """Random rooted DAG as (edges, names, root).

    Node i > 0 draws parents from nodes with smaller construction index,
    which guarantees acyclicity and a unique parentless root. Names are
    shuffled so lexicographic tie-breaks are independent of construction
    order.
    """
    n = int(rng.integers(2, max_nodes + 1))
    names = [f"n{i:03d}" for i in range(n)]
    rng.shuffle(names)
    edges = []
    for i in range(1, n):
        k = int(rng.integers(1, min(max_parents, i) + 1))
        parents = rng.choice(i, size=k, replace=False)
        for p in parents:
            edges.append((names[i], names[int(p)]))
    return edges, names, names[0]


def _ngram_list(tokens, n):
    return [tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1)]


def bleu_brute(candidate, references, max_n):
    """BLEU by brute-force n-gram matching, no Counter, no shared helpers.

    Matches the documented contract: clipped counts, geometric mean over
    orders 1..max_n, epsilon 1e-9 on zero precisions, brevity penalty from
    the closest reference length with ties to the shorter one.
    """
    candidate = list(candidate)
    if not candidate:
        return 0.0
    log_sum = 0.0
    for n in range(1, max_n + 1):
        cand_grams = _ngram_list(candidate, n)
        matched = 0
        for gram in set(cand_grams):
            best_ref = max(_ngram_list(ref, n).count(gram) for ref in references)
            matched += min(cand_grams.count(gram), best_ref)
        if matched > 0 and len(cand_grams) > 0:
            p = matched / len(cand_grams)
        else:
            p = 1e-9
        log_sum += math.log(p)
    c = len(candidate)
    r = sorted(len(ref) for ref in references)
    r = min(r, key=lambda length: (abs(length - c), length))
    bp = min(1.0, math.exp(1.0 - r / c))
    return bp * math.exp(log_sum / max_n)


def connected_components(mask):
    """4-connected component labels of a boolean grid, by flood fill.

    Returns a dict mapping component id to the set of (row, col) pixels,
    components taken over both True and False cells separately (cells only
    join a component when their mask values agree).
    """
    h = len(mask)
    w = len(mask[0])
    label = [[None] * w for _ in range(h)]
    components = {}
    next_id = 0
    for r in range(h):
        for c in range(w):
            if label[r][c] is not None:
                continue
            stack = [(r, c)]
            label[r][c] = next_id
            cells = set()
            while stack:
                cr, cc = stack.pop()
                cells.add((cr, cc))
                for nr, nc in ((cr - 1, cc), (cr + 1, cc), (cr, cc - 1), (cr, cc + 1)):
                    if 0 <= nr < h and 0 <= nc < w and label[nr][nc] is None \
                            and mask[nr][nc] == mask[cr][cc]:
                        label[nr][nc] = next_id
                        stack.append((nr, nc))
            components[next_id] = cells
            next_id += 1
    return components


def central_difference(fn, x, h=1e-5):
    """Coordinate-wise central-difference gradient of a scalar function."""
    import numpy as np

    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for i in range(x.shape[0]):
        bump = np.zeros_like(x)
        bump[i] = h
        grad[i] = (fn(x + bump) - fn(x - bump)) / (2 * h)
    return grad
