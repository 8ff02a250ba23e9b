"""Instance generators: random corpora, alternating path families, the
shared-subset stress family built over disjoint paths plus a binary tree,
and the sparsification counterexample.

All generators are pure functions of their parameters and seed.
"""

import math
import random
from fractions import Fraction

from .instance import Instance
from .util import derive_seed


def gen_random(n_children, n_gifts, density=0.3, value_range=(1, 8), seed=0,
               zero_value_fraction=0.0) -> Instance:
    """Bernoulli desire edges with uniform integer values; isolated children
    are possible (and exercise the zero-threshold path)."""
    rng = random.Random(derive_seed(seed, "random", n_children, n_gifts))
    lo, hi = value_range
    values = []
    for _ in range(n_gifts):
        if zero_value_fraction and rng.random() < zero_value_fraction:
            values.append(Fraction(0))
        else:
            values.append(Fraction(rng.randint(lo, hi)))
    edges = {(c, g) for c in range(n_children) for g in range(n_gifts)
             if rng.random() < density}
    return Instance(n_children, values, edges)


def gen_path(variant: str, n: int) -> Instance:
    """Alternating child-gift path of 2n-1 vertices, unit gift values.

    I1 keeps children at both ends (optimum 0: one child must go empty);
    I2 adds one gift at the leftmost child, I3 at the rightmost (optimum 1).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if variant not in ("I1", "I2", "I3"):
        raise ValueError("variant must be one of I1, I2, I3")
    edges = set()
    values = [Fraction(1)] * (n - 1)
    for j in range(n - 1):
        edges.add((j, j))        # c_j - g_j
        edges.add((j + 1, j))    # g_j - c_{j+1}
    labels = {}
    if variant == "I2":
        values.append(Fraction(1))
        edges.add((0, n - 1))
        labels["extra_gift"] = n - 1
    elif variant == "I3":
        values.append(Fraction(1))
        edges.add((n - 1, n - 1))
        labels["extra_gift"] = n - 1
    return Instance(n, values, edges, labels)


def gen_scn(n: int, a: str, b: str) -> Instance:
    """Stress family over sqrt(n) alternating paths joined by a low-depth
    binary tree, with two boundary children whose gift values carry the bit
    strings a and b.

    Optimum is 1 when every index has a_i = 1 or b_i = 1, else 0: a path
    whose both boundary gifts are worthless has one child too many.
    """
    k = math.isqrt(n)
    if k * k != n:
        raise ValueError("n must be a perfect square")
    if len(a) != k or len(b) != k:
        raise ValueError("bit strings must have length sqrt(n)")
    if any(ch not in "01" for ch in a + b):
        raise ValueError("bit strings must be binary")

    children = []   # label -> id assigned in order
    gifts = []
    edges = set()
    labels = {}

    def new_child(tag):
        cid = len(children)
        children.append(tag)
        labels[tag] = ("c", cid)
        return cid

    def new_gift(tag, value):
        gid = len(gifts)
        gifts.append(Fraction(value))
        labels[tag] = ("g", gid)
        return gid

    # the k disjoint alternating paths, unit path gifts
    path_child = [[new_child(f"c_{i}_{j}") for j in range(k)] for i in range(k)]
    path_gift = [[new_gift(f"g_{i}_{j}", 1) for j in range(k - 1)] for i in range(k)]
    for i in range(k):
        for j in range(k - 1):
            edges.add((path_child[i][j], path_gift[i][j]))
            edges.add((path_child[i][j + 1], path_gift[i][j]))

    # full binary tree over k leaves (padded to a power of two), levels
    # alternating child/gift upward, every tree child privately gifted
    width = 1
    while width < k:
        width *= 2
    leaves = [new_child(f"leaf_{j}") for j in range(width)]
    for j, leaf in enumerate(leaves):
        p = new_gift(f"p_leaf_{j}", 1)
        edges.add((leaf, p))
    level = leaves
    depth = 0
    while len(level) > 1:
        nxt = []
        child_level = depth % 2 == 1   # levels alternate: gifts above leaves
        for j in range(0, len(level), 2):
            pair = level[j:j + 2]
            if not child_level:
                node = new_gift(f"t_{depth + 1}_{j // 2}", 1)
                for x in pair:
                    edges.add((x, node))
            else:
                node = new_child(f"t_{depth + 1}_{j // 2}")
                for x in pair:
                    edges.add((node, x))
                p = new_gift(f"p_t_{depth + 1}_{j // 2}", 1)
                edges.add((node, p))
            nxt.append(node)
        level = nxt
        depth += 1
    # each leaf j < k-1 hangs onto the j-th gift of every path
    for j in range(min(k - 1, width)):
        for i in range(k):
            edges.add((leaves[j], path_gift[i][j]))

    alice = new_child("alice")
    bob = new_child("bob")
    edges.add((alice, new_gift("p_alice", 1)))
    edges.add((bob, new_gift("p_bob", 1)))
    for i in range(k):
        ga = new_gift(f"a_{i}", int(a[i]))
        gb = new_gift(f"b_{i}", int(b[i]))
        edges.add((alice, ga))
        edges.add((path_child[i][0], ga))
        edges.add((bob, gb))
        edges.add((path_child[i][k - 1], gb))

    return Instance(len(children), gifts, edges, labels)


def gen_sparsification_example(k: int, T: int):
    """k children, k-1 big gifts of value T, T unit small gifts, the desire
    graph complete on both sides.  Returns (instance, fractional solution):
    the solution spreads every big gift 1/k to each child and gives each
    child an exclusive block of T/k small gifts, so restricting the integral
    search to its support caps the value at T/k while the instance's true
    optimum is T."""
    if k < 2:
        raise ValueError("k must be >= 2")
    if T < k:
        raise ValueError("T must be >= k")
    if T % k != 0:
        raise ValueError("T must be divisible by k for the exclusive blocks")
    values = [Fraction(T)] * (k - 1) + [Fraction(1)] * T
    edges = {(c, g) for c in range(k) for g in range(k - 1 + T)}
    inst = Instance(k, values, edges)
    frac = {}
    for c in range(k):
        for g in range(k - 1):
            frac[(c, g)] = Fraction(1, k)
    block = T // k
    for c in range(k):
        for j in range(block):
            frac[(c, k - 1 + c * block + j)] = Fraction(1)
    return inst, frac


def restrict_to_support(inst: Instance, frac) -> Instance:
    """Drop every desire edge whose fractional value is zero."""
    keep = {e for e in inst.edges if frac.get(e, 0) > 0}
    return Instance(inst.num_children, list(inst.values), keep, dict(inst.labels))
