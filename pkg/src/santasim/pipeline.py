"""End-to-end approximation pipeline for max-min gift allocation.

Stages: binary search for the largest threshold T whose relaxation stays
feasible; cycle elimination on the big-gift graph; pruning big gifts to
degree two; randomized selection of one small-gift child per deficient
tree; value-weighted rounding of small gifts; big-gift assignment along
rooted trees.  A per-run value ledger records the realized guarantees of
every stage, and a retry loop reruns the randomized stages with a fresh
seed whenever an audit fails.
"""

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .congest import CongestNetwork, RoundStats, root_forest
from .instance import Instance
from .mpclp import MixedLP, solve_feasibility
from .oracles import verify_assignment
from .rounding import norm_edge, round_cycles
from .util import derive_seed


# --------------------------------------------------------------------------
# Configuration and result containers
# --------------------------------------------------------------------------

@dataclass
class SolveConfig:
    eps: float = 0.5                  # probe accuracy of the binary search
    beta_const: float = 1.0           # multiplier in the beta formula
    beta: Optional[int] = None        # override the formula entirely
    mode: str = "sequential"          # LP probe execution mode
    strict_bits: bool = False
    budget_factor: int = 8
    c_R: int = 1000
    probe_max_iterations: Optional[int] = None
    max_retries: int = 10
    small_tree_gather: int = 64       # below this size, sample centrally


@dataclass
class ClusterTree:
    children: list                    # child vertices of the tree
    bigs: list                        # big-gift ids of the tree
    edges: list                       # (child, gift) pairs with positive x*
    big_leaf: Optional[int]           # lowest-id big gift of degree one
    deficient: bool                   # |B*| == |C*| - 1, selection happens
    root_child: Optional[int] = None


@dataclass
class SolveResult:
    assignment: dict                  # gift -> child
    value: Fraction
    T: Fraction
    alpha: int
    beta: int
    retries: int
    stats: RoundStats
    ledger: dict
    valid: bool = True


def beta_for(n: int, beta_const: float = 1.0) -> int:
    """Default load parameter: max(2, ceil(C * ln n / ln ln n))."""
    n = max(n, 3)
    return max(2, math.ceil(beta_const * math.log(n) / max(1.0, math.log(math.log(n)))))


# --------------------------------------------------------------------------
# Classification and LP construction
# --------------------------------------------------------------------------

def classify_gifts(inst: Instance, T, alpha):
    """Split gifts at the value threshold T/alpha (>= is big).  The split is
    stable under halving both T and alpha."""
    if alpha <= 1:
        raise ValueError("alpha must exceed 1")
    thr = Fraction(T) / alpha
    small, big = set(), set()
    for g in inst.gifts():
        (big if inst.values[g] >= thr else small).add(g)
    return small, big


def build_santa_lp(inst: Instance, T, alpha, *, level=None, big_coeff=None):
    """Relaxation rows for threshold T: per child, small-gift value plus
    big_coeff-weighted big edges must reach `level` (covering, both default
    to T); per (child, small) pair the small edge plus the child's big
    edges stay under one; each big gift, each child's big degree, and each
    small gift are packed by one.  Variables live on desire edges.

    The binary search probes at level = T/2 while keeping big_coeff = T:
    a child fully covered by big gifts then clears its covering row with a
    factor-two margin, which keeps threshold-tight instances inside the
    solver's decidable region.  Returns (normalized MixedLP, variable
    index per edge).
    """
    T = Fraction(T)
    level = Fraction(level) if level is not None else T
    big_coeff = Fraction(big_coeff) if big_coeff is not None else T
    if level <= 0 or T <= 0:
        raise ValueError("threshold and level must be positive")
    small, big = classify_gifts(inst, T, alpha)
    var_of = {e: i for i, e in enumerate(sorted(inst.edges))}
    m = len(var_of)
    p_rows, c_rows = [], []

    for c in inst.children():
        entries = {}
        for g in inst.gifts_of(c):
            i = var_of[(c, g)]
            if g in big:
                entries[i] = float(big_coeff / level)
            elif inst.values[g] > 0:
                entries[i] = float(inst.values[g] / level)
        c_rows.append((tuple(sorted(entries)),
                       tuple(entries[i] for i in sorted(entries))))

    for c in inst.children():
        big_vars = [var_of[(c, g)] for g in inst.gifts_of(c) if g in big]
        for g in inst.gifts_of(c):
            if g in small:
                idx = sorted(big_vars + [var_of[(c, g)]])
                p_rows.append((tuple(idx), tuple(1.0 for _ in idx)))
        if big_vars:
            p_rows.append((tuple(sorted(big_vars)),
                           tuple(1.0 for _ in big_vars)))
    for g in sorted(big):
        idx = sorted(var_of[(c, g)] for c in inst.children_of(g))
        if idx:
            p_rows.append((tuple(idx), tuple(1.0 for _ in idx)))
    for g in sorted(small):
        idx = sorted(var_of[(c, g)] for c in inst.children_of(g))
        if idx:
            p_rows.append((tuple(idx), tuple(1.0 for _ in idx)))

    lp = MixedLP(m, p_rows, c_rows, [1.0] * len(p_rows), [1.0] * len(c_rows))
    return lp, var_of


# --------------------------------------------------------------------------
# Binary search over the threshold
# --------------------------------------------------------------------------

def _probe(inst, T_scaled, den, alpha, cfg, stats, seed):
    """Solve the halved relaxation at threshold T; on success return the
    packing-exact edge solution."""
    T = Fraction(T_scaled, den)
    lp, var_of = build_santa_lp(inst, T, alpha, level=T / 2)
    res = solve_feasibility(
        lp, cfg.eps, mode=cfg.mode, strict_bits=cfg.strict_bits,
        c_R=cfg.c_R, seed=seed, budget_factor=cfg.budget_factor,
        max_iterations=cfg.probe_max_iterations)
    stats.merge(res.stats)
    if not res.feasible:
        return None
    x = res.x
    maxp = 0.0
    for idx, vals in lp.p_rows:
        s = 0.0
        for i, v in zip(idx, vals):
            s += v * x[i]
        maxp = max(maxp, s)
    if maxp <= 0:
        maxp = 1.0
    u = {e: x[i] / maxp for e, i in var_of.items()}
    minc = math.inf
    for idx, vals in lp.c_rows:
        s = 0.0
        for i, v in zip(idx, vals):
            s += v * x[i]
        minc = min(minc, s / maxp)
    return {"u": u, "cov_min": minc, "level": T / 2}


def binary_search_T(inst: Instance, eps: float = 0.5, *, alpha=None,
                    config: Optional[SolveConfig] = None, seed: int = 0,
                    stats: Optional[RoundStats] = None):
    """Largest integer threshold T (in scaled units) whose halved relaxation
    the solver accepts.  Maintains: the low end carries a stored feasible
    solution, the high end stays at least the optimum.  Returns
    (T: Fraction, probe payload or None, info dict)."""
    cfg = config or SolveConfig(eps=eps)
    stats = stats if stats is not None else RoundStats()
    n = inst.num_children + inst.num_gifts
    alpha = alpha if alpha is not None else 4 * beta_for(n, cfg.beta_const)

    den = 1
    for v in inst.values:
        den = den * v.denominator // math.gcd(den, v.denominator)
    V = int(inst.total_value() * den)

    if any(not inst.gifts_of(c) for c in inst.children()) or V == 0 \
            or inst.num_children == 0:
        return Fraction(0), None, {"probes": 0, "alpha": alpha, "den": den}

    # no child can exceed its own adjacency sum, so the optimum cannot
    # either; capping the interval keeps the relaxed probes value-aware
    adj_cap = min(int(sum(inst.values[g] for g in inst.gifts_of(c)) * den)
                  for c in inst.children())
    a, d = 0, min(V, adj_cap)
    best = None
    probes = 0
    while a < d:
        mid = (a + d + 1) // 2
        got = _probe(inst, mid, den, alpha, cfg, stats,
                     derive_seed(seed, "probe", mid))
        probes += 1
        if got is not None:
            a, best = mid, got
        else:
            d = mid - 1
    if a == 0:
        return Fraction(0), None, {"probes": probes, "alpha": alpha, "den": den}
    return Fraction(a, den), best, {"probes": probes, "alpha": alpha, "den": den}


# --------------------------------------------------------------------------
# Big-gift graph: cycle elimination, pruning, cluster forest
# --------------------------------------------------------------------------

def eliminate_big_cycles(inst: Instance, u: dict, big: set, *, seed=0, net=None):
    """Round the big-gift edge weights until their support is a forest; the
    small part is untouched and packing row sums are conserved."""
    x_edges = {(c, g): w for (c, g), w in u.items() if g in big and w > 0}
    if not x_edges:
        return {}
    gedges = [(c, inst.gift_node(g)) for (c, g) in x_edges]
    w0 = {norm_edge(c, inst.gift_node(g)): w for (c, g), w in x_edges.items()}
    w1, report = round_cycles(gedges, w0, mode="float", seed=derive_seed(seed, "bigcycles"),
                              net=net)
    out = {}
    for (c, g) in x_edges:
        val = w1[norm_edge(c, inst.gift_node(g))]
        if val > 0:
            out[(c, g)] = val
    return out


def prune_big_clusters(inst: Instance, x: dict):
    """Reduce every big gift to degree at most two by dropping its surplus
    child edges, lowest weight first (never an edge above 1/2).  Returns
    (pruned x, dropped edge list)."""
    by_gift = {}
    for (c, g), w in x.items():
        by_gift.setdefault(g, []).append((c, w))
    dropped = []
    out = dict(x)
    for g, lst in sorted(by_gift.items()):
        if len(lst) <= 2:
            continue
        heavy = [c for c, w in lst if w > 0.5]
        assert len(heavy) <= 1, "two edges above 1/2 would break the gift's packing row"
        cand = sorted(((w, c) for c, w in lst if w <= 0.5))
        for w, c in cand[:len(lst) - 2]:
            del out[(c, g)]
            dropped.append((c, g, w))
    return out, dropped


def build_cluster_forest(inst: Instance, x: dict):
    """Trees of the pruned big-gift graph, plus singleton trees for children
    with no surviving big edge."""
    adj = {}
    for (c, g) in x:
        adj.setdefault(("c", c), []).append(("g", g))
        adj.setdefault(("g", g), []).append(("c", c))
    seen = set()
    trees = []
    for start in sorted(adj):
        if start in seen:
            continue
        comp = [start]
        seen.add(start)
        q = [start]
        while q:
            u = q.pop()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    comp.append(v)
                    q.append(v)
        children = sorted(c for kind, c in comp if kind == "c")
        bigs = sorted(g for kind, g in comp if kind == "g")
        edges = sorted((c, g) for (c, g) in x
                       if ("c", c) in set(comp) and ("g", g) in set(comp))
        degree = {g: 0 for g in bigs}
        for c, g in edges:
            degree[g] += 1
        leaves = sorted(g for g in bigs if degree[g] == 1)
        deficient = len(bigs) == len(children) - 1
        big_leaf = None
        if len(bigs) >= len(children):
            assert leaves, "a tree with |B| >= |C| must have a big-gift leaf"
            big_leaf = leaves[0]
        trees.append(ClusterTree(children, bigs, edges, big_leaf, deficient))
    with_edges = {c for t in trees for c in t.children}
    for c in inst.children():
        if c not in with_edges:
            trees.append(ClusterTree([c], [], [], None, True))
    trees.sort(key=lambda t: t.children[0] if t.children else -1)
    return trees


# --------------------------------------------------------------------------
# Randomized selection of the small-gift child per deficient tree
# --------------------------------------------------------------------------

def _child_tree(tree: ClusterTree):
    """Contract the degree-2 big gifts of a deficient tree into direct
    child-child edges."""
    nbrs = {}
    for c, g in tree.edges:
        nbrs.setdefault(g, []).append(c)
    edges = []
    for g, cs in sorted(nbrs.items()):
        assert len(cs) <= 2
        if len(cs) == 2:
            edges.append(tuple(sorted(cs)))
    return edges


def _sample_gather(weights: dict, rng: random.Random):
    """Central draw proportional to the weights."""
    items = sorted(weights)
    total = sum(weights[c] for c in items)
    r = rng.random() * total
    acc = 0.0
    for c in items:
        acc += weights[c]
        if r <= acc:
            return c
    return items[-1]


def _sample_rake_compress(child_edges, weights: dict, rng: random.Random):
    """Tree subsampling: decompose by Rake (leaves push weight to their
    neighbor) and Compress (degree-2 runs collapse onto one survivor), then
    unwind, re-drawing inside each absorbed group.  Same distribution as the
    central draw."""
    adj = {c: set() for c in weights}
    for a, b in child_edges:
        adj[a].add(b)
        adj[b].add(a)
    w = dict(weights)
    history = []
    alive = set(w)
    while len(alive) > 1:
        rake_moves = []   # (removed, receiver, removed_weight)
        leaves = sorted(c for c in alive if len(adj[c]) <= 1)
        if len(leaves) == len(alive):
            # final pair or last vertices: rake into the max id
            recv = max(alive)
            for c in leaves:
                if c != recv:
                    rake_moves.append((c, recv, w[c]))
            for c, r, wc in rake_moves:
                w[r] += wc
                alive.discard(c)
            history.append(("rake", rake_moves))
            break
        for c in leaves:
            nb = next(iter(adj[c])) if adj[c] else max(alive - {c})
            rake_moves.append((c, nb, w[c]))
        removed = {c for c, _, _ in rake_moves}
        for c, r, wc in rake_moves:
            w[r] += wc
            alive.discard(c)
        for c in removed:
            for nb in adj[c]:
                adj[nb].discard(c)
            adj[c] = set()
        history.append(("rake", rake_moves))
        # Compress: runs of degree-2 vertices collapse onto their max id
        runs = []
        visited = set()
        for c in sorted(alive):
            if c in visited or len(adj[c]) != 2:
                continue
            run = [c]
            visited.add(c)
            frontier = [c]
            while frontier:
                x = frontier.pop()
                for nb in adj[x]:
                    if nb in alive and len(adj[nb]) == 2 and nb not in visited:
                        visited.add(nb)
                        run.append(nb)
                        frontier.append(nb)
            if len(run) >= 2:
                runs.append(sorted(run))
        comp_moves = []
        for run in runs:
            surv = max(run)
            absorbed = [(c, w[c]) for c in run if c != surv]
            # splice the run out of the tree: survivor inherits the run's
            # outer neighbors
            outer = set()
            for c in run:
                outer |= {nb for nb in adj[c] if nb not in run}
            for c in run:
                if c == surv:
                    continue
                for nb in adj[c]:
                    adj[nb].discard(c)
                adj[c] = set()
                alive.discard(c)
            adj[surv] = set(outer)
            for nb in outer:
                adj[nb].add(surv)
            for c, wc in absorbed:
                w[surv] += wc
            comp_moves.append((surv, absorbed))
        if comp_moves:
            history.append(("compress", comp_moves))
    pick = _sample_gather({c: w[c] for c in alive}, rng)
    for kind, moves in reversed(history):
        if kind == "compress":
            for surv, absorbed in moves:
                if surv == pick:
                    own = w[surv] - sum(wc for _, wc in absorbed)
                    pool = {surv: own}
                    pool.update({c: wc for c, wc in absorbed})
                    pick = _sample_gather(pool, rng)
                    break
        else:
            for c, recv, wc in moves:
                if recv == pick:
                    # undo every transfer into the survivor, one draw over
                    # the group that merged here
                    group = {c2: wc2 for c2, r2, wc2 in moves if r2 == recv}
                    own = w[recv] - sum(group.values())
                    pool = {recv: own}
                    pool.update(group)
                    pick = _sample_gather(pool, rng)
                    break
    return pick


def select_children(inst: Instance, trees, y: dict, T, beta: int,
                    rng: random.Random, gather_threshold: int = 64,
                    sampling: Optional[str] = None):
    """Pick one child per deficient tree with probability proportional to
    its small-gift value, scale the winners' small rows to the threshold
    level (clipped at one), zero everyone else, then downscale by beta.

    Returns (z, chosen, audit): audit carries the per-gift load after the
    downscale and the winners' realized levels."""
    T = float(T)
    v_small = {}
    for c, g in y:
        v_small[(c, g)] = float(inst.values[g])
    Vs = {c: 0.0 for c in inst.children()}
    for (c, g), w in sorted(y.items()):
        Vs[c] += v_small[(c, g)] * w

    chosen = {}
    for k, tree in enumerate(trees):
        if not tree.deficient:
            continue
        weights = {c: Vs[c] for c in tree.children}
        total = sum(weights.values())
        if total <= 0:
            return None, None, {"failure": f"tree {k} has no small-gift value"}
        mode = sampling or ("gather" if len(tree.children) < gather_threshold
                            else "rake_compress")
        if len(tree.children) == 1:
            c = tree.children[0]
        elif mode == "gather":
            c = _sample_gather(weights, rng)
        else:
            c = _sample_rake_compress(_child_tree(tree), weights, rng)
        chosen[k] = c
        tree.root_child = c

    chosen_set = set(chosen.values())
    z = {}
    clipped = 0
    realized = {}
    for (c, g), w in sorted(y.items()):
        if c not in chosen_set or w <= 0:
            continue
        scale = T / Vs[c]
        val = w * scale
        if val > 1.0:
            val = 1.0
            clipped += 1
        z[(c, g)] = val / beta
    realized = {c: 0.0 for c in chosen_set}
    for (c, g), val in z.items():
        realized[c] += v_small[(c, g)] * val * beta
    loads = {}
    for (c, g), val in z.items():
        loads[g] = loads.get(g, 0.0) + val
    audit = {
        "max_gift_load": max(loads.values()) if loads else 0.0,
        "clipped": clipped,
        "realized_levels": realized,
        "load_ok": all(v <= 1.0 + 1e-12 for v in loads.values()),
    }
    return z, chosen, audit


# --------------------------------------------------------------------------
# Integral rounding of both gift classes
# --------------------------------------------------------------------------

def round_small_gifts(inst: Instance, z: dict, *, seed=0, net=None):
    """Value-weighted cycle elimination on the small-gift graph, then forest
    rounding: root each tree at its lowest child and hand every gift to its
    parent.  Children lose at most their single parent edge."""
    pos = {(c, g): w for (c, g), w in z.items() if w > 0 and inst.values[g] > 0}
    if not pos:
        return {}
    gedges = [(c, inst.gift_node(g)) for (c, g) in pos]
    w0, caps = {}, {}
    for (c, g), zz in pos.items():
        key = norm_edge(c, inst.gift_node(g))
        v = float(inst.values[g])
        w0[key] = zz * v
        caps[key] = v
    w1, report = round_cycles(gedges, w0, caps, mode="float",
                              seed=derive_seed(seed, "smallcycles"), net=net)
    Z = {}
    frac_edges = []
    for (c, g) in pos:
        key = norm_edge(c, inst.gift_node(g))
        if w1[key] >= caps[key]:
            Z[g] = c
        elif w1[key] > 0:
            frac_edges.append((c, g))
    # forest phase: gifts go to their parent child
    adj = {}
    for c, g in frac_edges:
        adj.setdefault(("c", c), []).append(("g", g))
        adj.setdefault(("g", g), []).append(("c", c))
    seen = set()
    for start in sorted(adj):
        if start in seen or start[0] != "c":
            continue
        comp = {start}
        q = [start]
        order = [start]
        parent = {start: None}
        while q:
            u = q.pop(0)
            for v in sorted(adj[u]):
                if v not in comp:
                    comp.add(v)
                    parent[v] = u
                    order.append(v)
                    q.append(v)
        seen |= comp
        for node in order:
            if node[0] == "g" and parent[node] is not None and node[1] not in Z:
                Z[node[1]] = parent[node][1]
    return Z


def assign_big_gifts(inst: Instance, trees, x: dict, *, net=None):
    """Root every tree (big-leaf trees at the leaf's child, deficient trees
    at their selected child) and assign each big gift to the child below it;
    a designated leaf gift goes to the root itself."""
    forest_edges = []
    roots = []
    pre = {}
    for tree in trees:
        if not tree.edges:
            continue
        forest_edges.extend((c, inst.gift_node(g)) for c, g in tree.edges)
        if tree.big_leaf is not None:
            root = min(cc for cc, g in tree.edges if g == tree.big_leaf)
            tree.root_child = root
            pre[tree.big_leaf] = root
            roots.append(root)
        else:
            assert tree.root_child is not None, "deficient tree lacks a selection"
            roots.append(tree.root_child)
    if net is None:
        net = CongestNetwork(inst.network_nodes(), inst.network_edges())
    parent = root_forest(net, forest_edges, roots=roots)
    X = dict(pre)
    for c, g in sorted({e for t in trees for e in t.edges}):
        gn = inst.gift_node(g)
        if parent.get(c) == gn and g not in X:
            X[g] = c
    return X


# --------------------------------------------------------------------------
# The full pipeline
# --------------------------------------------------------------------------

def solve(inst: Instance, seed: int = 0, config: Optional[SolveConfig] = None) -> SolveResult:
    cfg = config or SolveConfig()
    stats = RoundStats()
    n = inst.num_children + inst.num_gifts
    beta = cfg.beta if cfg.beta is not None else beta_for(n, cfg.beta_const)
    alpha = 4 * beta
    ledger = {"beta": beta, "alpha": alpha, "eps": cfg.eps}

    T, probe, info = binary_search_T(inst, cfg.eps, alpha=alpha, config=cfg,
                                     seed=seed, stats=stats)
    ledger.update(info)
    ledger["T"] = T
    if T == 0 or probe is None:
        return SolveResult({}, Fraction(0), Fraction(0), alpha, beta, 0,
                           stats, ledger, True)

    u = probe["u"]
    ledger["cov_min"] = probe["cov_min"]
    small, big = classify_gifts(inst, T, alpha)
    y = {(c, g): w for (c, g), w in u.items() if g in small}

    net = CongestNetwork(inst.network_nodes(), inst.network_edges(),
                         budget_factor=cfg.budget_factor)
    x1 = eliminate_big_cycles(inst, u, big, seed=seed, net=net)
    x_star, dropped = prune_big_clusters(inst, x1)
    ledger["pruned_edges"] = len(dropped)
    trees = build_cluster_forest(inst, x_star)
    ledger["trees"] = len(trees)

    target = T / alpha
    retries = 0
    best = None
    stale = 0
    load_fails = 0
    outcomes = set()
    while retries <= cfg.max_retries:
        rng = random.Random(derive_seed(seed, "retry", retries))
        for t in trees:
            if t.deficient:
                t.root_child = None
        z, chosen, audit = select_children(
            inst, trees, y, T, beta, rng, cfg.small_tree_gather)
        if z is None:
            # no randomness can fix a tree without small-gift value
            ledger["select_audit"] = audit
            break
        if not audit["load_ok"]:
            load_fails += 1
            if load_fails >= 2:
                ledger["select_audit"] = audit
                break   # overload is structural, not bad luck
            retries += 1
            continue
        load_fails = 0
        Z = round_small_gifts(inst, z, seed=derive_seed(seed, "retry", retries),
                              net=net)
        X = assign_big_gifts(inst, trees, x_star, net=net)
        assignment = dict(Z)
        assignment.update(X)
        value, valid, problems = verify_assignment(inst, assignment)
        if valid and value >= target:
            ledger["select_audit"] = audit
            stats.merge(net.stats)
            return SolveResult(assignment, value, T, alpha, beta, retries,
                               stats, ledger, valid)
        if best is None or (valid and value > best[1]):
            best = (assignment, value, valid, audit)
            stale = 0
        else:
            stale += 1
        key = (value, tuple(sorted(assignment.items())))
        if key in outcomes or stale >= 2:
            break   # reseeding is not helping; the shortfall is structural
        outcomes.add(key)
        retries += 1
    assignment, value, valid, audit = best if best else ({}, Fraction(0), True, {})
    ledger.setdefault("select_audit", audit)
    ledger["undershoot"] = True
    stats.merge(net.stats)
    return SolveResult(assignment, value, T, alpha, beta, retries,
                       stats, ledger, valid)
