"""Degree-sum-preserving cycle rounding on weighted bipartite graphs.

The primitive repeatedly restricts the graph to its fractional edges,
simplifies it (peel degree-1 vertices, contract odd runs of degree-2
vertices), splits it into low-diameter clusters, extracts an Eulerian
subgraph per cluster with a T-join, partitions that into edge-disjoint
cycles, and rounds every cycle: weights shift alternately by the smallest
distance of any cycle edge to a bound, so per-vertex weighted degrees are
conserved and at least one edge per cycle becomes integral.  The loop ends
when the fractional edges form a forest.

Weights may be floats (integrality tolerance tau, final snap-to-bound pass)
or Fractions (exact, tau = 0).  Each edge can carry its own cap, which is
how the value-weighted variant rounds small-gift assignments.
"""

import math
import random
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

from .util import derive_seed


def norm_edge(u, v):
    return (u, v) if u < v else (v, u)


def vertex_weight_sums(edges, w):
    """Per-vertex sum of incident edge weights (conservation oracle)."""
    sums = {}
    for u, v in edges:
        key = norm_edge(u, v)
        sums[u] = sums.get(u, 0) + w[key]
        sums[v] = sums.get(v, 0) + w[key]
    return sums


def two_color(nodes, edges):
    adj = {u: [] for u in nodes}
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    color = {}
    for s in sorted(adj):
        if s in color:
            continue
        color[s] = 0
        q = deque([s])
        while q:
            u = q.popleft()
            for v in adj[u]:
                if v not in color:
                    color[v] = 1 - color[u]
                    q.append(v)
                elif color[v] == color[u]:
                    raise ValueError("graph is not bipartite")
    return color


def has_cycle(edges) -> bool:
    """Union-find cycle detector over an edge list."""
    uf = {}

    def find(x):
        uf.setdefault(x, x)
        while uf[x] != x:
            uf[x] = uf[uf[x]]
            x = uf[x]
        return x

    for u, v in edges:
        ru, rv = find(u), find(v)
        if ru == rv:
            return True
        uf[ru] = rv
    return False


# --------------------------------------------------------------------------
# Low diameter decomposition
# --------------------------------------------------------------------------

@dataclass
class LddClustering:
    clusters: list          # sorted vertex lists
    centers: list
    radii: list             # per-cluster induced diameter (2-approx on big ones)
    cut_edges: list
    cut_fraction: float
    attempts: int = 1

    def cluster_of(self):
        out = {}
        for k, cl in enumerate(self.clusters):
            for v in cl:
                out[v] = k
        return out


def ldd(nodes, edges, beta=0.1, seed=0, max_attempts=20, d_max=None) -> LddClustering:
    """Randomized low-diameter decomposition by exponentially shifted
    multi-source growth: vertex v joins the center minimizing
    dist(center, v) - delay(center) with delay ~ Exp(beta), cutting each
    edge with probability O(beta).  Retries on a fresh seed while the
    realized cut fraction exceeds 2*beta."""
    import heapq

    nodes = sorted(set(nodes) | {x for e in edges for x in e})
    adj = {u: [] for u in nodes}
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    for u in nodes:
        adj[u].sort()
    if not nodes:
        return LddClustering([], [], [], [], 0.0)
    m = max(len(edges), 1)
    if d_max is None:
        d_max = max(4, math.ceil(6.0 * math.log(max(len(nodes), 2)) / beta))

    best = None
    for attempt in range(1, max_attempts + 1):
        rng = random.Random(derive_seed(seed, "ldd", attempt))
        delay = {u: rng.expovariate(beta) for u in nodes}
        key, owner = {}, {}
        heap = []
        for u in nodes:
            k = (-delay[u], u, u)
            key[u] = k
            heapq.heappush(heap, (k, u))
        done = set()
        while heap:
            k, u = heapq.heappop(heap)
            if u in done or key[u] != k:
                continue
            done.add(u)
            owner[u] = k[1]
            for v in adj[u]:
                cand = (k[0] + 1.0, k[1], u)
                if v not in done and (v not in key or cand < key[v]):
                    key[v] = cand
                    heapq.heappush(heap, (cand, v))
        groups = {}
        for u in nodes:
            groups.setdefault(owner[u], []).append(u)
        clusters = [sorted(g) for _, g in sorted(groups.items())]
        cl_of = {}
        for kk, cl in enumerate(clusters):
            for v in cl:
                cl_of[v] = kk
        cut = [e for e in edges if cl_of[e[0]] != cl_of[e[1]]]
        frac = len(cut) / m
        radii = [_cluster_diameter(cl, adj) for cl in clusters]
        cand = LddClustering(clusters, sorted(groups), radii, cut, frac, attempt)
        if best is None or frac < best.cut_fraction:
            best = cand
        if frac <= 2 * beta and max(radii, default=0) <= d_max:
            return cand
    return best


def _bfs_ecc(s, cset, adj):
    dist = {s: 0}
    q = deque([s])
    far = s
    while q:
        u = q.popleft()
        for v in adj[u]:
            if v in cset and v not in dist:
                dist[v] = dist[u] + 1
                far = v if dist[v] > dist[far] else far
                q.append(v)
    return dist[far], far


def _cluster_diameter(cluster, adj):
    cset = set(cluster)
    if len(cluster) <= 1:
        return 0
    ecc, far = _bfs_ecc(cluster[0], cset, adj)
    if len(cluster) <= 64:
        return max(_bfs_ecc(s, cset, adj)[0] for s in cluster)
    return _bfs_ecc(far, cset, adj)[0]   # double sweep, exact on trees


# --------------------------------------------------------------------------
# T-joins (parity-constrained acyclic subgraphs)
# --------------------------------------------------------------------------

def t_join(nodes, edges, T):
    """Acyclic edge set whose degree is odd exactly on T.

    Per connected component, builds a BFS tree rooted at its smallest
    T-vertex and keeps the parent edge of every vertex whose subtree holds
    an odd number of T-vertices.  |T| must be even per component; edges is
    a list so multigraphs are fine.  Returns edge indices into `edges`.
    """
    T = set(T)
    nodes = sorted(set(nodes) | {x for e in edges for x in e})
    if len(T) % 2 != 0:
        raise ValueError("|T| must be even")
    if not T.issubset(nodes):
        raise ValueError("T must be a subset of the vertices")
    adj = {u: [] for u in nodes}
    for k, (u, v) in enumerate(edges):
        adj[u].append((v, k))
        adj[v].append((u, k))
    for u in nodes:
        adj[u].sort()

    chosen = []
    seen = set()
    for start in sorted(nodes):
        if start in seen:
            continue
        comp = {start}
        q = deque([start])
        while q:
            u = q.popleft()
            for v, _ in adj[u]:
                if v not in comp:
                    comp.add(v)
                    q.append(v)
        seen |= comp
        tset = T & comp
        if len(tset) % 2 != 0:
            raise ValueError("component holds an odd number of T-vertices")
        if not tset:
            continue
        root = min(tset)
        parent, parent_edge, order = {root: None}, {}, [root]
        q = deque([root])
        while q:
            u = q.popleft()
            for v, k in adj[u]:
                if v not in parent:
                    parent[v] = u
                    parent_edge[v] = k
                    order.append(v)
                    q.append(v)
        odd = {u: (u in tset) for u in comp}
        for u in reversed(order):
            if u == root:
                continue
            if odd[u]:
                chosen.append(parent_edge[u])
                odd[parent[u]] = not odd[parent[u]]

    deg = {}
    for k in chosen:
        u, v = edges[k]
        deg[u] = deg.get(u, 0) + 1
        deg[v] = deg.get(v, 0) + 1
    for u in nodes:
        if (deg.get(u, 0) % 2 == 1) != (u in T):
            raise AssertionError("parity condition violated")
    return sorted(chosen)


# --------------------------------------------------------------------------
# Euler partition into edge-disjoint simple cycles
# --------------------------------------------------------------------------

def cycle_decompose(edges):
    """Partition an even-degree multigraph into vertex-simple edge-disjoint
    cycles covering every edge.  Returns a list of cycles, each an oriented
    closed walk of (u, v) pairs."""
    pairs, _ = cycle_decompose_keyed(edges)
    return pairs


def cycle_decompose_keyed(edges):
    """As cycle_decompose, also returning each cycle's indices into edges."""
    adj = {}
    for k, (u, v) in enumerate(edges):
        adj.setdefault(u, []).append((v, k))
        adj.setdefault(v, []).append((u, k))
    for u, lst in adj.items():
        if len(lst) % 2 != 0:
            raise ValueError(f"vertex {u} has odd degree")
        lst.sort(reverse=True)
    used = [False] * len(edges)
    cycles_v, cycles_k = [], []

    def next_edge(u):
        lst = adj[u]
        while lst and used[lst[-1][1]]:
            lst.pop()
        return lst[-1] if lst else None

    for start in sorted(adj):
        while next_edge(start) is not None:
            # walk from start; every time the walk revisits a vertex on the
            # current path, the loop pops off as one simple cycle
            path_v = [start]
            path_k = []
            pos = {start: 0}
            cur = start
            while True:
                nxt = next_edge(cur)
                if nxt is None:
                    assert cur == start and not path_k
                    break
                v, k = nxt
                used[k] = True
                if v in pos:
                    i = pos[v]
                    cyc_nodes = path_v[i:] + [v]
                    cyc_keys = path_k[i:] + [k]
                    cycles_v.append([(cyc_nodes[j], cyc_nodes[j + 1])
                                     for j in range(len(cyc_keys))])
                    cycles_k.append(cyc_keys)
                    for x in path_v[i + 1:]:
                        del pos[x]
                    path_v = path_v[:i + 1]
                    path_k = path_k[:i]
                    cur = v
                    if cur == start and next_edge(start) is None:
                        break
                else:
                    path_v.append(v)
                    path_k.append(k)
                    pos[v] = len(path_v) - 1
                    cur = v
            assert not path_k, "walk ended mid-path"
    return cycles_v, cycles_k


# --------------------------------------------------------------------------
# Cycle rounding
# --------------------------------------------------------------------------

class Atom:
    """A working edge: one base edge or a contracted odd run of base edges.

    segs is the ordered list of base edge keys; under the atom's "+" move
    the base edge at position j shifts by +delta * (-1)^j.  Odd run length
    makes the per-edge signs identical read from either end, so traversal
    direction never matters.
    """

    __slots__ = ("u", "v", "segs")

    def __init__(self, u, v, segs):
        self.u, self.v, self.segs = u, v, segs

    def other(self, x):
        return self.v if x == self.u else self.u

    def rooms(self, w, caps):
        """(plus_room, minus_room): how far the atom can move either way."""
        plus = minus = None
        for j, key in enumerate(self.segs):
            up, down = caps[key] - w[key], w[key]
            p, mn = (up, down) if j % 2 == 0 else (down, up)
            plus = p if plus is None else min(plus, p)
            minus = mn if minus is None else min(minus, mn)
        return plus, minus

    def apply(self, delta, w):
        for j, key in enumerate(self.segs):
            w[key] = w[key] + delta if j % 2 == 0 else w[key] - delta


def round_one_cycle(atoms, w, caps):
    """Alternately shift an even cycle of atoms so the atom closest to a
    bound reaches it; ties go to the lowest position, preferring the zero
    side.  Returns the shift magnitude."""
    if len(atoms) % 2 != 0:
        raise ValueError("cycle must have even length")
    best_k = best_room = best_dir = None
    for k, a in enumerate(atoms):
        plus, minus = a.rooms(w, caps)
        r, d = (minus, -1) if minus <= plus else (plus, +1)
        if best_room is None or r < best_room:
            best_k, best_room, best_dir = k, r, d
    delta = best_room
    for k, a in enumerate(atoms):
        sign = best_dir if (k - best_k) % 2 == 0 else -best_dir
        a.apply(delta if sign > 0 else -delta, w)
    return delta


def round_single_cycle(cycle_edges, w, caps=None):
    """Round one even, fully fractional cycle of base edges.

    cycle_edges is an oriented closed walk of (u, v) pairs; returns the
    updated weight dict.
    """
    w = dict(w)
    n = len(cycle_edges)
    if n % 2 != 0:
        raise ValueError("cycle must have even length")
    for i, (u, v) in enumerate(cycle_edges):
        if v != cycle_edges[(i + 1) % n][0]:
            raise ValueError("edges do not form a closed walk")
    keys = [norm_edge(u, v) for u, v in cycle_edges]
    if caps is None:
        one = Fraction(1) if isinstance(w[keys[0]], Fraction) else 1.0
        caps = {k: one for k in keys}
    for k in keys:
        if not (0 < w[k] < caps[k]):
            raise ValueError("cycle must be fully fractional")
    atoms = [Atom(u, v, [norm_edge(u, v)]) for u, v in cycle_edges]
    round_one_cycle(atoms, w, caps)
    return w


@dataclass
class RoundReport:
    outer_iterations: int = 0
    rounded_cycles: int = 0
    fallback_cycles: int = 0
    phase_rounds: dict = field(default_factory=dict)
    progress: list = field(default_factory=list)   # per-iteration integral fraction

    def charge(self, phase, rounds):
        if rounds:
            self.phase_rounds[phase] = self.phase_rounds.get(phase, 0) + rounds

    def total_rounds(self):
        return sum(self.phase_rounds.values())


def round_cycles(edges, weights, caps=None, *, mode="float", seed=0,
                 tau=None, beta=0.1, net=None, max_outer=None):
    """Round edge weights until the fractional edges form a forest, exactly
    conserving every per-vertex weighted degree (within tau per vertex in
    float mode).  Returns (new_weights, RoundReport)."""
    edge_list = sorted({norm_edge(u, v) for u, v in edges})
    if mode == "rational":
        w = {e: Fraction(weights[e]) for e in edge_list}
        caps_d = {e: (Fraction(caps[e]) if caps else Fraction(1)) for e in edge_list}
        tau = 0
    elif mode == "float":
        w = {e: float(weights[e]) for e in edge_list}
        caps_d = {e: (float(caps[e]) if caps else 1.0) for e in edge_list}
        tau = 1e-9 if tau is None else tau
    else:
        raise ValueError(f"unknown mode {mode!r}")
    for e in edge_list:
        if not (0 <= w[e] <= caps_d[e]):
            raise ValueError(f"weight of {e} outside [0, cap]")

    nodes = sorted({x for e in edge_list for x in e})
    color = two_color(nodes, edge_list)

    report = RoundReport()
    if max_outer is None:
        max_outer = 10 * len(edge_list) + 64

    def fractional(e):
        return tau < w[e] < caps_d[e] - tau

    it = 0
    reseed = 0
    while True:
        frac_edges = [e for e in edge_list if fractional(e)]
        if not has_cycle(frac_edges):
            break
        it += 1
        if it > max_outer:
            raise RuntimeError("cycle rounding failed to converge")
        report.outer_iterations = it
        before = len(frac_edges)

        atoms = _simplify(frac_edges, color, report)
        work_nodes = sorted({x for a in atoms for x in (a.u, a.v)})
        clusters = ldd(work_nodes, [(a.u, a.v) for a in atoms], beta=beta,
                       seed=derive_seed(seed, "outer", it, reseed))
        report.charge("ldd", max(clusters.radii, default=0) + 1)
        cl_of = clusters.cluster_of()
        for k in range(len(clusters.clusters)):
            in_cl = [a for a in atoms if cl_of[a.u] == k and cl_of[a.v] == k]
            if in_cl:
                _round_cluster(in_cl, w, caps_d, report)
        newly = sum(1 for e in frac_edges if not fractional(e))
        report.progress.append(newly / before if before else 0.0)
        if newly == 0:
            reseed += 1
            if reseed >= 3:
                # stubborn decomposition: round one explicit cycle directly
                walk = _find_cycle(frac_edges)
                atoms1 = [Atom(u, v, [norm_edge(u, v)]) for u, v in walk]
                round_one_cycle(atoms1, w, caps_d)
                report.fallback_cycles += 1
                report.charge("fallback", len(walk))
                reseed = 0
        else:
            reseed = 0

    if mode == "float":
        for e in edge_list:
            if w[e] <= tau:
                w[e] = 0.0
            elif w[e] >= caps_d[e] - tau:
                w[e] = caps_d[e]
    if net is not None:
        net.stats.charge_rounds(report.total_rounds())
    return w, report


def _simplify(frac_edges, color, report):
    """Peel to the 2-core, then contract runs of degree-2 vertices into odd
    atoms.  Returns the working multigraph as a list of Atoms."""
    adj = {}
    for u, v in frac_edges:
        adj.setdefault(u, set()).add(v)
        adj.setdefault(v, set()).add(u)
    rake_rounds = 0
    frontier = deque(sorted(u for u in adj if len(adj[u]) <= 1))
    while frontier:
        rake_rounds += 1
        nxt = set()
        for u in frontier:
            if u not in adj or len(adj[u]) > 1:
                continue
            for v in list(adj[u]):
                adj[v].discard(u)
                if len(adj[v]) <= 1:
                    nxt.add(v)
            del adj[u]
        frontier = deque(sorted(nxt))
    report.charge("rake", rake_rounds)
    core_edges = sorted({norm_edge(u, v) for u in adj for v in adj[u]})
    if not core_edges:
        return []

    deg = {u: len(adj[u]) for u in adj}
    atoms = []
    used = set()

    def walk_chain(a, b):
        path = [(a, b)]
        prev, cur = a, b
        while deg[cur] == 2 and cur != a:
            nxt = next(x for x in sorted(adj[cur]) if x != prev)
            path.append((cur, nxt))
            prev, cur = cur, nxt
        return path

    anchors = sorted(u for u in adj if deg[u] != 2)
    for a in anchors:
        for b in sorted(adj[a]):
            if norm_edge(a, b) in used:
                continue
            path = walk_chain(a, b)
            if any(norm_edge(x, y) in used for x, y in path):
                continue
            used.update(norm_edge(x, y) for x, y in path)
            atoms.extend(_contract_run(path, color))
    for u, v in core_edges:   # leftovers: pure cycles of degree-2 vertices
        if norm_edge(u, v) in used:
            continue
        cyc = walk_chain(u, v)
        used.update(norm_edge(x, y) for x, y in cyc)
        atoms.extend(_split_closed_run(cyc, color))
    report.charge("compress", 1)
    _assert_density(atoms)
    return atoms


def _contract_run(path, color):
    """Anchor-to-anchor run: odd runs collapse to one atom; even runs keep
    their last base edge so every atom stays odd (bipartiteness)."""
    a, b = path[0][0], path[-1][1]
    if a == b:
        return _split_closed_run(path, color, anchored=True)
    k = len(path)
    if k == 1 or k == 2:
        return [Atom(x, y, [norm_edge(x, y)]) for x, y in path] if k == 2 else \
            [Atom(a, b, [norm_edge(*path[0])])]
    if k % 2 == 1:
        return [Atom(a, b, [norm_edge(x, y) for x, y in path])]
    return [Atom(a, path[-1][0], [norm_edge(x, y) for x, y in path[:-1]]),
            Atom(path[-1][0], b, [norm_edge(*path[-1])])]


def _split_closed_run(cyc, color, anchored=False):
    """Split a closed run at two opposite-color vertices into two odd arcs
    so no self-loop and no even atom arises."""
    verts = [e[0] for e in cyc]
    # split at the run's own anchor (lollipop) or at the lowest-id vertex
    a1 = cyc[0][0] if anchored else min(verts)
    i1 = verts.index(a1)
    a2 = min(v for v in verts if color[v] != color[a1])
    i2 = verts.index(a2)
    if i1 > i2:
        i1, i2 = i2, i1
    arcs = [cyc[i1:i2], cyc[i2:] + cyc[:i1]]
    out = []
    for arc in arcs:
        assert len(arc) % 2 == 1, "closed runs in a bipartite graph split oddly"
        out.append(Atom(arc[0][0], arc[-1][1], [norm_edge(x, y) for x, y in arc]))
    return out


def _assert_density(atoms):
    # paper-style m' >= 6n'/5 on the simplified graph, per component,
    # excluding pure-cycle remnants (every vertex degree 2)
    adj = {}
    for k, a in enumerate(atoms):
        adj.setdefault(a.u, []).append(k)
        adj.setdefault(a.v, []).append(k)
    seen = set()
    for s in adj:
        if s in seen:
            continue
        comp, q = {s}, deque([s])
        while q:
            u = q.popleft()
            for k in adj[u]:
                for x in (atoms[k].u, atoms[k].v):
                    if x not in comp:
                        comp.add(x)
                        q.append(x)
        seen |= comp
        if all(len(adj[u]) == 2 for u in comp):
            continue
        m_c = len({k for u in comp for k in adj[u]})
        assert 5 * m_c >= 6 * len(comp), "post-simplification density bound violated"


def _round_cluster(cluster_atoms, w, caps, report):
    deg = {}
    for a in cluster_atoms:
        deg[a.u] = deg.get(a.u, 0) + 1
        deg[a.v] = deg.get(a.v, 0) + 1
    T = sorted(u for u, d in deg.items() if d % 2 == 1)
    idx_edges = [(a.u, a.v) for a in cluster_atoms]
    join = set()
    if T:
        join = set(t_join(sorted(deg), idx_edges, T))
        report.charge("tjoin", 2 * len(deg))
    rest = [k for k in range(len(cluster_atoms)) if k not in join]
    cycles_v, cycles_k = cycle_decompose_keyed([idx_edges[k] for k in rest])
    longest = 0
    for cyc_keys in cycles_k:
        atoms = [cluster_atoms[rest[k]] for k in cyc_keys]
        round_one_cycle(atoms, w, caps)
        report.rounded_cycles += 1
        longest = max(longest, sum(len(a.segs) for a in atoms))
    report.charge("round", longest)


def _find_cycle(edges):
    """Walk inside the 2-core until a vertex repeats; return that loop as an
    oriented closed walk."""
    adj = {}
    for u, v in edges:
        adj.setdefault(u, set()).add(v)
        adj.setdefault(v, set()).add(u)
    changed = True
    while changed:
        changed = False
        for u in sorted(adj):
            if len(adj[u]) <= 1:
                for v in list(adj[u]):
                    adj[v].discard(u)
                del adj[u]
                changed = True
    if not adj:
        raise ValueError("no cycle present")
    start = min(adj)
    walk = [start]
    pos = {start: 0}
    prev, cur = None, start
    while True:
        nxt = min(x for x in adj[cur] if x != prev) if len(adj[cur]) > 1 else next(iter(adj[cur]))
        if nxt in pos:
            loop = walk[pos[nxt]:] + [nxt]
            return [(loop[i], loop[i + 1]) for i in range(len(loop) - 1)]
        walk.append(nxt)
        pos[nxt] = len(walk) - 1
        prev, cur = cur, nxt
