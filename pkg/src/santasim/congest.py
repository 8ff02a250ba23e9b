"""Deterministic round-synchronous message-passing simulator.

Nodes compute in lockstep rounds: messages enqueued in round t are delivered
at the start of round t+1, only along edges of the network.  Every directed
edge carries at most one message per round; its encoded size is accounted
against a per-edge bit budget.  In strict mode an oversized message is
recorded as a violation but still delivered (never silently truncated).

Two execution modes are exposed.  "faithful" runs node step functions against
isolated per-node state and inboxes; "fast" drives the same step functions
through a lean loop that skips defensive copying and target validation.  Both
share the accounting code, so outputs and stats must agree (tests assert it).
"""

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

from .util import ceil_log2, derive_seed

import random


# --------------------------------------------------------------------------
# Message encoding model
# --------------------------------------------------------------------------

class QFloat(NamedTuple):
    """A positive float constrained to a power of (1+delta) grid.

    Transmitting one costs sign/flag bits plus the bits of the grid exponent,
    which is how quantized reals stay within O(log n)-bit messages.
    """

    exponent: int
    value: float


class ChunkMsg(NamedTuple):
    """Fragment of a logical value split across consecutive rounds."""

    bits: int
    last: bool
    payload: object  # carried only on the final fragment


def payload_bits(obj) -> int:
    """Bit size of a message payload under the simulator's encoding model.

    ints are sign+magnitude, floats cost a full machine word, quantized
    floats cost their grid exponent, containers add 2 framing bits.
    """
    if isinstance(obj, ChunkMsg):
        return obj.bits
    if isinstance(obj, bool) or obj is None:
        return 1
    if isinstance(obj, int):
        return 1 + max(1, obj.bit_length())
    if isinstance(obj, float):
        return 64
    if isinstance(obj, QFloat):
        return 2 + max(1, abs(obj.exponent).bit_length())
    if isinstance(obj, str):
        return 8 * len(obj)
    if isinstance(obj, (bytes, bytearray)):
        return 8 * len(obj)
    if isinstance(obj, (tuple, list)):
        return 2 + sum(payload_bits(x) for x in obj)
    if isinstance(obj, dict):
        return 2 + sum(payload_bits(k) + payload_bits(v) for k, v in obj.items())
    if hasattr(obj, "numerator") and hasattr(obj, "denominator"):
        return 2 + max(1, obj.numerator.bit_length()) + max(1, obj.denominator.bit_length())
    raise TypeError(f"payload of type {type(obj).__name__} has no defined encoding")


def plan_chunks(total_bits: int, budget: int) -> list:
    """Split a logical payload of total_bits into per-round fragment sizes."""
    if total_bits <= budget:
        return [total_bits]
    n = (total_bits + budget - 1) // budget
    sizes = [budget] * (n - 1)
    sizes.append(total_bits - budget * (n - 1))
    return sizes


# --------------------------------------------------------------------------
# Stats
# --------------------------------------------------------------------------

@dataclass
class RoundStats:
    rounds_elapsed: int = 0
    max_bits_on_any_edge_per_round: int = 0
    total_messages: int = 0
    budget_violations: int = 0
    violations: list = field(default_factory=list)  # (round, sender, receiver, bits)

    def add_wave(self, sized_messages, budget: int, strict: bool, round_no: int):
        """Account one round's worth of (sender, receiver, bits) triples."""
        for u, v, bits in sized_messages:
            self.total_messages += 1
            if bits > self.max_bits_on_any_edge_per_round:
                self.max_bits_on_any_edge_per_round = bits
            if strict and bits > budget:
                self.budget_violations += 1
                self.violations.append((round_no, u, v, bits))
        self.rounds_elapsed += 1

    def charge_rounds(self, rounds: int):
        self.rounds_elapsed += max(0, rounds)

    def merge(self, other: "RoundStats"):
        self.rounds_elapsed += other.rounds_elapsed
        self.max_bits_on_any_edge_per_round = max(
            self.max_bits_on_any_edge_per_round, other.max_bits_on_any_edge_per_round
        )
        self.total_messages += other.total_messages
        self.budget_violations += other.budget_violations
        self.violations.extend(other.violations)

    def csv_row(self, run_id: str, phase: str) -> str:
        return (
            f"{run_id},{phase},{self.rounds_elapsed},"
            f"{self.max_bits_on_any_edge_per_round},{self.total_messages},"
            f"{self.budget_violations}"
        )


CSV_HEADER = "run_id,phase,rounds,max_edge_bits,messages,violations"


# --------------------------------------------------------------------------
# The network
# --------------------------------------------------------------------------

class CongestNetwork:
    """Synchronous network over an undirected simple graph.

    adjacency is symmetric with no self-loops; the per-edge budget defaults
    to budget_factor * ceil(log2 n) bits per round.
    """

    def __init__(self, nodes, edges, *, bit_budget: Optional[int] = None,
                 budget_factor: int = 8, strict: bool = False, seed: int = 0):
        self.nodes = sorted(set(nodes))
        self.adjacency = {u: [] for u in self.nodes}
        seen = set()
        for u, v in edges:
            if u == v:
                raise ValueError(f"self-loop at node {u}")
            if u not in self.adjacency or v not in self.adjacency:
                raise ValueError(f"edge ({u},{v}) references unknown node")
            key = (u, v) if u < v else (v, u)
            if key in seen:
                continue
            seen.add(key)
            self.adjacency[u].append(v)
            self.adjacency[v].append(u)
        for u in self.nodes:
            self.adjacency[u].sort()
        self.edge_set = seen
        n = max(len(self.nodes), 2)
        self.bit_budget_per_edge = bit_budget if bit_budget is not None else budget_factor * ceil_log2(n)
        if self.bit_budget_per_edge <= 0:
            raise ValueError("bit budget must be positive")
        self.strict = strict
        self.rng_seed = seed
        self.stats = RoundStats()
        self.states = {u: None for u in self.nodes}
        self.inboxes = {u: {} for u in self.nodes}
        self._rngs = {}
        self._diameter = None

    def neighbors(self, u):
        return self.adjacency[u]

    def node_rng(self, u) -> random.Random:
        if u not in self._rngs:
            self._rngs[u] = random.Random(derive_seed(self.rng_seed, "node", u))
        return self._rngs[u]

    def reset(self, states=None):
        self.states = {u: (states[u] if states else None) for u in self.nodes}
        self.inboxes = {u: {} for u in self.nodes}

    def diameter(self) -> int:
        """Hop diameter of the largest component (accounting use only)."""
        if self._diameter is None:
            best = 0
            for src in self.nodes:
                dist = self._bfs_dist(src)
                best = max(best, max((d for d in dist.values()), default=0))
            self._diameter = best
        return self._diameter

    def _bfs_dist(self, src):
        from collections import deque

        dist = {src: 0}
        q = deque([src])
        while q:
            u = q.popleft()
            for v in self.adjacency[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    q.append(v)
        return dist

    # -- round execution ---------------------------------------------------

    def run_round(self, step: Callable, mode: str = "faithful") -> RoundStats:
        """Advance every node exactly one round.

        step(node, state, inbox, rng) -> (state, outbox) where outbox maps
        neighbor ids to payloads.  Messages become next round's inboxes.
        """
        faithful = mode == "faithful"
        delivered = {u: {} for u in self.nodes}
        sized = []
        count = 0
        for u in self.nodes:
            inbox = dict(self.inboxes[u]) if faithful else self.inboxes[u]
            state, outbox = step(u, self.states[u], inbox, self.node_rng(u))
            self.states[u] = state
            if not outbox:
                continue
            for v, msg in outbox.items():
                if faithful and v not in self.adjacency[u]:
                    raise ValueError(f"node {u} attempted to send to non-neighbor {v}")
                sized.append((u, v, payload_bits(msg)))
                delivered[v][u] = msg
                count += 1
        self.stats.add_wave(sized, self.bit_budget_per_edge, self.strict, self.stats.rounds_elapsed + 1)
        self.inboxes = delivered
        self._last_round_messages = count
        return self.stats

    def run_until_quiet(self, step: Callable, mode: str = "faithful", max_rounds: int = 10_000_000):
        """Run rounds until a round moves no messages (that round is counted)."""
        for _ in range(max_rounds):
            self.run_round(step, mode=mode)
            if self._last_round_messages == 0:
                return
        raise RuntimeError("protocol did not quiesce")


# --------------------------------------------------------------------------
# BFS tree
# --------------------------------------------------------------------------

@dataclass
class BfsTree:
    root: int
    parent: dict
    depth: dict
    children: dict
    unreachable: frozenset

    def max_depth(self) -> int:
        return max((d for d in self.depth.values()), default=0)

    def levels(self):
        """Nodes grouped by depth, each level sorted."""
        out = {}
        for u, d in self.depth.items():
            out.setdefault(d, []).append(u)
        return [sorted(out[d]) for d in sorted(out)]


def bfs_tree(net: CongestNetwork, root, mode: str = "faithful") -> BfsTree:
    """Breadth-first tree by synchronous flooding; parent is the lowest-id
    neighbor one level up.  Costs eccentricity(root)+2 rounds."""

    def step(u, st, inbox, rng):
        if st is None:
            st = {"depth": 0 if u == root else None, "parent": None,
                  "children": [], "announce": u == root}
        anns = [(d, s, p) for s, (d, p) in inbox.items()]
        if anns:
            if st["depth"] is None:
                best = min(a[0] for a in anns)
                st["depth"] = best + 1
                st["parent"] = min(s for d, s, p in anns if d == best)
                st["announce"] = True
            for d, s, p in anns:
                if p == u:
                    st["children"].append(s)
        out = {}
        if st["announce"]:
            st["announce"] = False
            out = {v: (st["depth"], st["parent"]) for v in net.neighbors(u)}
        return st, out

    net.reset()
    net.run_until_quiet(step, mode=mode)
    parent, depth, children = {}, {}, {}
    for u in net.nodes:
        st = net.states[u]
        if st["depth"] is not None:
            depth[u] = st["depth"]
            parent[u] = st["parent"]
            children[u] = sorted(st["children"])
    unreachable = frozenset(u for u in net.nodes if u not in depth)
    return BfsTree(root=root, parent=parent, depth=depth, children=children,
                   unreachable=unreachable)


# --------------------------------------------------------------------------
# Aggregation (convergecast + broadcast)
# --------------------------------------------------------------------------

def fold_combine(combine, own, child_values):
    """Combine own value with children's partials in ascending child order.

    Fixing the order makes float aggregation reproducible across modes.
    """
    acc = own
    for v in child_values:
        acc = combine(acc, v)
    return acc


def aggregate(net: CongestNetwork, tree: BfsTree, values: dict, combine,
              mode: str = "faithful"):
    """Aggregate per-node values at the root with an associative commutative
    operator, then broadcast the result to every node.

    Messages larger than the edge budget are streamed in chunks, so the round
    cost is O(depth + payload_bits/budget) as for standard pipelining.
    """
    budget = net.bit_budget_per_edge

    def make_chunks(value):
        msg = ("agg", value)
        total = payload_bits(msg)
        return [ChunkMsg(b, i == 0, msg if i == 0 else None)
                for i, b in enumerate(reversed(plan_chunks(total, budget)))][::-1]

    def step(u, st, inbox, rng):
        if st is None:
            st = {"got": {}, "sent": False, "queue": {}, "result": None,
                  "done_kids": set(), "partial": None}
        for s, m in inbox.items():
            if isinstance(m, ChunkMsg):
                if m.last:
                    tag, val = m.payload
                    if tag == "agg":
                        st["got"][s] = val
                    else:  # result broadcast
                        st["result"] = val
            else:
                raise AssertionError("unexpected message")
        out = {}
        kids = tree.children.get(u, [])
        if not st["sent"] and all(c in st["got"] for c in kids):
            st["partial"] = fold_combine(combine, values[u],
                                         [st["got"][c] for c in kids])
            st["sent"] = True
            if u == tree.root:
                st["result"] = st["partial"]
            else:
                st["queue"][tree.parent[u]] = make_chunks(st["partial"])
        if st["result"] is not None and not st["done_kids"] and kids:
            msg = ("res", st["result"])
            total = payload_bits(msg)
            for c in kids:
                st["queue"][c] = [ChunkMsg(b, i == len(plan_chunks(total, budget)) - 1,
                                           msg if i == len(plan_chunks(total, budget)) - 1 else None)
                                  for i, b in enumerate(plan_chunks(total, budget))]
            st["done_kids"] = set(kids)
        for v in list(st["queue"]):
            q = st["queue"][v]
            if q:
                out[v] = q.pop(0)
            if not q:
                del st["queue"][v]
        return st, out

    net.reset()
    net.run_until_quiet(step, mode=mode)
    results = {u: net.states[u]["result"] for u in tree.depth}
    root_val = results[tree.root]
    assert all(v == root_val for v in results.values())
    return root_val


# --------------------------------------------------------------------------
# Leader election
# --------------------------------------------------------------------------

def elect_leader(net: CongestNetwork, mode: str = "faithful"):
    """All nodes agree on the maximum node id by iterated max-flooding."""

    def step(u, st, inbox, rng):
        if st is None:
            st = {"known": u, "announce": True}
        best = max([m for m in inbox.values()] + [st["known"]])
        if best > st["known"]:
            st["known"] = best
            st["announce"] = True
        out = {}
        if st["announce"]:
            st["announce"] = False
            out = {v: st["known"] for v in net.neighbors(u)}
        return st, out

    net.reset()
    net.run_until_quiet(step, mode=mode)
    leaders = {net.states[u]["known"] for u in net.nodes}
    if len(leaders) != 1:
        raise ValueError("leader election requires a connected network")
    return leaders.pop()


# --------------------------------------------------------------------------
# Virtual graphs (path contraction)
# --------------------------------------------------------------------------

@dataclass
class VirtualEdge:
    vid: int
    u: int
    v: int
    kind: str               # "direct" | "contracted"
    path: list              # base edges (a, b) in order from u to v
    parity: int             # len(path) mod 2


@dataclass
class VirtualGraph:
    base_nodes: list
    virtual_nodes: list
    virtual_edges: list
    shortcut_set: frozenset

    def expand(self):
        """All base edges reproduced from the virtual edges, normalized."""
        out = []
        for e in self.virtual_edges:
            for a, b in e.path:
                out.append((a, b) if a < b else (b, a))
        return sorted(out)


def _chain_decompose(nodes, edges):
    """Split a subgraph into maximal chains through degree-2 interior
    vertices.  Returns (chains, pure_cycles); a chain is a base-edge path
    whose interior vertices all have degree two."""
    adj = {}
    for a, b in edges:
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    for u in adj:
        adj[u].sort()
    deg = {u: len(vs) for u, vs in adj.items()}
    anchors = sorted(u for u in adj if deg[u] != 2)
    used = set()
    chains = []

    def norm(a, b):
        return (a, b) if a < b else (b, a)

    for a in anchors:
        for nb in adj[a]:
            e = norm(a, nb)
            if e in used:
                continue
            path = [(a, nb)]
            used.add(e)
            prev, cur = a, nb
            while cur not in anchors:
                nxt = [w for w in adj[cur] if w != prev]
                if not nxt:
                    break
                step_to = nxt[0]
                e2 = norm(cur, step_to)
                if e2 in used:
                    break
                used.add(e2)
                path.append((cur, step_to))
                prev, cur = cur, step_to
            chains.append(path)
    # remaining edges form pure cycles of degree-2 vertices
    cycles = []
    for a, b in sorted(edges):
        e = norm(a, b)
        if e in used:
            continue
        cyc = [(a, b)]
        used.add(e)
        prev, cur = a, b
        while cur != a:
            nxt = [w for w in adj[cur] if w != prev][0]
            used.add(norm(cur, nxt))
            cyc.append((cur, nxt))
            prev, cur = cur, nxt
        cycles.append(cyc)
    return chains, cycles


def compress_virtual_graph(net: CongestNetwork, subgraph_edges) -> VirtualGraph:
    """Contract every maximal path of interior-degree-2 vertices into one
    tagged virtual edge.  Pure cycles are split at two anchor vertices so no
    virtual self-loop arises."""
    edges = sorted({(a, b) if a < b else (b, a) for a, b in subgraph_edges})
    for a, b in edges:
        if (a, b) not in net.edge_set and (b, a) not in net.edge_set:
            raise ValueError(f"edge ({a},{b}) not in the base network")
    nodes = sorted({x for e in edges for x in e})
    chains, cycles = _chain_decompose(nodes, edges)
    vedges = []
    vid = 0
    vnodes = set()
    for path in chains:
        u, v = path[0][0], path[-1][1]
        if u == v and len(path) > 1:
            # chain closing on its anchor (cycle hanging off one vertex):
            # split at the lowest-id interior vertex to avoid a self-loop
            interior = [b for a, b in path[:-1]]
            cut = interior.index(min(interior)) + 1
            halves = [path[:cut], path[cut:]]
        else:
            halves = [path]
        for arc in halves:
            a, b = arc[0][0], arc[-1][1]
            vnodes.update((a, b))
            kind = "direct" if len(arc) == 1 else "contracted"
            vedges.append(VirtualEdge(vid, a, b, kind, arc, len(arc) % 2))
            vid += 1
    for cyc in cycles:
        # split at the two lowest-id vertices on the cycle
        verts = [e[0] for e in cyc]
        lo1, lo2 = sorted(verts)[:2]
        i1, i2 = verts.index(lo1), verts.index(lo2)
        if i1 > i2:
            i1, i2 = i2, i1
        arc1 = cyc[i1:i2]
        arc2 = cyc[i2:] + cyc[:i1]
        for arc in (arc1, arc2):
            u, v = arc[0][0], arc[-1][1]
            vnodes.update((u, v))
            kind = "direct" if len(arc) == 1 else "contracted"
            vedges.append(VirtualEdge(vid, u, v, kind, arc, len(arc) % 2))
            vid += 1
    # shortcut set: every ceil(sqrt(n))-th interior vertex on long chains
    stride = max(1, math.isqrt(max(len(net.nodes), 1)))
    if stride * stride < len(net.nodes):
        stride += 1
    shortcuts = set()
    for e in vedges:
        if e.kind == "contracted" and len(e.path) > stride:
            start = min(e.u, e.v)
            path = e.path if e.path[0][0] == start else [(b, a) for a, b in reversed(e.path)]
            interior = [b for a, b in path[:-1]]
            shortcuts.update(interior[stride - 1::stride])
    net.stats.charge_rounds(charge_virtual_rounds(net))
    return VirtualGraph(base_nodes=nodes, virtual_nodes=sorted(vnodes),
                        virtual_edges=vedges, shortcut_set=frozenset(shortcuts))


def charge_virtual_rounds(net: CongestNetwork, factor: int = 1) -> int:
    """Configurable charge for one round on a compressed virtual graph.

    Reported for accounting only; roughly sqrt(n) + D + 1 base rounds.
    """
    n = len(net.nodes)
    return factor * (math.isqrt(max(n, 1)) + net.diameter() + 1)


# --------------------------------------------------------------------------
# Forest rooting by Rake & Compress
# --------------------------------------------------------------------------

class _2Edge:
    """Working edge for rake/compress; `sub` holds the ordered constituent
    edges from u to v when this edge is a contraction."""

    __slots__ = ("u", "v", "sub")

    def __init__(self, u, v, sub=None):
        self.u, self.v, self.sub = u, v, sub

    def other(self, x):
        return self.v if x == self.u else self.u


def root_forest(net: CongestNetwork, forest_edges, roots=None) -> dict:
    """Root every tree of the forest; returns per-node parent pointers
    (None at roots).

    Iterated Rake (remove all vertices of degree at most one) and Compress
    (contract runs of degree-2 vertices), with reverse unrolling baked into
    the orientation of each removed edge.  Vertices listed in `roots` are
    protected from removal and become their trees' roots; otherwise the last
    survivor of each tree is the root.  Rounds charged: one per Rake pass
    plus a virtual-graph charge per Compress pass.
    """
    roots = set(roots or ())
    edges = sorted({(a, b) if a < b else (b, a) for a, b in forest_edges})
    verts = sorted({x for e in edges for x in e} | roots)

    uf = {v: v for v in verts}

    def find(x):
        while uf[x] != x:
            uf[x] = uf[uf[x]]
            x = uf[x]
        return x

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra == rb:
            raise ValueError("input contains a cycle; not a forest")
        uf[ra] = rb
    comp_roots = {}
    for r in roots:
        c = find(r)
        if c in comp_roots:
            raise ValueError("two designated roots in one tree")
        comp_roots[c] = r

    work = {v: [] for v in verts}
    for a, b in edges:
        e = _2Edge(a, b)
        work[a].append(e)
        work[b].append(e)

    parent = {}

    def orient(e, frm):
        # point the parent chain from `frm` through e toward the other end
        if e.sub is None:
            parent[frm] = e.other(frm)
            return
        cur = frm
        seq = e.sub if frm == e.u else list(reversed(e.sub))
        for ce in seq:
            orient(ce, cur)
            cur = ce.other(cur)

    alive = set(verts)
    rounds = 0
    while alive:
        # ---- Rake ----
        deg = {v: len(work[v]) for v in alive}
        rake = sorted(v for v in alive if deg[v] <= 1 and v not in roots)
        for v in sorted(v for v in alive if deg[v] == 0 and v in roots):
            parent[v] = None
            alive.discard(v)
        removed = set()
        for v in rake:
            if v in removed:
                continue
            if not work[v]:
                parent[v] = None
                removed.add(v)
                continue
            e = work[v][0]
            u = e.other(v)
            if u in rake and u not in removed and len(work[u]) == 1:
                # two-vertex tree: max id wins unless one end is protected
                top = max(u, v)
                bot = min(u, v)
                orient(e, bot)
                parent[top] = None
                removed.update((u, v))
                work[u] = []
                work[v] = []
                continue
            orient(e, v)
            removed.add(v)
            work[v] = []
            work[u] = [x for x in work[u] if x is not e]
        alive -= removed
        rounds += 1
        if not alive:
            break
        # ---- Compress ----
        deg = {v: len(work[v]) for v in alive}
        interior = {v for v in alive if deg[v] == 2 and v not in roots}
        compressed = False
        seen = set()
        for v0 in sorted(interior):
            if v0 in seen:
                continue
            run = [v0]
            for direction in (0, 1):
                cur, prev_e = v0, None
                while True:
                    cand = [e for e in work[cur]
                            if e is not prev_e and e.other(cur) in interior
                            and e.other(cur) not in run]
                    if not cand:
                        break
                    e = cand[0]
                    nxt = e.other(cur)
                    if direction == 0:
                        run.append(nxt)
                    else:
                        run.insert(0, nxt)
                    prev_e, cur = e, nxt
            seen.update(run)
            first, last = run[0], run[-1]
            # boundary edges to the anchors on each side
            inner_edges = []
            cur = first
            for nxt in run[1:]:
                mid = [e for e in work[cur] if e.other(cur) == nxt][0]
                inner_edges.append(mid)
                cur = nxt
            left_cands = [e for e in work[first] if e not in inner_edges]
            right_cands = [e for e in work[last] if e not in inner_edges and e not in left_cands[:1]]
            e_left = left_cands[0]
            e_right = right_cands[0]
            left, right = e_left.other(first), e_right.other(last)
            seq = [e_left] + inner_edges + [e_right]
            # re-order so the sequence runs left -> right
            newe = _2Edge(left, right, sub=seq)
            # seq direction: e_left from left to first, onward to right
            for x in run:
                work[x] = []
                alive.discard(x)
            work[left] = [x for x in work[left] if x is not e_left] + [newe]
            work[right] = [x for x in work[right] if x is not e_right] + [newe]
            compressed = True
        if compressed:
            rounds += charge_virtual_rounds(net)
        if not rake and not compressed:
            raise AssertionError("rake/compress made no progress")

    net.stats.charge_rounds(rounds)
    for v in verts:
        parent.setdefault(v, None)
    return parent
