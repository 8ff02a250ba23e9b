"""Distributed execution of the feasibility solver on a CongestNetwork.

Node layout: packing rows get ids 0..n_p-1, covering rows n_p..n_p+n_c-1,
variables follow.  Edges join a row to each variable with a nonzero
coefficient; the row/variable graph must be connected.

Per iteration the protocol runs six waves over a BFS tree rooted at the
elected leader:

  A up/down   stop flags, retired count and activity extrema (tree fold);
              the root replies halt ("h") or continue ("n" + exp shifts).
  B up/down   gather of per-row shifted exponentials; the root adds them
              in ascending row order (exactly like the sequential mode)
              and broadcasts the two sums ("g").
  term        rows send gradient terms ("t") to their variables (retired
              covering rows send a None marker instead).
  D up/down   count of infeasibility votes; the root replies continue
              ("2") or halt.
  x           variables send their updated value to their rows.

Wire tags are single characters to keep control messages within tight
per-edge budgets.

Every logical message is split into chunks no larger than the edge budget,
so strict-mode runs record zero budget violations.  All arithmetic matches
mpclp._solve_sequential expression for expression; in strict mode floats
travel as QFloat records whose bit cost is their quantization-grid index.
"""

import math

from .congest import (
    ChunkMsg,
    CongestNetwork,
    QFloat,
    bfs_tree,
    elect_leader,
    payload_bits,
    plan_chunks,
)
from .mpclp import FeasResult, _strict_setup, quantize, quantize_exponent

INF = math.inf
_NEUTRAL = (False, 0, 0.0, INF, INF)


def _fold(a, b):
    return (a[0] or b[0], a[1] + b[1], max(a[2], b[2]),
            min(a[3], b[3]), min(a[4], b[4]))


def lp_network(lp, *, strict=False, seed=0, budget_factor=8) -> CongestNetwork:
    """Build the row/variable communication graph of a normalized LP."""
    n_p, n_c = lp.n_p, lp.n_c
    base = n_p + n_c
    edges = []
    for j, (idx, _) in enumerate(lp.p_rows):
        edges.extend((j, base + i) for i in idx)
    for j, (idx, _) in enumerate(lp.c_rows):
        edges.extend((n_p + j, base + i) for i in idx)
    nodes = list(range(base + lp.m))
    return CongestNetwork(nodes, edges, strict=strict, seed=seed,
                          budget_factor=budget_factor)


def solve_simulated(lp, eps, K, R, cap, strict, c_delta, seed, budget_factor) -> FeasResult:
    if strict:
        p_rows, c_rows, delta = _strict_setup(lp, eps, R, c_delta)
        q = lambda v: quantize(v, delta) if v > 0 else 0.0
        msafe = 1.0 - 16.0 * delta
    else:
        p_rows, c_rows, delta = lp.p_rows, lp.c_rows, None
        q = lambda v: v
        msafe = 1.0

    n_p, n_c, m = len(p_rows), len(c_rows), lp.m
    base = n_p + n_c
    net = lp_network(lp, strict=strict, seed=seed, budget_factor=budget_factor)
    try:
        leader = elect_leader(net)
    except ValueError:
        raise ValueError("simulated mode requires a connected LP graph") from None
    tree = bfs_tree(net, leader)
    net.reset()

    vote_factor = 1.0 - eps / 50.0
    budget = net.bit_budget_per_edge

    def wire(obj):
        # strict mode transmits positive floats as grid-index records;
        # values are carried exactly, the index only prices the message
        if not strict:
            return obj
        if isinstance(obj, float) and 0.0 < obj < INF:
            return QFloat(quantize_exponent(obj, delta), obj)
        if isinstance(obj, tuple):
            return tuple(wire(x) for x in obj)
        if isinstance(obj, list):
            return [wire(x) for x in obj]
        return obj

    def unwire(obj):
        if isinstance(obj, QFloat):
            return obj.value
        if isinstance(obj, tuple):
            return tuple(unwire(x) for x in obj)
        if isinstance(obj, list):
            return [unwire(x) for x in obj]
        return obj

    def enqueue(st, nbr, logical):
        logical = wire(logical)
        sizes = plan_chunks(payload_bits(logical), budget)
        st["outq"].setdefault(nbr, []).extend(
            ChunkMsg(b, k == len(sizes) - 1, logical if k == len(sizes) - 1 else None)
            for k, b in enumerate(sizes))

    def broadcast(st, u, logical):
        for czech in tree.children.get(u, []):
            enqueue(st, czech, logical)

    def init_state(u):
        role = "p" if u < n_p else ("c" if u < base else "v")
        st = {
            "role": role, "t": 0, "outq": {}, "done": None,
            "kidsA": {}, "kidsB": {}, "kidsD": {},
            "sentA": False, "sentB": False, "sentD": False,
            "ownA": None, "ownB": None, "ownD": None, "rootA": None,
        }
        if role in "pc":
            j = u if role == "p" else u - n_p
            idx, vals = p_rows[j] if role == "p" else c_rows[j]
            st.update(rid=j, idx=idx, vals=vals, xs={}, xs_next={},
                      retired=False, act=None, expv=None)
            for i, v in zip(idx, vals):
                enqueue(st, base + i, ("c", v))
        else:
            st.update(vid=u - base, coefs={}, terms={}, bglob=None,
                      x_full=None, x_sent=None, x_pend=None,
                      n_rows=len(net.neighbors(u)))
        return st

    def balanced_ok(maxp, mincall):
        return (maxp <= (1.0 + eps) * mincall * msafe) and (maxp > 0 or n_p == 0)

    def row_try_A(u, st):
        if st["ownA"] is not None or len(st["xs"]) < len(st["idx"]):
            return
        act = 0.0
        for i, v in zip(st["idx"], st["vals"]):
            act += v * st["xs"][i]
        st["act"] = act
        aq = q(act) if act > 0 else 0.0
        if st["role"] == "p":
            st["ownA"] = (act >= K, 0, aq, INF, INF)
        else:
            if act >= K:
                st["retired"] = True
            live = not st["retired"]
            st["ownA"] = (False, 0 if live else 1, 0.0,
                          aq if live else INF, aq)

    def try_send_up(u, st, kids_key, sent_key, own_key, tag, fold, concat=False):
        """Combine own contribution with the children's and pass it up;
        at the root, return the full aggregate instead."""
        if st[sent_key] or st[own_key] is None:
            return None
        kids = tree.children.get(u, [])
        got = st[kids_key]
        if any(k not in got for k in kids):
            return None
        if concat:
            partial = list(st[own_key])
            for k in kids:
                partial.extend(got[k])
        else:
            partial = st[own_key]
            for k in kids:
                partial = fold(partial, got[k])
        st[sent_key] = True
        st[kids_key] = {}
        if u == tree.root:
            return partial
        enqueue(st, tree.parent[u], (tag, st["t"], partial))
        return None

    def handle_A_down(u, st, msg):
        broadcast(st, u, msg)
        if msg[0] == "h":
            st["done"] = msg[1]
            return
        _, M, m_w = msg
        if st["role"] == "p":
            st["expv"] = math.exp(st["act"] - M)
            st["ownB"] = [(st["rid"], True, q(st["expv"]))]
        elif st["role"] == "c":
            if st["retired"]:
                st["expv"] = None
                st["ownB"] = [(n_p + st["rid"], False, 0.0)]
            else:
                st["expv"] = math.exp(m_w - st["act"])
                st["ownB"] = [(n_p + st["rid"], True, q(st["expv"]))]
        else:
            st["ownB"] = []

    def root_decide_A(st, agg):
        stop_p, retired_cnt, maxp, minclive, mincall = agg
        st["rootA"] = agg
        if stop_p or retired_cnt == n_c:
            return ("h", "stop_p" if stop_p else "stop_c")
        if st["t"] >= cap:
            return ("h", "balanced" if balanced_ok(maxp, mincall) else "cap")
        return ("n", maxp, minclive)

    def root_decide_B(pairs):
        by_id = {j: (live, val) for j, live, val in pairs}
        y_glob = 0.0
        for j in range(n_p):
            y_glob += by_id[j][1]
        z_glob = 0.0
        for j in range(n_p, base):
            live, val = by_id[j]
            if live:
                z_glob += val
        return ("g", q(y_glob) if y_glob > 0 else 0.0,
                q(z_glob) if z_glob > 0 else 0.0)

    def handle_B_down(u, st, msg):
        broadcast(st, u, msg)
        if st["role"] in "pc":
            for i, v in zip(st["idx"], st["vals"]):
                if st["expv"] is None:
                    enqueue(st, base + i, ("t", st["t"], None))
                else:
                    enqueue(st, base + i, ("t", st["t"], q(v * st["expv"])))
            st["ownD"] = 0  # rows hold no vote
        else:
            st["bglob"] = (msg[1], msg[2])

    def var_try_vote(u, st):
        if (st["role"] != "v" or st["ownD"] is not None or st["bglob"] is None
                or len(st["terms"]) < st["n_rows"]):
            return
        y_glob, z_glob = st["bglob"]
        a_num = b_num = 0.0
        for j in sorted(st["terms"]):
            val = st["terms"][j]
            if val is None:
                continue
            if j < n_p:
                a_num += val
            else:
                b_num += val
        a_i = a_num / y_glob if y_glob > 0 else 0.0
        b_i = b_num / z_glob if z_glob > 0 else 0.0
        if a_i > vote_factor * b_i:
            st["ownD"] = 1
            st["x_pend"] = st["x_full"]
        else:
            d = 0.5 * (1.0 - a_i / b_i) if b_i > 0 else 0.0
            st["ownD"] = 0
            st["x_pend"] = st["x_full"] * (1.0 + d / K) if d > 0 else st["x_full"]

    def root_decide_D(st, votes):
        if votes == m:
            _, _, maxp, _, mincall = st["rootA"]
            return ("h", "balanced" if balanced_ok(maxp, mincall) else "votes")
        return ("2",)

    def handle_D_down(u, st, msg):
        broadcast(st, u, msg)
        if msg[0] == "h":
            st["done"] = msg[1]
            return
        st["t"] += 1
        st["sentA"] = st["sentB"] = st["sentD"] = False
        st["ownA"] = st["ownB"] = st["ownD"] = None
        if st["role"] == "v":
            st["x_full"] = st["x_pend"]
            st["x_sent"] = q(st["x_full"])
            st["terms"] = {}
            st["bglob"] = None
            for r in net.neighbors(u):
                enqueue(st, r, ("x", st["t"], st["x_sent"]))
        else:
            st["xs"] = st["xs_next"]
            st["xs_next"] = {}
            st["act"] = st["expv"] = None

    def step(u, st, inbox, rng):
        if st is None:
            st = init_state(u)
        for sender in sorted(inbox):
            chunk = inbox[sender]
            if not chunk.last:
                continue
            msg = unwire(chunk.payload)
            tag = msg[0]
            if tag == "c":
                st["coefs"][sender] = msg[1]
                if len(st["coefs"]) == st["n_rows"]:
                    pmax = max((v for r, v in st["coefs"].items() if r < n_p),
                               default=0.0)
                    x0 = 1.0 / (max(m, 1) * pmax) if pmax > 0 else 1.0 / max(m, 1)
                    st["x_full"], st["x_sent"] = x0, q(x0)
                    for r in net.neighbors(u):
                        enqueue(st, r, ("x", 0, st["x_sent"]))
            elif tag == "x":
                # a variable one tree-hop ahead may deliver next iteration's
                # value before this row hears cont2; buffer it
                if msg[1] == st["t"]:
                    st["xs"][sender - base] = msg[2]
                else:
                    assert msg[1] == st["t"] + 1
                    st["xs_next"][sender - base] = msg[2]
            elif tag == "A":
                assert msg[1] == st["t"]
                st["kidsA"][sender] = msg[2]
            elif tag == "B":
                assert msg[1] == st["t"]
                st["kidsB"][sender] = msg[2]
            elif tag == "D":
                assert msg[1] == st["t"]
                st["kidsD"][sender] = msg[2]
            elif tag in ("h", "n"):
                handle_A_down(u, st, msg)
            elif tag == "g":
                handle_B_down(u, st, msg)
            elif tag == "t":
                assert msg[1] == st["t"]
                st["terms"][sender] = msg[2]
            elif tag == "2":
                handle_D_down(u, st, msg)
            else:
                raise AssertionError(f"unknown tag {tag}")

        if st["done"] is None:
            if st["role"] in "pc":
                row_try_A(u, st)
            elif st["ownA"] is None and st["x_full"] is not None:
                st["ownA"] = _NEUTRAL
            agg = try_send_up(u, st, "kidsA", "sentA", "ownA", "A", _fold)
            if agg is not None:
                handle_A_down(u, st, root_decide_A(st, agg))
            if st["done"] is None:
                pairs = try_send_up(u, st, "kidsB", "sentB", "ownB", "B",
                                    None, concat=True)
                if pairs is not None:
                    handle_B_down(u, st, root_decide_B(pairs))
                var_try_vote(u, st)
                votes = try_send_up(u, st, "kidsD", "sentD", "ownD", "D",
                                    lambda a, b: a + b)
                if votes is not None:
                    handle_D_down(u, st, root_decide_D(st, votes))

        out = {}
        for v in sorted(st["outq"]):
            pending = st["outq"][v]
            if pending:
                out[v] = pending.pop(0)
        st["outq"] = {v: p for v, p in st["outq"].items() if p}
        return st, out

    net.run_until_quiet(step, max_rounds=50_000_000)
    reasons = {net.states[u]["done"] for u in net.nodes}
    assert len(reasons) == 1, f"inconsistent verdicts {reasons}"
    reason = reasons.pop()
    t_final = net.states[tree.root]["t"]
    feasible = reason in ("stop_p", "stop_c", "balanced")
    x = None
    if feasible:
        xs = [net.states[base + i]["x_full"] for i in range(m)]
        x = [v / K for v in xs] if reason in ("stop_p", "stop_c") else xs
    return FeasResult(feasible, x, t_final, reason, K, R, net.stats)
