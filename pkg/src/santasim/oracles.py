"""Independent exact oracles: branch-and-bound max-min allocation, a
rational phase-one simplex for LP feasibility, and assignment verification.

These deliberately share no code with the approximation pipeline or the
multiplicative-weights solver; acceptance tests play them against each
other.
"""

from fractions import Fraction

from .instance import Instance


# --------------------------------------------------------------------------
# Exact max-min allocation by branch and bound
# --------------------------------------------------------------------------

def brute_force_opt(inst: Instance, gift_cap=16, child_cap=12):
    """Exact optimal min-child-value over all gift assignments, with a
    witness.

    Binary search on the answer t; each decision "can every child reach t"
    runs a branch and bound over per-child deficits with gifts in
    descending value: aggregate and per-child remaining-value bounds prune,
    interchangeable gifts are forced into canonical order, and states are
    memoized.  Assigning more never hurts a max-min objective, so gifts are
    only ever given to still-deficient children.
    """
    if inst.num_gifts > gift_cap and inst.num_children > child_cap:
        raise ValueError(
            f"instance too large for exact search ({inst.num_gifts} gifts, "
            f"{inst.num_children} children); raise the caps or use sampling")

    children_of = {g: inst.children_of(g) for g in inst.gifts()}
    if inst.num_children == 0:
        return Fraction(0), {}
    if any(not inst.gifts_of(c) for c in inst.children()):
        return Fraction(0), {}

    # integer values via the common denominator
    den = 1
    for v in inst.values:
        den = den * v.denominator // _gcd(den, v.denominator)
    vals = [int(v * den) for v in inst.values]

    # a single-claimant gift always goes to its claimant
    fixed = {}
    base = [0] * inst.num_children
    free_gifts = []
    for g in sorted(inst.gifts(), key=lambda g: (-vals[g], g)):
        cs = children_of[g]
        if not cs or vals[g] == 0:
            continue
        if len(cs) == 1:
            fixed[g] = cs[0]
            base[cs[0]] += vals[g]
        else:
            free_gifts.append(g)

    theta = min(base[c] + sum(vals[g] for g in free_gifts if c in children_of[g])
                for c in inst.children())
    if theta <= 0:
        return Fraction(0), dict(fixed)

    suffix = [[0] * inst.num_children]   # remaining adjacent value per child
    suffix_any = [0]
    for g in reversed(free_gifts):
        row = list(suffix[-1])
        for c in children_of[g]:
            row[c] += vals[g]
        suffix.append(row)
        suffix_any.append(suffix_any[-1] + vals[g])
    suffix.reverse()
    suffix_any.reverse()

    same_as_prev = [False] * len(free_gifts)
    for i in range(1, len(free_gifts)):
        a, b = free_gifts[i - 1], free_gifts[i]
        same_as_prev[i] = vals[a] == vals[b] and children_of[a] == children_of[b]

    def decision(t):
        """An assignment giving every child value >= t, or None."""
        deficits = tuple(max(0, t - base[c]) for c in inst.children())
        for c in inst.children():
            if deficits[c] > suffix[0][c]:
                return None
        memo = set()
        picks = {}

        def dfs(idx, state, prev_pick):
            if not any(state):
                return True
            if idx == len(free_gifts):
                return False
            if sum(state) > suffix_any[idx]:
                return False   # every gift helps at most one child
            row = suffix[idx]
            for c in inst.children():
                if state[c] > row[c]:
                    return False
            key = (idx, state, prev_pick if same_as_prev[idx] else -1)
            if key in memo:
                return False
            memo.add(key)
            g = free_gifts[idx]
            floor_c = prev_pick if same_as_prev[idx] else -1
            nxt = suffix[idx + 1]
            cand = sorted((c for c in children_of[g]
                           if state[c] > 0 and c >= floor_c),
                          key=lambda c: (nxt[c] - state[c], c))
            if not cand:
                return dfs(idx + 1, state, -1)
            for c in cand:
                ns = list(state)
                ns[c] = max(0, ns[c] - vals[g])
                picks[g] = c
                if dfs(idx + 1, tuple(ns), c):
                    return True
                del picks[g]
            return False

        if dfs(0, deficits, -1):
            return dict(picks)
        return None

    lo, hi = 0, theta
    witness_extra = {}
    while lo < hi:
        mid = (lo + hi + 1) // 2
        got = decision(mid)
        if got is not None:
            lo = mid
            witness_extra = got
        else:
            hi = mid - 1
    witness = dict(fixed)
    witness.update(witness_extra)
    return Fraction(lo, den), witness


def _gcd(a, b):
    while b:
        a, b = b, a % b
    return a


# --------------------------------------------------------------------------
# Exact rational LP feasibility (phase-one simplex, Bland's rule)
# --------------------------------------------------------------------------

def lp_feasibility_oracle(lp, slack) -> bool:
    """Exact verdict for {Cx >= 1, Px <= slack * 1, x >= 0} on a normalized
    mixed LP with dense size at most 64x64.  True means feasible."""
    n_p, n_c, m = lp.n_p, lp.n_c, lp.m
    if max(n_p + n_c, 1) > 64 or m > 64:
        raise ValueError("oracle caps at dense 64x64")
    slack = Fraction(slack)
    if slack < 0:
        # Px >= 0 for any x >= 0, so a packing row forbids everything;
        # with no packing rows only the covering side matters
        if n_p > 0:
            return False
        return all(any(v > 0 for v in vals) for _, vals in lp.c_rows)

    # rows: covering first (>=), then packing (<=); all b >= 0
    rows = []
    for idx, vals in lp.c_rows:
        dense = [Fraction(0)] * m
        for i, v in zip(idx, vals):
            dense[i] = Fraction(v)
        rows.append((dense, Fraction(1), ">="))
    for idx, vals in lp.p_rows:
        dense = [Fraction(0)] * m
        for i, v in zip(idx, vals):
            dense[i] = Fraction(v)
        rows.append((dense, slack, "<="))
    return _phase_one_feasible(rows, m)


def _phase_one_feasible(rows, m) -> bool:
    """Minimize the artificial sum of the standard-form system; feasible iff
    the optimum is zero.  Dense Fraction tableau, Bland's rule."""
    n = len(rows)
    # columns: x (m) | surplus/slack (n) | artificials (as needed)
    ncols = m + n
    art_cols = []
    A = []
    b = []
    basis = []
    for r, (dense, rhs, sense) in enumerate(rows):
        row = list(dense) + [Fraction(0)] * n
        row[m + r] = Fraction(-1) if sense == ">=" else Fraction(1)
        A.append(row)
        b.append(rhs)
        if sense == "<=":
            basis.append(m + r)      # slack starts basic (rhs >= 0)
        else:
            art_cols.append(r)
            basis.append(None)       # artificial, appended below
    for k, r in enumerate(art_cols):
        for i in range(n):
            A[i].append(Fraction(1) if i == r else Fraction(0))
        basis[r] = ncols + k
    ncols += len(art_cols)
    art_set = set(range(m + n, ncols))

    # objective: minimize sum of artificials; reduced costs via z-row
    z = [Fraction(0)] * ncols
    zval = Fraction(0)
    for i in range(n):
        if basis[i] in art_set:
            for j in range(ncols):
                z[j] += A[i][j]
            zval += b[i]

    while True:
        enter = None
        for j in range(ncols):
            if j not in art_set and z[j] > 0:
                enter = j
                break
        if enter is None:
            break
        leave, best = None, None
        for i in range(n):
            if A[i][enter] > 0:
                ratio = b[i] / A[i][enter]
                if best is None or ratio < best or (ratio == best and basis[i] < basis[leave]):
                    best, leave = ratio, i
        if leave is None:
            break   # unbounded in a minimized-nonnegative objective: cannot happen
        piv = A[leave][enter]
        A[leave] = [v / piv for v in A[leave]]
        b[leave] = b[leave] / piv
        for i in range(n):
            if i != leave and A[i][enter] != 0:
                f = A[i][enter]
                A[i] = [A[i][j] - f * A[leave][j] for j in range(ncols)]
                b[i] = b[i] - f * b[leave]
        if z[enter] != 0:
            f = z[enter]
            z = [z[j] - f * A[leave][j] for j in range(ncols)]
            zval = zval - f * b[leave]
        basis[leave] = enter
    return zval == 0


# --------------------------------------------------------------------------
# Assignment verification
# --------------------------------------------------------------------------

def verify_assignment(inst: Instance, assignment: dict):
    """Check a gift->child map: each gift at most once, only desire edges,
    per-child sums recomputed exactly.  Returns (min_child_value, valid,
    problems)."""
    problems = []
    totals = {c: Fraction(0) for c in inst.children()}
    for g, c in assignment.items():
        if c is None:
            continue
        if not (0 <= g < inst.num_gifts):
            problems.append(f"unknown gift {g}")
            continue
        if not (0 <= c < inst.num_children):
            problems.append(f"unknown child {c}")
            continue
        if (c, g) not in inst.edges:
            problems.append(f"assignment ({g}->{c}) is not a desire edge")
            continue
        totals[c] += inst.values[g]
    min_value = min(totals.values()) if totals else Fraction(0)
    return min_value, not problems, problems
