"""Mixed packing-covering LP feasibility solver and optimization reduction.

The feasibility routine is a multiplicative-weights loop: every variable
starts tiny and grows by a factor (1 + Delta_i/K) per iteration, where the
step Delta_i compares the variable's packing gradient a_i (softmax weights of
the packing rows) against its covering gradient b_i (softmin weights of the
live covering rows).  The loop stops when a packing row reaches the threshold
K, when every covering row has reached K, when all variables vote that
packing pressure dominates, or at the iteration cap R.

Exponentials are evaluated in shifted form exp(act - M) with M the maximum
transmitted activity, so every exponential argument is <= 0 and no overflow
can occur; all gradient ratios are unchanged by the shift.

Two execution modes produce bit-identical verdicts and x vectors:
"sequential" computes directly, "simulated" runs per-node step functions on a
CongestNetwork whose arithmetic follows the same expressions in the same
order (global sums are gathered at the tree root and added in ascending row
order in both modes).
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .congest import CongestNetwork, QFloat, RoundStats
from .util import format_value


# --------------------------------------------------------------------------
# Quantization to a power-of-(1+delta) grid
# --------------------------------------------------------------------------

def quantize_exponent(v: float, delta: float) -> int:
    """Exact floor exponent of v on the (1+delta) grid."""
    if v <= 0:
        raise ValueError("quantize requires a positive value")
    if not (0 < delta < 1):
        raise ValueError("delta must be in (0,1)")
    e = math.floor(math.log(v) / math.log1p(delta))
    base = 1.0 + delta
    # float log can be off by an ulp; correct to an exact floor
    while base ** (e + 1) <= v:
        e += 1
    while base ** e > v:
        e -= 1
    return e


def quantize(v: float, delta: float) -> float:
    """Round v down to the nearest power of (1+delta); relative error < delta."""
    return (1.0 + delta) ** quantize_exponent(v, delta)


def quantize_q(v: float, delta: float) -> QFloat:
    e = quantize_exponent(v, delta)
    return QFloat(e, (1.0 + delta) ** e)


# --------------------------------------------------------------------------
# The LP container
# --------------------------------------------------------------------------

@dataclass
class MixedLP:
    """Sparse nonnegative packing rows P and covering rows C over m variables.

    Rows are (indices, values) pairs with indices strictly ascending; in
    normalized form both bound vectors are all-ones.
    """

    m: int
    p_rows: list   # list of (tuple[int], tuple[float|Fraction])
    c_rows: list
    p_bounds: list
    c_bounds: list

    def __post_init__(self):
        cols = set()
        for rows in (self.p_rows, self.c_rows):
            for idx, vals in rows:
                if len(idx) != len(vals):
                    raise ValueError("row index/value length mismatch")
                if any(i < 0 or i >= self.m for i in idx):
                    raise ValueError("row index out of range")
                if list(idx) != sorted(idx):
                    raise ValueError("row indices must be ascending")
                if any(v < 0 for v in vals):
                    raise ValueError("entries must be nonnegative")
                cols.update(i for i, v in zip(idx, vals) if v > 0)
        if len(cols) < self.m:
            missing = sorted(set(range(self.m)) - cols)
            raise ValueError(f"isolated variable columns: {missing}")

    @property
    def n_p(self):
        return len(self.p_rows)

    @property
    def n_c(self):
        return len(self.c_rows)

    def is_normalized(self):
        return all(b == 1 for b in self.p_bounds) and all(b == 1 for b in self.c_bounds)


def _to_sparse(row) -> tuple:
    idx, vals = [], []
    for i, v in enumerate(row):
        if v != 0:
            idx.append(i)
            vals.append(float(v))
    return tuple(idx), tuple(vals)


def from_dense(P, C, p=None, c=None) -> MixedLP:
    m = len(P[0]) if P else (len(C[0]) if C else 0)
    p = list(p) if p is not None else [1.0] * len(P)
    c = list(c) if c is not None else [1.0] * len(C)
    return MixedLP(m, [_to_sparse(r) for r in P], [_to_sparse(r) for r in C], p, c)


def normalize(lp: MixedLP) -> MixedLP:
    """Divide each row by its bound, giving unit bounds; rows with a zero or
    negative bound are rejected.  Feasible sets of the min-form problem are
    preserved."""
    for b in list(lp.p_bounds) + list(lp.c_bounds):
        if b <= 0:
            raise ValueError(f"row bound {b} must be positive")
    p_rows = [(idx, tuple(v / lp.p_bounds[j] for v in vals))
              for j, (idx, vals) in enumerate(lp.p_rows)]
    c_rows = [(idx, tuple(v / lp.c_bounds[j] for v in vals))
              for j, (idx, vals) in enumerate(lp.c_rows)]
    return MixedLP(lp.m, p_rows, c_rows, [1.0] * lp.n_p, [1.0] * lp.n_c)


# --------------------------------------------------------------------------
# LP text format
# --------------------------------------------------------------------------

def format_lp_text(lp: MixedLP) -> str:
    lines = [f"mpc {lp.n_p} {lp.n_c} {lp.m}"]
    for j, (idx, vals) in enumerate(lp.p_rows):
        for i, v in zip(idx, vals):
            lines.append(f"P {j} {i} {format_value(Fraction(v).limit_denominator(10**12))}")
    for j, (idx, vals) in enumerate(lp.c_rows):
        for i, v in zip(idx, vals):
            lines.append(f"C {j} {i} {format_value(Fraction(v).limit_denominator(10**12))}")
    for j, b in enumerate(lp.p_bounds):
        lines.append(f"p {j} {format_value(Fraction(b).limit_denominator(10**12))}")
    for j, b in enumerate(lp.c_bounds):
        lines.append(f"c {j} {format_value(Fraction(b).limit_denominator(10**12))}")
    return "\n".join(lines) + "\n"


def parse_lp_text(text: str) -> MixedLP:
    from .util import parse_value

    header = None
    p_entries, c_entries, p_b, c_b = [], [], {}, {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#")[0].strip()
        if not line:
            continue
        tok = line.split()
        if tok[0] == "mpc":
            header = (int(tok[1]), int(tok[2]), int(tok[3]))
        elif tok[0] in ("P", "C"):
            j, i, v = int(tok[1]), int(tok[2]), float(parse_value(tok[3]))
            (p_entries if tok[0] == "P" else c_entries).append((j, i, v))
        elif tok[0] in ("p", "c"):
            (p_b if tok[0] == "p" else c_b)[int(tok[1])] = float(parse_value(tok[2]))
        else:
            raise ValueError(f"line {lineno}: unknown record {tok[0]!r}")
    if header is None:
        raise ValueError("missing mpc header")
    n_p, n_c, m = header
    p_rows = [dict() for _ in range(n_p)]
    c_rows = [dict() for _ in range(n_c)]
    for j, i, v in p_entries:
        p_rows[j][i] = v
    for j, i, v in c_entries:
        c_rows[j][i] = v
    sparse = lambda d: (tuple(sorted(d)), tuple(d[i] for i in sorted(d)))
    return MixedLP(m, [sparse(d) for d in p_rows], [sparse(d) for d in c_rows],
                   [p_b.get(j, 1.0) for j in range(n_p)],
                   [c_b.get(j, 1.0) for j in range(n_c)])


# --------------------------------------------------------------------------
# Feasibility solver
# --------------------------------------------------------------------------

@dataclass
class FeasResult:
    feasible: bool
    x: Optional[list]
    iterations: int
    reason: str          # stop_p | stop_c | balanced | votes | cap | empty_covering_row
    K: float
    R: int
    stats: RoundStats = field(default_factory=RoundStats)

    def __bool__(self):
        return self.feasible


def solver_params(lp: MixedLP, eps: float, c_R: int = 1000):
    """Threshold K and iteration cap R for the normalized LP."""
    N = max(lp.n_p, lp.n_c, lp.m, 2)
    K = 10.0 * math.log(N) / eps
    R = math.ceil(c_R * math.log(N) ** 2 * math.log(max(lp.m, 2) / eps) / eps ** 3)
    return K, R


def _validate_eps(lp: MixedLP, eps: float):
    if not (0 < eps <= 0.5):
        raise ValueError("eps must lie in (0, 1/2]")
    n = max(lp.n_p + lp.n_c + lp.m, 4)
    if eps < 1.0 / n ** 4:
        raise ValueError(
            "eps below 1/poly(n); use the exact rational oracle "
            "(oracles.lp_feasibility_oracle) instead")


def _strict_setup(lp: MixedLP, eps: float, R: int, c_delta: int):
    """Input rounding and the transmission grid for strict-bits mode."""
    delta_in = eps / 100.0
    delta = eps / (200.0 * c_delta * R)
    q_rows = lambda rows: [
        (idx, tuple(quantize(v, delta_in) for v in vals)) for idx, vals in rows]
    return q_rows(lp.p_rows), q_rows(lp.c_rows), delta


def _activity(idx, vals, x):
    s = 0.0
    for i, v in zip(idx, vals):
        s += v * x[i]
    return s


def _initial_x(p_rows, m):
    colmax = [0.0] * m
    for idx, vals in p_rows:
        for i, v in zip(idx, vals):
            if v > colmax[i]:
                colmax[i] = v
    mm = max(m, 1)
    return [1.0 / (mm * colmax[i]) if colmax[i] > 0 else 1.0 / mm for i in range(m)]


def solve_feasibility(lp: MixedLP, eps: float, *, mode: str = "sequential",
                      strict_bits: bool = False, c_R: int = 1000,
                      c_delta: int = 4, seed: int = 0, budget_factor: int = 8,
                      max_iterations: Optional[int] = None) -> FeasResult:
    """Decide the (1+eps)-feasibility problem for a normalized mixed LP.

    Returns Feasible with x satisfying max(Px) <= (1+eps) min(Cx) (and
    max(Px) > 0 whenever P is nonzero), or Infeasible certifying that
    {Cx >= 1, Px <= (1-10 eps) 1, x >= 0} has no solution.
    """
    if not lp.is_normalized():
        raise ValueError("solve_feasibility expects a normalized LP (unit bounds)")
    _validate_eps(lp, eps)
    K, R = solver_params(lp, eps, c_R)
    cap = min(R, max_iterations) if max_iterations is not None else R

    for j, (idx, vals) in enumerate(lp.c_rows):
        if not any(v > 0 for v in vals):
            return FeasResult(False, None, 0, "empty_covering_row", K, R)

    if mode == "sequential":
        return _solve_sequential(lp, eps, K, R, cap, strict_bits, c_delta,
                                 seed, budget_factor)
    elif mode == "simulated":
        from .mpc_protocol import solve_simulated
        return solve_simulated(lp, eps, K, R, cap, strict_bits, c_delta,
                               seed, budget_factor)
    raise ValueError(f"unknown mode {mode!r}")


def _charge_model(lp, iterations, stats, budget_factor):
    """Serial-wave round estimate for the sequential mode: each iteration
    costs two tree aggregations, one gather, two edge exchanges and the
    verdict broadcasts over a BFS tree of the row/variable graph.  The
    simulated mode reports measured rounds instead."""
    n = lp.n_p + lp.n_c + lp.m
    nnz = sum(len(idx) for idx, _ in lp.p_rows) + sum(len(idx) for idx, _ in lp.c_rows)
    depth = max(2, math.ceil(math.log2(max(n, 2))))
    stats.charge_rounds(2 * depth + iterations * (6 * depth + 4))
    stats.total_messages += iterations * (2 * nnz + 4 * n)
    stats.max_bits_on_any_edge_per_round = max(
        stats.max_bits_on_any_edge_per_round,
        budget_factor * math.ceil(math.log2(max(n, 2))))


def _solve_sequential(lp, eps, K, R, cap, strict, c_delta, seed, budget_factor):
    stats = RoundStats()
    if strict:
        p_rows, c_rows, delta = _strict_setup(lp, eps, R, c_delta)
        q = lambda v: quantize(v, delta) if v > 0 else 0.0
    else:
        p_rows, c_rows, delta = lp.p_rows, lp.c_rows, None
        q = lambda v: v

    n_p, n_c, m = len(p_rows), len(c_rows), lp.m
    vote_factor = 1.0 - eps / 50.0
    # neighbor lists for the variable-side gradient sums, ascending row id
    var_p = [[] for _ in range(m)]
    var_c = [[] for _ in range(m)]
    for j, (idx, vals) in enumerate(p_rows):
        for i, v in zip(idx, vals):
            var_p[i].append((j, v))
    for j, (idx, vals) in enumerate(c_rows):
        for i, v in zip(idx, vals):
            var_c[i].append((j, v))

    x_full = _initial_x(p_rows, m)
    x_sent = [q(v) for v in x_full]
    retired = [False] * n_c
    msafe = (1.0 - 16.0 * delta) if strict else 1.0

    t = 0
    while True:
        act_p = [_activity(idx, vals, x_sent) for idx, vals in p_rows]
        act_c = [_activity(idx, vals, x_sent) for idx, vals in c_rows]
        for j in range(n_c):
            if act_c[j] >= K:
                retired[j] = True
        stop_p = any(a >= K for a in act_p)
        retired_count = sum(retired)
        # transmitted activity extrema drive the exp shift and the
        # balance check; quantize exactly as the wire protocol would
        max_p_q = max((q(a) for a in act_p if a > 0), default=0.0)
        live_c_q = [q(act_c[j]) if act_c[j] > 0 else 0.0
                    for j in range(n_c) if not retired[j]]
        min_c_live_q = min(live_c_q) if live_c_q else math.inf
        all_c_q = [q(a) if a > 0 else 0.0 for a in act_c]
        min_c_all_q = min(all_c_q) if all_c_q else math.inf

        if stop_p or retired_count == n_c:
            reason = "stop_p" if stop_p else "stop_c"
            _charge_model(lp, t + 1, stats, budget_factor)
            return FeasResult(True, [v / K for v in x_full], t, reason, K, R, stats)

        balanced_ok = (max_p_q <= (1.0 + eps) * min_c_all_q * msafe
                       and (max_p_q > 0 or n_p == 0))
        if t >= cap:
            _charge_model(lp, t + 1, stats, budget_factor)
            if balanced_ok:
                return FeasResult(True, list(x_full), t, "balanced", K, R, stats)
            return FeasResult(False, None, t, "cap", K, R, stats)

        M = max_p_q
        m_w = min_c_live_q
        y_raw = [math.exp(a - M) for a in act_p]
        z_raw = [math.exp(m_w - act_c[j]) if not retired[j] else None
                 for j in range(n_c)]
        y_glob = 0.0
        for j in range(n_p):
            y_glob += q(y_raw[j])
        z_glob = 0.0
        for j in range(n_c):
            if not retired[j]:
                z_glob += q(z_raw[j])
        y_glob = q(y_glob) if y_glob > 0 else 0.0
        z_glob = q(z_glob) if z_glob > 0 else 0.0

        votes = 0
        deltas = [0.0] * m
        for i in range(m):
            a_num = 0.0
            for j, v in var_p[i]:
                a_num += q(v * y_raw[j])
            b_num = 0.0
            for j, v in var_c[i]:
                if not retired[j]:
                    b_num += q(v * z_raw[j])
            a_i = a_num / y_glob if y_glob > 0 else 0.0
            b_i = b_num / z_glob if z_glob > 0 else 0.0
            if a_i > vote_factor * b_i:
                votes += 1
            elif b_i > 0:
                d = 0.5 * (1.0 - a_i / b_i)
                assert -1e-12 <= d <= 0.5 + 1e-12
                deltas[i] = d
            # a_i == b_i == 0: inert variable, nothing to push against

        if votes == m:
            _charge_model(lp, t + 1, stats, budget_factor)
            if balanced_ok:
                return FeasResult(True, list(x_full), t, "balanced", K, R, stats)
            return FeasResult(False, None, t, "votes", K, R, stats)

        for i in range(m):
            if deltas[i] > 0.0:
                x_full[i] = x_full[i] * (1.0 + deltas[i] / K)
                x_sent[i] = q(x_full[i])
        t += 1


def recheck_feasible(lp: MixedLP, x, eps: float) -> bool:
    """Independent extended-precision recheck of a Feasible output."""
    fx = [Fraction(v) for v in x]
    maxp = Fraction(0)
    for idx, vals in lp.p_rows:
        s = sum(Fraction(v) * fx[i] for i, v in zip(idx, vals))
        maxp = max(maxp, s)
    minc = None
    for idx, vals in lp.c_rows:
        s = sum(Fraction(v) * fx[i] for i, v in zip(idx, vals))
        minc = s if minc is None else min(minc, s)
    if lp.n_p and maxp <= 0:
        return False
    if minc is None:
        return True
    return maxp <= (1 + Fraction(eps).limit_denominator(10**9)) * minc


# --------------------------------------------------------------------------
# Optimization via binary search over feasibility subproblems
# --------------------------------------------------------------------------

@dataclass
class MaxResult:
    x: Optional[list]
    gamma: float
    witness_row: Optional[int]
    probes: int
    stats: RoundStats = field(default_factory=RoundStats)


def _scale_packing(lp: MixedLP, lam: float) -> MixedLP:
    p_rows = [(idx, tuple(v / lam for v in vals)) for idx, vals in lp.p_rows]
    return MixedLP(lp.m, p_rows, lp.c_rows, list(lp.p_bounds), list(lp.c_bounds))


def _minmax_on(lp: MixedLP, x):
    maxp = 0.0
    for idx, vals in lp.p_rows:
        maxp = max(maxp, _activity(idx, vals, x))
    minc = math.inf
    for idx, vals in lp.c_rows:
        minc = min(minc, _activity(idx, vals, x))
    return maxp, minc


def solve_max(lp: MixedLP, eps: float, *, mode: str = "sequential",
              strict_bits: bool = False, seed: int = 0, c_R: int = 1000,
              max_probes: int = 200) -> MaxResult:
    """Maximize gamma subject to Px <= p, Cx >= gamma c, x >= 0.

    Returns (x, gamma) with gamma*/(1+eps) <= gamma <= gamma*.  The upper
    side holds because x is a verified witness; the lower side is certified
    by infeasibility probes run at eps' small enough that their slack bound
    (1 - 10 eps') stays informative.
    """
    if not (0 < eps <= 0.5):
        raise ValueError("eps must lie in (0, 1/2]")
    nlp = normalize(lp)
    stats = RoundStats()

    for j, (idx, vals) in enumerate(nlp.c_rows):
        if not any(v > 0 for v in vals):
            return MaxResult([0.0] * nlp.m, 0.0, j, 0, stats)

    # columns with no packing entry can grow for free
    colmax = [0.0] * nlp.m
    for idx, vals in nlp.p_rows:
        for i, v in zip(idx, vals):
            colmax[i] = max(colmax[i], v)
    free = [i for i in range(nlp.m) if colmax[i] == 0.0]
    free_set = set(free)
    if all(any(i in free_set and v > 0 for i, v in zip(idx, vals))
           for idx, vals in nlp.c_rows):
        # a direction with Pd = 0 and Cd > 0 exists on every row
        return MaxResult(None, math.inf, None, 0, stats)

    # greedy covering witness: per row, pump its largest coefficient
    x_w = [0.0] * nlp.m
    for idx, vals in nlp.c_rows:
        best = max(range(len(idx)), key=lambda k: (vals[k], -idx[k]))
        i, v = idx[best], vals[best]
        x_w[i] = max(x_w[i], 1.0 / v)
    maxp, minc = _minmax_on(nlp, x_w)
    if maxp == 0.0:
        return MaxResult(None, math.inf, None, 0, stats)
    x_w = [v / minc for v in x_w]
    lam_w = maxp / minc

    # certified lower bound on lambda*
    lam_lo = 0.0
    for idx, vals in nlp.c_rows:
        supp = [(i, v) for i, v in zip(idx, vals) if v > 0]
        if any(colmax[i] == 0 for i, v in supp):
            continue
        bound = min(colmax[i] / (len(supp) * v) for i, v in supp)
        lam_lo = max(lam_lo, bound)
    assert lam_lo > 0

    # Probe schedule: wide probes at eps'=1/2 steer the bracket; once it is
    # narrow, eps' decays geometrically to eps_fin, small enough that the
    # (1 - 10 eps') infeasibility slack certifies the final (1+eps) band.
    eps_fin = min(eps / 22.0, 0.05)
    eps_probe = 0.5
    s_lo, s_hi = lam_lo, lam_w
    probes = 0
    while lam_w > (1.0 + eps) * lam_lo and probes < max_probes:
        if s_hi > s_lo * (1.0 + 3.0 * eps_fin):
            lam = math.sqrt(s_lo * s_hi)
            if s_hi <= 4.0 * s_lo:
                eps_probe = max(eps_fin, 0.75 * eps_probe)
        else:
            # bracket at resolution floor: certify directly at its bottom
            eps_probe = eps_fin
            lam = s_lo
            s_lo = s_lo * (1.0 - 11.0 * eps_fin)
        res = solve_feasibility(_scale_packing(nlp, lam), eps_probe, mode=mode,
                                strict_bits=strict_bits, seed=seed, c_R=c_R)
        stats.merge(res.stats)
        probes += 1
        if res.feasible:
            maxp, minc = _minmax_on(_scale_packing(nlp, lam), res.x)
            cand_lam = maxp * lam / minc
            if cand_lam < lam_w:
                lam_w = cand_lam
                x_w = [v / minc for v in res.x]
            s_hi = min(s_hi, lam)
        else:
            s_lo = max(s_lo, lam)
            if 1.0 - 10.0 * eps_probe > 0:
                lam_lo = max(lam_lo, lam * (1.0 - 10.0 * eps_probe))

    gamma = 1.0 / lam_w
    x_out = [v / lam_w for v in x_w]
    return MaxResult(x_out, gamma, None, probes, stats)
