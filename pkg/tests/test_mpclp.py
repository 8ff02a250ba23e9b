"""Solver contract tests: normalization, quantization, feasibility verdicts,
optimization band, and sequential/simulated agreement."""

import math
import random
from fractions import Fraction

import pytest

from santasim.mpclp import (
    MixedLP,
    from_dense,
    normalize,
    parse_lp_text,
    format_lp_text,
    quantize,
    quantize_exponent,
    recheck_feasible,
    solve_feasibility,
    solve_max,
    solver_params,
)
from santasim.oracles import lp_feasibility_oracle


def matching_lp(n_vertices):
    """Fractional perfect matching on an alternating path: per-vertex sums
    both at most and at least one."""
    m = n_vertices - 1
    rows = []
    for v in range(n_vertices):
        idx = [e for e in (v - 1, v) if 0 <= e < m]
        rows.append((tuple(idx), tuple(1.0 for _ in idx)))
    return MixedLP(m, rows, list(rows), [1.0] * n_vertices, [1.0] * n_vertices)


def random_lp(rng, n_p, n_c, m, connected=True):
    P = [[rng.choice([0, 0, 0.5, 1, 2]) for _ in range(m)] for _ in range(n_p)]
    C = [[rng.choice([0, 0, 0.5, 1, 2]) for _ in range(m)] for _ in range(n_c)]
    for i in range(m):
        if all(r[i] == 0 for r in P) and all(r[i] == 0 for r in C):
            P[rng.randrange(n_p)][i] = 1
    if connected:
        for r in P:
            r[0] = max(r[0], 0.5)
        for r in C:
            r[0] = max(r[0], 0.5)
    return from_dense(P, C)


# -- normalize ----------------------------------------------------------------

def test_normalize_scalar():
    lp = from_dense([[2.0]], [[1.0]], p=[4.0], c=[1.0])
    n = normalize(lp)
    assert n.p_rows[0] == ((0,), (0.5,))


def test_normalize_identity_unchanged():
    lp = from_dense([[1, 0], [0, 1]], [[1, 0], [0, 1]])
    n = normalize(lp)
    assert n.p_rows == lp.p_rows and n.c_rows == lp.c_rows


def test_normalize_random_division_oracle():
    rng = random.Random(3)
    for _ in range(10):
        m = 5
        P = [[rng.randint(0, 3) for _ in range(m)] for _ in range(5)]
        for i in range(m):
            P[i][i] = max(P[i][i], 1)
        p = [rng.randint(1, 4) for _ in range(5)]
        lp = from_dense(P, [list(r) for r in P], p=p, c=list(p))
        n = normalize(lp)
        for j, (idx, vals) in enumerate(n.p_rows):
            for i, v in zip(idx, vals):
                assert v == pytest.approx(P[j][i] / p[j])


def test_normalize_rejects_zero_bound():
    lp = from_dense([[1.0]], [[1.0]], p=[0.0])
    with pytest.raises(ValueError):
        normalize(lp)


def test_isolated_variable_rejected():
    with pytest.raises(ValueError):
        MixedLP(2, [((0,), (1.0,))], [((0,), (1.0,))], [1.0], [1.0])


# -- quantize -----------------------------------------------------------------

def test_quantize_exact_one():
    assert quantize(1.0, 0.25) == 1.0


def test_quantize_exact_power():
    v = (1 + 0.25) ** 5
    assert quantize(v, 0.25) == v


def test_quantize_relative_error():
    rng = random.Random(9)
    for _ in range(200):
        v = math.exp(rng.uniform(-40, 40))
        delta = rng.choice([0.3, 0.01, 1e-6])
        q = quantize(v, delta)
        # log/pow oracle: floor on the grid
        e = quantize_exponent(v, delta)
        assert (1 + delta) ** e <= v < (1 + delta) ** (e + 1)
        assert q <= v and v / q < 1 + delta + 1e-12


def test_quantize_rejects_nonpositive():
    with pytest.raises(ValueError):
        quantize(0.0, 0.1)
    with pytest.raises(ValueError):
        quantize(-1.0, 0.1)


# -- solve_feasibility ---------------------------------------------------------

def test_identical_rows_feasible_ratio_one():
    lp = from_dense([[1.0]], [[1.0]])
    res = solve_feasibility(lp, 0.1)
    assert res.feasible
    x = res.x[0]
    assert x > 0   # max Px == min Cx, ratio exactly one


def test_one_edge_path_feasible():
    res = solve_feasibility(matching_lp(2), 0.1)
    assert res.feasible
    assert res.x[0] == pytest.approx(1.0)


def test_two_edge_path_infeasible():
    res = solve_feasibility(matching_lp(3), 0.1)
    assert not res.feasible


@pytest.mark.parametrize("n", range(2, 9))
def test_matching_paths_parity_exact(n):
    # the exact relaxation alternates with the path parity; the iterative
    # solver is only pinned on the two shortest paths (longer odd paths
    # start too unbalanced and fall in its indeterminate band)
    assert lp_feasibility_oracle(matching_lp(n), 1) == (n % 2 == 0)


def test_matching_paths_never_false_feasible():
    for n in range(2, 9):
        res = solve_feasibility(matching_lp(n), 0.1)
        if n % 2 == 1:
            assert not res.feasible


def test_eps_validation():
    lp = from_dense([[1.0]], [[1.0]])
    with pytest.raises(ValueError):
        solve_feasibility(lp, 0.6)
    with pytest.raises(ValueError):
        solve_feasibility(lp, 0.0)
    with pytest.raises(ValueError):
        solve_feasibility(lp, 1e-9)


def test_unnormalized_rejected():
    lp = from_dense([[1.0]], [[1.0]], p=[2.0])
    with pytest.raises(ValueError):
        solve_feasibility(lp, 0.1)


def test_empty_covering_row_infeasible():
    lp = MixedLP(1, [((0,), (1.0,))], [((), ()), ((0,), (1.0,))],
                 [1.0], [1.0, 1.0])
    res = solve_feasibility(lp, 0.1)
    assert not res.feasible and res.reason == "empty_covering_row"


@pytest.mark.parametrize("eps", [0.5, 0.1])
def test_random_lps_vs_oracle_band(eps):
    rng = random.Random(77)
    for trial in range(12):
        lp = random_lp(rng, rng.randint(1, 8), rng.randint(1, 6), rng.randint(2, 6))
        res = solve_feasibility(lp, eps)
        assert res.iterations <= res.R
        if res.feasible:
            assert recheck_feasible(lp, res.x, eps), trial
        else:
            # the verdict certifies the slacked system infeasible
            assert not lp_feasibility_oracle(lp, Fraction(1) - 10 * Fraction(eps).limit_denominator(100)), trial
        # outside the indeterminate band the verdict is forced
        if lp_feasibility_oracle(lp, 1 - 10 * eps if 1 - 10 * eps > 0 else -1):
            assert res.feasible, trial
        if not lp_feasibility_oracle(lp, 1 + eps):
            assert not res.feasible, trial


def test_monotone_and_cap_invariants():
    # x never decreases; live activities stay below K before the stop
    lp = from_dense([[1.0, 1.0]], [[2.0, 1.0]])
    K, R = solver_params(lp, 0.25)
    res = solve_feasibility(lp, 0.25)
    assert res.feasible and res.reason in ("stop_p", "stop_c")
    assert res.iterations <= R
    assert all(v > 0 for v in res.x)


# -- sequential vs simulated ---------------------------------------------------

CORPUS = [
    ("identity", lambda: from_dense([[1.0]], [[1.0]])),
    ("path1", lambda: matching_lp(2)),
    ("path2", lambda: matching_lp(3)),
    ("growth", lambda: from_dense([[1.0, 1.0]], [[2.0, 1.0]])),
    ("rand5", lambda: random_lp(random.Random(5), 3, 3, 4)),
    ("rand11", lambda: random_lp(random.Random(11), 4, 2, 5)),
]


@pytest.mark.parametrize("name,make", CORPUS)
@pytest.mark.parametrize("strict", [False, True])
def test_modes_agree_bit_exact(name, make, strict):
    lp = make()
    kw = dict(strict_bits=strict, max_iterations=300)
    a = solve_feasibility(lp, 0.3, mode="sequential", **kw)
    b = solve_feasibility(lp, 0.3, mode="simulated", **kw)
    assert (a.feasible, a.reason, a.iterations) == (b.feasible, b.reason, b.iterations)
    assert a.x == b.x
    assert b.stats.budget_violations == 0


def test_simulated_strict_zero_violations_default_budget():
    lp = from_dense([[1.0, 1.0]], [[2.0, 1.0]])
    res = solve_feasibility(lp, 0.25, mode="simulated", strict_bits=True)
    assert res.feasible and res.reason in ("stop_p", "stop_c")
    assert res.stats.budget_violations == 0


def test_simulated_requires_connected():
    lp = from_dense([[1.0, 0.0], [0.0, 1.0]], [[1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        solve_feasibility(lp, 0.25, mode="simulated")


# -- solve_max ------------------------------------------------------------------

def test_solve_max_identity():
    res = solve_max(from_dense([[1.0]], [[1.0]]), 0.25)
    assert res.gamma == pytest.approx(1.0)
    assert res.x == [1.0]


def test_solve_max_zero_covering_row():
    lp = MixedLP(1, [((0,), (1.0,))], [((), ())], [1.0], [1.0])
    res = solve_max(lp, 0.25)
    assert res.gamma == 0.0 and res.witness_row == 0


def test_solve_max_band_vs_oracle():
    rng = random.Random(21)
    for trial in range(6):
        lp = random_lp(rng, rng.randint(1, 4), rng.randint(1, 3), rng.randint(2, 4))
        eps = 0.5
        res = solve_max(lp, eps)
        # witness side: the returned point satisfies the constraints
        nlp = normalize(lp)
        for idx, vals in nlp.p_rows:
            assert sum(v * res.x[i] for i, v in zip(idx, vals)) <= 1 + 1e-9
        for idx, vals in nlp.c_rows:
            assert sum(v * res.x[i] for i, v in zip(idx, vals)) >= res.gamma - 1e-9
        # optimality side: no point can beat (1+eps) * gamma
        lam = (1.0 / res.gamma) / (1 + eps)
        assert not lp_feasibility_oracle(
            nlp, Fraction(lam).limit_denominator(10 ** 9)), trial


# -- text format -----------------------------------------------------------------

def test_lp_text_roundtrip():
    lp = from_dense([[1, 0.5], [0, 2]], [[1, 1]], p=[2, 1], c=[3])
    text = format_lp_text(lp)
    back = parse_lp_text(text)
    assert back.m == lp.m and back.n_p == lp.n_p and back.n_c == lp.n_c
    assert normalize(back).p_rows == normalize(lp).p_rows
