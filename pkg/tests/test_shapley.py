import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ross.data import gen_blobs
from ross.models import ModelSpec, accuracy, init_params
from ross.rng import substream
from ross.shapley import (
    ModelCoalitionGame,
    TabularGame,
    aggregation_weights,
    compute_shapley,
    exact_shapley,
    mc_shapley,
    normalize_minmax,
    random_tabular_game,
)


def brute_force_shapley(game):
    """Oracle: average marginal contribution over all member permutations."""
    n = game.n
    phi = np.zeros(n)
    perms = list(itertools.permutations(range(n)))
    for perm in perms:
        mask = 0
        for j in perm:
            phi[j] += game.value(mask | (1 << j)) - game.value(mask)
            mask |= 1 << j
    return phi / len(perms)


def test_empty_coalition_is_worth_zero():
    game = TabularGame([10, 20], {1: 0.4, 2: 0.6, 3: 0.9})
    assert game.value(0) == 0.0


def test_cache_write_once_and_counted():
    calls = []

    class Probe(TabularGame):
        def _evaluate(self, mask):
            calls.append(mask)
            return super()._evaluate(mask)

    game = Probe([1, 2], {1: 0.3, 2: 0.5, 3: 0.7})
    first = game.value(3)
    second = game.value(3)
    assert first == second
    assert calls == [3]
    assert game.evaluations == 1


def test_singleton_value_is_member_accuracy():
    spec = ModelSpec("logistic", input_dim=4, num_classes=2)
    val = gen_blobs(seed=9, n_samples=40, input_dim=4, num_classes=2, spread=3.0)
    cands = [init_params(spec, s) + 0.1 * s for s in range(3)]
    game = ModelCoalitionGame([0, 1, 2], cands, spec, val)
    for k in range(3):
        direct = accuracy(spec, cands[k], val.features, val.labels)
        assert game.value(1 << k) == direct


def test_constant_game_splits_evenly():
    c = 0.75
    game = TabularGame([0, 1, 2], {m: c for m in range(1, 8)})
    phi = exact_shapley(game)
    oracle = brute_force_shapley(TabularGame([0, 1, 2], {m: c for m in range(1, 8)}))
    assert np.allclose(phi, oracle, atol=1e-15)
    assert np.allclose(phi, c / 3.0, atol=1e-15)


def test_two_player_game_by_hand():
    # v({1})=0.6, v({2})=0.2, v({1,2})=0.8
    game = TabularGame([1, 2], {0b01: 0.6, 0b10: 0.2, 0b11: 0.8})
    phi = exact_shapley(game)
    assert phi[0] == pytest.approx(0.6, abs=1e-12)
    assert phi[1] == pytest.approx(0.2, abs=1e-12)


def test_dummy_player_gets_exactly_zero():
    rng = substream(5, "dummy")
    base = {m: float(rng.uniform()) for m in range(1, 8)}
    # player 3 (bit 3) adds nothing to any coalition
    table = dict(base)
    for mask, val in base.items():
        table[mask | 0b1000] = val
    table[0b1000] = 0.0
    game = TabularGame([0, 1, 2, 3], table)
    phi = exact_shapley(game)
    assert phi[3] == 0.0


def test_exact_matches_brute_force_on_random_games():
    rng = substream(6, "vs-brute")
    for _ in range(20):
        n = int(rng.integers(2, 6))
        game = random_tabular_game(n, rng)
        fast = exact_shapley(game)
        oracle = brute_force_shapley(TabularGame(game.members, game.table))
        assert np.abs(fast - oracle).max() <= 1e-12


def test_efficiency_on_random_games():
    rng = substream(7, "efficiency")
    for _ in range(100):
        n = int(rng.integers(2, 9))
        game = random_tabular_game(n, rng)
        phi = exact_shapley(game)
        assert abs(phi.sum() - game.value(game.full_mask)) <= 1e-12


def test_symmetry_of_substitute_players():
    rng = substream(8, "symmetry")

    def canon(mask):
        # swap players 0 and 1 and keep the lexicographically smaller mask
        a, b = mask & 1, (mask >> 1) & 1
        swapped = (mask & ~0b11) | (a << 1) | b
        return min(mask, swapped)

    for _ in range(25):
        n = int(rng.integers(3, 7))
        base = {m: float(rng.uniform()) for m in range(1, 1 << n)}
        table = {m: base[canon(m)] for m in range(1, 1 << n)}
        phi = exact_shapley(TabularGame(list(range(n)), table))
        assert abs(phi[0] - phi[1]) <= 1e-12


def test_linearity_of_exact_shapley():
    rng = substream(9, "linearity")
    for _ in range(25):
        n = int(rng.integers(2, 8))
        g1 = random_tabular_game(n, rng)
        g2 = random_tabular_game(n, rng)
        combined = TabularGame(g1.members, {m: g1.table[m] + g2.table[m] for m in g1.table})
        lhs = exact_shapley(combined)
        rhs = exact_shapley(g1) + exact_shapley(g2)
        assert np.abs(lhs - rhs).max() <= 1e-12


def test_exact_mode_guard():
    rng = substream(10, "guard")
    game = TabularGame(list(range(13)), {})
    with pytest.raises(ValueError, match="exact-mode limit"):
        exact_shapley(game)
    del rng


def test_mc_single_permutation_telescopes():
    rng = substream(11, "mc-r1")
    game = random_tabular_game(5, rng)
    phi = mc_shapley(game, 1, substream(11, "perm"))
    assert phi.sum() == pytest.approx(game.value(game.full_mask), abs=1e-12)


def test_mc_is_deterministic_given_stream():
    rng = substream(12, "mc-det")
    game = random_tabular_game(6, rng)
    a = mc_shapley(game, 50, substream(12, "mc"))
    b = mc_shapley(game, 50, substream(12, "mc"))
    assert np.array_equal(a, b)


def test_mc_converges_to_exact():
    rng = substream(13, "mc-converge")
    game = random_tabular_game(5, rng)
    exact = exact_shapley(game)
    est = mc_shapley(game, 20_000, substream(13, "mc"))
    assert np.abs(est - exact).max() <= 0.01


def test_mc_unbiasedness_over_repeats():
    # mean of 50 independent estimates within 3 standard errors per player
    rng = substream(14, "mc-bias")
    game = random_tabular_game(5, rng)
    exact = exact_shapley(game)
    runs = np.stack([mc_shapley(game, 2000, substream(14, "rep", k)) for k in range(50)])
    mean = runs.mean(axis=0)
    stderr = runs.std(axis=0, ddof=1) / np.sqrt(50)
    assert np.all(np.abs(mean - exact) <= 3.0 * stderr + 1e-12)


def test_cache_bounds_coalition_evaluations():
    rng = substream(15, "cache-bound")
    n, budget = 6, 40
    game = random_tabular_game(n, rng)
    mc_shapley(game, budget, substream(15, "mc"))
    assert game.evaluations <= min(2**n, budget * (n + 1))


# --- normalization and weights ---------------------------------------------


def test_minmax_basic():
    out, degenerate = normalize_minmax(np.array([0.2, 0.5, 0.8]))
    assert not degenerate
    assert np.allclose(out, [0.0, 0.5, 1.0], atol=1e-12)


def test_minmax_degenerate_maps_to_ones():
    out, degenerate = normalize_minmax(np.array([0.4, 0.4, 0.4]))
    assert degenerate
    assert np.all(out == 1.0)


def test_minmax_with_negative_values():
    out, _ = normalize_minmax(np.array([-1.0, 0.0, 1.0]))
    assert np.allclose(out, [0.0, 0.5, 1.0], atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(
    raw=st.lists(st.floats(-10, 10), min_size=2, max_size=8),
    shift=st.floats(-5, 5),
)
def test_minmax_is_shift_invariant(raw, shift):
    raw = np.asarray(raw)
    a, deg_a = normalize_minmax(raw)
    b, deg_b = normalize_minmax(raw + shift)
    assert deg_a == deg_b
    if not deg_a:
        assert np.abs(a - b).max() <= 1e-9


def test_weights_degenerate_uniform_graph():
    # 4 members, omega = 0.25 each, all-ones phi_hat -> pi = 1 each
    pi = aggregation_weights(np.ones(4), np.full(4, 0.25))
    assert np.allclose(pi, 1.0, atol=1e-12)


def test_weights_single_member():
    assert aggregation_weights(np.array([1.0]), np.array([1.0]))[0] == 1.0


def test_weights_zero_and_one():
    pi = aggregation_weights(np.array([0.0, 1.0]), np.array([0.5, 0.5]))
    assert np.allclose(pi, [0.0, 2.0], atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(
    data=st.lists(
        st.tuples(st.floats(0, 1), st.floats(0.01, 1)), min_size=1, max_size=10
    )
)
def test_weighted_sum_identity(data):
    phi_hat = np.array([max(p, 0.0) for p, _ in data])
    omega = np.array([w for _, w in data])
    if phi_hat.sum() <= 0:
        phi_hat = np.ones_like(phi_hat)
    pi = aggregation_weights(phi_hat, omega)
    assert np.dot(omega, pi) == pytest.approx(1.0, abs=1e-12)


def test_weights_reject_zero_omega():
    with pytest.raises(ValueError):
        aggregation_weights(np.array([1.0, 1.0]), np.array([0.0, 0.5]))


def test_compute_shapley_auto_switches_mode():
    rng = substream(16, "auto")
    small = random_tabular_game(4, rng)
    sv = compute_shapley(small, "auto", 0, substream(16, "a"), np.full(4, 0.25))
    assert np.array_equal(sv.raw, exact_shapley(TabularGame(small.members, small.table)))
    big = random_tabular_game(9, rng)
    sv_big = compute_shapley(big, "auto", 0, substream(16, "b"), np.full(9, 1.0 / 9))
    expect = mc_shapley(TabularGame(big.members, big.table), 18, substream(16, "b"))
    assert np.array_equal(sv_big.raw, expect)
