import numpy as np
import pytest

from ross.errors import ConfigError, InvariantFailure
from ross.topology import (
    Graph,
    build_topology,
    jacobi_eigenvalues,
    metropolis_weights,
    spectral_norm_sym,
    spectral_rho,
    verify_fact1,
    write_matrix,
)

ALL_KINDS = ("full", "ring", "bipartite")


def test_ring4_edges():
    g = build_topology("ring", 4)
    assert g.edges == frozenset({(0, 1), (1, 2), (2, 3), (0, 3)})
    assert g.neighbors(0) == [0, 1, 3]


def test_full3_every_pair_adjacent():
    g = build_topology("full", 3)
    assert g.edges == frozenset({(0, 1), (0, 2), (1, 2)})


def test_bipartite5_parts_and_cross_edges():
    g = build_topology("bipartite", 5)
    assert len(g.edges) == 6
    for i, j in g.edges:
        assert i in (0, 1, 2) and j in (3, 4)


@pytest.mark.parametrize("kind,n", [("ring", 2), ("full", 1), ("bipartite", 1)])
def test_too_small_topologies_rejected(kind, n):
    with pytest.raises(ConfigError):
        build_topology(kind, n)


def test_ring3_metropolis_is_uniform():
    w = metropolis_weights(build_topology("ring", 3)).w
    assert np.allclose(w, 1.0 / 3.0, atol=0)
    assert np.all(w == w[0, 0])


def test_full10_uniform_and_perfect_mixing():
    mixing = metropolis_weights(build_topology("full", 10))
    assert np.all(mixing.w == 0.1)
    assert mixing.rho == 0.0
    assert mixing.omega_min == 0.1


def test_ring4_metropolis_values():
    mixing = metropolis_weights(build_topology("ring", 4))
    w = mixing.w
    third = 1.0 / 3.0
    for i in range(4):
        assert w[i, i] == pytest.approx(third, abs=1e-15)
        assert w[i, (i + 1) % 4] == third
    assert w[0, 2] == 0.0 and w[1, 3] == 0.0


def test_ring4_rho_is_one_ninth():
    # circulant eigenvalues 1/3 + (2/3)cos(2 pi k / 4) = {1, 1/3, -1/3, 1/3}
    mixing = metropolis_weights(build_topology("ring", 4))
    assert abs(mixing.rho - 1.0 / 9.0) <= 1e-12


def test_ring3_rho_is_zero():
    assert metropolis_weights(build_topology("ring", 3)).rho <= 1e-15


def test_jacobi_matches_numpy_eigvalsh():
    rng = np.random.default_rng(7)
    for n in (2, 3, 5, 9, 16):
        a = rng.standard_normal((n, n))
        a = 0.5 * (a + a.T)
        mine = jacobi_eigenvalues(a)
        ref = np.linalg.eigvalsh(a)
        assert np.abs(mine - ref).max() <= 1e-10 * max(1.0, np.abs(ref).max())


def test_spectral_rho_rejects_asymmetric():
    with pytest.raises(ValueError):
        spectral_rho(np.array([[0.5, 0.5], [0.4, 0.6]]))


def test_periodic_two_cycle_is_not_mixing():
    flip = np.array([[0.0, 1.0], [1.0, 0.0]])
    with pytest.raises(InvariantFailure):
        spectral_rho(flip)


def test_fact1_uniform_full_graph_norm_zero():
    w = metropolis_weights(build_topology("full", 6)).w
    out = verify_fact1(w, 5)
    assert max(out["norms"]) <= 1e-12


def test_fact1_ring4_exact_powers():
    w = metropolis_weights(build_topology("ring", 4)).w
    out = verify_fact1(w, 3)
    assert out["norms"][0] == pytest.approx(1.0 / 3.0, abs=1e-12)
    assert out["norms"][2] == pytest.approx((1.0 / 3.0) ** 3, abs=1e-12)


@pytest.mark.parametrize("n", [4, 10, 20])
@pytest.mark.parametrize("kind", ALL_KINDS)
def test_mixing_matrix_invariants(kind, n):
    mixing = metropolis_weights(build_topology(kind, n))
    w = mixing.w
    assert np.abs(w.sum(axis=1) - 1.0).max() <= 1e-12
    assert np.array_equal(w, w.T)
    assert np.all((w >= 0) & (w <= 1))
    assert mixing.omega_min > 0
    for i in range(n):
        nbrs = set(mixing.neighbors(i))
        for j in range(n):
            assert (w[i, j] > 0) == (j in nbrs)
    assert w.diagonal().min() > 0
    out = verify_fact1(w, 10)
    assert out["max_slack"] <= 1e-9
    # declared rho really bounds the sub-principal spectrum
    vals = np.linalg.eigvalsh(w)
    sub = max(abs(vals[0]), abs(vals[-2]))
    assert sub <= np.sqrt(mixing.rho) + 1e-9


@pytest.mark.parametrize("n", [6, 8, 10])
def test_denser_graphs_mix_faster(n):
    rho_full = metropolis_weights(build_topology("full", n)).rho
    rho_bip = metropolis_weights(build_topology("bipartite", n)).rho
    rho_ring = metropolis_weights(build_topology("ring", n)).rho
    assert rho_full == 0.0
    assert rho_full < rho_bip < rho_ring


def test_disconnected_graph_rejected():
    g = Graph(n=4, edges=frozenset({(0, 1), (2, 3)}))
    with pytest.raises(ConfigError):
        metropolis_weights(g)


def test_spectral_norm_matches_numpy():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((7, 7))
    a = 0.5 * (a + a.T)
    assert spectral_norm_sym(a) == pytest.approx(np.linalg.norm(a, 2), abs=1e-10)


def test_matrix_dump_roundtrips(tmp_path):
    w = metropolis_weights(build_topology("ring", 5)).w
    path = tmp_path / "w.txt"
    write_matrix(path, w)
    back = np.array([[float(v) for v in line.split()] for line in path.read_text().splitlines()])
    assert np.array_equal(back, w)
