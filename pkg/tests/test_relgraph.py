import numpy as np
import pytest

from redungroup.errors import ValidationError
from redungroup.relgraph import (
    GraphBuildConfig,
    assemble_graph,
    build_functional_edges,
    build_graph,
    build_spatial_edges,
    compute_beta,
    graph_from_json,
    graph_to_dot,
    graph_to_json,
)


def toy_distances(n=3, scale=1.0):
    d = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            d[i, j] = abs(i - j) * scale
    return d


def test_functional_edges_zero_weight_kept():
    edges = build_functional_edges(np.array([[0.0]]))
    assert edges == [(0, 0, 0.0)]


def test_functional_edges_absolute_value():
    edges = build_functional_edges(np.array([[-0.3, 0.5]]))
    assert edges == [(0, 0, 0.3), (0, 1, 0.5)]


def test_functional_edges_raw_mode():
    cfg = GraphBuildConfig(abs_functional=False)
    edges = build_functional_edges(np.array([[-0.3, 0.5]]), cfg)
    assert edges == [(0, 0, -0.3), (0, 1, 0.5)]


def test_functional_edge_count_complete():
    w = np.random.default_rng(0).normal(size=(4, 7))
    assert len(build_functional_edges(w)) == 28


def test_compute_beta_ratio_of_means():
    edges = [(0, 0, 0.1), (0, 1, 0.3)]  # mean 0.2
    d = np.array([[0.0, 0.5], [0.5, 0.0]])  # mean off-diagonal 0.5
    assert compute_beta(edges, d) == pytest.approx(0.4)


def test_compute_beta_zero_weights():
    edges = [(0, 0, 0.0), (0, 1, 0.0)]
    d = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert compute_beta(edges, d) == 0.0


def test_compute_beta_unit_case():
    edges = [(0, 0, 1.0), (0, 1, 1.0)]
    d = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert compute_beta(edges, d) == pytest.approx(1.0)


def test_compute_beta_rejects_zero_distance():
    with pytest.raises(ValidationError):
        compute_beta([(0, 0, 1.0)], np.zeros((2, 2)))


def test_spatial_edges_noiseless_weight():
    d = np.array([[0.0, 0.5], [0.5, 0.0]])
    cfg = GraphBuildConfig(noise_std=0.0)
    edges = build_spatial_edges(d, beta=2.0, cfg=cfg)
    assert edges == [(0, 1, -1.0)]


def test_spatial_edges_nonpositive_and_complete():
    d = toy_distances(6)
    edges = build_spatial_edges(d, beta=1.5, cfg=GraphBuildConfig(noise_std=0.2), seed=3)
    assert len(edges) == 15
    assert all(w <= 0 for _, _, w in edges)


def test_spatial_edges_deterministic_per_seed():
    d = toy_distances(5)
    cfg = GraphBuildConfig(noise_std=0.1)
    e1 = build_spatial_edges(d, 1.0, cfg, seed=7)
    e2 = build_spatial_edges(d, 1.0, cfg, seed=7)
    e3 = build_spatial_edges(d, 1.0, cfg, seed=8)
    assert e1 == e2
    assert e1 != e3


def test_assemble_rejects_duplicates_and_dangling():
    f = [(0, 0, 0.5), (0, 1, 0.2)]
    s = [(0, 1, -0.1)]
    g = assemble_graph(f, s, x_ids=[10, 11], z_ids=[0])
    assert g.n_x == 2 and g.n_z == 1
    with pytest.raises(ValidationError):
        assemble_graph(f + [(0, 1, 0.3)], s, x_ids=[10, 11], z_ids=[0])
    with pytest.raises(ValidationError):
        assemble_graph([(0, 0, 0.5), (0, 2, 0.2)], s, x_ids=[10, 11], z_ids=[0])


def test_assemble_rejects_missing_pairs():
    f = [(0, 0, 0.5), (0, 1, 0.2), (0, 2, 0.1)]
    with pytest.raises(ValidationError):  # spatial edges must cover all 3 pairs
        assemble_graph(f, [(0, 1, -0.1)], x_ids=[0, 1, 2], z_ids=[0])
    with pytest.raises(ValidationError):  # functional bipartite layer incomplete
        assemble_graph(f[:2], [(0, 1, -0.1), (0, 2, -0.2), (1, 2, -0.3)],
                       x_ids=[0, 1, 2], z_ids=[0])


def test_assemble_rejects_positive_spatial_and_self_edges():
    f = [(0, 0, 0.5), (0, 1, 0.2)]
    with pytest.raises(ValidationError):
        assemble_graph(f, [(0, 1, 0.1)], x_ids=[0, 1], z_ids=[0])
    with pytest.raises(ValidationError):
        assemble_graph(f, [(0, 0, -0.1)], x_ids=[0, 1], z_ids=[0])


def test_beta_alignment_invariant():
    rng = np.random.default_rng(5)
    w = rng.normal(size=(4, 9))
    d = toy_distances(9, scale=0.3)
    cfg = GraphBuildConfig(noise_std=0.0)
    g = build_graph(w, d, x_ids=range(9), cfg=cfg)
    mean_func = np.mean([e[2] for e in g.functional_edges])
    mean_spac_mag = np.mean([-e[2] for e in g.spatial_edges])
    # complete spatial cover means the off-diagonal mean equals the edge mean
    assert abs(mean_func - mean_spac_mag) < 1e-12


def test_weight_matrices_match_edges():
    rng = np.random.default_rng(6)
    w = np.abs(rng.normal(size=(3, 5)))
    d = toy_distances(5, scale=0.2)
    g = build_graph(w, d, x_ids=range(5), cfg=GraphBuildConfig(noise_std=0.0))
    assert np.allclose(g.functional_weight_matrix(), w)
    s = g.spatial_weight_matrix()
    assert np.allclose(s, s.T)
    assert np.allclose(np.diag(s), 0.0)
    assert np.allclose(s, -g.beta * d)


def test_graph_json_round_trip():
    rng = np.random.default_rng(7)
    w = np.abs(rng.normal(size=(2, 4)))
    g = build_graph(w, toy_distances(4), x_ids=[5, 6, 7, 8])
    back = graph_from_json(graph_to_json(g))
    assert graph_to_json(back) == graph_to_json(g)


def test_dot_export_contains_colored_vertices():
    w = np.array([[0.5, 0.2]])
    g = build_graph(w, np.array([[0.0, 1.0], [1.0, 0.0]]), x_ids=[0, 1],
                    cfg=GraphBuildConfig(noise_std=0.0))
    labels = {"x": {0: 0, 1: 1}, "z": {0: 0}}
    dot = graph_to_dot(g, labels)
    assert dot.startswith("graph relational {")
    assert 'x0 [label="m0"' in dot
    assert "z0 -- x0" in dot
    assert dot.count("fillcolor") == 3
