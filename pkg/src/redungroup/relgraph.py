"""Weighted relational graph over channel (x) and latent (z) vertices.

Functional edges form a complete bipartite z-x layer weighted by the
magnitude of the decoder weight product; spatial edges form a complete
graph over x-vertices weighted by minus the (noise-perturbed) distance
between muscle-path centers, scaled so the two edge families have equal
mean magnitude.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .autoenc import FunctionalMatrix
from .errors import ValidationError


@dataclass(frozen=True)
class GraphBuildConfig:
    noise_std: float = 0.1  # meters, matches 100 mm distance noise
    abs_functional: bool = True
    fold_batchnorm: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.noise_std < 0:
            raise ValidationError("noise_std must be >= 0")


@dataclass(frozen=True)
class RelationalGraph:
    """Validated container; see :func:`assemble_graph` for the checks."""

    x_ids: tuple[int, ...]
    z_ids: tuple[int, ...]
    functional_edges: tuple[tuple[int, int, float], ...]  # (z index, x index, w >= 0 by default)
    spatial_edges: tuple[tuple[int, int, float], ...]  # (x index, x index, w <= 0)
    beta: float | None = None

    @property
    def n_x(self) -> int:
        return len(self.x_ids)

    @property
    def n_z(self) -> int:
        return len(self.z_ids)

    def functional_weight_matrix(self) -> np.ndarray:
        """Dense (N_z, N_x) matrix of functional edge weights."""
        w = np.zeros((self.n_z, self.n_x))
        for zi, xi, weight in self.functional_edges:
            w[zi, xi] = weight
        return w

    def spatial_weight_matrix(self) -> np.ndarray:
        """Dense symmetric (N_x, N_x) matrix of spatial edge weights, zero diagonal."""
        s = np.zeros((self.n_x, self.n_x))
        for i, j, weight in self.spatial_edges:
            s[i, j] = weight
            s[j, i] = weight
        return s


def build_functional_edges(w: FunctionalMatrix | np.ndarray,
                           cfg: GraphBuildConfig = GraphBuildConfig()) -> list[tuple[int, int, float]]:
    """One edge per (z, x) pair; weight is |W| unless abs_functional is off."""
    matrix = w.w if isinstance(w, FunctionalMatrix) else np.asarray(w, dtype=float)
    if not np.all(np.isfinite(matrix)):
        raise ValidationError("functional matrix has non-finite entries")
    values = np.abs(matrix) if cfg.abs_functional else matrix
    n_z, n_x = values.shape
    return [(zi, xi, float(values[zi, xi])) for zi in range(n_z) for xi in range(n_x)]


def compute_beta(functional_edges, distances: np.ndarray) -> float:
    """Scale aligning the mean functional weight with the mean distance.

    beta = mean(functional edge weights) / mean(off-diagonal distances).
    """
    d = np.asarray(distances, dtype=float)
    n = d.shape[0]
    off = d[~np.eye(n, dtype=bool)]
    mean_d = float(off.mean()) if off.size else 0.0
    if mean_d <= 0.0:
        raise ValidationError("mean off-diagonal distance must be positive")
    mean_w = float(np.mean([w for _, _, w in functional_edges]))
    return mean_w / mean_d


def build_spatial_edges(distances: np.ndarray, beta: float,
                        cfg: GraphBuildConfig = GraphBuildConfig(),
                        seed: int | None = None) -> list[tuple[int, int, float]]:
    """Complete edge list over x-vertices with weight -beta * max(0, d + noise).

    Noise is drawn once per unordered pair (symmetric), deterministic per
    seed; the clamp keeps perturbed distances non-negative.
    """
    d = np.asarray(distances, dtype=float)
    n = d.shape[0]
    if d.shape != (n, n):
        raise ValidationError("distance matrix must be square")
    if np.max(np.abs(d - d.T)) > 1e-12 or np.max(np.abs(np.diag(d))) > 0:
        raise ValidationError("distance matrix must be symmetric with zero diagonal")
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            noisy = d[i, j]
            if cfg.noise_std > 0:
                noisy = max(0.0, noisy + rng.normal(0.0, cfg.noise_std))
            edges.append((i, j, float(-beta * noisy)))
    return edges


def assemble_graph(functional_edges, spatial_edges, x_ids, z_ids,
                   beta: float | None = None) -> RelationalGraph:
    """Validate and freeze the graph.

    Rejects duplicate edges, dangling vertex references, x-x or z-z
    functional edges, spatial edges that do not cover every unordered
    x-pair exactly once, and sign violations.
    """
    x_ids = tuple(x_ids)
    z_ids = tuple(z_ids)
    n_x, n_z = len(x_ids), len(z_ids)

    seen_f = set()
    for zi, xi, w in functional_edges:
        if not (0 <= zi < n_z):
            raise ValidationError(f"functional edge references unknown z-vertex {zi}")
        if not (0 <= xi < n_x):
            raise ValidationError(f"functional edge references unknown x-vertex {xi}")
        if (zi, xi) in seen_f:
            raise ValidationError(f"duplicate functional edge ({zi}, {xi})")
        seen_f.add((zi, xi))
    if len(seen_f) != n_z * n_x:
        raise ValidationError(
            f"functional edges must cover all {n_z * n_x} (z, x) pairs, got {len(seen_f)}"
        )

    seen_s = set()
    for i, j, w in spatial_edges:
        if not (0 <= i < n_x and 0 <= j < n_x):
            raise ValidationError(f"spatial edge references unknown x-vertex ({i}, {j})")
        if i == j:
            raise ValidationError(f"spatial self-edge on x-vertex {i}")
        if w > 0:
            raise ValidationError(f"spatial edge ({i}, {j}) has positive weight {w}")
        key = (min(i, j), max(i, j))
        if key in seen_s:
            raise ValidationError(f"duplicate spatial edge {key}")
        seen_s.add(key)
    if len(seen_s) != n_x * (n_x - 1) // 2:
        raise ValidationError(
            f"spatial edges must cover all unordered x-pairs, got {len(seen_s)}"
        )

    return RelationalGraph(
        x_ids=x_ids,
        z_ids=z_ids,
        functional_edges=tuple((zi, xi, float(w)) for zi, xi, w in functional_edges),
        spatial_edges=tuple((i, j, float(w)) for i, j, w in spatial_edges),
        beta=beta,
    )


def build_graph(w: FunctionalMatrix | np.ndarray, distances: np.ndarray, x_ids,
                cfg: GraphBuildConfig = GraphBuildConfig(),
                seed: int | None = None) -> RelationalGraph:
    """Full construction: functional edges, beta alignment, spatial edges."""
    functional = build_functional_edges(w, cfg)
    beta = compute_beta(functional, distances)
    spatial = build_spatial_edges(distances, beta, cfg, seed)
    matrix = w.w if isinstance(w, FunctionalMatrix) else np.asarray(w)
    z_ids = tuple(range(matrix.shape[0]))
    return assemble_graph(functional, spatial, x_ids, z_ids, beta=beta)


def graph_to_json(graph: RelationalGraph) -> str:
    doc = {
        "x_ids": list(graph.x_ids),
        "z_ids": list(graph.z_ids),
        "functional_edges": [[zi, xi, w] for zi, xi, w in graph.functional_edges],
        "spatial_edges": [[i, j, w] for i, j, w in graph.spatial_edges],
        "beta": graph.beta,
    }
    return json.dumps(doc, sort_keys=True)


def graph_from_json(text: str) -> RelationalGraph:
    doc = json.loads(text)
    return assemble_graph(
        [(int(z), int(x), float(w)) for z, x, w in doc["functional_edges"]],
        [(int(i), int(j), float(w)) for i, j, w in doc["spatial_edges"]],
        doc["x_ids"],
        doc["z_ids"],
        beta=doc.get("beta"),
    )


_DOT_COLORS = (
    "#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4", "#46f0f0",
    "#f032e6", "#bcf60c", "#fabebe", "#008080", "#e6beff", "#9a6324",
    "#fffac8", "#800000", "#aaffc3", "#808000", "#ffd8b1", "#000075",
)


def graph_to_dot(graph: RelationalGraph, labels: dict | None = None,
                 edge_weight_threshold: float = 0.0) -> str:
    """DOT text for visualization; vertices are colored by group when a
    labeling (keys 'x' and 'z' mapping vertex index -> group) is given.

    Spatial edges are numerous, so only edges whose |weight| exceeds the
    threshold are drawn.
    """
    lines = ["graph relational {", "  overlap=false;"]

    def color(kind: str, idx: int) -> str:
        if labels is None:
            return "#cccccc"
        group = labels[kind][idx]
        return _DOT_COLORS[group % len(_DOT_COLORS)]

    for i, xid in enumerate(graph.x_ids):
        lines.append(
            f'  x{i} [label="m{xid}", shape=ellipse, style=filled, fillcolor="{color("x", i)}"];'
        )
    for i, zid in enumerate(graph.z_ids):
        lines.append(
            f'  z{i} [label="z{zid}", shape=box, style=filled, fillcolor="{color("z", i)}"];'
        )
    for zi, xi, w in graph.functional_edges:
        if abs(w) > edge_weight_threshold:
            lines.append(f'  z{zi} -- x{xi} [weight={w:.4g}, penwidth=0.5];')
    for i, j, w in graph.spatial_edges:
        if abs(w) > edge_weight_threshold:
            lines.append(f'  x{i} -- x{j} [weight={w:.4g}, style=dashed, penwidth=0.3];')
    lines.append("}")
    return "\n".join(lines) + "\n"
