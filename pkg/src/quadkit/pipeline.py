"""End-to-end field-to-layout pipeline and the bake/extract round trip.

The round trip is the master consistency check: build the analytic field
of a quad mesh, bake it onto an isotropic remesh, run seed detection /
clustering / layout extraction, and compare the result against the
ground-truth chart structure (count equality plus adjacency-multigraph
isomorphism). Degenerate layouts trigger field densification with the
dual-distance growing priority, exactly as the extraction stage does for
externally supplied fields.
"""

import logging
import time

import networkx as nx
import numpy as np

from .basecomplex import build_base_complex
from .extract import (DegenerateLayoutError, cluster_faces, collapse_to_quads,
                      detect_seeds, extract_layout, refine)
from .fields import ChartField, bake_fields, split_charts
from .metrics import loop_simplicity
from .remesh import isotropic_remesh

log = logging.getLogger(__name__)


def layout_multigraph(layout):
    """Adjacency multigraph of a layout's faces (one edge per shared side)."""
    graph = nx.MultiGraph()
    graph.add_nodes_from(range(layout.n_faces))
    for s in layout.sides:
        a, b = s.clusters
        if a >= 0 and b >= 0:
            graph.add_edge(a, b)
    return graph


def partition_multigraph(mesh, labels):
    """Adjacency multigraph of a face partition.

    Nodes are labels; every connected boundary arc between two labels
    contributes one parallel edge, so patch pairs meeting along two
    separate curves (tubes, wrapped cells) are distinguished from single
    shared sides.
    """
    labels = np.asarray(labels)
    adj = mesh.face_adjacency()
    pair_edges = {}
    for f in range(mesh.n_faces):
        for k in range(3):
            g = adj[f, k]
            if g < 0:
                continue
            a, b = int(labels[f]), int(labels[int(g)])
            if a >= b:
                continue
            pair_edges.setdefault((a, b), []).append(int(mesh.face_edges[f, k]))
    graph = nx.MultiGraph()
    graph.add_nodes_from(int(l) for l in np.unique(labels))
    for (a, b), eids in sorted(pair_edges.items()):
        verts = {e: set(map(int, mesh.edges[e])) for e in eids}
        parent = {e: e for e in eids}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        by_vertex = {}
        for e in eids:
            for v in verts[e]:
                by_vertex.setdefault(v, []).append(e)
        for group in by_vertex.values():
            for e in group[1:]:
                ra, rb = find(group[0]), find(e)
                if ra != rb:
                    parent[ra] = rb
        n_arcs = len({find(e) for e in eids})
        for _ in range(n_arcs):
            graph.add_edge(a, b)
    return graph


def extract_from_field(mesh, batch, cfg, sharp=None, use_dual_priority=False,
                       collapse=True):
    """Seeds + clustering + layout from a face-center FieldSampleBatch.

    ``collapse`` runs the feature-aware edge collapse that removes the
    tiny spurious sides cluster boundaries leave around junctions.
    """
    radius = cfg.seed_radius_for(mesh.n_faces)
    seeds = detect_seeds(batch.cdf, mesh, radius)
    part = cluster_faces(
        mesh, batch, seeds,
        wall_delta=cfg.wall_delta, sharp=sharp,
        use_dual_priority=use_dual_priority,
        merge_cdf=cfg.merge_cdf, merge_fraction=cfg.merge_fraction)
    layout = extract_layout(part, mesh, sharp=sharp)
    if collapse:
        layout = collapse_to_quads(layout)
    layout.check_halfedge_representable()
    return layout, part


def ground_truth_layout(field, dense):
    """Layout of the exact chart/cell membership of the dense faces.

    Labels come from nearest-point chart classification (independent of
    the seed/grow/merge path under test) and pass through the same
    boundary tracing and junction collapse, so both sides of the
    round-trip comparison receive identical treatment.
    """
    from .extract import (ClusterPartition, collapse_to_quads, extract_layout,
                          repair_partition_fans)

    gt = field.classify(dense.face_centers())
    labels = np.unique(gt, axis=0, return_inverse=True)[1]
    expected = len(np.unique(labels))
    labels = repair_partition_fans(dense, labels)
    part = ClusterPartition(dense, labels)
    layout = collapse_to_quads(
        extract_layout(part, dense, sharp=dense.feature_edge))
    return layout, expected


def bake_extract(field, dense, cfg, noise_amplitude=0.0, rng=None,
                 sharp=None):
    """Bake the analytic field and extract a layout, densifying on demand.

    Returns (layout, partition, densify_level, field_at_level, batch).
    """
    if sharp is None:
        sharp = dense.feature_edge
    level = field.densify
    last_err = None
    while level <= cfg.max_densify:
        f = field if level == field.densify else field.densified(
            level - field.densify)
        batch = bake_fields(f, dense, "face-centers")
        if noise_amplitude > 0:
            rng = rng or np.random.default_rng(cfg.seed)
            batch.cdf = np.clip(
                batch.cdf + rng.uniform(-noise_amplitude, noise_amplitude,
                                        len(batch.cdf)), 0.0, 1.0)
        try:
            layout, part = extract_from_field(
                dense, batch, cfg, sharp=sharp,
                use_dual_priority=level > 0 and cfg.densified_dual_priority)
            return layout, part, level, f, batch
        except DegenerateLayoutError as err:
            log.info("level %d layout degenerate (%s); densifying", level, err)
            last_err = err
            level += 1
    raise last_err


def roundtrip(quad_mesh, cfg, noise_amplitude=0.0, want_refined=False):
    """Full bake -> extract -> compare round trip for one quad mesh.

    The report records input/output chart counts (output counts are
    compared against the ground truth at the densification level the
    extraction settled on), adjacency isomorphism, and the loop
    simplicity of input and extracted layout.
    """
    t0 = time.perf_counter()
    complex_ = build_base_complex(quad_mesh,
                                  sharp_angle_deg=cfg.sharp_angle_deg)
    split = split_charts(complex_)
    field = ChartField(quad_mesh, split)
    dense = isotropic_remesh(quad_mesh.to_tri_mesh(), cfg.remesh_target,
                             iterations=cfg.remesh_iterations,
                             sharp_angle_deg=cfg.sharp_angle_deg)
    rng = np.random.default_rng(cfg.seed)
    layout, part, level, field_l, batch = bake_extract(
        field, dense, cfg, noise_amplitude=noise_amplitude, rng=rng)

    gt_layout, expected = ground_truth_layout(field_l, dense)
    iso = nx.is_isomorphic(layout_multigraph(layout),
                           layout_multigraph(gt_layout))
    s_in = loop_simplicity(quad_mesh, complex_)
    s_out = None
    if layout.is_pure_quad():
        s_out = loop_simplicity(layout.to_quad_mesh()).s_l

    report = {
        "N_c_in": int(complex_.n_charts),
        "densify_level": int(level),
        "N_c_expected": int(expected),
        "N_c_out": int(layout.n_faces),
        "chart_count_match": bool(layout.n_faces == expected),
        "adjacency_isomorphic": bool(iso),
        "S_l_in": float(s_in.s_l),
        "S_l_out": None if s_out is None else float(s_out),
        "dense_faces": int(dense.n_faces),
        "seconds": time.perf_counter() - t0,
    }
    artifacts = {"complex": complex_, "field": field_l, "dense": dense,
                 "layout": layout, "partition": part, "batch": batch}
    if want_refined:
        artifacts["refined"] = refine(
            layout, dense, max_subdiv=cfg.refine_max_subdiv,
            max_faces=cfg.refine_max_faces)
    return report, artifacts
