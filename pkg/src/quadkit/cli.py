"""quadkit command line: metrics, bake, extract, roundtrip, tri2quad, curate.

Exit codes: 0 success, 1 quality-gate failure (--check modes), 2 input
error. All sampling is seeded (--seed, default 0) so reports are
byte-identical across runs.
"""

import json
import sys

import click
import numpy as np

from . import synthetic
from .basecomplex import build_base_complex, topology_report
from .config import PipelineConfig
from .curation import curate_directory
from .extract import refine as refine_layout
from .fields import ChartField, bake_fields, load_field, save_field_ply, split_charts
from .mesh import MeshError, QuadMesh, load_mesh, save_obj, save_ply
from .metrics import hausdorff, loop_simplicity, scaled_jacobian
from .pipeline import extract_from_field, roundtrip
from .remesh import isotropic_remesh
from .tri2quad import loop_shift, merge_triangles


def _fail(msg, code=2):
    click.echo(f"error: {msg}", err=True)
    sys.exit(code)


def _dump_json(data, path):
    text = json.dumps(data, sort_keys=True, indent=2)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        click.echo(text)


def _load_quad(path):
    mesh = load_mesh(path)
    if not isinstance(mesh, QuadMesh) or not mesh.is_pure_quad:
        _fail("quad mesh required")
    return mesh


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None, help="JSON config (default: $QUADKIT_CONFIG).")
@click.option("--seed", type=int, default=None, help="Override RNG seed.")
@click.option("--jobs", type=int, default=None, help="Worker cap for batch commands.")
@click.pass_context
def main(ctx, config_path, seed, jobs):
    """Quad layout toolkit: loop metrics, chart distance fields, layout
    extraction, quad recovery and dataset curation."""
    cfg = PipelineConfig.load_default(config_path)
    if seed is not None:
        cfg.seed = seed
    if jobs is not None:
        cfg.jobs = jobs
    ctx.obj = cfg


@main.command()
@click.argument("mesh_path", type=click.Path(exists=True))
@click.option("-o", "--output", type=click.Path(), default=None,
              help="Write the JSON report here instead of stdout.")
@click.option("--hausdorff-against", type=click.Path(exists=True),
              default=None, help="Second mesh for the d_h column.")
@click.pass_obj
def metrics(cfg, mesh_path, output, hausdorff_against):
    """Loop-simplicity and quality metrics of a quad mesh."""
    try:
        mesh = _load_quad(mesh_path)
        complex_ = build_base_complex(mesh, sharp_angle_deg=cfg.sharp_angle_deg)
        rep = loop_simplicity(mesh, complex_)
        sj = scaled_jacobian(mesh)
        out = rep.to_json_dict()
        out.update(topology_report(mesh, complex_))
        out["SJ_min"] = sj["min"]
        out["SJ_mean"] = sj["mean"]
        if hausdorff_against:
            other = load_mesh(hausdorff_against)
            out["d_h"] = hausdorff(mesh, other, cfg.hausdorff_samples,
                                   cfg.seed)["percent"]
    except MeshError as err:
        _fail(err)
    _dump_json(out, output)


@main.command()
@click.argument("quad_path", type=click.Path(exists=True))
@click.option("-t", "--target", "target_path", type=click.Path(exists=True),
              default=None, help="Bake onto this mesh (default: remesh).")
@click.option("--remesh-target", type=float, default=None,
              help="Isotropic remesh edge length (fraction of bbox diag).")
@click.option("--densify", type=int, default=0, help="Densification level.")
@click.option("--where", type=click.Choice(["face-centers", "vertices",
                                            "sample-points"]),
              default="face-centers")
@click.option("-o", "--output", type=click.Path(), default="field.npz")
@click.option("--ply", "ply_path", type=click.Path(), default=None,
              help="Colored CDF PLY for inspection.")
@click.option("--target-out", type=click.Path(), default=None,
              help="Save the bake target mesh (OBJ).")
@click.pass_obj
def bake(cfg, quad_path, target_path, remesh_target, densify, where, output,
         ply_path, target_out):
    """Bake the analytic CDF/DCDF of a quad mesh onto a triangle mesh."""
    try:
        quad = _load_quad(quad_path)
        field = ChartField(quad, split_charts(
            build_base_complex(quad, sharp_angle_deg=cfg.sharp_angle_deg)))
        if densify:
            field = field.densified(densify)
        if target_path:
            target = load_mesh(target_path)
        else:
            target = isotropic_remesh(
                quad.to_tri_mesh(), remesh_target or cfg.remesh_target,
                iterations=cfg.remesh_iterations,
                sharp_angle_deg=cfg.sharp_angle_deg)
        batch = bake_fields(field, target, where=where, seed=cfg.seed)
        batch.save(output)
        if ply_path:
            save_field_ply(ply_path, target, batch.cdf)
        if target_out:
            save_obj(target_out, target)
    except MeshError as err:
        _fail(err)
    click.echo(f"baked {len(batch)} samples -> {output}")


@main.command()
@click.argument("field_path", type=click.Path(exists=True))
@click.argument("mesh_path", type=click.Path(exists=True))
@click.option("-o", "--layout-out", type=click.Path(), default=None,
              help="Layout polygon mesh (OBJ).")
@click.option("--refined", "refined_out", type=click.Path(), default=None,
              help="Refined dense quad mesh (OBJ).")
@click.option("--clusters", "clusters_out", type=click.Path(), default=None,
              help="Cluster coloring (PLY).")
@click.option("--report", "report_out", type=click.Path(), default=None)
@click.pass_obj
def extract(cfg, field_path, mesh_path, layout_out, refined_out, clusters_out,
            report_out):
    """Extract a quad layout from a baked field file on a triangle mesh.

    The field must be baked at the face centers of MESH (any producer)."""
    try:
        mesh = load_mesh(mesh_path)
        batch = load_field(field_path)
        if len(batch) != mesh.n_faces:
            _fail(f"field has {len(batch)} samples but mesh has "
                  f"{mesh.n_faces} faces (bake at face-centers)")
        layout, part = extract_from_field(mesh, batch, cfg,
                                          sharp=mesh.feature_edge)
    except MeshError as err:
        _fail(err)
    rep = {
        "seeds": len(part.seeds),
        "clusters": int(part.n_clusters),
        "layout_faces": int(layout.n_faces),
        "non_quad_faces": int(sum(1 for f in layout.faces if len(f) != 4)),
    }
    if layout_out:
        save_obj(layout_out, layout.to_quad_mesh() if layout.is_pure_quad()
                 else _layout_polygons(layout))
    if refined_out:
        refined = refine_layout(layout, mesh,
                                max_subdiv=cfg.refine_max_subdiv,
                                max_faces=cfg.refine_max_faces)
        rep["refined_faces"] = refined.n_faces
        save_obj(refined_out, refined)
    if clusters_out:
        _save_cluster_ply(clusters_out, mesh, part.face_cluster, cfg.seed)
    _dump_json(rep, report_out)


def _layout_polygons(layout):
    return QuadMesh(layout.vertices.copy(), [list(f) for f in layout.faces])


def _save_cluster_ply(path, mesh, labels, seed):
    colors = np.zeros((mesh.n_vertices, 3), dtype=np.uint8)
    palette = {}
    owner = np.full(mesh.n_vertices, -1, dtype=np.int64)
    for f in range(mesh.n_faces - 1, -1, -1):
        for v in mesh.faces[f]:
            owner[v] = labels[f]
    for ci in np.unique(labels):
        rng = np.random.default_rng(seed * 100003 + int(ci))
        palette[int(ci)] = rng.integers(40, 256, 3)
    for v in range(mesh.n_vertices):
        if owner[v] >= 0:
            colors[v] = palette[int(owner[v])]
    save_ply(path, mesh.vertices, [list(map(int, f)) for f in mesh.faces],
             colors)


@main.command("roundtrip")
@click.argument("quad_path", type=click.Path(exists=True))
@click.option("--check", is_flag=True,
              help="Exit 1 unless count+adjacency match with S_l 1.")
@click.option("--noise", type=float, default=0.0,
              help="Uniform CDF noise amplitude.")
@click.option("--report", "report_out", type=click.Path(), default=None)
@click.option("--dump-prefix", type=click.Path(), default=None,
              help="Write dense/layout/refined OBJs with this prefix.")
@click.pass_obj
def roundtrip_cmd(cfg, quad_path, check, noise, report_out, dump_prefix):
    """Bake the analytic field, extract it back, compare chart structure."""
    try:
        quad = _load_quad(quad_path)
        rep, art = roundtrip(quad, cfg, noise_amplitude=noise,
                             want_refined=bool(dump_prefix))
    except MeshError as err:
        _fail(err)
    if dump_prefix:
        save_obj(f"{dump_prefix}_dense.obj", art["dense"])
        save_obj(f"{dump_prefix}_layout.obj", _layout_polygons(art["layout"]))
        if "refined" in art:
            save_obj(f"{dump_prefix}_refined.obj", art["refined"])
    rep = {k: v for k, v in rep.items() if k != "seconds"}
    _dump_json(rep, report_out)
    if check and not (rep["chart_count_match"] and rep["adjacency_isomorphic"]
                      and rep["S_l_out"] == 1.0):
        sys.exit(1)


@main.command("tri2quad")
@click.argument("tri_path", type=click.Path(exists=True))
@click.option("-o", "--output", type=click.Path(), default=None)
@click.option("--report", "report_out", type=click.Path(), default=None)
@click.option("--no-loop-shift", is_flag=True)
@click.pass_obj
def tri2quad_cmd(cfg, tri_path, output, report_out, no_loop_shift):
    """Merge a triangulated quad asset back into a quad-dominant mesh."""
    try:
        mesh = load_mesh(tri_path)
        if isinstance(mesh, QuadMesh):
            _fail("triangle mesh required")
        qdm = merge_triangles(mesh, cfg.tri2quad_min_dihedral)
        shifts = 0
        if not no_loop_shift:
            before = qdm.n_quads
            qdm = loop_shift(qdm, cfg.tri2quad_min_dihedral)
            shifts = qdm.n_quads - before
    except MeshError as err:
        _fail(err)
    rep = qdm.stats()
    rep["loop_shift_gain"] = int(shifts)
    if output:
        save_obj(output, qdm.to_quad_mesh())
    _dump_json(rep, report_out)


@main.command()
@click.argument("directory", type=click.Path(exists=True, file_okay=False))
@click.option("--manifest", type=click.Path(), default="manifest.jsonl")
@click.option("--hist-prefix", type=click.Path(), default=None)
@click.pass_obj
def curate(cfg, directory, manifest, hist_prefix):
    """Filter a directory of quad meshes into a curated manifest."""
    try:
        kept = curate_directory(directory, manifest, hist_prefix,
                                seed=cfg.seed)
    except MeshError as err:
        _fail(err)
    click.echo(f"kept {kept} meshes; manifest -> {manifest}")


@main.command()
@click.argument("mesh_path", type=click.Path(exists=True))
@click.option("--target", type=float, required=True,
              help="Edge length as a fraction of the bbox diagonal.")
@click.option("-o", "--output", type=click.Path(), required=True)
@click.option("--no-features", is_flag=True, help="Skip sharp preservation.")
@click.pass_obj
def remesh(cfg, mesh_path, target, output, no_features):
    """Feature-preserving isotropic remeshing of a triangle mesh."""
    try:
        mesh = load_mesh(mesh_path)
        out = isotropic_remesh(mesh, target,
                               preserve_sharp=not no_features,
                               iterations=cfg.remesh_iterations,
                               sharp_angle_deg=cfg.sharp_angle_deg)
    except MeshError as err:
        _fail(err)
    save_obj(output, out)
    click.echo(f"remeshed to {out.n_faces} faces -> {output}")


@main.command("make-sample")
@click.argument("kind", type=click.Choice(
    ["grid", "cube2", "cube4", "cylinder", "torus", "cube-sphere",
     "l-bracket", "plus", "t-polycube", "box"]))
@click.option("-o", "--output", type=click.Path(), required=True)
def make_sample(kind, output):
    """Write one of the built-in sample quad meshes (OBJ)."""
    gen = {
        "grid": lambda: synthetic.grid_patch(8, 8),
        "cube2": lambda: synthetic.cube_grid(2),
        "cube4": lambda: synthetic.cube_grid(4),
        "cylinder": lambda: synthetic.cylinder_grid(16, 8),
        "torus": lambda: synthetic.torus_grid(16, 10),
        "cube-sphere": lambda: synthetic.cube_sphere(4),
        "l-bracket": lambda: synthetic.l_bracket(2),
        "plus": lambda: synthetic.plus_patch(3),
        "t-polycube": lambda: synthetic.t_polycube(2),
        "box": lambda: synthetic.box_grid(4, 2, 2, lo=(-2, -1, -1),
                                          hi=(2, 1, 1)),
    }
    save_obj(output, gen[kind]())
    click.echo(f"wrote {output}")


if __name__ == "__main__":
    main()
