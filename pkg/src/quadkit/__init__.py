"""quadkit: quad layout analysis and extraction toolkit."""

__version__ = "0.1.0"

from .mesh import MeshError, NonManifoldError, QuadMesh, TriMesh, load_mesh, save_obj, save_ply

__all__ = [
    "MeshError",
    "NonManifoldError",
    "QuadMesh",
    "TriMesh",
    "load_mesh",
    "save_obj",
    "save_ply",
    "__version__",
]
