"""Pipeline configuration with JSON round-tripping.

Defaults carry the published operating point: 130-degree sharp angle,
r=5 seed rings, 0.1 wall threshold, 0.5/50% merge rule, 120-degree merge
dihedral, Taubin (K=32, 5 iterations, lambda=0.451, mu=-0.472, s=0.1,
r=8), subdivision caps (3 levels / 20000 faces) and the 0.618 curation
gate family.
"""

import dataclasses
import json
import math
import os


@dataclasses.dataclass
class PipelineConfig:
    seed: int = 0
    jobs: int = 1
    # sharp features
    sharp_angle_deg: float = 130.0
    # remeshing
    remesh_target: float = 0.035
    remesh_iterations: int = 5
    # seed detection / clustering
    seed_ring_radius: int = 5
    auto_seed_radius: bool = False
    wall_delta: float = 0.1
    merge_cdf: float = 0.5
    merge_fraction: float = 0.5
    max_densify: int = 2
    # dual-center distance added to the growing priority after
    # densification; off by default (with exact analytic offsets the
    # nearest dual corner jumps within a cell and displaces boundaries)
    densified_dual_priority: bool = False
    # triangle merging
    tri2quad_min_dihedral: float = 120.0
    # taubin regularizer
    taubin_k: int = 32
    taubin_iterations: int = 5
    taubin_lambda: float = 0.451
    taubin_mu: float = -0.472
    taubin_s: float = 0.1
    taubin_r: float = 8.0
    # refinement
    refine_max_subdiv: int = 3
    refine_max_faces: int = 20000
    # metrics
    hausdorff_samples: int = 100000
    # curation
    curation_simplicity_min: float = 0.618
    curation_max_nonplanarity: float = 0.5
    curation_max_charts: int = 1024
    curation_min_chart_area: float = 1.0 / 1024.0
    curation_min_chart_side: float = math.sqrt(1.0 / 1024.0)
    curation_max_boundaries: int = 8

    def seed_radius_for(self, n_faces):
        """Detection radius, optionally scaled as sqrt(F / 500k)."""
        if not self.auto_seed_radius:
            return self.seed_ring_radius
        return max(1, round(self.seed_ring_radius
                            * math.sqrt(n_faces / 5e5)))

    def to_json(self):
        return json.dumps(dataclasses.asdict(self), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(fh.read())

    @classmethod
    def load_default(cls, path=None):
        """Config from an explicit path, else $QUADKIT_CONFIG, else defaults."""
        path = path or os.environ.get("QUADKIT_CONFIG")
        if path:
            return cls.from_file(path)
        return cls()
