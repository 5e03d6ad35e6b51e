"""softcontact: smooth, analytic collision detection and contact dynamics.

Collision bodies are oriented point clouds (quad-patch centers with outward
normals); signed distances, witness selection, and contact forces are all
softmin-weighted averages, so the whole pipeline is a closed-form smooth
function of the scene state. Hard brute-force oracles and derivative
checkers live in `softcontact.verify`.
"""

from .core import softmax, softplus
from .geometry import (
    AopcError,
    LocalAopc,
    Pose,
    WorldAopc,
    box_aopc,
    box_sdf,
    composite_box_aopc,
    cylinder_aopc,
    export_aopc,
    generate_primitive,
    import_aopc,
    pose_aopc,
    sphere_aopc,
    transform_aopc,
)
from .ssdf import (
    AnisotropicGaussianBasis,
    IsotropicGaussianBasis,
    SsdfResult,
    hard_sdf,
    sample_sdf_grid,
    ssdf,
    ssdf_general,
)
from .collision import (
    ContactPointSet,
    SeparationField,
    contact_points,
    separation_field,
    soft_separation_distance,
    soft_top_k,
    vertex_weights,
)
from .contact import ContactParams, point_plane_force, point_ssdf_force, ssdf_ssdf_force
from .dynamics import (
    Body,
    DivergenceError,
    LinearMotion,
    RolloutResult,
    Scene,
    SceneState,
    SplineMotion,
    StaticMotion,
    bias_force,
    box_inertia,
    composite_box_inertia,
    cylinder_inertia,
    forward_dynamics,
    inverse_dynamics,
    make_state,
    mass_matrix,
    pose_all,
    rollout,
    sphere_inertia,
    step,
    total_contact_force,
)

__version__ = "0.1.0"
