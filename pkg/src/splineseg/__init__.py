"""Interactive 3D segmentation with a spherical explicit B-spline surface."""

from .energy import (
    EnergyConfig,
    EvolutionResult,
    evolve,
    interaction_energy,
    interaction_gradient,
    localized_means,
    total_energy,
    total_gradient,
    yezzi_energy,
    yezzi_gradient,
)
from .metrics import MetricResult, component_stats, dice, hausdorff, metric_pair
from .phantom import PhantomSpec, generate_phantom
from .session import ExportBundle, Session, UserPoint, create_session
from .surface import (
    AngularSample,
    MeshParams,
    SplineSurface,
    TriMesh,
    basis,
    basis_d1,
    basis_d2,
    embed,
    evaluate,
    evaluate_many,
    gaussian_curvature,
    gaussian_curvature_many,
    init_sphere,
    mesh_volume,
    partials,
    partials_many,
    rasterize,
    spherical_of,
    surface_from_dict,
    surface_from_json,
    surface_samples,
    surface_to_dict,
    surface_to_json,
    to_mesh,
    to_obj,
)
from .tuning import (
    TuningCandidate,
    TuningProtocol,
    TuningReport,
    brute_force_search,
    evaluate_candidate,
    interaction_response,
    refined_search,
    simulate_points,
    tuning_energy,
)
from .volume import (
    VolumeError,
    VoxelVolume,
    center_of_mass,
    equivalent_radius,
    load_volume,
    sample_trilinear,
    save_volume,
    threshold,
)

__version__ = "0.1.0"
