"""splinefit: B-spline surface reconstruction from noisy point clouds.

The package combines exact spline evaluation, synthetic dataset generation,
a classical least-squares baseline, a small graph-network predictor of
variable-size control grids trained with a built-in reverse-mode tape, and
an evaluation suite of optimal-transport and normal-consistency metrics.
"""

from .dataset import (
    DatasetSample,
    GenConfig,
    PaddedTarget,
    desk_scale,
    gen_control_grid,
    generate_dataset,
    load_dataset,
    make_sample,
    pad_target,
    full_scale,
    random_heightfield_cloud,
)
from .errors import (
    ConfigurationError,
    DegenerateNeighborhoodError,
    DegenerateNormalError,
    DegenerateParameterizationError,
    EmptyPredictionError,
    InsufficientPointsError,
    ParseError,
    SingularSystemError,
    SplinefitError,
)
from .lsq import FitConfig, chord_length_params, grid_order, lsq_fit_surface
from .metrics import (
    Assignment,
    MetricsReport,
    chamfer,
    dcd,
    emd,
    nc_error,
    optimal_assignment,
    pca_normals,
)
from .model import (
    ArchConfig,
    KnnGraph,
    build_knn_graph,
    dictionary_refine,
    extract_cp_grid,
    forward,
    init_params,
    load_checkpoint,
    save_checkpoint,
)
from .pipeline import (
    ReconstructionResult,
    evaluate,
    export_obj,
    fit_bsa_surface,
    load_xyz,
    reconstruct,
    save_xyz,
)
from .spline import (
    BSplineSurface,
    basis,
    basis_matrix,
    eval_surface,
    eval_surface_grid,
    eval_surface_many,
    open_uniform_knots,
    sample_surface,
    surface_normal,
)
from .train import (
    AdamState,
    TrainConfig,
    adam_step,
    batch_loss,
    compute_gradients,
    train,
    weighted_mse,
)

__version__ = "0.1.0"
