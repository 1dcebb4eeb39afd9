"""Information geometry and SMML codes for Gaussian linear regression."""

from .errors import (
    DegenerateGeodesicError,
    DimensionError,
    DomainError,
    EmptyCellError,
    EmptyPlaneError,
    ExpansionError,
    HyperSmmlError,
    RankError,
    UnsupportedError,
)
from .hyperbolic_geom import (
    AffineFunctional,
    HyperbolicPlane,
    affine_to_hyperbolic_plane,
    geodesic_point,
    horomap_uh,
    horomap_xi,
    hyperbolic_distance,
    hyperbolic_volume_density,
    sectional_curvature_estimate,
)
from .model_core import (
    DesignBasis,
    PointClass,
    classify_data_point,
    lift_to_data,
    log_partition,
    log_pdf_suffstat,
    log_pdf_y,
    orthonormal_basis,
    residual_gap,
    sample_suffstat,
    suff_stat,
)
from .param_maps import (
    FisherMatrix,
    ModelPoint,
    System,
    fisher_expectation,
    fisher_natural,
    fisher_upper_half,
    from_beta_sigma,
    pullback_metric,
    reparameterize,
)
from .prior_marginal import (
    TruncatedDomain,
    density_ratio_constant,
    jeffreys_prior_natural,
    marginal_density,
    truncated_mass,
)
from .smml_estimator import (
    CellPolytope,
    SmmlCode,
    assign_cell,
    cell_polytope,
    fit_smml,
    lambda_score,
    message_length_I1,
    tessellation_hyperbolic,
    update_weights_and_assertions,
)

__version__ = "0.1.0"
