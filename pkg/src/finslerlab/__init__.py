"""Numerical Finsler geometry: sprays, flag and T-curvature, Jacobi fields,
normal curvature of hypersurfaces and the convexity of equidistant flows."""

__version__ = "0.1.0"

from .curvature import flag_curvature, geodesic_coefficients, metric_tensor  # noqa: E402
from .flow import (  # noqa: E402
    EquidistantFlow,
    ball_convexity,
    equidistant,
    flow_certificate,
    measure_certificate,
    theorem3_verify,
)
from .geodesics import exponential_map, integrate_geodesic, parallel_frame  # noqa: E402
from .hypersurface import (  # noqa: E402
    SIGN_CONVENTION,
    detect_focal,
    make_ellipsoid,
    make_perturbed_sphere,
    make_plane,
    make_sphere,
    normal_curvature,
    normal_vector,
    shape_operator,
    surface_from_name,
)
from .jacobi import comparison_check, focal_scan, index_form, integrate_jacobi, n_jacobi, transplant  # noqa: E402
from .metrics import (  # noqa: E402
    MetricSpec,
    classify,
    make_euclidean,
    make_hyperbolic,
    make_hyperbolic_randers,
    make_minkowski_randers,
    make_randers,
    metric_from_name,
)
from .riccati import lemma2_check, riccati_evolve  # noqa: E402
from .tcurvature import t_bound_check, t_curvature, t_curvature_batch  # noqa: E402
