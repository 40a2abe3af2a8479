"""Streaming subspace sketches, coresets and Lewis-weight sampling."""

from .coreset import Coreset, Decision, KRobustCascade, RestrictedCoreset
from .errors import GeostreamError
from .geometry import (Ellipsoid, ShellResult, ShellSketch, Symmetrizer, ellipsoid_from_coreset,
                       hull_support_query, lp_maximize, shell_solve, symmetrize, volmax_select)
from .lewis import (LewisQuadratic, LewisWeights, change_of_density, lewis_averaged,
                    lewis_fixed_point, lewis_weights, recover_weights, stream_lewis_quadratic,
                    switch_weights)
from .linalg import (OUT_OF_SPAN, GramFactor, generalized_sensitivity, khatri_rao_lift,
                     leverage_scores, log_pseudodet, spectral_factorization)
from .lp_stream import ExpEmbedSketch, LpQuadraticSketch, LqTradeoffSketch
from .online import OnlineScoreState, audit_sums, lp_sensitivity
from .regression import (css_select, irls_solve, linf_regression, sketch_solve_regression,
                         streaming_regression_coreset)
from .sampling import (MergeTreeSummary, OnlineSpectralSampler, SampledMatrix, lewis_sample,
                       lp_to_lq_embed, online_spectral_sample)
from .streams import RowSource, read_matrix, write_matrix

__version__ = "0.1.0"
