"""Completion of tensors whose entries are missing not at random.

The pipeline estimates entrywise observation propensities from the binary
mask (constrained 1-bit likelihood on the square unfolding, or gradient
descent on a factored parameter tensor) and recovers the data tensor by a
fixed-rank HOSVD of the inverse-propensity-reweighted observations.
"""
from .bounds import (
    BoundInputs,
    completion_error_bound,
    link_smoothness_ratio,
    nuclear_threshold,
    propensity_error_bound,
    relative_error,
    reweight_deviation_bound,
)
from .completion import (
    CompletionResult,
    ObservedInstance,
    hosvd_w_complete,
    ips_reweight,
    rect_unfold_complete,
    sq_unfold_complete,
    tenips,
)
from .decomposition import (
    TuckerDecomposition,
    hosvd_fixed_rank,
    numerical_rank,
    project_box,
    project_nuclear_ball,
    reconstruct,
    tail_energy,
    truncated_left_singular,
)
from .io import read_mask, read_tensor, write_mask, write_tensor
from .links import LOGISTIC, LinkFunction, LogisticLink
from .propensity import (
    ConvexPEConfig,
    DivergenceError,
    NonconvexPEConfig,
    PropensityModel,
    SolveReport,
    convex_pe,
    convex_pe_on_spec,
    negative_bernoulli_loglik,
    nonconvex_pe,
    tucker_loglik_gradients,
)
from .synthesis import (
    GeneratorConfig,
    add_relative_noise,
    model_a_propensity,
    model_b_propensity,
    proportional_propensity,
    random_tucker,
    sample_mask,
    video_like_instance,
)
from .tensor import (
    UnfoldingSpec,
    entrywise_product,
    frobenius_norm,
    max_abs,
    mode_n_fold,
    mode_n_unfold,
    multi_mode_product,
    n_mode_product,
    nuclear_norm,
    s_fold,
    s_unfold,
    singular_values,
    spectral_norm,
    square_set,
)

__version__ = "0.1.0"
