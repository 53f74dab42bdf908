"""Targeted black-box adversarial attacks via trust-region derivative-free optimization."""

from .attack import AttackConfig, AttackResult, add_level_perturbation, batch_bounds, run_attack
from .errors import (
    BoxTooThinError,
    BudgetExhaustedError,
    ConfigError,
    ModelFormatError,
    SingularSystemError,
)
from .harness import (
    AttackRecord,
    ExperimentConfig,
    compute_cdf,
    load_image,
    load_image_set,
    random_baseline_attack,
    run_campaign,
)
from .lifting import LiftingOperator, apply_lifting, build_block_lifting, refine_level, reproject
from .loss import TargetSpec, adversarial_loss, is_adversarial
from .oracle import (
    ClassifierModel,
    InputTensor,
    QueryCounter,
    load_model,
    predict_class,
    query,
)
from .sampling import (
    SamplingPlan,
    block_variance_order,
    ordered_plan,
    pixel_variance_map,
    random_plan,
    variance_plan,
)
from .solver import (
    BoxBounds,
    MinimizeResult,
    SampleSet,
    SurrogateModel,
    TrustRegion,
    build_initial_samples,
    fit_diag_quadratic_model,
    fit_linear_model,
    min_frobenius_update,
    minimize_batch,
    solve_subproblem,
)

__version__ = "0.1.0"
