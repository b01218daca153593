"""Direct log-density gradient estimation and mode-seeking clustering."""

from .baselines import (
    KdeModel,
    kde_density,
    kde_log_density,
    kde_log_gradient,
    kde_select_bandwidth,
    mean_shift_cluster,
    mean_shift_step,
)
from .errors import GradientUndefined, IllConditioned, InvalidArgument, SelectionFailed
from .estimator import (
    FitConfig,
    GradientModel,
    build_system,
    fit,
    objective,
    predict_divergence,
    predict_gradient,
    predict_log_density,
)
from .kernel import KernelConfig, eval_dpsi, eval_phi, eval_psi
from .imageseg import SegmentResult, image_to_features, read_image, segment, write_image
from .metrics import ari, gradient_mse, mean_ari
from .modeseek import (
    ClusterResult,
    SeekConfig,
    fixed_point_step,
    gradient_ascent_step,
    lsldg_cluster,
    merge_modes,
    seek_modes,
)
from .selection import CLUSTER_LAMBDA_GRID, DEFAULT_GRID, CvReport, holdout_score, kfold_split, select_model
from .synth import GmmSpec, preset, sample, true_log_gradient

__version__ = "0.1.0"
