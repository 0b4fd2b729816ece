# ruff: noqa
from pytorch_mpdbm.data import (
    Dataset,
    QuerySet,
    binarize,
    load_idx,
    make_general_queries,
    make_missing_input_queries,
    read_idx,
    synth_patterns,
    write_idx,
)
from pytorch_mpdbm.evaluation import (
    classify,
    error_rate,
    general_query_cross_entropy,
    inpaint,
    missing_input_errors,
    query_cross_entropy,
)
from pytorch_mpdbm.inference import (
    MeanFieldState,
    Trace,
    mf_init,
    mf_kl_to_exact,
    mf_run,
    mf_sweep,
    reconstruct_visible,
)
from pytorch_mpdbm.loss import MultiPredictionLoss, SparsityPenalty, get_supported_loss_functions
from pytorch_mpdbm.lr_scheduler import (
    ConstantScheduler,
    CosineScheduler,
    LinearScheduler,
    get_supported_schedulers,
    load_scheduler,
)
from pytorch_mpdbm.model import (
    FullState,
    Gradient,
    InitConfig,
    Mask,
    ModelShape,
    Offsets,
    Params,
    energy,
    init_params,
    to_centered,
    to_centered_gradient,
    to_uncentered,
)
from pytorch_mpdbm.numerics import DTYPE, Rng, logit, matmul, matvec, outer, sigmoid, softmax, transpose_apply
from pytorch_mpdbm.optimizer import MaxNormSGD, max_norm_project, sgd_step
from pytorch_mpdbm.oracle import (
    EnumBound,
    exact_conditional,
    exact_distribution,
    exact_ll_grad,
    exact_log_likelihood,
    exact_log_partition,
    exact_log_z,
    exact_marginals,
    state_index,
)
from pytorch_mpdbm.trainer import (
    MpConfig,
    MPTrainer,
    PcdConfig,
    PCDTrainer,
    ScheduleConfig,
    SparsityConfig,
    exact_mp_objective,
    mp_grad,
    mp_loss,
    mp_objective_estimate,
    pcd_grad,
    sample_mask,
    train_mp,
    train_pcd,
)
