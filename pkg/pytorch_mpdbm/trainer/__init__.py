from pytorch_mpdbm.trainer.objective import (
    MAX_MASK_TRIALS,
    enumerate_masks,
    exact_mp_objective,
    mp_grad,
    mp_loss,
    mp_objective_estimate,
    sample_mask,
    sample_masks,
    sparsity_penalty,
)
from pytorch_mpdbm.trainer.base import (
    STREAM_CHAINS,
    STREAM_INIT,
    STREAM_MASKS,
    STREAM_MONITOR,
    STREAM_SHUFFLE,
    BaseTrainer,
    ScheduleConfig,
)
from pytorch_mpdbm.trainer.mp import MpConfig, MPTrainer, SparsityConfig, train_mp
from pytorch_mpdbm.trainer.pcd import (
    ChainPool,
    PcdConfig,
    PCDTrainer,
    gibbs_sweep,
    negative_statistics,
    pcd_grad,
    sufficient_statistics,
    train_pcd,
)
