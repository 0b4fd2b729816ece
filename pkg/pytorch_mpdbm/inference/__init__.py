from pytorch_mpdbm.inference.mean_field import (
    MeanFieldState,
    Trace,
    mf_init,
    mf_kl_to_exact,
    mf_run,
    mf_sweep,
    reconstruct_visible,
)
