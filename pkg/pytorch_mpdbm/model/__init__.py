from pytorch_mpdbm.model.dbm import (
    FullState,
    Gradient,
    InitConfig,
    ModelShape,
    Offsets,
    Params,
    activate,
    centering_constant,
    check_state,
    conditional_means,
    energy,
    energy_of_units,
    gradient_of,
    init_params,
    pre_activation,
    to_centered,
    to_centered_gradient,
    to_uncentered,
)
from pytorch_mpdbm.model.mask import Mask
