from pytorch_mpdbm.oracle.enumeration import (
    CHUNK_SIZE,
    DEFAULT_BOUND,
    ConditionalDistribution,
    EnumBound,
    Marginals,
    binary_configurations,
    exact_conditional,
    exact_distribution,
    exact_ll_grad,
    exact_log_likelihood,
    exact_log_partition,
    exact_log_z,
    exact_marginals,
    state_index,
)
