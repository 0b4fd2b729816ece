from pytorch_mpdbm.data.dataset import (
    Dataset,
    QuerySet,
    binarize,
    make_general_queries,
    make_missing_input_queries,
    synth_patterns,
)
from pytorch_mpdbm.data.idx import IMAGE_MAGIC, LABEL_MAGIC, load_idx, read_idx, write_idx
