from typing import Callable, Dict, Iterable, List, Literal, Optional, Tuple, Union

import torch

CLOSURE = Optional[Callable[[], float]]
LOSS = Optional[float]
DEFAULTS = Dict
GROUP = Dict
PARAMETERS = Optional[Union[Iterable[GROUP], Iterable[torch.Tensor]]]

TENSORS = Tuple[torch.Tensor, ...]
NAMED_TENSORS = List[Tuple[str, torch.Tensor]]
NORM_CAP = Optional[Union[float, Tuple[Optional[float], ...]]]

INFERENCE_MODE = Literal['standard', 'multi_inference']
MF_INIT = Literal['bias', 'bottom_up']
BINARIZE_MODE = Literal['threshold', 'stochastic']
REDUCTION = Literal['sum', 'mean']
TRAIN_METHOD = Literal['mp', 'pcd']
EVAL_MODE = Literal['classify', 'missing_inputs', 'general_query', 'inpaint']
