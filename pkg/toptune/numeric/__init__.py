from .tensor import Tensor, backward_counter, name_scope, no_grad
from .params import ParamStore, forward_backward, load_checkpoint, save_checkpoint
from .adam import AdamState, adam_step
from .gradcheck import gradient_check
