from hisres.numerics.gradcheck import grad_check, relative_error
from hisres.numerics.optim import OptimizerState, adam_step
from hisres.numerics.tensor import Tensor, as_tensor, no_grad

__all__ = ["Tensor", "as_tensor", "no_grad", "grad_check", "relative_error", "OptimizerState", "adam_step"]
