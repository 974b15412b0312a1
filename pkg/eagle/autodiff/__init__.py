from eagle.autodiff.tensor import (
    Tensor,
    backward,
    get_dtype,
    get_precision,
    is_grad_enabled,
    no_grad,
    precision,
    record,
    set_precision,
)
from eagle.autodiff import ops
from eagle.autodiff.gradcheck import grad_check
