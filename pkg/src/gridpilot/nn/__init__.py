from .tensor import (
    GraphError,
    NonFiniteError,
    ShapeMismatchError,
    Tensor,
    concat,
    conv2d,
    no_grad,
    upsample_nearest2d,
)
from .layers import (
    MLP,
    Conv2d,
    Dense,
    Module,
    ModuleList,
    SelfAttention2d,
    fanin_uniform,
    inject_command,
)
from .optim import SGD
from .checkpoint import (
    CheckpointFormatError,
    parse_checkpoint,
    read_checkpoint,
    write_checkpoint,
)
