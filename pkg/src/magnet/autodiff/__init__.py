"""Reverse-mode autodiff engine and the neural blocks built on it."""
from .tensor import (
    DTYPE,
    Tensor,
    add,
    collect_parameters,
    concat,
    dropout,
    gather_rows,
    grad_enabled,
    layer_norm_rows,
    log,
    matmul,
    mul,
    narrow,
    no_grad,
    pad_last,
    parameter,
    relu,
    reshape,
    scatter_rows,
    segment_sum,
    sigmoid,
    softmax_rows,
    sub,
    tanh,
    tmean,
    transpose,
    tsum,
)
from .layers import (
    MLP,
    Conv2D,
    ConvPoolEncoder,
    Dense,
    LayerSpec,
    LSTMCell,
    SelfAttentionEncoder,
    conv_pool_encode,
    forward_mlp,
    lstm_cell_step,
    max_pool2d,
    mlp_from_specs,
    self_attention_encode,
)
from .optim import Optimizer, OptimizerState, sgd_adam_step
from .gradcheck import check_gradients, check_parameter_gradients
from .checkpoint import HEADER as CHECKPOINT_HEADER
from .checkpoint import load_checkpoint, restore_parameters, save_checkpoint
