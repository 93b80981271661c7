from .gradcheck import grad_check
from .layers import LSTM, Embedding, Linear, LSTMCell, Module
from .losses import bce_with_logits, cross_entropy, l1_loss
from .optim import Adam, AdamState, adam_step, clip_grad_norm
from .tensor import (
    Tensor,
    add,
    as_tensor,
    concat,
    embedding,
    exp,
    getitem,
    grad_enabled,
    log,
    log_softmax,
    lstm_cell,
    matmul,
    mean,
    mul,
    no_grad,
    parameter,
    reshape,
    sigmoid,
    softmax,
    stack,
    sub,
    tanh,
    tsum,
)
