"""
Deep Geometric Distillation Network

N_l unrolled stages. Stage l takes x_{l-1} to

    m_l = x_{l-1} - eta_l * F^H (F x_{l-1} - y)            (linear reconstruction)
    x_l = T_l * concat(m_l, g_1, ..., g_k)                  (geometric distillation)

with g_1 = relu(A_l m_l), g_i = relu(B_l g_{i-1}) and T_l a linear 1x1 fusion.
eta_l = softplus(raw_eta_l) keeps every step length positive.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Union

import numpy as np

from core import ops
from core.errors import ConfigurationError, ShapeError
from core.tensor import Tensor, default_dtype
from mri.fourier import KSpaceData, MeasurementOp, apply_adjoint, apply_forward
from utils.logging_config import get_logger

logger = get_logger("network")

C1_INIT = -0.2
C2_INIT = 0.1
KERNEL_SIZE = 3
# softplus(-1000) underflows to exactly 0.0 in double precision.
ZERO_STEP_RAW = -1000.0


@dataclass
class ConvBlock:
    weight: Tensor
    bias: Tensor

    def __call__(self, x: Tensor) -> Tensor:
        return ops.conv2d(x, self.weight, self.bias)

    def parameters(self) -> List[Tensor]:
        return [self.weight, self.bias]

    @property
    def in_channels(self) -> int:
        return self.weight.shape[1]


@dataclass
class StageParams:
    raw_eta: Tensor
    conv_a: ConvBlock
    conv_b: List[ConvBlock]
    fuse: ConvBlock

    def block_b(self, layer: int) -> ConvBlock:
        """B block applied when producing feature layer ``layer`` (2..k)."""
        return self.conv_b[layer - 2] if len(self.conv_b) > 1 else self.conv_b[0]

    def parameters(self) -> List[Tensor]:
        params = [self.raw_eta, *self.conv_a.parameters()]
        for block in self.conv_b:
            params.extend(block.parameters())
        params.extend(self.fuse.parameters())
        return params


@dataclass
class DgdnModel:
    stages: List[StageParams]
    p: int
    k: int
    distinct_b: bool = False

    def __post_init__(self):
        if not self.stages:
            raise ConfigurationError("a model needs at least one stage")
        for index, stage in enumerate(self.stages, start=1):
            if stage.fuse.in_channels != 1 + self.k * self.p:
                raise ShapeError(
                    "fusion input width must equal 1 + k*p",
                    {"stage": index, "got": stage.fuse.in_channels, "expected": 1 + self.k * self.p},
                )

    @property
    def n_stages(self) -> int:
        return len(self.stages)

    def parameters(self) -> List[Tensor]:
        """All trainable tensors, stage by stage in checkpoint order."""
        return [t for stage in self.stages for t in stage.parameters()]

    def step_lengths(self) -> List[float]:
        return [step_length(stage).item() for stage in self.stages]


@dataclass
class ForwardTrace:
    x0: Tensor
    intermediates: List[Tensor] = field(default_factory=list)
    outputs: List[Tensor] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.outputs)

    @property
    def final(self) -> Tensor:
        return self.outputs[-1]

    def stage_output(self, index: int) -> Tensor:
        """x_index for a 1-based stage index."""
        return self.outputs[index - 1]


def _xavier(rng: np.random.Generator, shape: tuple, dtype: np.dtype) -> Tensor:
    c_out, c_in, kh, kw = shape
    bound = np.sqrt(6.0 / (c_in * kh * kw + c_out * kh * kw))
    return Tensor.parameter(rng.uniform(-bound, bound, size=shape), dtype=dtype)


def _conv_block(rng: np.random.Generator, c_out: int, c_in: int, size: int, dtype: np.dtype) -> ConvBlock:
    return ConvBlock(
        weight=_xavier(rng, (c_out, c_in, size, size), dtype),
        bias=Tensor.parameter(np.zeros(c_out), dtype=dtype),
    )


def b_block_count(k: int, distinct_b: bool) -> int:
    return max(k - 1, 0) if distinct_b else 1


def init_model(
    p: int = 32,
    k: int = 8,
    n_stages: int = 11,
    seed: int = 0,
    distinct_b: bool = False,
    c1: float = C1_INIT,
    c2: float = C2_INIT,
) -> DgdnModel:
    """Xavier-uniform convolutions, zero biases, raw_eta_l = c1*l + c2."""
    if min(p, k, n_stages) < 1:
        raise ConfigurationError("p, k and n_stages must be positive", {"p": p, "k": k, "n_stages": n_stages})
    dtype = default_dtype()
    rng = np.random.default_rng(seed)

    stages = []
    for ell in range(1, n_stages + 1):
        conv_a = _conv_block(rng, p, 1, KERNEL_SIZE, dtype)
        conv_b = [_conv_block(rng, p, p, KERNEL_SIZE, dtype) for _ in range(b_block_count(k, distinct_b))]
        fuse = _conv_block(rng, 1, 1 + k * p, 1, dtype)
        raw_eta = Tensor.parameter(np.asarray(c1 * ell + c2), dtype=dtype)
        stages.append(StageParams(raw_eta=raw_eta, conv_a=conv_a, conv_b=conv_b, fuse=fuse))

    model = DgdnModel(stages=stages, p=p, k=k, distinct_b=distinct_b)
    logger.info(
        "model initialized",
        data={"p": p, "k": k, "n_stages": n_stages, "seed": seed, "parameters": sum(t.size for t in model.parameters())},
    )
    return model


def inverse_softplus(eta: float) -> float:
    if eta < 0:
        raise ConfigurationError("step length must be non-negative", {"eta": eta})
    if eta == 0:
        return ZERO_STEP_RAW
    return float(eta + np.log(-np.expm1(-eta)))


def identity_model(p: int, k: int, n_stages: int, eta: float = 0.0, seed: int = 0) -> DgdnModel:
    """Model whose fusion selects m in every stage, with a fixed step length."""
    model = init_model(p, k, n_stages, seed=seed)
    select_m = np.zeros((1, 1 + k * p, 1, 1))
    select_m[0, 0, 0, 0] = 1.0
    for stage in model.stages:
        stage.fuse.weight.assign(select_m)
        stage.fuse.bias.assign(np.zeros(1))
        stage.raw_eta.assign(np.asarray(inverse_softplus(eta)))
    return model


def step_length(stage: StageParams) -> Tensor:
    return ops.softplus(stage.raw_eta)


def linear_recon(
    x_prev: Tensor,
    eta: Tensor,
    y: Union[KSpaceData, Tensor],
    op: MeasurementOp,
) -> Tensor:
    """m = x_prev - eta * F^H (F x_prev - y)."""
    y_t = y.as_tensor() if isinstance(y, KSpaceData) else y
    residual = ops.sub(apply_forward(op, x_prev), y_t)
    return ops.sub(x_prev, ops.mul(eta, apply_adjoint(op, residual)))


def distill_stage(stage: StageParams, m: Tensor, k: Optional[int] = None) -> Tensor:
    if m.ndim != 3 or m.shape[0] != 1:
        raise ShapeError("distillation input must have one channel", {"shape": list(m.shape)})
    p = stage.conv_a.weight.shape[0]
    k = k if k is not None else (stage.fuse.in_channels - 1) // p

    features = [m]
    g = None
    for layer in range(1, k + 1):
        g = ops.relu(stage.conv_a(m) if layer == 1 else stage.block_b(layer)(g))
        features.append(g)
        width = sum(f.shape[0] for f in features)
        if width != 1 + layer * p:
            raise ShapeError("distilled feature width mismatch", {"layer": layer, "got": width, "expected": 1 + layer * p})

    return stage.fuse(ops.concat_channels(features))


def forward(
    model: DgdnModel,
    y: KSpaceData,
    op: MeasurementOp,
    x0: Optional[Tensor] = None,
) -> ForwardTrace:
    y_t = y.as_tensor()
    x = x0 if x0 is not None else apply_adjoint(op, y_t)
    trace = ForwardTrace(x0=x)
    for stage in model.stages:
        m = linear_recon(x, step_length(stage), y_t, op)
        x = distill_stage(stage, m, model.k)
        trace.intermediates.append(m)
        trace.outputs.append(x)
    return trace


def reconstruct(model: DgdnModel, y: KSpaceData, op: MeasurementOp) -> np.ndarray:
    """Final stage output as an H x W array."""
    return forward(model, y, op).final.numpy()[0]
