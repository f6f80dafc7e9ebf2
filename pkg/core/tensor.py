"""
Tensor and Gradient Tape

Dense tensors over numpy arrays and a define-by-run reverse-mode tape.

A ``GradTape`` is entered as a context manager; while it is active every
differentiable op whose inputs are trainable (or were produced on the tape)
appends a ``TapeRecord``. ``backward`` walks the records in reverse and
assigns ``grad`` on every trainable leaf the tape has seen.

Complex tensors (k-space) carry gradients as dL/dRe + i dL/dIm.
"""

from __future__ import annotations

import itertools
from contextvars import ContextVar
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from config.settings import settings
from core.errors import ShapeError, TapeError
from utils.logging_config import get_logger

logger = get_logger("tensor")

_tensor_ids = itertools.count(1)
_tape_ids = itertools.count(1)
_active_tape: ContextVar[Optional["GradTape"]] = ContextVar("dgdn_active_tape", default=None)

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


def default_dtype() -> np.dtype:
    return np.dtype(settings.dtype)


def complex_dtype() -> np.dtype:
    return np.result_type(default_dtype(), np.complex64)


def _as_array(data: Any, dtype: Optional[np.dtype]) -> np.ndarray:
    if dtype is None:
        dtype = complex_dtype() if np.iscomplexobj(data) else default_dtype()
    arr = np.array(data, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


class Tensor:
    """Immutable dense array with an optional gradient buffer."""

    __slots__ = ("data", "grad", "requires_grad", "tape_id", "id")

    def __init__(self, data: Any, *, requires_grad: bool = False, dtype: Optional[np.dtype] = None):
        self.data: np.ndarray = _as_array(data, dtype)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.tape_id: Optional[int] = None
        self.id = next(_tensor_ids)

    @classmethod
    def parameter(cls, data: Any, dtype: Optional[np.dtype] = None) -> "Tensor":
        return cls(data, requires_grad=True, dtype=dtype)

    @classmethod
    def constant(cls, data: Any, dtype: Optional[np.dtype] = None) -> "Tensor":
        return cls(data, requires_grad=False, dtype=dtype)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.data)

    @property
    def is_leaf(self) -> bool:
        return self.tape_id is None

    def tracked(self) -> bool:
        return self.requires_grad or self.tape_id is not None

    def numpy(self) -> np.ndarray:
        return np.array(self.data, copy=True)

    def item(self) -> float:
        if self.size != 1:
            raise ShapeError("item() requires a single-element tensor", {"shape": list(self.shape)})
        return self.data.reshape(()).item()

    def assign(self, data: Any) -> None:
        """Replace the value of a leaf parameter, keeping shape and dtype."""
        if not self.is_leaf:
            raise TapeError("only leaf tensors can be assigned", {"tensor_id": self.id})
        new = _as_array(data, self.dtype)
        if new.shape != self.shape:
            raise ShapeError(
                "assigned value changes tensor shape",
                {"expected": list(self.shape), "got": list(new.shape)},
            )
        self.data = new

    def zero_grad(self) -> None:
        self.grad = None

    def __add__(self, other: "Tensor") -> "Tensor":
        from core import ops
        return ops.add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        from core import ops
        return ops.sub(self, other)

    def __mul__(self, other: "Tensor") -> "Tensor":
        from core import ops
        return ops.mul(self, other)

    def __repr__(self) -> str:
        flags = " trainable" if self.requires_grad else ""
        return f"Tensor(shape={list(self.shape)}, dtype={self.dtype}{flags})"


@dataclass(frozen=True)
class TapeRecord:
    kind: str
    inputs: Tuple[Tensor, ...]
    output: Tensor
    backward_fn: BackwardFn = field(repr=False)
    saved: Dict[str, Any] = field(default_factory=dict, repr=False)


class GradTape:
    """Ordered record of differentiable ops for one forward pass."""

    def __init__(self):
        self.id = next(_tape_ids)
        self.records: List[TapeRecord] = []
        self._leaves: Dict[int, Tensor] = {}
        self._token = None

    def __enter__(self) -> "GradTape":
        if self._token is not None:
            raise TapeError("tape is already active", {"tape_id": self.id})
        self._token = _active_tape.set(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        _active_tape.reset(self._token)
        self._token = None

    def __len__(self) -> int:
        return len(self.records)

    @property
    def trainable_leaves(self) -> List[Tensor]:
        return list(self._leaves.values())

    def holds(self, tensor: Tensor) -> bool:
        return tensor.tape_id == self.id

    def append(self, record: TapeRecord) -> None:
        for tensor in record.inputs:
            if tensor.tape_id is not None and tensor.tape_id != self.id:
                raise TapeError(
                    f"{record.kind}: input was produced on another tape",
                    {"tensor_id": tensor.id, "tape_id": tensor.tape_id, "active_tape": self.id},
                )
            if tensor.is_leaf and tensor.requires_grad:
                self._leaves.setdefault(tensor.id, tensor)
        record.output.tape_id = self.id
        self.records.append(record)


def active_tape() -> Optional[GradTape]:
    return _active_tape.get()


def record(
    kind: str,
    inputs: Sequence[Tensor],
    data: np.ndarray,
    backward_fn: BackwardFn,
    saved: Optional[Dict[str, Any]] = None,
) -> Tensor:
    """Wrap ``data`` as an op output and record it on the active tape if needed.

    ``backward_fn`` maps the output gradient to one gradient per input
    (``None`` for inputs that need none).
    """
    out = Tensor(data, dtype=data.dtype)
    tape = _active_tape.get()
    if tape is not None and any(t.tracked() for t in inputs):
        tape.append(TapeRecord(kind, tuple(inputs), out, backward_fn, saved or {}))
    return out


def _match(grad: np.ndarray, tensor: Tensor) -> np.ndarray:
    if not tensor.is_complex and np.iscomplexobj(grad):
        grad = grad.real
    if grad.shape != tensor.shape:
        raise TapeError(
            "gradient shape does not match its tensor",
            {"tensor_id": tensor.id, "expected": list(tensor.shape), "got": list(grad.shape)},
        )
    return grad.astype(tensor.dtype, copy=False)


def backward(loss: Tensor, tape: Optional[GradTape] = None) -> List[Tensor]:
    """Populate ``grad`` on every trainable leaf recorded on ``tape``.

    Gradients are assigned, not accumulated across calls. Leaves the loss does
    not depend on receive zeros. Returns the populated leaves.
    """
    tape = tape or _active_tape.get()
    if tape is None:
        raise TapeError("backward requires a tape")
    if loss.ndim != 0:
        raise TapeError("loss must be rank-0", {"shape": list(loss.shape)})
    if not tape.holds(loss):
        raise TapeError("loss was not produced on this tape", {"tensor_id": loss.id, "tape_id": tape.id})

    grads: Dict[int, np.ndarray] = {loss.id: np.ones((), dtype=loss.dtype)}
    for rec in reversed(tape.records):
        g_out = grads.pop(rec.output.id, None)
        if g_out is None:
            continue
        in_grads = rec.backward_fn(g_out)
        for tensor, g_in in zip(rec.inputs, in_grads):
            if g_in is None or not tensor.tracked():
                continue
            g_in = _match(np.asarray(g_in), tensor)
            prev = grads.get(tensor.id)
            grads[tensor.id] = g_in if prev is None else prev + g_in

    leaves = tape.trainable_leaves
    for leaf in leaves:
        g = grads.get(leaf.id)
        leaf.grad = np.zeros(leaf.shape, dtype=leaf.dtype) if g is None else np.array(g, dtype=leaf.dtype)

    logger.debug(
        "backward complete",
        data={"tape_id": tape.id, "records": len(tape), "leaves": len(leaves)},
    )
    return leaves
