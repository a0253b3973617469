"""Parameter checkpoints: a structured-text map of name -> shape -> row-major values.

Format, one parameter per record:

    MAGNET-CKPT-1
    <count>
    <name> <dim0>x<dim1>x...
    <v0> <v1> ... (row-major, %.17g so float64 round-trips exactly)
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from ..errors import CheckpointError
from .tensor import DTYPE, Tensor

HEADER = "MAGNET-CKPT-1"


def save_checkpoint(named_params: dict[str, Tensor | np.ndarray], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [HEADER, str(len(named_params))]
    for name, p in named_params.items():
        arr = p.data if isinstance(p, Tensor) else np.asarray(p)
        if " " in name or "\n" in name:
            raise CheckpointError(f"parameter name {name!r} contains whitespace")
        dims = "x".join(str(d) for d in arr.shape) if arr.shape else "0"
        lines.append(f"{name} {dims}")
        lines.append(" ".join("%.17g" % v for v in arr.reshape(-1)))
    path.write_text("\n".join(lines) + "\n")


def load_checkpoint(path) -> dict[str, np.ndarray]:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"no checkpoint at {path}")
    lines = path.read_text().splitlines()
    if not lines or lines[0] != HEADER:
        raise CheckpointError(f"bad checkpoint header (expected {HEADER!r})")
    try:
        count = int(lines[1])
    except (IndexError, ValueError):
        raise CheckpointError("checkpoint is missing the parameter count") from None
    out: dict[str, np.ndarray] = {}
    row = 2
    for _ in range(count):
        try:
            name, dims = lines[row].split(" ")
            raw = lines[row + 1].split()
            values = np.array([float(v) for v in raw], dtype=DTYPE)
        except (IndexError, ValueError):
            raise CheckpointError(f"truncated checkpoint at record {len(out)}") from None
        shape = () if dims == "0" else tuple(int(d) for d in dims.split("x"))
        expected = int(np.prod(shape)) if shape else 1
        if values.size != expected:
            raise CheckpointError(f"parameter {name!r}: expected {expected} values, found {values.size}")
        out[name] = values.reshape(shape)
        row += 2
    return out


def restore_parameters(named_params: dict[str, Tensor], loaded: dict[str, np.ndarray]) -> None:
    """Copy loaded arrays into live parameters, by name, shape-checked."""
    for name, p in named_params.items():
        if name not in loaded:
            raise CheckpointError(f"checkpoint is missing parameter {name!r}")
        if loaded[name].shape != p.data.shape:
            raise CheckpointError(
                f"parameter {name!r}: checkpoint shape {loaded[name].shape} != live shape {p.data.shape}"
            )
        p.data[...] = loaded[name]
