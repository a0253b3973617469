"""Finite-difference verification of analytic gradients.

The checker is the independent oracle for every differentiable path in the
package: it re-evaluates the target function with coordinate-wise central
differences and reports the worst relative disagreement against the recorded
analytic gradient.
"""
from __future__ import annotations

import numpy as np

from ..errors import NumericError
from .tensor import Tensor


def check_gradients(f, x: Tensor, eps: float = 1e-5, max_coords: int | None = None, rng=None) -> float:
    """Max over checked coordinates of |analytic - central difference| / max(1, |a|, |n|).

    ``f`` must be a deterministic scalar-valued function of ``x`` that can be
    evaluated repeatedly.  When ``max_coords`` is given, a random subset of
    coordinates is checked (seeded via ``rng``).
    """
    if eps <= 0:
        raise NumericError(f"eps must be positive, got {eps}")
    x.requires_grad = True
    x.reset_grad()
    loss = f(x)
    if not np.all(np.isfinite(loss.data)):
        raise NumericError("function value is not finite at the checkpoint")
    loss.backward()
    analytic = x.grad.copy()

    flat = x.data.reshape(-1)
    n = flat.size
    coords = np.arange(n)
    if max_coords is not None and max_coords < n:
        gen = rng.generator if rng is not None else np.random.default_rng(0)
        coords = gen.choice(n, size=max_coords, replace=False)

    worst = 0.0
    a_flat = analytic.reshape(-1)
    for c in coords:
        orig = flat[c]
        flat[c] = orig + eps
        up = float(f(x).data.reshape(-1)[0])
        flat[c] = orig - eps
        down = float(f(x).data.reshape(-1)[0])
        flat[c] = orig
        if not (np.isfinite(up) and np.isfinite(down)):
            raise NumericError("function value is not finite during finite differencing")
        numeric = (up - down) / (2.0 * eps)
        a = a_flat[c]
        err = abs(a - numeric) / max(1.0, abs(a), abs(numeric))
        if err > worst:
            worst = err
    return worst


def check_parameter_gradients(loss_fn, params: list[Tensor], eps: float = 1e-5,
                              max_coords_per_param: int = 12, rng=None) -> float:
    """Worst relative error over a sampled set of coordinates of every parameter.

    ``loss_fn`` takes no arguments and rebuilds the scalar loss from the live
    parameter values, so finite differences see exactly the path being trained.
    """
    for p in params:
        p.reset_grad()
    loss = loss_fn()
    loss.backward()
    analytic = {id(p): p.grad.copy() for p in params}

    gen = rng.generator if rng is not None else np.random.default_rng(0)
    worst = 0.0
    for p in params:
        flat = p.data.reshape(-1)
        a_flat = analytic[id(p)].reshape(-1)
        n = flat.size
        idx = np.arange(n) if n <= max_coords_per_param else gen.choice(n, size=max_coords_per_param, replace=False)
        for c in idx:
            orig = flat[c]
            flat[c] = orig + eps
            up = float(loss_fn().data.reshape(-1)[0])
            flat[c] = orig - eps
            down = float(loss_fn().data.reshape(-1)[0])
            flat[c] = orig
            if not (np.isfinite(up) and np.isfinite(down)):
                raise NumericError(f"non-finite value while differencing parameter {p.name!r}")
            numeric = (up - down) / (2.0 * eps)
            a = a_flat[c]
            err = abs(a - numeric) / max(1.0, abs(a), abs(numeric))
            if err > worst:
                worst = err
    return worst
