"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import ParameterStore


@dataclass
class GradcheckResult:
    name: str
    max_rel_error: float
    max_abs_error: float
    n_coords: int
    passed: bool


def gradcheck(f, params: ParameterStore, step: float = 1e-5, tol: float = 1e-5,
              floor: float = 1e-6, max_coords: int | None = None, rng=None):
    """Compare ``f``'s analytic gradient with ``(f(x+h) - f(x-h)) / 2h`` per coordinate.

    ``f`` takes no arguments, reads the tensors in ``params`` and returns a
    scalar Tensor. The relative error of a coordinate is
    ``|analytic - numeric| / max(|analytic|, |numeric|, floor)``.
    ``max_coords`` subsamples coordinates per parameter (``rng`` picks them).
    Returns a dict name -> :class:`GradcheckResult`.
    """
    if step <= 0:
        raise ValueError("gradcheck: step must be positive")

    def value():
        out = f()
        v = float(np.asarray(out.data))
        if not np.isfinite(v):
            raise FloatingPointError("gradcheck: function value is not finite")
        return v

    params.zero_grad()
    out = f()
    if not np.isfinite(out.data).all():
        raise FloatingPointError("gradcheck: function value is not finite")
    out.backward()
    analytic = params.grads()

    report = {}
    for name in params.names():
        p = params[name]
        flat = p.data.reshape(-1)
        coords = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            rng = rng or np.random.default_rng(0)
            coords = np.sort(rng.choice(flat.size, size=max_coords, replace=False))
        a = analytic[name].reshape(-1)
        worst_rel = worst_abs = 0.0
        for idx in coords:
            orig = flat[idx]
            flat[idx] = orig + step
            fp = value()
            flat[idx] = orig - step
            fm = value()
            flat[idx] = orig
            num = (fp - fm) / (2 * step)
            err = abs(a[idx] - num)
            rel = err / max(abs(a[idx]), abs(num), floor)
            worst_rel = max(worst_rel, rel)
            worst_abs = max(worst_abs, err)
        report[name] = GradcheckResult(name, worst_rel, worst_abs, len(coords), worst_rel <= tol)
    params.zero_grad()
    return report


def all_passed(report) -> bool:
    return all(r.passed for r in report.values())
