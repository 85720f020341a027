"""Central finite-difference oracle for gradient tests (64-bit mode)."""

import numpy as np

from logoforge.autodiff import GradTape, Tensor, backward


def numeric_grad(f, arrays, which, h=1e-3, coords=None, rng=None):
    """Central differences of scalar f(arrays) w.r.t. arrays[which].

    Returns (coords, values); coords is a sampled subset of flat indices when
    the tensor is large, so checks stay fast.
    """
    arrays = [np.array(a, dtype=np.float64) for a in arrays]
    target = arrays[which]
    flat = target.reshape(-1)
    if coords is None:
        n = flat.size
        if rng is not None and n > 16:
            coords = rng.choice(n, size=16, replace=False)
        else:
            coords = np.arange(n)
    vals = np.empty(len(coords))
    for idx, c in enumerate(coords):
        orig = flat[c]
        flat[c] = orig + h
        fp = f(arrays)
        flat[c] = orig - h
        fm = f(arrays)
        flat[c] = orig
        vals[idx] = (fp - fm) / (2 * h)
    return np.asarray(coords), vals


def analytic_grad(build, arrays, which):
    """Gradient of the taped scalar built by `build(tensors)` w.r.t. input `which`."""
    tensors = [Tensor(a, requires_grad=True, dtype=np.float64) for a in arrays]
    with GradTape() as tape:
        out = build(tensors)
        grads = backward(out, tape, tensors)
    return grads[which].data


def check_grads(build, arrays, rtol=1e-4, h=1e-3, rng=None):
    """Max relative error between taped gradients and central differences."""

    def f(arrs):
        ts = [Tensor(a, dtype=np.float64) for a in arrs]
        with GradTape():
            return float(build(ts).data)

    worst = 0.0
    for which in range(len(arrays)):
        ana = analytic_grad(build, arrays, which).reshape(-1)
        coords, num = numeric_grad(f, arrays, which, h=h, rng=rng)
        denom = np.maximum(1.0, np.maximum(np.abs(ana[coords]), np.abs(num)))
        err = np.max(np.abs(ana[coords] - num) / denom)
        worst = max(worst, float(err))
    assert worst < rtol, f"gradient mismatch: max relative error {worst:.3e} >= {rtol}"
    return worst
