"""Network building blocks composed from the taped primitives.

conv2d runs as im2col + matmul; conv2d_transpose is built as the exact linear
adjoint (matmul + col2im), so the adjoint identity with conv2d holds by
construction and both are differentiable to any order.
"""

from __future__ import annotations

import numpy as np

from .tensor import (
    Tensor,
    add,
    broadcast_to,
    col2im,
    concat,
    im2col,
    leaky_relu,
    matmul,
    mean,
    mul,
    pow_const,
    replicate_pad2d,
    reshape,
    sum_,
    tanh,
    transpose,
)


def conv2d(x: Tensor, kernel: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation of NCHW input with OIKK kernel."""
    if x.ndim != 4 or kernel.ndim != 4:
        raise ValueError(f"conv2d expects 4-D input and kernel, got {x.shape} and {kernel.shape}")
    n, c, h, w = x.shape
    o, i, kh, kw = kernel.shape
    if c != i:
        raise ValueError(f"conv2d channel mismatch: input has {c}, kernel expects {i}")
    if stride < 1 or padding < 0:
        raise ValueError("conv2d requires stride >= 1 and padding >= 0")
    if (h + 2 * padding - kh) % stride or (w + 2 * padding - kw) % stride:
        raise ValueError(
            f"non-integral output extent for input {h}x{w}, kernel {kh}x{kw}, "
            f"stride {stride}, padding {padding}"
        )
    ho = (h + 2 * padding - kh) // stride + 1
    wo = (w + 2 * padding - kw) // stride + 1
    cols = im2col(x, kh, kw, stride, padding)  # (N*Ho*Wo, C*kh*kw)
    wmat = reshape(kernel, (o, i * kh * kw))
    out = matmul(cols, transpose(wmat))  # (N*Ho*Wo, O)
    return transpose(reshape(out, (n, ho, wo, o)), (0, 3, 1, 2))


def conv2d_transpose(x: Tensor, kernel: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """Linear adjoint of conv2d with the identical kernel/stride/padding.

    Input carries the kernel's O channels; output carries its I channels.
    """
    if x.ndim != 4 or kernel.ndim != 4:
        raise ValueError(f"conv2d_transpose expects 4-D input and kernel, got {x.shape} and {kernel.shape}")
    n, c, h, w = x.shape
    o, i, kh, kw = kernel.shape
    if c != o:
        raise ValueError(f"conv2d_transpose channel mismatch: input has {c}, kernel produces {o}")
    if stride < 1 or padding < 0:
        raise ValueError("conv2d_transpose requires stride >= 1 and padding >= 0")
    ho = (h - 1) * stride - 2 * padding + kh
    wo = (w - 1) * stride - 2 * padding + kw
    if ho <= 0 or wo <= 0:
        raise ValueError(f"conv2d_transpose output extent {ho}x{wo} is not positive")
    wmat = reshape(kernel, (o, i * kh * kw))
    xmat = reshape(transpose(x, (0, 2, 3, 1)), (n * h * w, o))
    cols = matmul(xmat, wmat)  # (N*H*W, I*kh*kw)
    return col2im(cols, (n, i, ho, wo), kh, kw, stride, padding)


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """x @ weight + bias with weight laid out (in_features, out_features)."""
    out = matmul(x, weight)
    if bias is not None:
        out = add(out, bias)
    return out


def bias_add(x: Tensor, bias: Tensor) -> Tensor:
    """Add a per-channel bias to an NCHW tensor."""
    return add(x, reshape(bias, (1, bias.size, 1, 1)))


def relu(x: Tensor) -> Tensor:
    return leaky_relu(x, 0.0)


def sigmoid(x: Tensor) -> Tensor:
    return mul(add(tanh(mul(x, 0.5)), 1.0), 0.5)


def batch_norm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: Tensor,
    running_var: Tensor,
    train: bool,
    update_stats: bool = False,
    momentum: float = 0.9,
    eps: float = 1e-5,
) -> Tensor:
    """Batch normalization over (N, H, W) for NCHW input.

    Buffer updates are explicit so a forward pass through a network that is
    not being trained in the current step never mutates its state.
    """
    axes = (0, 2, 3)
    cshape = (1, x.shape[1], 1, 1)
    if train:
        mu = mean(x, axis=axes, keepdims=True)
        xc = add(x, mul(mu, -1.0))
        var = mean(mul(xc, xc), axis=axes, keepdims=True)
        if update_stats:
            running_mean.data[...] = momentum * running_mean.data + (1 - momentum) * mu.data.reshape(-1)
            running_var.data[...] = momentum * running_var.data + (1 - momentum) * var.data.reshape(-1)
    else:
        mu = Tensor(running_mean.data.reshape(cshape))
        xc = add(x, mul(mu, -1.0))
        var = Tensor(running_var.data.reshape(cshape))
    inv = pow_const(add(var, eps), -0.5)
    return add(mul(mul(xc, inv), reshape(gamma, cshape)), reshape(beta, cshape))


def upsample_nearest2x(x: Tensor) -> Tensor:
    n, c, h, w = x.shape
    r = reshape(x, (n, c, h, 1, w, 1))
    r = broadcast_to(r, (n, c, h, 2, w, 2))
    return reshape(r, (n, c, 2 * h, 2 * w))


def avg_pool2x(x: Tensor) -> Tensor:
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ValueError(f"avg_pool2x needs even spatial dims, got {h}x{w}")
    r = reshape(x, (n, c, h // 2, 2, w // 2, 2))
    return mul(sum_(r, axis=(3, 5)), 0.25)


def global_mean_pool(x: Tensor) -> Tensor:
    """NCHW -> (N, C) spatial mean."""
    n, c, h, w = x.shape
    return reshape(mean(x, axis=(2, 3)), (n, c))


def append_channels(x: Tensor, extra: Tensor) -> Tensor:
    """Concatenate conditioning channels onto an NCHW tensor."""
    return concat([x, extra], axis=1)


def flatten(x: Tensor) -> Tensor:
    n = x.shape[0]
    return reshape(x, (n, int(np.prod(x.shape[1:]))))


def gaussian_kernel1d(sigma: float, dtype=np.float32) -> np.ndarray:
    """Normalized 1-D Gaussian taps truncated at 3 sigma."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return np.ones(1, dtype=dtype)
    radius = int(np.ceil(3.0 * sigma))
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (xs / sigma) ** 2)
    return (k / k.sum()).astype(dtype)


def gaussian_blur2d(x: Tensor, sigma: float) -> Tensor:
    """Separable per-channel Gaussian blur with edge replication."""
    k = gaussian_kernel1d(sigma, dtype=x.dtype)
    taps = len(k)
    if taps == 1:
        return x
    radius = taps // 2
    n, c, h, w = x.shape
    flat = reshape(x, (n * c, 1, h, w))
    padded = replicate_pad2d(flat, radius)
    kv = Tensor(k.reshape(1, 1, taps, 1))
    kh = Tensor(k.reshape(1, 1, 1, taps))
    blurred = conv2d(padded, kv, stride=1, padding=0)  # (n*c, 1, h, w+2r)
    blurred = conv2d(blurred, kh, stride=1, padding=0)  # (n*c, 1, h, w)
    return reshape(blurred, (n, c, h, w))
