"""Numerical kernels for channel-sparse mixed-precision quantization.

Everything here is a pure function over numpy arrays: quantize/dequantize,
temperature-controlled softmax relaxations, mixed-precision mixtures, the
batch-norm transform, channel-importance scoring with top-K selection, the
channel-sparse assembly, and the analytical activation-memory model used to
size search-time storage.

Quantization grid: asymmetric, min-shifted.  For a tensor V and bitwidth b the
scale is s = (max(V) - min(V)) / (2^b - 1), values are shifted by min(V),
divided by s, clipped to [0, 2^b - 1], rounded half-to-even, and mapped back.
The rounding mode is stated explicitly because example values depend on it.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

DEFAULT_BIT_CHOICES = (2, 4, 8)


@dataclass(frozen=True)
class QuantSpec:
    """Derived quantization parameters.  ``scale == 0`` marks the degenerate
    constant-tensor case, where the input is returned unchanged."""

    bits: int
    scale: float
    qmin: int
    qmax: int
    offset: float  # zero-point in real units: min(V)


def quantize(values: np.ndarray, bits: int) -> tuple[np.ndarray, QuantSpec]:
    """Quantize-dequantize a tensor at the given bitwidth.

    Returns the dequantized array (same shape, float64) and the QuantSpec.
    Constant tensors come back unchanged with a zero-scale sentinel.
    """
    if bits < 1:
        raise ValueError(f"bits must be >= 1, got {bits}")
    v = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise ValueError("tensor contains non-finite entries")
    lo = float(v.min())
    hi = float(v.max())
    qmax = 2**bits - 1
    if hi == lo:
        return v.copy(), QuantSpec(bits=bits, scale=0.0, qmin=0, qmax=qmax, offset=lo)
    scale = (hi - lo) / qmax
    q = np.rint(np.clip((v - lo) / scale, 0, qmax))
    out = q * scale + lo
    # Pin the top code exactly to max(V): qmax * ((hi-lo)/qmax) is off by an
    # ulp in general, and a drifting range would break exact idempotence by
    # changing the scale derived on re-quantization.
    out[q == qmax] = hi
    return out, QuantSpec(bits=bits, scale=scale, qmin=0, qmax=qmax, offset=lo)


def mix_precision(
    values: np.ndarray,
    betas,
    bit_choices=DEFAULT_BIT_CHOICES,
) -> np.ndarray:
    """Convex mixture of the tensor quantized at each candidate bitwidth."""
    betas = np.asarray(betas, dtype=np.float64)
    if betas.shape != (len(bit_choices),):
        raise ValueError(
            f"betas must have one weight per bit choice {tuple(bit_choices)}, got shape {betas.shape}"
        )
    v = np.asarray(values, dtype=np.float64)
    mixed = np.zeros_like(v)
    for weight, bits in zip(betas, bit_choices):
        mixed = mixed + weight * quantize(v, bits)[0]
    return mixed


def gumbel_softmax(
    logits,
    tau: float,
    mode: str = "standard",
    noise: np.ndarray | None = None,
    rng: np.random.Generator | int | None = None,
) -> np.ndarray:
    """Temperature-controlled relaxation of a categorical distribution.

    ``standard`` perturbs the logits with Gumbel noise -log(-log(u)), so the
    argmax of the output is an exact categorical sample from
    softmax(logits).  ``paper`` adds plain uniform noise in [0, 1) instead.
    An explicit ``noise`` array overrides sampling; with neither ``noise`` nor
    ``rng`` given the perturbation is zero and the result is the plain
    tempered softmax.
    """
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    if mode not in ("paper", "standard"):
        raise ValueError(f"mode must be 'paper' or 'standard', got {mode!r}")
    z = np.asarray(logits, dtype=np.float64)
    if noise is None:
        if rng is None:
            eps = np.zeros_like(z)
        else:
            gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
            u = gen.random(z.shape)
            eps = u if mode == "paper" else -np.log(-np.log(np.clip(u, 1e-300, 1.0 - 1e-16)))
    else:
        eps = np.asarray(noise, dtype=np.float64)
    shifted = (z + eps) / tau
    shifted = shifted - shifted.max()
    expv = np.exp(shifted)
    return expv / expv.sum()


def bn_forward(z_in, mu_b, sigma_sq_b, gamma, beta_shift, eps: float = 1e-5):
    """Batch-norm transform: normalize by batch statistics, then scale and shift.

    Per-channel parameter vectors broadcast over (batch, channel, height,
    width) inputs; scalars apply uniformly.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    z = np.asarray(z_in, dtype=np.float64)

    def expand(p):
        p = np.asarray(p, dtype=np.float64)
        if z.ndim == 4 and p.ndim == 1:
            return p.reshape(1, -1, 1, 1)
        return p

    mu = expand(mu_b)
    var = expand(sigma_sq_b)
    if np.any(var < 0):
        raise ValueError("sigma_sq_b must be non-negative")
    z_hat = (z - mu) / np.sqrt(var + eps)
    return expand(gamma) * z_hat + expand(beta_shift)


def channel_importance(alpha_prev, gamma_matrix) -> np.ndarray:
    """Per-channel importance: operator weights combined with each operator's
    per-channel batch-norm scales."""
    alpha = np.asarray(alpha_prev, dtype=np.float64)
    gammas = np.asarray(gamma_matrix, dtype=np.float64)
    if alpha.ndim != 1 or gammas.ndim != 2 or gammas.shape[0] != alpha.shape[0]:
        raise ValueError(
            f"shape mismatch: alpha {alpha.shape} vs gamma matrix {gammas.shape}"
        )
    return alpha @ gammas


def topk_channels(importance, k_percent: float) -> np.ndarray:
    """Indices of the most important channels, sorted ascending.

    Selects max(1, floor(k_percent/100 * C)) channels for k_percent > 0 and
    none for k_percent == 0.  Ties break toward the lower channel index.
    """
    if not 0 <= k_percent <= 100:
        raise ValueError(f"k_percent must be in [0, 100], got {k_percent}")
    imp = np.asarray(importance, dtype=np.float64)
    n = imp.shape[0]
    if k_percent == 0:
        return np.array([], dtype=np.int64)
    count = max(1, int(np.floor(k_percent / 100.0 * n)))
    order = np.argsort(-imp, kind="stable")  # stable: equal values keep index order
    return np.sort(order[:count]).astype(np.int64)


def quantize_channels(
    acts: np.ndarray,
    channels,
    betas,
    bit_choices=DEFAULT_BIT_CHOICES,
) -> np.ndarray:
    """Mixed-precision quantization applied only to the selected channels.

    The selected channels are quantized as one group (shared scale); all other
    channels pass through bit-identically.  Channel order is preserved: the
    result is a scatter back into the original layout, not a concatenation.
    """
    a = np.asarray(acts, dtype=np.float64)
    if a.ndim != 4:
        raise ValueError(f"activations must be 4-D (batch, channel, h, w), got ndim={a.ndim}")
    idx = np.asarray(channels, dtype=np.int64)
    out = a.copy()
    if idx.size == 0:
        return out
    if idx.min() < 0 or idx.max() >= a.shape[1]:
        raise IndexError(f"channel index out of range for {a.shape[1]} channels")
    out[:, idx] = mix_precision(a[:, idx], betas, bit_choices)
    return out


@dataclass(frozen=True)
class MemoryEstimate:
    naive_bytes: float
    sparse_bytes: float
    ratio: float


def memory_model(m: int, k_percent: float, n_ops: int, act_bytes: float) -> MemoryEstimate:
    """First-order search-time activation memory model.

    Storing one unquantized copy plus m quantized copies per operator costs
    (1 + m) * act_bytes; quantizing only k percent of channels shrinks the
    quantized copies to m * k/100.  The model ignores quantizer metadata and
    allocator overhead, so measured savings typically exceed the ratio
    reported here.
    """
    if m < 0:
        raise ValueError("m must be >= 0")
    if not 0 <= k_percent <= 100:
        raise ValueError(f"k_percent must be in [0, 100], got {k_percent}")
    naive = n_ops * act_bytes * (1 + m)
    sparse = n_ops * act_bytes * (1 + m * k_percent / 100.0)
    return MemoryEstimate(naive_bytes=naive, sparse_bytes=sparse, ratio=naive / sparse)


def save_tensor4(path, arr: np.ndarray) -> None:
    """Write a 4-D tensor as a flat binary container: 4 int64 dims, then
    row-major float64 data."""
    a = np.ascontiguousarray(np.asarray(arr, dtype=np.float64))
    if a.ndim != 4:
        raise ValueError(f"expected a 4-D tensor, got ndim={a.ndim}")
    with open(path, "wb") as fh:
        np.asarray(a.shape, dtype=np.int64).tofile(fh)
        a.tofile(fh)


def load_tensor4(path) -> np.ndarray:
    with open(path, "rb") as fh:
        dims = np.fromfile(fh, dtype=np.int64, count=4)
        if dims.size != 4 or np.any(dims <= 0):
            raise ValueError(f"corrupt tensor header in {path}")
        data = np.fromfile(fh, dtype=np.float64)
    expected = int(np.prod(dims))
    if data.size != expected:
        raise ValueError(f"tensor payload in {path} has {data.size} values, expected {expected}")
    return data.reshape(tuple(dims))


def save_tensor4_text(path, arr: np.ndarray) -> None:
    """Small text format for tests: dims on the first line, one value per line."""
    a = np.asarray(arr, dtype=np.float64)
    if a.ndim != 4:
        raise ValueError(f"expected a 4-D tensor, got ndim={a.ndim}")
    with open(path, "w") as fh:
        fh.write(" ".join(str(d) for d in a.shape) + "\n")
        for value in a.ravel():
            fh.write(f"{float(value)!r}\n")


def load_tensor4_text(path) -> np.ndarray:
    text = Path(path).read_text().splitlines()
    if not text:
        raise ValueError(f"empty tensor file {path}")
    dims = tuple(int(d) for d in text[0].split())
    if len(dims) != 4 or any(d <= 0 for d in dims):
        raise ValueError(f"corrupt tensor header in {path}")
    values = np.array([float(line) for line in text[1:] if line.strip()], dtype=np.float64)
    expected = int(np.prod(dims))
    if values.size != expected:
        raise ValueError(f"tensor payload in {path} has {values.size} values, expected {expected}")
    return values.reshape(dims)
