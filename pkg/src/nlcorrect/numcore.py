"""Dense float64 numeric core.

Tensors are plain ``numpy.ndarray`` objects in float64. Every layer in the
package writes its own backward pass on top of the primitives here; there is
no autodiff tape.
"""
from __future__ import annotations

import hashlib
import math
from typing import Callable, Iterator, Mapping

import numpy as np

Tensor = np.ndarray

PROB_FLOOR = 1e-12


class DimensionError(ValueError):
    """Operand shapes do not conform."""


class NumericError(ArithmeticError):
    """A NaN or infinity showed up where a finite number was required."""


def make_rng(seed: int) -> np.random.Generator:
    """Return a PCG64 generator seeded with ``seed``.

    Nothing in the package touches numpy's global RNG; every random draw goes
    through a generator created here and passed down explicitly.
    """
    return np.random.Generator(np.random.PCG64(seed))


def derive_seed(seed: int, *names: object) -> int:
    """Deterministically derive a 63-bit child seed from ``seed`` and a path of names.

    The child seed is the first 8 bytes (little endian, top bit cleared) of
    ``sha256("<seed>/<name1>/<name2>...")``.
    """
    key = "/".join([str(seed), *map(str, names)]).encode("utf-8")
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "little") & (2**63 - 1)


def as_tensor(values, shape=None) -> Tensor:
    arr = np.asarray(values, dtype=np.float64)
    if shape is not None:
        shape = tuple(shape)
        if math.prod(shape) != arr.size:
            raise DimensionError(f"cannot view {arr.size} values as shape {shape}")
        arr = arr.reshape(shape)
    return arr


def affine(W: Tensor, b: Tensor, x: Tensor) -> Tensor:
    """``W x + b``; ``x`` may carry leading batch axes."""
    if W.ndim != 2:
        raise DimensionError(f"affine: W must be a matrix, got shape {W.shape}")
    m, n = W.shape
    if b.shape != (m,):
        raise DimensionError(f"affine: W is {m}x{n} but b has shape {b.shape}")
    if x.shape[-1:] != (n,):
        raise DimensionError(f"affine: W is {m}x{n} but x has shape {x.shape}")
    return x @ W.T + b


def sigmoid(x: Tensor) -> Tensor:
    # tanh form never overflows
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    z = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=axis, keepdims=True)


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    z = x - np.max(x, axis=axis, keepdims=True)
    return z - np.log(np.sum(np.exp(z), axis=axis, keepdims=True))


_ACTIVATIONS: dict[str, Callable[[Tensor], Tensor]] = {
    "tanh": np.tanh,
    "sigmoid": sigmoid,
    "relu": lambda x: np.maximum(x, 0.0),
    "softmax": softmax,
}


def activation(kind: str, x: Tensor) -> Tensor:
    """Apply one of tanh, sigmoid, relu or softmax (softmax over the last axis)."""
    try:
        fn = _ACTIVATIONS[kind]
    except KeyError:
        raise ValueError(f"unknown activation {kind!r}") from None
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise ValueError(f"{kind}: empty tensor")
    return fn(x)


def cross_entropy(probs: Tensor, target: int) -> float:
    """Negative log probability of ``target``, with the probability floored at 1e-12."""
    V = probs.shape[-1]
    if not 0 <= target < V:
        raise ValueError(f"cross_entropy: target {target} outside [0, {V})")
    return -math.log(max(float(probs[target]), PROB_FLOOR))


class ParamStore:
    """Named parameters plus Adam moment estimates.

    Iteration follows insertion order. Not thread safe; callers serialize
    mutation.
    """

    def __init__(self, params: Mapping[str, Tensor] | None = None):
        self.params: dict[str, Tensor] = {}
        self.m: dict[str, Tensor] = {}
        self.v: dict[str, Tensor] = {}
        self.t = 0
        for name, value in (params or {}).items():
            self.add(name, value)

    def add(self, name: str, value) -> None:
        if name in self.params:
            raise KeyError(f"duplicate parameter {name!r}")
        self.params[name] = np.array(value, dtype=np.float64)

    def __getitem__(self, name: str) -> Tensor:
        return self.params[name]

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def __iter__(self) -> Iterator[str]:
        return iter(self.params)

    def __len__(self) -> int:
        return len(self.params)

    def keys(self):
        return self.params.keys()

    def items(self):
        return self.params.items()

    def num_values(self) -> int:
        return sum(p.size for p in self.params.values())

    def copy(self) -> "ParamStore":
        out = ParamStore(self.params)
        out.m = {k: v.copy() for k, v in self.m.items()}
        out.v = {k: v.copy() for k, v in self.v.items()}
        out.t = self.t
        return out


def adam_step(
    store: ParamStore,
    grads: Mapping[str, Tensor],
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One bias-corrected Adam update of every parameter named in ``grads``."""
    for name, g in grads.items():
        if name not in store.params:
            raise KeyError(f"gradient for unknown parameter {name!r}")
        if g.shape != store.params[name].shape:
            raise DimensionError(
                f"adam_step: gradient {name} has shape {g.shape}, parameter {store.params[name].shape}"
            )
    store.t += 1
    bc1 = 1.0 - beta1**store.t
    bc2 = 1.0 - beta2**store.t
    for name, g in grads.items():
        p = store.params[name]
        if name not in store.m:
            store.m[name] = np.zeros_like(p)
            store.v[name] = np.zeros_like(p)
        m, v = store.m[name], store.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


def dropout_mask(shape, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted-dropout multiplier: 0 with probability ``rate``, else 1/(1-rate)."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    if rate == 0.0:
        return np.ones(shape)
    keep = rng.random(shape) >= rate
    return keep / (1.0 - rate)


def dropout(x: Tensor, rate: float, rng: np.random.Generator | None, training: bool) -> Tensor:
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    return x * dropout_mask(x.shape, rate, rng)


def grad_check_report(
    loss_fn: Callable[[ParamStore], float],
    store: ParamStore,
    grads: Mapping[str, Tensor],
    h: float = 1e-5,
    n_coords: int = 100,
    seed: int = 0,
) -> dict[str, float]:
    """Per-parameter max relative error between ``grads`` and central differences.

    Up to ``n_coords`` coordinates of each tensor are probed (all of them when
    the tensor is smaller). Relative error uses ``max(|a|, |n|, 1e-8)`` as the
    denominator. ``store`` is restored exactly on return.
    """
    rng = make_rng(seed)
    report: dict[str, float] = {}
    for name, p in store.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p)
        flat = p.reshape(-1)
        gflat = np.asarray(g).reshape(-1)
        if flat.size <= n_coords:
            coords = np.arange(flat.size)
        else:
            coords = np.sort(rng.choice(flat.size, size=n_coords, replace=False))
        worst = 0.0
        for i in coords:
            orig = flat[i]
            flat[i] = orig + h
            fp = loss_fn(store)
            flat[i] = orig - h
            fm = loss_fn(store)
            flat[i] = orig
            if not (math.isfinite(fp) and math.isfinite(fm)):
                raise NumericError(f"non-finite loss while probing {name}[{i}]")
            num = (fp - fm) / (2.0 * h)
            ana = float(gflat[i])
            err = abs(ana - num) / max(abs(ana), abs(num), 1e-8)
            worst = max(worst, err)
        report[name] = worst
    return report


def grad_check(
    loss_fn: Callable[[ParamStore], float],
    store: ParamStore,
    grads: Mapping[str, Tensor],
    h: float = 1e-5,
    n_coords: int = 100,
    seed: int = 0,
) -> float:
    """Max relative error over all probed coordinates; see :func:`grad_check_report`."""
    report = grad_check_report(loss_fn, store, grads, h=h, n_coords=n_coords, seed=seed)
    return max(report.values(), default=0.0)
