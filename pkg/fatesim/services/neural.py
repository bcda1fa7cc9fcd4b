"""
Dense ReLU networks in numpy: forward/backward passes, Adam, soft target
updates, finite-difference gradient checking and parameter snapshots.

Weights are stored (fan_in, fan_out) so a batch `x` of shape (n, fan_in)
maps to `x @ W + b`. Parameter and gradient lists are ordered
[W0, b0, W1, b1, ...].
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from fatesim.utils.errors import DimensionMismatchError, NonFiniteGradientError, StaleCacheError

HEADS = ("linear", "tanh", "gaussian")
LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
# Squashed outputs stay strictly inside (-1, 1).
TANH_BOUND = 1.0 - 1e-12
DEFAULT_HIDDEN = (64, 64)


@dataclass
class ForwardCache:
    version: int
    squeeze: bool
    layer_inputs: List[np.ndarray]
    pre_activations: List[np.ndarray]
    output: np.ndarray
    log_std_mask: Optional[np.ndarray] = None

    def kink_masks(self) -> List[np.ndarray]:
        """Boolean patterns whose change marks a non-differentiable point."""
        masks = [z > 0 for z in self.pre_activations[:-1]]
        if self.log_std_mask is not None:
            masks.append(self.log_std_mask)
        return masks


class Mlp:
    """
    Multi-layer perceptron with rectifier hidden layers.

    The `gaussian` head emits `output_size` means followed by `output_size`
    log standard deviations clamped to [LOG_STD_MIN, LOG_STD_MAX].
    """

    def __init__(
        self,
        input_size: int,
        output_size: int,
        hidden: Sequence[int] = DEFAULT_HIDDEN,
        head: str = "linear",
        rng: Optional[np.random.Generator] = None,
    ):
        if head not in HEADS:
            raise ValueError(f"Unknown output head '{head}', expected one of {HEADS}")
        if input_size <= 0 or output_size <= 0 or any(size <= 0 for size in hidden):
            raise ValueError(f"Layer sizes must be positive, got {input_size}, {tuple(hidden)}, {output_size}")
        rng = rng if rng is not None else np.random.default_rng()

        self.input_size = input_size
        self.output_size = output_size
        self.hidden = tuple(hidden)
        self.head = head
        self.version = 0

        final = 2 * output_size if head == "gaussian" else output_size
        sizes = [input_size, *self.hidden, final]
        self.weights: List[np.ndarray] = []
        self.biases: List[np.ndarray] = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.biases.append(rng.uniform(-bound, bound, size=fan_out))

    @property
    def params(self) -> List[np.ndarray]:
        params = []
        for weight, bias in zip(self.weights, self.biases):
            params.extend((weight, bias))
        return params

    @property
    def parameter_count(self) -> int:
        return sum(p.size for p in self.params)

    def copy(self) -> "Mlp":
        clone = Mlp.__new__(Mlp)
        clone.input_size = self.input_size
        clone.output_size = self.output_size
        clone.hidden = self.hidden
        clone.head = self.head
        clone.version = 0
        clone.weights = [w.copy() for w in self.weights]
        clone.biases = [b.copy() for b in self.biases]
        return clone

    def set_params(self, params: Sequence[np.ndarray]):
        for target, value in zip(self.params, params, strict=True):
            if target.shape != value.shape:
                raise DimensionMismatchError(f"Parameter shape {value.shape} does not match {target.shape}")
            target[...] = value
        self.version += 1

    def all_finite(self) -> bool:
        return all(np.isfinite(p).all() for p in self.params)

    def forward(self, x: Union[np.ndarray, Sequence[float]]) -> Tuple[np.ndarray, ForwardCache]:
        x = np.asarray(x, dtype=np.float64)
        squeeze = x.ndim == 1
        batch = np.atleast_2d(x)
        if batch.ndim != 2 or batch.shape[1] != self.input_size:
            raise DimensionMismatchError(f"Expected input of size {self.input_size}, got shape {x.shape}")

        layer_inputs, pre_activations = [], []
        activation = batch
        last = len(self.weights) - 1
        for i, (weight, bias) in enumerate(zip(self.weights, self.biases)):
            layer_inputs.append(activation)
            z = activation @ weight + bias
            pre_activations.append(z)
            activation = np.maximum(z, 0.0) if i < last else z

        z = pre_activations[-1]
        log_std_mask = None
        if self.head == "tanh":
            out = np.clip(np.tanh(z), -TANH_BOUND, TANH_BOUND)
        elif self.head == "gaussian":
            raw_log_std = z[:, self.output_size:]
            log_std_mask = (raw_log_std >= LOG_STD_MIN) & (raw_log_std <= LOG_STD_MAX)
            out = np.concatenate(
                [z[:, :self.output_size], np.clip(raw_log_std, LOG_STD_MIN, LOG_STD_MAX)], axis=1
            )
        else:
            out = z

        cache = ForwardCache(self.version, squeeze, layer_inputs, pre_activations, out, log_std_mask)
        return (out[0] if squeeze else out), cache

    def __call__(self, x) -> np.ndarray:
        return self.forward(x)[0]

    def backward(
        self, cache: ForwardCache, grad_output: Union[np.ndarray, Sequence[float]]
    ) -> Tuple[List[np.ndarray], np.ndarray]:
        """
        Backpropagate `grad_output` (dLoss/dOutput) through the cached pass.

        Returns parameter gradients in `params` order and dLoss/dInput. Batch
        rows contribute additively.
        """
        if cache.version != self.version:
            raise StaleCacheError("Forward cache predates the latest parameter update")
        grad = np.atleast_2d(np.asarray(grad_output, dtype=np.float64))
        if grad.shape != cache.output.shape:
            raise DimensionMismatchError(f"Output gradient shape {grad.shape} does not match {cache.output.shape}")

        if self.head == "tanh":
            dz = grad * (1.0 - cache.output ** 2)
        elif self.head == "gaussian":
            dz = grad.copy()
            dz[:, self.output_size:] *= cache.log_std_mask
        else:
            dz = grad

        grads: List[np.ndarray] = []
        for i in range(len(self.weights) - 1, -1, -1):
            grads.append(dz.sum(axis=0))
            grads.append(cache.layer_inputs[i].T @ dz)
            upstream = dz @ self.weights[i].T
            if i > 0:
                dz = upstream * (cache.pre_activations[i - 1] > 0)
        grads.reverse()
        grad_input = upstream[0] if cache.squeeze else upstream
        return grads, grad_input


def soft_update(target: Mlp, online: Mlp, tau: float):
    """Polyak averaging: target <- (1 - tau) * target + tau * online."""
    for t, o in zip(target.params, online.params, strict=True):
        t *= 1.0 - tau
        t += tau * o
    target.version += 1


# Optimization

@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: List[np.ndarray] = field(default_factory=list)
    v: List[np.ndarray] = field(default_factory=list)


def adam_step(net: Mlp, state: AdamState, grads: Sequence[np.ndarray]) -> Mlp:
    """Apply one bias-corrected Adam update in place. Nothing changes on error."""
    params = net.params
    if len(grads) != len(params):
        raise DimensionMismatchError(f"Expected {len(params)} gradient arrays, got {len(grads)}")
    for param, grad in zip(params, grads):
        if param.shape != np.shape(grad):
            raise DimensionMismatchError(f"Gradient shape {np.shape(grad)} does not match {param.shape}")
        if not np.isfinite(grad).all():
            raise NonFiniteGradientError("Gradient contains NaN or Inf")

    m_prev = state.m or [np.zeros_like(p) for p in params]
    v_prev = state.v or [np.zeros_like(p) for p in params]
    t = state.step + 1
    m = [state.beta1 * mi + (1.0 - state.beta1) * g for mi, g in zip(m_prev, grads)]
    v = [state.beta2 * vi + (1.0 - state.beta2) * np.square(g) for vi, g in zip(v_prev, grads)]
    correction1 = 1.0 - state.beta1 ** t
    correction2 = 1.0 - state.beta2 ** t
    updated = [
        p - state.lr * (mi / correction1) / (np.sqrt(vi / correction2) + state.eps)
        for p, mi, vi in zip(params, m, v)
    ]
    if not all(np.isfinite(p).all() for p in updated):
        raise NonFiniteGradientError("Adam update would produce non-finite parameters")

    for param, value in zip(params, updated):
        param[...] = value
    state.m, state.v, state.step = m, v, t
    net.version += 1
    return net


# Verification

LossFn = Callable[[np.ndarray], Tuple[float, np.ndarray]]


@dataclass
class GradientCheckReport:
    passed: bool
    max_relative_error: float
    checked: int
    skipped: int


def gradient_check(
    net: Mlp,
    loss: LossFn,
    tolerance: float = 1e-4,
    inputs: Optional[np.ndarray] = None,
    n_samples: int = 100,
    rng: Optional[np.random.Generator] = None,
    gradients: Optional[List[np.ndarray]] = None,
    h: float = 1e-5,
) -> GradientCheckReport:
    """
    Compare backpropagated gradients with central differences on randomly
    sampled parameters.

    `loss` maps the network output to (value, dValue/dOutput). `gradients`
    replaces the backward result, which is how faulty gradients are fed in.
    Parameters whose perturbation flips a ReLU or clamp pattern sit on a
    kink and are skipped.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    if inputs is None:
        inputs = rng.standard_normal((4, net.input_size))

    out, cache = net.forward(inputs)
    _, grad_out = loss(out)
    analytic = gradients if gradients is not None else net.backward(cache, grad_out)[0]
    base_masks = cache.kink_masks()

    params = net.params
    sizes = [p.size for p in params]
    offsets = np.cumsum([0] + sizes)
    picks = rng.choice(offsets[-1], size=min(n_samples, offsets[-1]), replace=False)

    max_error, checked, skipped = 0.0, 0, 0
    for flat in picks:
        which = int(np.searchsorted(offsets, flat, side="right") - 1)
        index = np.unravel_index(int(flat - offsets[which]), params[which].shape)
        param = params[which]
        original = param[index]

        param[index] = original + h
        out_plus, cache_plus = net.forward(inputs)
        loss_plus = loss(out_plus)[0]
        param[index] = original - h
        out_minus, cache_minus = net.forward(inputs)
        loss_minus = loss(out_minus)[0]
        param[index] = original

        if not _same_masks(base_masks, cache_plus.kink_masks()) or not _same_masks(
            base_masks, cache_minus.kink_masks()
        ):
            skipped += 1
            continue

        numeric = (loss_plus - loss_minus) / (2.0 * h)
        exact = float(analytic[which][index])
        error = abs(exact - numeric) / max(abs(exact), abs(numeric), 1e-6)
        max_error = max(max_error, error)
        checked += 1

    report = GradientCheckReport(max_error < tolerance and checked > 0, max_error, checked, skipped)
    logger.debug(f"Gradient check: {report}")
    return report


def _same_masks(a: List[np.ndarray], b: List[np.ndarray]) -> bool:
    return all(np.array_equal(x, y) for x, y in zip(a, b))


# Snapshots

def save_snapshot(net: Mlp, path: Union[str, Path]):
    header = {"input_size": net.input_size, "output_size": net.output_size,
              "hidden": list(net.hidden), "head": net.head}
    arrays = {f"p{i}": p for i, p in enumerate(net.params)}
    np.savez(Path(path), header=np.array(json.dumps(header)), **arrays)


def load_snapshot(path: Union[str, Path]) -> Mlp:
    with np.load(Path(path), allow_pickle=False) as data:
        header = json.loads(str(data["header"]))
        net = Mlp(header["input_size"], header["output_size"], header["hidden"], header["head"],
                  rng=np.random.default_rng(0))
        net.set_params([data[f"p{i}"] for i in range(len(net.params))])
    return net
