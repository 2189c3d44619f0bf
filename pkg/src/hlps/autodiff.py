"""Reverse-mode differentiation helpers built on torch.autograd.

The GP solves and the 2x2 filter recursions are compared at 1e-8, so every tensor
in the package is float64. torch provides the graph, the backward pass and the
Cholesky/solve adjoints; this module adds the pieces the rest of the package
relies on: reproducible layer initialisation, an overflow-safe softplus, a
named Adam wrapper that refuses non-finite gradients, and a central-difference
gradient checker used by the self-test and the test-suite.
"""

from __future__ import annotations

import math
from typing import Callable, Iterable, Sequence

import torch
from torch import nn

from .errors import AutodiffError, NonFiniteGradientError

DTYPE = torch.float64


def as_tensor(value, *, requires_grad: bool = False) -> torch.Tensor:
    """Convert numbers/arrays to a float64 tensor (no copy when already float64)."""
    tensor = torch.as_tensor(value, dtype=DTYPE)
    if requires_grad:
        tensor = tensor.detach().clone().requires_grad_(True)
    return tensor


def forward(fn: Callable[..., torch.Tensor], *inputs: torch.Tensor) -> torch.Tensor:
    """Evaluate ``fn`` on bound inputs, recording the graph for a later backward pass.

    Raises:
        AutodiffError: operands with incompatible shapes.
    """
    try:
        return fn(*inputs)
    except RuntimeError as exc:
        raise AutodiffError(f"graph construction failed: {exc}") from exc


def backward(root: torch.Tensor) -> None:
    """Accumulate d(root)/d(leaf) into ``.grad`` of every leaf requiring gradients.

    Raises:
        AutodiffError: ``root`` is not a scalar.
    """
    if root.numel() != 1:
        raise AutodiffError(f"backward needs a scalar root, got shape {tuple(root.shape)}")
    root.reshape(()).backward()


def softplus(t: torch.Tensor) -> torch.Tensor:
    """log(1 + exp(t)) in the overflow-safe form max(t, 0) + log1p(exp(-|t|)).

    ``logaddexp(t, 0)`` evaluates exactly that expression and its derivative is sigmoid(t)
    everywhere, including t = 0.
    """
    return torch.logaddexp(t, torch.zeros_like(t))


def safe_norm(x: torch.Tensor, dim: int = -1) -> torch.Tensor:
    """Euclidean norm along ``dim`` with a zero (not NaN) gradient at the origin."""
    sq = (x * x).sum(dim=dim)
    positive = sq > 0
    return torch.where(positive, torch.sqrt(torch.where(positive, sq, torch.ones_like(sq))), torch.zeros_like(sq))


def init_linear(layer: nn.Linear, generator: torch.Generator) -> nn.Linear:
    """U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weight and bias, drawn from ``generator``."""
    bound = 1.0 / math.sqrt(layer.in_features)
    with torch.no_grad():
        layer.weight.uniform_(-bound, bound, generator=generator)
        if layer.bias is not None:
            layer.bias.uniform_(-bound, bound, generator=generator)
    return layer


def mlp(sizes: Sequence[int], generator: torch.Generator) -> nn.Sequential:
    """Fully-connected ReLU network; no activation after the last layer."""
    layers: list[nn.Module] = []
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        layers.append(init_linear(nn.Linear(fan_in, fan_out, dtype=DTYPE), generator))
        if i < len(sizes) - 2:
            layers.append(nn.ReLU())
    return nn.Sequential(*layers)


class NamedAdam:
    """Adam (beta1=0.9, beta2=0.999, eps=1e-8) over a named parameter group.

    ``step`` checks every gradient first and raises NonFiniteGradientError naming the
    offending parameter, then applies the update and clears the gradients.
    """

    def __init__(self, named_parameters: Iterable[tuple[str, nn.Parameter]], lr: float):
        self.named_parameters = [(name, p) for name, p in named_parameters if p.requires_grad]
        if not self.named_parameters:
            raise AutodiffError("optimizer created without trainable parameters")
        self.optimizer = torch.optim.Adam(
            [p for _, p in self.named_parameters], lr=lr, betas=(0.9, 0.999), eps=1e-8
        )

    @property
    def lr(self) -> float:
        return self.optimizer.param_groups[0]["lr"]

    def parameters(self) -> list[nn.Parameter]:
        return [p for _, p in self.named_parameters]

    def zero_grad(self) -> None:
        self.optimizer.zero_grad(set_to_none=True)

    def step(self) -> None:
        for name, p in self.named_parameters:
            if p.grad is not None and not torch.isfinite(p.grad).all():
                self.zero_grad()
                raise NonFiniteGradientError(name)
        self.optimizer.step()
        self.zero_grad()

    def state_dict(self) -> dict:
        return self.optimizer.state_dict()

    def load_state_dict(self, state: dict) -> None:
        self.optimizer.load_state_dict(state)


def relative_error(analytic: float, numeric: float, floor: float = 1e-6) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def gradient_check(
    loss_fn: Callable[[], torch.Tensor],
    params: dict[str, torch.Tensor],
    *,
    step: float = 1e-5,
    max_coords: int | None = None,
    generator: torch.Generator | None = None,
) -> tuple[float, str]:
    """Compare autograd gradients of ``loss_fn()`` with central finite differences.

    ``loss_fn`` must read the current values of ``params`` each time it is called.
    At most ``max_coords`` coordinates per parameter are checked (chosen with ``generator``).

    Returns:
        (max relative error, name of the parameter where it occurred)
    """
    tensors = list(params.values())
    loss = loss_fn()
    grads = torch.autograd.grad(loss, tensors, allow_unused=True)
    worst, worst_name = 0.0, ""
    for (name, tensor), grad in zip(params.items(), grads):
        flat = tensor.data.view(-1)
        analytic = torch.zeros_like(flat) if grad is None else grad.reshape(-1)
        n = flat.numel()
        if max_coords is not None and n > max_coords:
            coords = torch.randperm(n, generator=generator)[:max_coords].tolist()
        else:
            coords = range(n)
        for idx in coords:
            original = flat[idx].item()
            with torch.no_grad():
                flat[idx] = original + step
                up = loss_fn().item()
                flat[idx] = original - step
                down = loss_fn().item()
                flat[idx] = original
            err = relative_error(analytic[idx].item(), (up - down) / (2 * step))
            if err > worst:
                worst, worst_name = err, name
    return worst, worst_name
