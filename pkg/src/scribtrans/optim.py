"""SGD with momentum (+ classic coupled weight decay) and bias-corrected
Adam, as explicit update functions over named parameter tensors.

Both updates are dtype-generic (tests drive them in float64) and abort with
DivergenceError on the first non-finite gradient.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch

from .errors import DivergenceError


def _check_finite(name: str, grad: torch.Tensor) -> None:
    if not torch.isfinite(grad).all():
        raise DivergenceError(f"non-finite gradient for parameter {name!r}")


@dataclass
class SGDMomentumState:
    momentum: float = 0.9
    weight_decay: float = 5e-4
    velocity: dict[str, torch.Tensor] = field(default_factory=dict)


@torch.no_grad()
def sgd_update(
    params: dict[str, torch.Tensor],
    grads: dict[str, torch.Tensor],
    state: SGDMomentumState,
    lr: float,
) -> None:
    """g' = g + wd*theta; v <- momentum*v + g'; theta <- theta - lr*v."""
    for name, p in params.items():
        g = grads[name]
        _check_finite(name, g)
        if state.weight_decay:
            g = g + state.weight_decay * p
        v = state.velocity.get(name)
        if v is None:
            v = torch.zeros_like(p)
        v = state.momentum * v + g
        p.sub_(lr * v)
        state.velocity[name] = v


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, torch.Tensor] = field(default_factory=dict)
    v: dict[str, torch.Tensor] = field(default_factory=dict)


@torch.no_grad()
def adam_update(
    params: dict[str, torch.Tensor],
    grads: dict[str, torch.Tensor],
    state: AdamState,
    lr: float,
) -> None:
    """Standard bias-corrected first/second-moment update."""
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    for name, p in params.items():
        g = grads[name]
        _check_finite(name, g)
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = torch.zeros_like(p)
            v = torch.zeros_like(p)
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        m_hat = m / bc1
        v_hat = v / bc2
        p.sub_(lr * m_hat / (v_hat.sqrt() + state.eps))
        state.m[name] = m
        state.v[name] = v


def gradients_of(params: dict[str, torch.Tensor]) -> dict[str, torch.Tensor]:
    """Collect .grad tensors; parameters without a gradient contribute zero."""
    return {
        name: (p.grad if p.grad is not None else torch.zeros_like(p))
        for name, p in params.items()
    }
