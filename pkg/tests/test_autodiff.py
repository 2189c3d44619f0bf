"""Tests des utilitaires de différentiation: softplus, norme sûre, Adam nommé, contrôle de gradient."""

import math

import numpy as np
import pytest
import torch
from torch import nn

from hlps.autodiff import (
    DTYPE,
    NamedAdam,
    as_tensor,
    backward,
    forward,
    gradient_check,
    mlp,
    relative_error,
    safe_norm,
    softplus,
)
from hlps.errors import AutodiffError, NonFiniteGradientError


def test_softplus_is_overflow_safe():
    """softplus reste fini pour de grands arguments et vaut log 2 en 0."""
    x = as_tensor([1000.0, -1000.0, 0.0], requires_grad=True)
    y = softplus(x)
    assert torch.isfinite(y).all()
    assert y[0].item() == pytest.approx(1000.0)
    assert y[1].item() == pytest.approx(0.0, abs=1e-300)
    assert y[2].item() == pytest.approx(math.log(2.0), abs=1e-15)
    backward(y.sum())
    assert x.grad.tolist() == pytest.approx([1.0, 0.0, 0.5])


def test_softplus_difference_gradient_matches_finite_differences():
    """d/da log(1 + exp(a − b)) contre différences centrées, erreur relative < 1e-5."""
    rng = np.random.default_rng(0)
    for _ in range(20):
        a = as_tensor(rng.normal(scale=5.0), requires_grad=True)
        b = as_tensor(rng.normal(scale=5.0), requires_grad=True)
        err, _ = gradient_check(lambda: softplus(a - b), {"a": a, "b": b})
        assert err < 1e-5


def test_safe_norm_gradient_at_origin_is_zero():
    x = torch.zeros(3, dtype=DTYPE, requires_grad=True)
    backward(safe_norm(x))
    assert torch.equal(x.grad, torch.zeros(3, dtype=DTYPE))


def test_backward_needs_scalar_root():
    x = as_tensor([1.0, 2.0], requires_grad=True)
    with pytest.raises(AutodiffError):
        backward(x * 2)


def test_forward_reports_shape_mismatch():
    with pytest.raises(AutodiffError):
        forward(lambda a, b: a @ b, torch.ones(2, 3, dtype=DTYPE), torch.ones(2, 3, dtype=DTYPE))


def test_mlp_is_reproducible_for_a_seed():
    """Même graine, mêmes poids; la dernière couche n'a pas d'activation."""
    a = mlp([3, 5, 2], torch.Generator().manual_seed(7))
    b = mlp([3, 5, 2], torch.Generator().manual_seed(7))
    for pa, pb in zip(a.parameters(), b.parameters()):
        assert torch.equal(pa, pb)
        assert pa.dtype == DTYPE
    assert isinstance(a[-1], nn.Linear)


def test_backward_is_deterministic():
    def grads():
        net = mlp([4, 6, 1], torch.Generator().manual_seed(3))
        x = torch.linspace(-1, 1, 8, dtype=DTYPE).reshape(2, 4)
        backward(net(x).pow(2).sum())
        return [p.grad.clone() for p in net.parameters()]

    for g1, g2 in zip(grads(), grads()):
        assert torch.equal(g1, g2)


def test_named_adam_rejects_non_finite_gradient():
    """Le message et l'attribut ``name`` désignent le paramètre fautif; rien n'est modifié."""
    w = nn.Parameter(torch.ones(2, dtype=DTYPE))
    opt = NamedAdam([("layer.w", w)], lr=0.1)
    w.grad = torch.tensor([1.0, float("nan")], dtype=DTYPE)
    with pytest.raises(NonFiniteGradientError) as info:
        opt.step()
    assert info.value.name == "layer.w"
    assert "layer.w" in str(info.value)
    assert torch.equal(w.detach(), torch.ones(2, dtype=DTYPE))


def test_named_adam_first_step_moves_by_lr():
    """Premier pas d'Adam: chaque coordonnée bouge d'environ lr dans le sens opposé au gradient."""
    w = nn.Parameter(torch.zeros(2, dtype=DTYPE))
    opt = NamedAdam([("w", w)], lr=0.01)
    w.grad = torch.tensor([3.0, -0.5], dtype=DTYPE)
    opt.step()
    assert w.detach().tolist() == pytest.approx([-0.01, 0.01], rel=1e-6)
    assert w.grad is None
    assert opt.lr == 0.01


def test_named_adam_needs_trainable_parameters():
    frozen = nn.Parameter(torch.ones(1, dtype=DTYPE), requires_grad=False)
    with pytest.raises(AutodiffError):
        NamedAdam([("frozen", frozen)], lr=0.1)


def test_gradient_check_on_quadratic():
    w = as_tensor([0.5, -2.0, 3.0], requires_grad=True)
    err, name = gradient_check(lambda: (w**3).sum(), {"w": w})
    assert err < 1e-8
    assert name in ("", "w")


def test_relative_error_uses_floor():
    assert relative_error(0.0, 1e-9) == pytest.approx(1e-3)
    assert relative_error(2.0, 1.0) == pytest.approx(0.5)


if __name__ == "__main__":
    test_softplus_is_overflow_safe()
    test_named_adam_rejects_non_finite_gradient()
    print("ok")
