"""Central finite-difference verification of autograd gradients."""

from __future__ import annotations

from typing import Callable, Sequence

import torch

MAX_PARAMETERS = 5000


def grad_check(
    params: Sequence[torch.Tensor],
    loss_fn: Callable[[], torch.Tensor],
    eps: float = 1e-5,
    floor: float = 1e-8,
) -> float:
    """Largest relative gap between analytic and central-difference gradients.

    ``loss_fn`` must be deterministic (fix any sampling noise inside it).  The
    relative error per scalar is ``|ga - gf| / max(|ga|, |gf|, floor)``.
    """
    params = list(params)
    total = sum(p.numel() for p in params)
    if total > MAX_PARAMETERS:
        raise ValueError(f"{total} parameters exceeds the {MAX_PARAMETERS} limit for finite differences")
    for p in params:
        p.grad = None
    loss_fn().backward()
    analytic = [p.grad.detach().clone() if p.grad is not None else torch.zeros_like(p) for p in params]
    worst = 0.0
    with torch.no_grad():
        for p, ga in zip(params, analytic):
            flat = p.view(-1)
            gflat = ga.view(-1)
            for k in range(flat.numel()):
                orig = flat[k].item()
                flat[k] = orig + eps
                up = loss_fn().item()
                flat[k] = orig - eps
                down = loss_fn().item()
                flat[k] = orig
                fd = (up - down) / (2.0 * eps)
                a = gflat[k].item()
                rel = abs(a - fd) / max(abs(a), abs(fd), floor)
                worst = max(worst, rel)
    return worst
