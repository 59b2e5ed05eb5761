"""Adam optimizer with bias correction and an epoch-wise linear warmup."""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor


class MissingGradientError(RuntimeError):
    """A parameter reached the optimizer step without a populated gradient."""


class AdamState:
    """Per-parameter first/second moment accumulators and the step counter.

    ``params`` is a name -> Tensor mapping; moments are allocated lazily with
    the parameter's shape and dtype.
    """

    def __init__(self, params: dict[str, Tensor], lr: float = 1e-4,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
                 warmup_epochs: int = 15):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.warmup_epochs = warmup_epochs
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.u = {k: np.zeros_like(p.data) for k, p in params.items()}

    def effective_lr(self, epoch: int) -> float:
        """Base rate scaled by (epoch+1)/warmup during warmup, constant after."""
        if self.warmup_epochs <= 0:
            return self.lr
        return self.lr * min(1.0, (epoch + 1) / self.warmup_epochs)


def adam_step(state: AdamState, epoch: int = 0, lr: float | None = None) -> None:
    """One bias-corrected Adam update; gradients are zeroed afterwards.

    ``lr`` overrides the warmup schedule when given (used by tests); training
    passes the current epoch and lets the schedule pick the rate.
    """
    rate = state.effective_lr(epoch) if lr is None else lr
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** state.t
    bc2 = 1.0 - b2 ** state.t
    for name, p in state.params.items():
        if p.grad is None:
            raise MissingGradientError(f"parameter {name!r} has no gradient")
        g = p.grad
        m = state.m[name]
        u = state.u[name]
        m *= b1
        m += (1.0 - b1) * g
        u *= b2
        u += (1.0 - b2) * (g * g)
        m_hat = m / bc1
        u_hat = u / bc2
        p.data = p.data - rate * m_hat / (np.sqrt(u_hat) + state.eps)
        p.grad = None
