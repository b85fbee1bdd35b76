"""Adam with decoupled weight decay, usable for descent or ascent."""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor


class GradMissingError(RuntimeError):
    """A parameter had no gradient when a step was requested."""


class Adam:
    """Standard Adam update with decoupled weight decay.

    ``maximize=True`` negates gradients before the update (gradient ascent);
    the decay term is applied directly to the parameters and keeps its
    shrinking direction in both modes. Moment buffers match parameter shapes
    and ``step_count`` increments by exactly one per step.
    """

    def __init__(
        self,
        params,
        lr: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        weight_decay: float = 0.0,
        maximize: bool = False,
    ):
        self.params: list[Tensor] = list(params)
        if lr <= 0:
            raise ValueError("lr must be positive")
        if not (0.0 < beta1 < 1.0 and 0.0 < beta2 < 1.0):
            raise ValueError("betas must lie in (0, 1)")
        if eps <= 0:
            raise ValueError("eps must be positive")
        if weight_decay < 0:
            raise ValueError("weight_decay must be nonnegative")
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.weight_decay = float(weight_decay)
        self.maximize = bool(maximize)
        self.step_count = 0
        self._m = [np.zeros_like(p.values) for p in self.params]
        self._v = [np.zeros_like(p.values) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> None:
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1 ** t
        bc2 = 1.0 - self.beta2 ** t
        for i, p in enumerate(self.params):
            if p.grad is None:
                raise GradMissingError(
                    f"adam: parameter {i} (shape {p.shape}) has no gradient"
                )
            g = -p.grad if self.maximize else p.grad
            m, v = self._m[i], self._v[i]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            if self.weight_decay:
                update = update + self.weight_decay * p.values
            p.values -= self.lr * update
