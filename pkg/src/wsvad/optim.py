"""Adam optimizer with the L2 penalty folded into the gradient."""

from __future__ import annotations

import numpy as np

from .autograd import ShapeError, Tensor


class Adam:
    """Standard Adam. Weight decay is classic L2: added to the raw gradient
    before the moment updates, not applied decoupled.
    """

    def __init__(
        self,
        params: dict[str, Tensor],
        lr: float = 0.001,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        weight_decay: float = 0.0,
    ):
        self.params = dict(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self._m = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self._v = {k: np.zeros_like(p.data) for k, p in self.params.items()}

    def step(self) -> None:
        """Apply one update to every parameter that has a gradient."""
        self.step_count += 1
        bc1 = 1.0 - self.beta1**self.step_count
        bc2 = 1.0 - self.beta2**self.step_count
        for name, p in self.params.items():
            if p.grad is None:
                continue
            if p.grad.shape != self._m[name].shape:
                raise ShapeError(
                    f"adam: shape of '{name}' drifted from {self._m[name].shape} to {p.grad.shape}"
                )
            g = p.grad
            if self.weight_decay:
                g = g + self.weight_decay * p.data
            m = self._m[name] = self.beta1 * self._m[name] + (1.0 - self.beta1) * g
            v = self._v[name] = self.beta2 * self._v[name] + (1.0 - self.beta2) * np.square(g)
            update = (self.lr / bc1) * m / (np.sqrt(v / bc2) + self.eps)
            p.data = p.data - update.astype(p.data.dtype)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None
