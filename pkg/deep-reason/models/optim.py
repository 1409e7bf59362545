"""
Adam optimizer over named parameters
"""
from typing import Dict

import numpy as np

from errors import ParameterError
from models.autodiff import Tensor


class Adam:
    """Adam with bias correction; one step per call, in name order"""

    def __init__(self, params: Dict[str, Tensor], lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        if lr < 0:
            raise ParameterError(f"Learning rate must be non-negative, got {lr}")
        if not (0.0 < beta1 < 1.0 and 0.0 < beta2 < 1.0):
            raise ParameterError(f"Adam moments must lie in (0, 1), got {beta1}, {beta2}")
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {name: np.zeros_like(p.data) for name, p in params.items()}
        self.v = {name: np.zeros_like(p.data) for name, p in params.items()}

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def max_grad(self) -> float:
        """Largest |grad| entry; used in divergence diagnostics"""
        return max((float(np.abs(p.grad).max()) for p in self.params.values() if p.grad is not None and p.size),
                   default=0.0)

    def step(self) -> None:
        self.t += 1
        correction1 = 1.0 - self.beta1 ** self.t
        correction2 = 1.0 - self.beta2 ** self.t
        for name in sorted(self.params):
            p = self.params[name]
            if p.grad is None:
                continue
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * p.grad
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * p.grad * p.grad
            m_hat = self.m[name] / correction1
            v_hat = self.v[name] / correction2
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
