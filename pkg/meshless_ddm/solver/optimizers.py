from abc import ABC, abstractmethod
from collections.abc import Sequence

import numpy as np
from numpy.typing import NDArray

from meshless_ddm.solver.exceptions import InvalidConfigError

FloatArray = NDArray[np.float64]


class Optimizer(ABC):
    """First-order optimizer updating parameter arrays in place."""

    def __init__(self, lr: float):
        if not lr > 0:
            raise InvalidConfigError(f"learning rate must be positive, got {lr}")
        self.lr = lr

    @abstractmethod
    def step(self, params: Sequence[FloatArray], grads: Sequence[FloatArray]) -> None:
        ...


class GradientDescent(Optimizer):
    def step(self, params: Sequence[FloatArray], grads: Sequence[FloatArray]) -> None:
        for p, g in zip(params, grads, strict=True):
            p -= self.lr * g


class Adam(Optimizer):
    def __init__(self, lr: float = 1e-3, betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        super().__init__(lr)
        if not all(0.0 <= b < 1.0 for b in betas):
            raise InvalidConfigError(f"Adam betas must lie in [0, 1), got {betas}")
        self.betas = betas
        self.eps = eps
        self.steps = 0
        self._m: list[FloatArray] = []
        self._v: list[FloatArray] = []

    def step(self, params: Sequence[FloatArray], grads: Sequence[FloatArray]) -> None:
        if not self._m:
            self._m = [np.zeros_like(p) for p in params]
            self._v = [np.zeros_like(p) for p in params]
        elif len(self._m) != len(params):
            raise InvalidConfigError("Adam was given a different parameter list than on its first step")
        beta1, beta2 = self.betas
        self.steps += 1
        correction1 = 1.0 - beta1**self.steps
        correction2 = 1.0 - beta2**self.steps
        for p, g, m, v in zip(params, grads, self._m, self._v, strict=True):
            m *= beta1
            m += (1.0 - beta1) * g
            v *= beta2
            v += (1.0 - beta2) * g * g
            p -= self.lr * (m / correction1) / (np.sqrt(v / correction2) + self.eps)


def make_optimizer(name: str, lr: float, betas: tuple[float, float] = (0.9, 0.999)) -> Optimizer:
    if name == "adam":
        return Adam(lr=lr, betas=betas)
    if name == "sgd":
        return GradientDescent(lr=lr)
    raise InvalidConfigError(f"unknown optimizer {name!r} (expected 'adam' or 'sgd')")
