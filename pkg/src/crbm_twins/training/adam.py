"""ADAM with bias correction over a dict of named arrays."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Adam:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def step(self, arrays: dict[str, np.ndarray], grads: dict[str, np.ndarray], lr: float) -> dict[str, np.ndarray]:
        """Return updated copies of ``arrays`` after one descent step on ``grads``."""
        self.t += 1
        out = {}
        for k, x in arrays.items():
            g = grads[k]
            if k not in self.m:
                self.m[k] = np.zeros_like(x)
                self.v[k] = np.zeros_like(x)
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * g * g
            mhat = self.m[k] / (1 - self.beta1 ** self.t)
            vhat = self.v[k] / (1 - self.beta2 ** self.t)
            out[k] = x - lr * mhat / (np.sqrt(vhat) + self.eps)
        return out


def linear_decay(lr0: float, step: int, total: int, final_fraction: float = 0.1) -> float:
    """Learning rate decaying linearly from ``lr0`` to ``final_fraction * lr0``."""
    if total <= 1:
        return lr0
    return lr0 * (1 - (1 - final_fraction) * min(step, total - 1) / (total - 1))
