"""Adam over lists of parameter arrays (bias-corrected, per-array rates)."""

from __future__ import annotations

import numpy as np


class Adam:
    def __init__(self, params, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params, grads, lr):
        """One update; lr may be a scalar or a per-array sequence.

        Returns new arrays; inputs are not mutated.
        """
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        lrs = [lr] * len(params) if np.isscalar(lr) else list(lr)
        out = []
        for i, (p, g) in enumerate(zip(params, grads)):
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g * g
            m_hat = self.m[i] / c1
            v_hat = self.v[i] / c2
            out.append(p - lrs[i] * m_hat / (np.sqrt(v_hat) + self.eps))
        return out
