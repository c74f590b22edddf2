"""Row-sparse Adam and sparse L1/L2 regularization.

Only rows present in a gradient are updated (lazy Adam); bias correction uses
the global step count.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from semkge.tools.errors import usage_error
from semkge.tools.models import ModelParams

SparseGrads = dict[str, tuple[np.ndarray, np.ndarray]]
REGULARIZERS = ("none", "l1", "l2")


@dataclass
class Adam:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: ModelParams, lr: float, **kwargs: float) -> "Adam":
        if lr < 0:
            raise usage_error(f"learning rate must be >= 0, got {lr}")
        opt = cls(lr=lr, **kwargs)
        opt.m = {k: np.zeros_like(v) for k, v in params.tables.items()}
        opt.v = {k: np.zeros_like(v) for k, v in params.tables.items()}
        return opt

    def copy(self) -> "Adam":
        return Adam(
            self.lr, self.beta1, self.beta2, self.eps, self.step_count,
            {k: a.copy() for k, a in self.m.items()},
            {k: a.copy() for k, a in self.v.items()},
        )

    def step(self, params: ModelParams, grads: SparseGrads) -> None:
        self.step_count += 1
        c1 = 1.0 - self.beta1 ** self.step_count
        c2 = 1.0 - self.beta2 ** self.step_count
        for name, (ids, g) in grads.items():
            if not len(ids):
                continue
            m = self.beta1 * self.m[name][ids] + (1.0 - self.beta1) * g
            v = self.beta2 * self.v[name][ids] + (1.0 - self.beta2) * (g * g)
            self.m[name][ids] = m
            self.v[name][ids] = v
            params.tables[name][ids] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def regularize(params: ModelParams, grads: SparseGrads, kind: str, weight: float) -> tuple[float, SparseGrads]:
    """Add ``weight * ||rows||`` over the touched rows to the loss and its gradient."""
    if kind not in REGULARIZERS:
        raise usage_error(f"regularizer must be one of {REGULARIZERS}, got {kind!r}")
    if kind == "none" or weight == 0.0:
        return 0.0, grads
    penalty = 0.0
    out: SparseGrads = {}
    for name, (ids, g) in grads.items():
        rows = params.tables[name][ids]
        if kind == "l2":
            penalty += weight * float(np.sum(rows * rows))
            out[name] = (ids, g + 2.0 * weight * rows)
        else:
            penalty += weight * float(np.sum(np.abs(rows)))
            out[name] = (ids, g + weight * np.sign(rows))
    return penalty, out


def merge(parts: list[SparseGrads]) -> SparseGrads:
    """Sum several sparse gradients, in list order."""
    if len(parts) == 1:
        return parts[0]
    out: SparseGrads = {}
    for name in parts[0]:
        ids = np.concatenate([p[name][0] for p in parts])
        vals = np.concatenate([p[name][1] for p in parts])
        uniq, inverse = np.unique(ids, return_inverse=True)
        acc = np.zeros((len(uniq), vals.shape[1]))
        np.add.at(acc, inverse, vals)
        out[name] = (uniq, acc)
    return out
