"""Pairwise hinge, 1-N binary cross-entropy and pointwise logistic losses.

Each loss exists in a vanilla form and in semantic forms that treat
semantically valid negatives differently from invalid ones through a single
semantic factor ``epsilon``:

- PHL-S   margin ``gamma * eps`` for valid negatives, ``gamma`` for invalid ones.
- BCEL-S  label ``eps`` for valid negatives.
- BCEL-S' valid negatives relabelled positive with probability ``eps``.
- PLL-S   valid negatives relabelled positive with probability ``eps``.
- PLL-S'  label ``eps`` (instead of -1) for valid negatives.

Losses return their value and the derivative of that value with respect to
each raw score ("upstream weights"), which ``models.sparse_grad`` consumes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import expit

from semkge.tools.errors import usage_error
from semkge.tools.kg import Schema, Triple, as_triple_array, is_sem_valid

FAMILIES = ("phl", "bcel", "pll")
VARIANTS = ("vanilla", "S", "S'")
SIGMOID_CLAMP = 1e-7

_VARIANT_ALIASES = {"v": "vanilla", "vanilla": "vanilla", "s": "S", "s'": "S'", "s′": "S'", "sp": "S'", "s_prime": "S'"}


def normalize_variant(variant: str) -> str:
    v = _VARIANT_ALIASES.get(str(variant).strip().lower())
    if v is None:
        raise usage_error(f"unknown loss variant {variant!r}", f"Use one of: {', '.join(VARIANTS)}")
    return v


@dataclass(frozen=True)
class LossSpec:
    family: str
    variant: str = "vanilla"
    margin: float = 1.0
    epsilon: float | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        family = str(self.family).lower()
        if family not in FAMILIES:
            raise usage_error(f"unknown loss family {self.family!r}", f"Use one of: {', '.join(FAMILIES)}")
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "variant", normalize_variant(self.variant))
        if family == "phl" and not self.margin > 0:
            raise usage_error(f"PHL margin gamma must be > 0, got {self.margin}")
        if self.variant == "vanilla":
            return
        if family == "phl" and self.variant == "S'":
            raise usage_error("PHL has no S' variant", "Use variant S for the pairwise hinge loss")
        eps = self.epsilon
        if eps is None:
            raise usage_error(f"{self.name} requires a semantic factor epsilon")
        # (low, low open, high open); high is always 1
        low, low_open, high_open = {
            ("phl", "S"): (0, True, False),
            ("bcel", "S"): (0, False, True),
            ("bcel", "S'"): (0, False, False),
            ("pll", "S"): (0, False, False),
            ("pll", "S'"): (-1, True, True),
        }[(family, self.variant)]
        ok = (eps > low if low_open else eps >= low) and (eps < 1 if high_open else eps <= 1)
        if not ok:
            bounds = f"{low} {'<' if low_open else '≤'} ε {'<' if high_open else '≤'} 1"
            raise usage_error(f"{self.name} requires {bounds}, got epsilon={eps}")

    @property
    def name(self) -> str:
        suffix = "" if self.variant == "vanilla" else f"-{self.variant}"
        return f"{self.family.upper()}{suffix}"

    @property
    def is_semantic(self) -> bool:
        return self.variant != "vanilla"

    def to_json(self) -> dict:
        return {
            "family": self.family,
            "variant": self.variant,
            "margin": self.margin,
            "epsilon": self.epsilon,
            "seed": self.seed,
        }


class HingeOutput(NamedTuple):
    value: float
    pos_weights: np.ndarray
    neg_weights: np.ndarray


class LossOutput(NamedTuple):
    value: float
    weights: np.ndarray
    labels: np.ndarray | None = None


def classify_negatives(batch: object, schema: Schema) -> np.ndarray:
    """Semantic validity flag per triple; the only place losses meet the schema."""
    return np.array(
        [is_sem_valid(Triple(*t), schema) for t in as_triple_array(batch).tolist()],
        dtype=bool,
    )


def _validity(validity: object | None, shape: tuple[int, ...], spec: LossSpec) -> np.ndarray:
    if validity is None:
        if spec.is_semantic:
            raise usage_error(f"{spec.name} needs semantic validity flags for the negatives")
        return np.zeros(shape, dtype=bool)
    flags = np.asarray(validity, dtype=bool)
    if flags.shape != shape:
        raise usage_error(f"validity flags have shape {flags.shape}, expected {shape}")
    return flags


def phl(spec: LossSpec, pos_scores: object, neg_scores: object, validity: object | None = None) -> HingeOutput:
    """
    Pairwise hinge loss, summed over every (positive, negative) pair.

    ``neg_scores`` is ``(n, k)``: k negatives per positive (k = 2 under the
    paired sampler). The returned weights are the hinge sub-gradient: +1 on an
    active negative, minus the number of active hinges on its positive.
    """
    if spec.family != "phl":
        raise usage_error(f"phl() called with a {spec.name} spec")
    pos = np.asarray(pos_scores, dtype=np.float64)
    neg = np.asarray(neg_scores, dtype=np.float64)
    if neg.ndim == 1:
        neg = neg[:, None]
    if pos.ndim != 1 or neg.ndim != 2 or neg.shape[0] != pos.shape[0]:
        raise usage_error(f"misaligned batches: {pos.shape} positives vs {neg.shape} negatives")
    flags = _validity(validity, neg.shape, spec)

    label = np.ones_like(neg)
    if spec.variant == "S":
        label = np.where(flags, spec.epsilon, 1.0)
    z = spec.margin * label + neg - pos[:, None]
    active = z > 0
    value = float(np.sum(np.where(active, z, 0.0)))
    neg_w = active.astype(np.float64)
    return HingeOutput(value, -neg_w.sum(axis=1), neg_w)


def bcel_targets(
    spec: LossSpec,
    positives: object,
    validity: object | None = None,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """
    Label row for one 1-N query.

    ``positives`` marks every known true completion (all labelled 1);
    ``validity`` marks semantically valid entities.
    """
    pos = np.asarray(positives, dtype=bool)
    flags = _validity(validity, pos.shape, spec)
    labels = pos.astype(np.float64)
    valid_neg = flags & ~pos
    if spec.variant == "S":
        labels = np.where(valid_neg, spec.epsilon, labels)
    elif spec.variant == "S'":
        if rng is None:
            raise usage_error("BCEL-S' relabelling needs a seeded generator")
        flip = valid_neg & (rng.random(pos.shape) < spec.epsilon)
        labels = np.where(flip, 1.0, labels)
    return labels


def bcel(spec: LossSpec, query_scores: object, targets: object) -> LossOutput:
    """
    1-N binary cross-entropy on sigmoid(scores), averaged over entities.

    Accepts one row ``(|E|,)`` or a stack ``(n, |E|)``; rows are summed. The
    sigmoid is clamped to ``[1e-7, 1 - 1e-7]``, where the gradient is zero.
    """
    if spec.family != "bcel":
        raise usage_error(f"bcel() called with a {spec.name} spec")
    f = np.asarray(query_scores, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if f.shape != y.shape or f.ndim not in (1, 2) or f.shape[-1] == 0:
        raise usage_error(f"scores {f.shape} and targets {y.shape} must be equal (|E|,) or (n, |E|) arrays")
    if np.any((y < 0) | (y > 1)) or not np.isfinite(y).all():
        raise usage_error("BCEL labels must lie in [0, 1]")
    n = f.shape[-1]
    sig = expit(f)
    clamped = np.clip(sig, SIGMOID_CLAMP, 1.0 - SIGMOID_CLAMP)
    terms = -(y * np.log(clamped) + (1.0 - y) * np.log(1.0 - clamped))
    value = float(np.sum(np.sum(terms, axis=-1) / n))
    inside = (sig > SIGMOID_CLAMP) & (sig < 1.0 - SIGMOID_CLAMP)
    weights = np.where(inside, (sig - y) / n, 0.0)
    return LossOutput(value, weights, y)


def pll_labels(
    spec: LossSpec,
    labels: object,
    validity: object | None = None,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Apply the variant's relabelling of semantically valid negatives."""
    y = np.asarray(labels, dtype=np.float64)
    flags = _validity(validity, y.shape, spec)
    if not np.all((y == 1.0) | (y == -1.0)):
        raise usage_error("PLL labels must be -1 or +1")
    valid_neg = flags & (y == -1.0)
    if spec.variant == "S":
        if rng is None:
            raise usage_error("PLL-S relabelling needs a seeded generator")
        y = np.where(valid_neg & (rng.random(y.shape) < spec.epsilon), 1.0, y)
    elif spec.variant == "S'":
        y = np.where(valid_neg, spec.epsilon, y)
    return y


def pll(
    spec: LossSpec,
    scores: object,
    labels: object,
    validity: object | None = None,
    rng: np.random.Generator | None = None,
) -> LossOutput:
    """Pointwise logistic loss ``sum log(1 + exp(-label * score))``."""
    if spec.family != "pll":
        raise usage_error(f"pll() called with a {spec.name} spec")
    f = np.asarray(scores, dtype=np.float64)
    if f.ndim != 1:
        raise usage_error(f"PLL expects one score per triple, got shape {f.shape}")
    y = pll_labels(spec, labels, validity, rng)
    if y.shape != f.shape:
        raise usage_error(f"labels {y.shape} do not match scores {f.shape}")
    z = -y * f
    value = float(np.sum(np.logaddexp(0.0, z)))
    return LossOutput(value, -y * expit(z), y)
