"""Margin losses over embedding vectors, with closed-form gradients.

All losses are pure functions of their input embeddings and return a
:class:`LossValue` holding the scalar and a gradient per input slot
(keys ``"a"``, ``"b"``, ``"c"``; a slot is present iff the input was).
Conventions shared by every loss here:

* distances are squared Euclidean unless stated otherwise;
* a hinge term ``max(0, margin - dist)`` is *active* only while
  ``dist < margin``; at and beyond the margin its value and its gradient
  contribution are exactly zero;
* degenerate sets (slot c absent) simply omit the second pair's term.

The subclass-aware set losses operate on the mined units of
:mod:`sclmetric.mining`:

* intra loss (genuine set, label 0):  ``|a-b|^2 + |b-c|^2`` pulls the intact
  anchor toward the subject's injured samples and those injured samples
  toward each other;
* inter loss (imposter set, label 1):
  ``max(0, alpha1 - |a-b|^2) + max(0, alpha2 - |b-c|^2)`` pushes the foreign
  injured sample b away from both of subject i's sides.

The scalar reduction in :func:`squared_euclidean` is specified as
left-to-right float64 accumulation so that independently written reference
code produces bit-identical values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionMismatchError

DEFAULT_ALPHA1 = 2.0
DEFAULT_ALPHA2 = 3.1
DEFAULT_CL_MARGIN = 2.0
DEFAULT_TL_MARGIN = 0.4


@dataclass(frozen=True)
class SclConfig:
    """Margins of the inter-class hinges; both must be strictly positive.

    ``alpha1`` separates an intact sample from other subjects' injured
    samples, ``alpha2`` separates injured samples of different subjects.
    """

    alpha1: float = DEFAULT_ALPHA1
    alpha2: float = DEFAULT_ALPHA2

    def __post_init__(self):
        if not (self.alpha1 > 0 and self.alpha2 > 0):
            raise ConfigError(f"margins must be > 0, got alpha1={self.alpha1}, alpha2={self.alpha2}")


@dataclass(frozen=True)
class LossValue:
    """A finite non-negative scalar plus one gradient vector per input slot."""

    value: float
    gradients: dict

    def gradient(self, slot: str) -> np.ndarray:
        return self.gradients[slot]


def _as_vector(v, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionMismatchError(f"{name} must be a 1-d vector, got shape {arr.shape}")
    return arr


def _check_dims(*named) -> None:
    dims = {name: len(vec) for name, vec in named}
    if len(set(dims.values())) > 1:
        raise DimensionMismatchError(f"embedding dimensions differ: {dims}")


def squared_euclidean(u, v) -> float:
    """Sum of squared coordinate differences, accumulated left to right."""
    u = _as_vector(u, "u")
    v = _as_vector(v, "v")
    _check_dims(("u", u), ("v", v))
    total = 0.0
    for uk, vk in zip(u.tolist(), v.tolist()):
        d = uk - vk
        total += d * d
    return total


def euclidean_distance(u, v) -> float:
    """Plain (non-squared) Euclidean distance."""
    return math.sqrt(squared_euclidean(u, v))


def scl_intra_loss(a, b, c=None) -> LossValue:
    """Genuine-set attraction: ``|a-b|^2`` plus ``|b-c|^2`` when c is present.

    Gradients: d/da = 2(a-b), d/db = 2(b-a) + 2(b-c), d/dc = 2(c-b); the
    c-dependent pieces vanish for degenerate sets.
    """
    a = _as_vector(a, "a")
    b = _as_vector(b, "b")
    if c is None:
        _check_dims(("a", a), ("b", b))
        value = squared_euclidean(a, b)
        return LossValue(value, {"a": 2.0 * (a - b), "b": 2.0 * (b - a)})
    c = _as_vector(c, "c")
    _check_dims(("a", a), ("b", b), ("c", c))
    value = squared_euclidean(a, b) + squared_euclidean(b, c)
    return LossValue(
        value,
        {"a": 2.0 * (a - b), "b": 2.0 * (b - a) + 2.0 * (b - c), "c": 2.0 * (c - b)},
    )


def scl_inter_loss(a, b, c=None, cfg: SclConfig = SclConfig()) -> LossValue:
    """Imposter-set repulsion: two independent hinges on squared distances.

    ``max(0, alpha1 - |a-b|^2) + max(0, alpha2 - |b-c|^2)``; each active
    hinge contributes -2/(+2) difference gradients, an inactive hinge
    contributes exactly zero.
    """
    a = _as_vector(a, "a")
    b = _as_vector(b, "b")
    grads = {"a": np.zeros_like(a), "b": np.zeros_like(b)}
    value = 0.0
    d_ab = squared_euclidean(a, b)
    if d_ab < cfg.alpha1:
        value += cfg.alpha1 - d_ab
        grads["a"] = grads["a"] - 2.0 * (a - b)
        grads["b"] = grads["b"] + 2.0 * (a - b)
    if c is not None:
        c = _as_vector(c, "c")
        _check_dims(("a", a), ("b", b), ("c", c))
        grads["c"] = np.zeros_like(c)
        d_bc = squared_euclidean(b, c)
        if d_bc < cfg.alpha2:
            value += cfg.alpha2 - d_bc
            grads["b"] = grads["b"] - 2.0 * (b - c)
            grads["c"] = grads["c"] + 2.0 * (b - c)
    else:
        _check_dims(("a", a), ("b", b))
    return LossValue(value, grads)


def scl_set_loss(sample_set, a, b, c=None, cfg: SclConfig = SclConfig()) -> LossValue:
    """Binary-labelled set loss: (1-Y) * intra + Y * inter.

    ``sample_set`` supplies the label (0 for genuine sets, 1 for imposter
    sets); the embeddings fill the set's a/b/c slots.  A batch loss is the
    plain sum of per-set values in index order.
    """
    label = sample_set.label
    if label == 0:
        return scl_intra_loss(a, b, c)
    if label == 1:
        return scl_inter_loss(a, b, c, cfg)
    raise ConfigError(f"set label must be 0 or 1, got {label!r}")


def contrastive_loss(x1, x2, label: int, margin: float = DEFAULT_CL_MARGIN) -> LossValue:
    """Siamese pair loss on the non-squared distance D with squared hinge.

    Genuine (label 0): ``D^2 / 2``.  Imposter (label 1):
    ``max(0, margin - D)^2 / 2``.  The imposter gradient is singular at
    D = 0 (coincident points); that point is mapped to a zero gradient.
    """
    if margin <= 0:
        raise ConfigError(f"contrastive margin must be > 0, got {margin}")
    if label not in (0, 1):
        raise ConfigError(f"pair label must be 0 or 1, got {label!r}")
    x1 = _as_vector(x1, "x1")
    x2 = _as_vector(x2, "x2")
    _check_dims(("x1", x1), ("x2", x2))
    diff = x1 - x2
    d2 = squared_euclidean(x1, x2)
    dist = math.sqrt(d2)
    if label == 0:
        return LossValue(0.5 * d2, {"a": diff.copy(), "b": -diff})
    if dist >= margin:
        return LossValue(0.0, {"a": np.zeros_like(x1), "b": np.zeros_like(x2)})
    value = 0.5 * (margin - dist) ** 2
    if dist == 0.0:
        return LossValue(value, {"a": np.zeros_like(x1), "b": np.zeros_like(x2)})
    coef = -(margin - dist) / dist
    return LossValue(value, {"a": coef * diff, "b": -coef * diff})


def triplet_loss(anchor, positive, negative, margin: float = DEFAULT_TL_MARGIN) -> LossValue:
    """Squared-distance triplet hinge ``max(0, |a-p|^2 - |a-n|^2 + margin)``.

    Inactive triplets (argument <= 0) return zero value and zero gradients.
    """
    if margin <= 0:
        raise ConfigError(f"triplet margin must be > 0, got {margin}")
    a = _as_vector(anchor, "anchor")
    p = _as_vector(positive, "positive")
    n = _as_vector(negative, "negative")
    _check_dims(("anchor", a), ("positive", p), ("negative", n))
    arg = squared_euclidean(a, p) - squared_euclidean(a, n) + margin
    if arg <= 0:
        zeros = {"a": np.zeros_like(a), "b": np.zeros_like(p), "c": np.zeros_like(n)}
        return LossValue(0.0, zeros)
    return LossValue(
        arg,
        {"a": 2.0 * (n - p), "b": 2.0 * (p - a), "c": 2.0 * (a - n)},
    )
