"""Per-pair distortion functions and their expectations under a channel."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .kb import INF, GroundAtom, ProofSystem, closure, derivation_depth, extract_core
from .kernels import Distribution, SemanticChannel, SpaceMismatch

__all__ = [
    "DistortionWeights",
    "DistortionMatrix",
    "d_hamming",
    "d_closure",
    "d_depth",
    "d_composite",
    "hamming_matrix",
    "closure_matrix",
    "depth_matrix",
    "composite_matrix",
    "distortion_matrix",
    "per_input_distortion",
    "expected_distortion",
    "hamming_decomposition",
]

KINDS = ("hamming", "closure", "depth", "composite")


@dataclass(frozen=True)
class DistortionWeights:
    alpha: float = 1.0
    beta: float = 0.0
    gamma: float = 0.0

    def __post_init__(self):
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise ValueError("distortion weights must be non-negative")
        if abs(self.alpha + self.beta + self.gamma - 1.0) > 1e-12:
            raise ValueError("distortion weights must sum to 1")


def _atoms(x) -> frozenset:
    return frozenset(getattr(x, "atoms", x))


def d_hamming(s, s_hat) -> int:
    return int(s != s_hat)


def d_closure(s: GroundAtom, s_hat: GroundAtom, gamma_base, ps: ProofSystem) -> Fraction:
    """Jaccard distance between ``Cn(G - s + s)`` and ``Cn(G - s + s_hat)``.

    Two empty closures are at distance 0. If ``s`` is not in the base the
    substitution degenerates to adding ``s`` (resp. ``s_hat``).
    """
    rest = _atoms(gamma_base) - {s}
    c_s = closure(rest | {s}, ps)
    c_hat = closure(rest | {s_hat}, ps)
    union = len(c_s | c_hat)
    if union == 0:
        return Fraction(0)
    return 1 - Fraction(len(c_s & c_hat), union)


def d_depth(s: GroundAtom, s_hat: GroundAtom, core, d_max: int, ps: ProofSystem) -> Fraction:
    core = _atoms(core)
    if s_hat not in closure(core, ps):
        return Fraction(1)
    ds, dh = derivation_depth(s, core, ps), derivation_depth(s_hat, core, ps)
    if ds is INF:
        # s outside Cn(core) only happens for inputs not drawn from the sender.
        return Fraction(1)
    return min(Fraction(abs(ds - dh), max(d_max, 1)), Fraction(1))


def d_composite(s, s_hat, w: DistortionWeights, gamma_base, core, d_max: int, ps: ProofSystem) -> float:
    value = w.alpha * d_hamming(s, s_hat)
    if w.beta:
        value += w.beta * float(d_closure(s, s_hat, gamma_base, ps))
    if w.gamma:
        value += w.gamma * float(d_depth(s, s_hat, core, d_max, ps))
    return value


@dataclass(frozen=True)
class DistortionMatrix:
    rows: tuple
    cols: tuple
    values: np.ndarray = field(compare=False)
    kind: str = "hamming"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown distortion kind {self.kind!r}")
        v = np.asarray(self.values, dtype=float)
        if v.shape != (len(self.rows), len(self.cols)):
            raise ValueError("distortion values do not match the row/column spaces")
        if v.size and (v.min() < 0 or v.max() > 1):
            raise ValueError("distortion values must lie in [0, 1]")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def value(self, s, s_hat) -> float:
        return float(self.values[self.rows.index(s), self.cols.index(s_hat)])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["sender", *map(str, self.cols)])
        for s, row in zip(self.rows, self.values):
            w.writerow([str(s), *(f"{x:.12g}" for x in row)])
        return buf.getvalue()


def _spaces(sender, receiver):
    return tuple(sorted(_atoms(sender))), tuple(sorted(_atoms(receiver)))


def hamming_matrix(sender, receiver) -> DistortionMatrix:
    rows, cols = _spaces(sender, receiver)
    v = np.array([[float(s != t) for t in cols] for s in rows]).reshape(len(rows), len(cols))
    return DistortionMatrix(rows, cols, v, "hamming")


@lru_cache(maxsize=256)
def _closure_values(rows, cols, gamma: frozenset, ps) -> np.ndarray:
    return np.array([[float(d_closure(s, t, gamma, ps)) for t in cols] for s in rows]).reshape(
        len(rows), len(cols)
    )


def closure_matrix(sender, receiver, ps: ProofSystem, gamma=None) -> DistortionMatrix:
    """Closure distortion against ``gamma`` (the sender itself by default)."""
    rows, cols = _spaces(sender, receiver)
    gamma = _atoms(sender) if gamma is None else _atoms(gamma)
    return DistortionMatrix(rows, cols, _closure_values(rows, cols, gamma, ps), "closure")


@lru_cache(maxsize=256)
def _depth_values(rows, cols, ps) -> np.ndarray:
    ca = extract_core(rows, ps)
    return np.array([[float(d_depth(s, t, ca.core, ca.max_depth, ps)) for t in cols] for s in rows]).reshape(
        len(rows), len(cols)
    )


def depth_matrix(sender, receiver, ps: ProofSystem) -> DistortionMatrix:
    rows, cols = _spaces(sender, receiver)
    return DistortionMatrix(rows, cols, _depth_values(rows, cols, ps), "depth")


def composite_matrix(sender, receiver, weights: DistortionWeights, ps: ProofSystem,
                     gamma=None) -> DistortionMatrix:
    rows, cols = _spaces(sender, receiver)
    v = weights.alpha * hamming_matrix(sender, receiver).values
    if weights.beta:
        v = v + weights.beta * closure_matrix(sender, receiver, ps, gamma).values
    if weights.gamma:
        v = v + weights.gamma * depth_matrix(sender, receiver, ps).values
    return DistortionMatrix(rows, cols, np.clip(v, 0.0, 1.0), "composite")


def distortion_matrix(kind: str, sender, receiver, ps: ProofSystem,
                      weights: DistortionWeights | None = None) -> DistortionMatrix:
    if kind == "hamming":
        return hamming_matrix(sender, receiver)
    if kind == "closure":
        return closure_matrix(sender, receiver, ps)
    if kind == "depth":
        return depth_matrix(sender, receiver, ps)
    if kind == "composite":
        return composite_matrix(sender, receiver, weights or DistortionWeights(), ps)
    raise ValueError(f"unknown distortion kind {kind!r}")


def _aligned(chan: SemanticChannel, d: DistortionMatrix):
    if d.rows != chan.sender_states or d.cols != chan.receiver_states:
        raise SpaceMismatch("distortion matrix is not aligned with the channel spaces")


def per_input_distortion(chan: SemanticChannel, d: DistortionMatrix) -> np.ndarray:
    """Expected distortion for each sender state, in canonical order."""
    _aligned(chan, d)
    return (chan.end_to_end.float_matrix() * d.values).sum(axis=1)


def expected_distortion(chan: SemanticChannel, p_source: Distribution, d: DistortionMatrix) -> float:
    if p_source.space != chan.sender_states:
        raise SpaceMismatch("source distribution is not on the sender states")
    return float(p_source.mass @ per_input_distortion(chan, d))


def hamming_decomposition(chan: SemanticChannel, p_source: Distribution) -> tuple[float, float]:
    """Split expected Hamming distortion into (within-vocabulary, spurious) parts."""
    k = chan.end_to_end.float_matrix()
    cols = chan.receiver_states
    spurious = np.array([c in chan.spurious for c in cols], dtype=bool)
    rows = chan.sender_states
    same = np.array([[r == c for c in cols] for r in rows], dtype=bool).reshape(k.shape)
    within = ((k * (~same) * (~spurious)[None, :]).sum(axis=1))
    plus = (k * spurious[None, :]).sum(axis=1)
    return float(p_source.mass @ within), float(p_source.mass @ plus)
