"""Sender/receiver overlap analysis, feasibility predicates and blocklengths."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .kb import ProofSystem, closure, closure_fidelity, extract_core

__all__ = [
    "OverlapDecomposition",
    "PairFeasibility",
    "BlocklengthEstimate",
    "ReceiverStatus",
    "BroadcastReport",
    "overlap",
    "feasibility",
    "blocklengths",
    "min_vocabulary",
    "broadcast_analysis",
    "VOCABULARY_LOSS",
    "CLOSURE_INFEASIBLE",
]

VOCABULARY_LOSS = "vocabulary-loss"
CLOSURE_INFEASIBLE = "closure-infeasible"

COUNT_FIELDS = ("common", "lost", "surplus", "preserved_core", "lost_core",
                "derivable_surplus", "nonderivable_surplus")


def _atoms(x) -> frozenset:
    return frozenset(getattr(x, "atoms", x))


def _names(atoms) -> list[str]:
    return [str(a) for a in sorted(atoms)]


@dataclass(frozen=True)
class OverlapDecomposition:
    common: frozenset
    lost: frozenset
    surplus: frozenset
    preserved_core: frozenset
    lost_core: frozenset
    derivable_surplus: frozenset
    nonderivable_surplus: frozenset

    def counts(self) -> tuple:
        return tuple(len(getattr(self, f)) for f in COUNT_FIELDS)

    def to_dict(self) -> dict:
        out = {}
        for f in COUNT_FIELDS:
            out[f] = _names(getattr(self, f))
            out[f"n_{f}"] = len(getattr(self, f))
        return out


def overlap(sender, receiver_vocab, ps: ProofSystem) -> OverlapDecomposition:
    s, r = _atoms(sender), _atoms(receiver_vocab)
    core = extract_core(s, ps).core
    surplus = r - s
    cn = closure(s, ps)
    return OverlapDecomposition(
        common=s & r,
        lost=s - r,
        surplus=surplus,
        preserved_core=core & r,
        lost_core=core - r,
        derivable_surplus=surplus & cn,
        nonderivable_surplus=surplus - cn,
    )


@dataclass(frozen=True)
class PairFeasibility:
    f1: bool
    f1_strong: bool
    f2: bool
    closure_fidelity_one: bool

    def to_dict(self) -> dict:
        return {"f1": self.f1, "f1_strong": self.f1_strong, "f2": self.f2,
                "closure_fidelity_one": self.closure_fidelity_one}


def feasibility(sender, receiver_vocab, ps: ProofSystem) -> PairFeasibility:
    s, r = _atoms(sender), _atoms(receiver_vocab)
    ov = overlap(s, r, ps)
    core = ov.preserved_core | ov.lost_core
    f1 = core <= closure(r, ps)
    f2 = not ov.nonderivable_surplus
    fid_one = closure_fidelity(s, r, ps) == 1
    if fid_one != (f1 and f2):
        raise AssertionError("closure fidelity disagrees with the (F1)/(F2) predicates")
    return PairFeasibility(f1, not ov.lost_core, f2, fid_one)


@dataclass(frozen=True)
class BlocklengthEstimate:
    """Minimum channel uses per source symbol; ``None`` marks an undefined value."""

    n_hamming: float | None
    n_closure: float | None
    ratio: float | None
    capacity_bits: float
    hamming_reason: str | None = None
    closure_reason: str | None = None

    def to_dict(self) -> dict:
        return {
            "n_hamming": self.n_hamming,
            "n_closure": self.n_closure,
            "ratio": self.ratio,
            "capacity_bits": self.capacity_bits,
            "hamming_reason": self.hamming_reason,
            "closure_reason": self.closure_reason,
        }


def blocklengths(sender, receiver_vocab, capacity_bits: float, ps: ProofSystem) -> BlocklengthEstimate:
    if not capacity_bits > 0:
        raise ValueError("capacity must be positive")
    s, r = _atoms(sender), _atoms(receiver_vocab)
    ov = overlap(s, r, ps)
    feas = feasibility(s, r, ps)
    a = len(ov.preserved_core) + len(ov.lost_core)

    n_h = h_reason = None
    if ov.lost:
        h_reason = VOCABULARY_LOSS
    else:
        n_h = math.log2(len(s)) / capacity_bits if s else 0.0

    n_c = c_reason = None
    if not feas.closure_fidelity_one:
        c_reason = CLOSURE_INFEASIBLE
    elif not feas.f1_strong:
        c_reason = VOCABULARY_LOSS
    else:
        n_c = math.log2(a) / capacity_bits if a else 0.0

    ratio = None
    if n_h is not None and n_c is not None:
        ratio = 1.0 if n_h == 0 else n_c / n_h
    return BlocklengthEstimate(n_h, n_c, ratio, capacity_bits, h_reason, c_reason)


def min_vocabulary(sender, ps: ProofSystem) -> frozenset:
    """Smallest receiver vocabulary that supports closure-reliable decoding."""
    return extract_core(_atoms(sender), ps).core


@dataclass(frozen=True)
class ReceiverStatus:
    index: int
    feasibility: PairFeasibility
    bottleneck: bool
    f_cn: Fraction
    compliant: bool  # satisfies both broadcast conditions

    def to_dict(self) -> dict:
        return {
            "receiver": self.index,
            **self.feasibility.to_dict(),
            "bottleneck": self.bottleneck,
            "f_cn": float(self.f_cn),
            "f_cn_exact": str(self.f_cn),
            "compliant": self.compliant,
        }


@dataclass(frozen=True)
class BroadcastReport:
    receivers: tuple
    bottlenecks: tuple = field(default=())
    n_broadcast: float | None = None
    reason: str | None = None
    capacity_bits: float = 0.0

    def to_dict(self) -> dict:
        return {
            "receivers": [r.to_dict() for r in self.receivers],
            "bottlenecks": list(self.bottlenecks),
            "n_broadcast": self.n_broadcast,
            "reason": self.reason,
            "capacity_bits": self.capacity_bits,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = ["receiver", "f1", "f1_strong", "f2", "closure_fidelity_one",
                "bottleneck", "f_cn", "f_cn_exact", "compliant"]
        w.writerow(cols + ["n_broadcast"])
        for r in self.receivers:
            d = r.to_dict()
            w.writerow([d[c] for c in cols] + [self.n_broadcast if self.n_broadcast is not None else self.reason])
        return buf.getvalue()


def broadcast_analysis(sender, receivers: Sequence[Iterable], capacity_bits: float,
                       ps: ProofSystem) -> BroadcastReport:
    """Per-receiver feasibility, bottleneck flags and the common blocklength.

    The broadcast blocklength depends only on the sender core and the
    carrier capacity, so it is the same for one receiver or many.
    """
    if not receivers:
        raise ValueError("at least one receiver is required")
    if not capacity_bits > 0:
        raise ValueError("capacity must be positive")
    s = _atoms(sender)
    core = extract_core(s, ps).core
    statuses = []
    for i, rv in enumerate(receivers):
        r = _atoms(rv)
        feas = feasibility(s, r, ps)
        bottleneck = not core <= closure(r, ps)
        statuses.append(ReceiverStatus(i, feas, bottleneck, closure_fidelity(s, r, ps),
                                       feas.f1_strong and feas.f2))
    bottlenecks = tuple(st.index for st in statuses if st.bottleneck)
    others = [st for st in statuses if not st.bottleneck]
    n_bc = reason = None
    if not others:
        reason = CLOSURE_INFEASIBLE
    elif not all(st.compliant for st in others):
        reason = VOCABULARY_LOSS
    else:
        n_bc = math.log2(len(core)) / capacity_bits if core else 0.0
    return BroadcastReport(tuple(statuses), bottlenecks, n_bc, reason, capacity_bits)
