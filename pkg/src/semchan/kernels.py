"""Finite distributions, Markov kernels and enabling constraints.

Kernels carry their labelled input and output spaces so that matrix rows
can never silently drift out of alignment with the knowledge-base order.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Hashable, Iterable, Mapping, Sequence

import numpy as np

from ._guards import GuardExceeded, guard

__all__ = [
    "STOCHASTIC_TOL",
    "DENSE_GUARD",
    "SpaceMismatch",
    "Distribution",
    "Kernel",
    "ProductKernel",
    "EnablingMap",
    "EnablingCheck",
    "SemanticChannel",
    "ChannelConfig",
    "compose",
    "compose_enabling",
    "identity_kernel",
    "deterministic_kernel",
    "validate_enabling",
    "q_symmetric_channel",
    "product_extension",
    "push_forward",
    "joint",
    "build_semantic_channel",
    "load_channel_config",
]

STOCHASTIC_TOL = 1e-12
DENSE_GUARD = 4096


class SpaceMismatch(ValueError):
    pass


def _index(space: Sequence) -> dict:
    idx = {x: i for i, x in enumerate(space)}
    if len(idx) != len(space):
        raise ValueError("state space labels must be distinct")
    return idx


class Distribution:
    """Probability mass function on an ordered finite space."""

    def __init__(self, space: Iterable[Hashable], mass, *, check: bool = True):
        self.space = tuple(space)
        self._idx = _index(self.space)
        self.mass = np.asarray(mass, dtype=float)
        self.mass.setflags(write=False)
        if self.mass.shape != (len(self.space),):
            raise ValueError(f"mass has shape {self.mass.shape}, space has {len(self.space)} states")
        if check:
            if np.any(self.mass < 0):
                raise ValueError("negative probability mass")
            total = float(self.mass.sum())
            if abs(total - 1.0) > STOCHASTIC_TOL * max(1, len(self.space)):
                raise ValueError(f"mass sums to {total!r}, not 1")

    @classmethod
    def uniform(cls, space: Iterable[Hashable]) -> "Distribution":
        space = tuple(space)
        return cls(space, np.full(len(space), 1.0 / len(space)))

    @classmethod
    def point(cls, space: Iterable[Hashable], x: Hashable) -> "Distribution":
        space = tuple(space)
        m = np.zeros(len(space))
        m[space.index(x)] = 1.0
        return cls(space, m)

    def __len__(self):
        return len(self.space)

    def __getitem__(self, x) -> float:
        return float(self.mass[self._idx[x]])

    def index(self, x) -> int:
        return self._idx[x]

    def support(self) -> tuple:
        return tuple(x for x, m in zip(self.space, self.mass) if m > 0)

    def __repr__(self):
        return f"Distribution({dict(zip(self.space, self.mass.round(6)))})"


class Kernel:
    """Row-stochastic matrix from ``input_space`` to ``output_space``.

    With ``exact=True`` the entries are :class:`fractions.Fraction` and row
    sums must equal 1 exactly; useful for 0/1 kernels whose structural
    identities should hold bit for bit.
    """

    def __init__(self, matrix, input_space: Iterable[Hashable], output_space: Iterable[Hashable],
                 *, exact: bool = False, check: bool = True):
        self.input_space = tuple(input_space)
        self.output_space = tuple(output_space)
        self._in = _index(self.input_space)
        self._out = _index(self.output_space)
        self.exact = exact
        if exact:
            m = np.array([[Fraction(v) for v in row] for row in np.asarray(matrix, dtype=object)],
                         dtype=object).reshape(len(self.input_space), len(self.output_space))
        else:
            m = np.asarray(matrix, dtype=float)
        if m.shape != (len(self.input_space), len(self.output_space)):
            raise ValueError(
                f"matrix shape {m.shape} does not match spaces "
                f"{len(self.input_space)}x{len(self.output_space)}"
            )
        m.setflags(write=False)
        self.matrix = m
        if check:
            self._check()

    def _check(self):
        if self.exact:
            for i, row in enumerate(self.matrix):
                if any(v < 0 for v in row) or sum(row, Fraction(0)) != 1:
                    raise ValueError(f"row {self.input_space[i]!r} is not an exact distribution")
            return
        if np.any(self.matrix < 0):
            raise ValueError("negative kernel entry")
        sums = self.matrix.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > STOCHASTIC_TOL * max(1, len(self.output_space)))
        if bad.size:
            i = int(bad[0])
            raise ValueError(f"row {self.input_space[i]!r} sums to {sums[i]!r}, not 1")

    @property
    def shape(self):
        return self.matrix.shape

    def prob(self, y, x) -> float:
        """kernel(y | x)."""
        return self.matrix[self._in[x], self._out[y]]

    def row(self, x) -> np.ndarray:
        return self.matrix[self._in[x]]

    def in_index(self, x) -> int:
        return self._in[x]

    def out_index(self, y) -> int:
        return self._out[y]

    def float_matrix(self) -> np.ndarray:
        return np.asarray(self.matrix, dtype=float) if self.exact else self.matrix

    def support(self, x) -> frozenset:
        return frozenset(y for y, v in zip(self.output_space, self.row(x)) if v > 0)

    def is_deterministic(self) -> bool:
        m = self.float_matrix()
        return bool(np.all((m == 0) | (m == 1)))

    def __eq__(self, other):
        if not isinstance(other, Kernel):
            return NotImplemented
        return (self.input_space == other.input_space and self.output_space == other.output_space
                and np.array_equal(self.float_matrix(), other.float_matrix()))

    __hash__ = None

    def __repr__(self):
        return f"Kernel({len(self.input_space)}x{len(self.output_space)}{', exact' if self.exact else ''})"


def identity_kernel(space: Iterable[Hashable], *, exact: bool = False) -> Kernel:
    space = tuple(space)
    return Kernel(np.eye(len(space), dtype=int), space, space, exact=exact)


def compose(k1: Kernel, k2: Kernel) -> Kernel:
    """Run ``k1`` then ``k2``. Rows are checked, never renormalised."""
    if k1.output_space != k2.input_space:
        raise SpaceMismatch("output space of the first kernel differs from input space of the second")
    exact = k1.exact and k2.exact
    if exact:
        m = k1.matrix.dot(k2.matrix)
    else:
        m = k1.float_matrix() @ k2.float_matrix()
    return Kernel(m, k1.input_space, k2.output_space, exact=exact)


def deterministic_kernel(f: Mapping | Callable, in_space: Iterable[Hashable],
                         out_space: Iterable[Hashable], *, exact: bool = False) -> Kernel:
    in_space, out_space = tuple(in_space), tuple(out_space)
    out_idx = _index(out_space)
    get = f.__getitem__ if isinstance(f, Mapping) else f
    m = np.zeros((len(in_space), len(out_space)), dtype=int)
    for i, x in enumerate(in_space):
        try:
            y = get(x)
        except KeyError:
            raise ValueError(f"map is undefined at {x!r}") from None
        if y not in out_idx:
            raise ValueError(f"image {y!r} of {x!r} is outside the output space")
        m[i, out_idx[y]] = 1
    return Kernel(m, in_space, out_space, exact=exact)


def q_symmetric_channel(q: int, p: float) -> Kernel:
    """q-ary symmetric channel on symbols ``0..q-1`` with crossover ``p``."""
    if int(q) != q or q < 2:
        raise ValueError(f"alphabet size must be an integer >= 2, got {q!r}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"crossover probability must lie in [0, 1], got {p!r}")
    q = int(q)
    m = np.full((q, q), p / (q - 1))
    np.fill_diagonal(m, 1.0 - p)
    return Kernel(m, range(q), range(q))


# ------------------------------------------------------------------ enabling


@dataclass(frozen=True)
class EnablingMap:
    """Allowed output set for every input; total and covering."""

    input_space: tuple
    output_space: tuple
    allowed: Mapping = field(hash=False)

    def __post_init__(self):
        object.__setattr__(self, "input_space", tuple(self.input_space))
        object.__setattr__(self, "output_space", tuple(self.output_space))
        allowed = {x: frozenset(self.allowed.get(x, ())) for x in self.input_space}
        object.__setattr__(self, "allowed", allowed)
        empty = [x for x, s in allowed.items() if not s]
        if empty:
            raise ValueError(f"enabling map is not total: nothing allowed for {empty[0]!r}")
        outs = set(self.output_space)
        covered = set().union(*allowed.values()) if allowed else set()
        if covered - outs:
            raise ValueError(f"allowed outputs outside the output space: {sorted(map(repr, covered - outs))}")
        if outs - covered:
            raise ValueError(f"enabling map does not cover output state(s) {sorted(map(repr, outs - covered))}")

    @classmethod
    def full(cls, input_space, output_space) -> "EnablingMap":
        output_space = tuple(output_space)
        return cls(tuple(input_space), output_space, {x: output_space for x in input_space})

    def size(self) -> int:
        """Number of deterministic maps that respect the constraint."""
        n = 1
        for s in self.allowed.values():
            n *= len(s)
        return n

    def is_full(self) -> bool:
        outs = frozenset(self.output_space)
        return all(s == outs for s in self.allowed.values())


@dataclass(frozen=True)
class EnablingCheck:
    ok: bool
    violation: tuple | None = None  # (input, output) with positive mass outside the allowed set

    def __bool__(self):
        return self.ok


def validate_enabling(k: Kernel, e: EnablingMap) -> EnablingCheck:
    if k.input_space != e.input_space or set(k.output_space) != set(e.output_space):
        raise SpaceMismatch("kernel and enabling map have different spaces")
    m = k.float_matrix()
    for i, x in enumerate(k.input_space):
        allowed = e.allowed[x]
        for j in np.flatnonzero(m[i] > 0):
            y = k.output_space[j]
            if y not in allowed:
                return EnablingCheck(False, (x, y))
    return EnablingCheck(True)


def compose_enabling(e1: EnablingMap, e2: EnablingMap) -> EnablingMap:
    if set(e1.output_space) != set(e2.input_space):
        raise SpaceMismatch("enabling maps do not chain")
    allowed = {x: frozenset().union(*(e2.allowed[m] for m in e1.allowed[x])) for x in e1.input_space}
    return EnablingMap(e1.input_space, e2.output_space, allowed)


# ---------------------------------------------------------- block extension


class ProductKernel:
    """Lazy memoryless extension: W^n(y|x) = prod_i W(y_i|x_i)."""

    def __init__(self, base: Kernel, n: int):
        if n < 1:
            raise ValueError("blocklength must be >= 1")
        self.base = base
        self.n = n
        self._m = base.float_matrix()

    @property
    def input_size(self) -> int:
        return len(self.base.input_space) ** self.n

    @property
    def output_size(self) -> int:
        return len(self.base.output_space) ** self.n

    def input_space(self):
        return itertools.product(self.base.input_space, repeat=self.n)

    def output_space(self):
        return itertools.product(self.base.output_space, repeat=self.n)

    def prob(self, y: Sequence, x: Sequence) -> float:
        if len(x) != self.n or len(y) != self.n:
            raise ValueError(f"expected tuples of length {self.n}")
        b = self.base
        p = 1.0
        for xi, yi in zip(x, y):
            p *= self._m[b.in_index(xi), b.out_index(yi)]
        return p

    def row(self, x: Sequence) -> np.ndarray:
        """Full output distribution for one input tuple, in ``output_space()`` order."""
        b = self.base
        r = np.ones(1)
        for xi in x:
            r = np.multiply.outer(r, self._m[b.in_index(xi)]).ravel()
        return r

    def dense(self) -> Kernel:
        cap = guard(DENSE_GUARD)
        if max(self.input_size, self.output_size) > cap:
            raise GuardExceeded(
                f"dense W^{self.n} would have {self.input_size}x{self.output_size} entries "
                f"per side above the guard of {cap}"
            )
        m = self._m
        for _ in range(self.n - 1):
            m = np.kron(m, self._m)
        return Kernel(m, tuple(self.input_space()), tuple(self.output_space()))


def product_extension(w: Kernel, n: int):
    """``w`` itself for ``n == 1``, else a lazy :class:`ProductKernel`."""
    if n == 1:
        return w
    return ProductKernel(w, n)


# ---------------------------------------------------------- distributions


def push_forward(p: Distribution, k: Kernel) -> Distribution:
    if p.space != k.input_space:
        raise SpaceMismatch("distribution space differs from kernel input space")
    return Distribution(k.output_space, p.mass @ k.float_matrix())


def joint(p: Distribution, k: Kernel) -> Distribution:
    """Distribution over pairs ``(x, y)`` with mass ``p(x) k(y|x)``."""
    if p.space != k.input_space:
        raise SpaceMismatch("distribution space differs from kernel input space")
    pairs = tuple(itertools.product(k.input_space, k.output_space))
    return Distribution(pairs, (p.mass[:, None] * k.float_matrix()).ravel())


# ------------------------------------------------------- semantic channel


@dataclass(frozen=True)
class SemanticChannel:
    """End-to-end kernel from sender atoms to the receiver's vocabulary."""

    sender_kb: frozenset
    receiver_vocab: frozenset
    end_to_end: Kernel = field(compare=False)
    lost: frozenset = frozenset()
    spurious: frozenset = frozenset()

    def __post_init__(self):
        sender = frozenset(getattr(self.sender_kb, "atoms", self.sender_kb))
        receiver = frozenset(getattr(self.receiver_vocab, "atoms", self.receiver_vocab))
        object.__setattr__(self, "sender_kb", sender)
        object.__setattr__(self, "receiver_vocab", receiver)
        if self.end_to_end.input_space != tuple(sorted(sender)):
            raise SpaceMismatch("end-to-end input space must be the sender atoms in canonical order")
        if self.end_to_end.output_space != tuple(sorted(receiver)):
            raise SpaceMismatch("end-to-end output space must be the receiver vocabulary in canonical order")
        object.__setattr__(self, "lost", sender - receiver)
        object.__setattr__(self, "spurious", receiver - sender)

    @property
    def sender_states(self) -> tuple:
        return self.end_to_end.input_space

    @property
    def receiver_states(self) -> tuple:
        return self.end_to_end.output_space


def build_semantic_channel(sender, receiver_vocab, enc: Kernel, w: Kernel, dec: Kernel) -> SemanticChannel:
    """Compose encoder, carrier and decoder into a :class:`SemanticChannel`."""
    sender = frozenset(getattr(sender, "atoms", sender))
    receiver = frozenset(getattr(receiver_vocab, "atoms", receiver_vocab))
    if enc.input_space != tuple(sorted(sender)):
        raise SpaceMismatch("encoder input space must be the sender atoms in canonical order")
    if dec.output_space != tuple(sorted(receiver)):
        raise SpaceMismatch("decoder output space must be the receiver vocabulary in canonical order")
    k = compose(compose(enc, w), dec)
    return SemanticChannel(sender, receiver, k)


# ------------------------------------------------------------ config files


@dataclass(frozen=True)
class ChannelConfig:
    carrier: Kernel = field(compare=False)
    encoder: str = "canonical_injection"
    decoder: str = "nearest_closure"
    carrier_size: int | None = None
    raw: Mapping = field(default_factory=dict, compare=False, hash=False)


def load_channel_config(source) -> ChannelConfig:
    """Read a channel config from a path, a JSON string, or a mapping."""
    if isinstance(source, Mapping):
        cfg = dict(source)
    elif isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
        cfg = json.loads(Path(source).read_text(encoding="utf-8"))
    else:
        cfg = json.loads(source)
    carrier = cfg.get("carrier")
    if not isinstance(carrier, Mapping) or "type" not in carrier:
        raise ValueError("channel config needs a 'carrier' object with a 'type'")
    kind = carrier["type"]
    if kind == "q_symmetric":
        w = q_symmetric_channel(carrier["q"], float(carrier["p"]))
    elif kind == "matrix":
        rows = np.asarray(carrier["rows"], dtype=float)
        w = Kernel(rows, range(rows.shape[0]), range(rows.shape[1]))
    else:
        raise ValueError(f"unknown carrier type {kind!r}")
    size = cfg.get("carrier_size")
    if size is not None and size != len(w.input_space):
        raise ValueError(f"carrier_size {size} does not match the carrier alphabet ({len(w.input_space)})")
    encoder = cfg.get("encoder", "canonical_injection")
    decoder = cfg.get("decoder", "nearest_closure")
    if encoder != "canonical_injection":
        raise ValueError(f"unknown encoder {encoder!r}")
    if decoder != "nearest_closure":
        raise ValueError(f"unknown decoder {decoder!r}")
    return ChannelConfig(w, encoder, decoder, size, cfg)
