"""Two-layer block codes and their Monte Carlo evaluation.

Only the sender core is channel-coded; every redundant message is sent as
the codeword of a fixed core anchor and re-derived at the receiver.
Random streams are keyed by (seed, n, message, chunk), so splitting the
trials across workers never changes the result.
"""
from __future__ import annotations

import csv
import io
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from ._guards import guard
from .distortions import closure_matrix
from .invariants import blahut_arimoto, shannon_capacity
from .kb import GroundAtom, ProofSystem, extract_core
from .kernels import DENSE_GUARD, Kernel, ProductKernel, SemanticChannel

__all__ = [
    "CoreLossError",
    "BlockCode",
    "SimResult",
    "ConverseCheck",
    "build_two_layer_code",
    "simulate",
    "converse_check",
    "induced_semantic_channel",
    "results_to_csv",
]

MAX_RESAMPLE = 100
CHUNK = 8192
Z95 = 1.959963984540054


class CoreLossError(ValueError):
    def __init__(self, lost_core):
        self.lost_core = tuple(sorted(lost_core))
        super().__init__("receiver vocabulary misses core element(s): " + ", ".join(map(str, self.lost_core)))


@dataclass(frozen=True)
class BlockCode:
    message_set: tuple
    n: int
    core: tuple
    anchor: GroundAtom
    codebook: np.ndarray = field(compare=False, repr=False)  # core index x position -> carrier index
    carrier_inputs: tuple = ()
    ps: ProofSystem = field(default_factory=ProofSystem, repr=False)
    seed: int | None = None

    @property
    def rate(self) -> float:
        return math.log2(len(self.message_set)) / self.n

    def core_index(self, m: GroundAtom) -> int:
        return self.core.index(m if m in self.core else self.anchor)

    def core_sub(self, a: GroundAtom) -> tuple:
        """Layer-1 codeword of a core element, as carrier labels."""
        return tuple(self.carrier_inputs[j] for j in self.codebook[self.core.index(a)])

    def encode(self, m: GroundAtom) -> tuple:
        if m not in self.message_set:
            raise KeyError(m)
        return self.core_sub(m if m in self.core else self.anchor)


def build_two_layer_code(sender, receiver_vocab, w: Kernel, n: int, rng_seed: int,
                         ps: ProofSystem) -> BlockCode:
    """Random core codebook drawn from the capacity-achieving input law of ``w``."""
    if n < 1:
        raise ValueError("blocklength must be >= 1")
    sender = frozenset(getattr(sender, "atoms", sender))
    receiver = frozenset(getattr(receiver_vocab, "atoms", receiver_vocab))
    core = extract_core(sender, ps).core
    if not core <= receiver:
        raise CoreLossError(core - receiver)
    core_t = tuple(sorted(core))
    if not core_t:
        raise ValueError("sender has an empty core")
    p_star = blahut_arimoto(w).input_distribution
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(rng_seed, spawn_key=(n,))))
    q = len(w.input_space)
    for _ in range(MAX_RESAMPLE):
        book = rng.choice(q, size=(len(core_t), n), p=p_star)
        if len({tuple(r) for r in book}) == len(core_t):
            break
    else:
        raise ValueError(f"could not draw {len(core_t)} distinct codewords of length {n} "
                         f"in {MAX_RESAMPLE} attempts")
    book = np.ascontiguousarray(book, dtype=np.int64)
    book.setflags(write=False)
    return BlockCode(tuple(sorted(sender)), n, core_t, core_t[0], book,
                     tuple(w.input_space), ps, rng_seed)


@dataclass(frozen=True)
class SimResult:
    n: int
    trials: int
    p_e_hat: float  # worst core message, Hamming criterion
    p_e_cn_hat: float  # worst message, closure criterion
    ci_halfwidth: float
    seed: int
    messages: tuple = field(default=(), repr=False)
    hamming_errors: tuple = field(default=(), repr=False)
    closure_errors: tuple = field(default=(), repr=False)
    redundant_closure_errors: int = 0
    ci_halfwidth_cn: float = 0.0
    backend: str = ""

    def row(self) -> list:
        return [self.n, self.trials, self.p_e_hat, self.p_e_cn_hat, self.ci_halfwidth, self.seed]


def results_to_csv(results) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "trials", "p_e", "p_e_cn", "ci", "seed"])
    for r in results:
        w.writerow(r.row())
    return buf.getvalue()


def _tables(w: Kernel):
    m = w.float_matrix()
    cdf = np.cumsum(m, axis=1)
    cdf[:, -1] = 1.0
    with np.errstate(divide="ignore"):
        logw = np.log(m)
    return np.ascontiguousarray(cdf), np.ascontiguousarray(logw)


def _uniforms(seed: int, n: int, msg: int, chunk: int, size: int) -> np.ndarray:
    ss = np.random.SeedSequence(seed, spawn_key=(n, msg, chunk))
    return np.random.Generator(np.random.Philox(ss)).random((size, n))


def _hw(p: float, trials: int) -> float:
    return Z95 * math.sqrt(p * (1 - p) / trials)


def simulate(code: BlockCode, chan_w: Kernel, trials: int, rng_seed: int, *,
             workers: int = 1, backend: str | None = None) -> SimResult:
    """Send every message ``trials`` times through independent uses of ``chan_w``."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if tuple(chan_w.input_space) != code.carrier_inputs:
        raise ValueError("channel input space differs from the code's carrier alphabet")
    be = _backend.get(backend)
    cdf, logw = _tables(chan_w)
    sender = frozenset(code.message_set)
    d_cn = closure_matrix(sender, code.core, code.ps).values  # rows: messages, cols: core
    tasks = [(k, c, min(CHUNK, trials - c * CHUNK))
             for k in range(len(code.message_set)) for c in range(-(-trials // CHUNK))]

    def run(task):
        k, c, size = task
        m = code.message_set[k]
        cw = code.codebook[code.core_index(m)]
        y = be.sample_outputs(_uniforms(rng_seed, code.n, k, c, size), cw, cdf)
        out = be.ml_decode(y, code.codebook, logw)
        # redundant messages are never reproduced symbol-exactly
        ham = int(np.count_nonzero(out != code.core.index(m))) if m in code.core else size
        clo = int(np.count_nonzero(d_cn[k, out] > 0))
        return k, ham, clo

    ham = [0] * len(code.message_set)
    clo = [0] * len(code.message_set)
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(run, tasks))
    else:
        parts = [run(t) for t in tasks]
    for k, h, c in parts:
        ham[k] += h
        clo[k] += c

    in_core = [m in code.core for m in code.message_set]
    p_e = max(h / trials for h, c in zip(ham, in_core) if c)
    p_cn = max(c / trials for c in clo)
    redundant = sum(c for c, core in zip(clo, in_core) if not core)
    return SimResult(code.n, trials, p_e, p_cn, _hw(p_e, trials), rng_seed,
                     code.message_set, tuple(ham), tuple(clo), redundant, _hw(p_cn, trials), be.name)


@dataclass(frozen=True)
class ConverseCheck:
    holds: bool
    slack: float
    lhs: float
    rhs: float

    def __bool__(self):
        return self.holds


def converse_check(code: BlockCode, chan_w: Kernel, eps_hat: float) -> ConverseCheck:
    """Check ``log|core| <= (n C + 1) / (1 - eps)`` and report the slack."""
    if not 0 <= eps_hat < 1:
        raise ValueError("error estimate must lie in [0, 1)")
    lhs = math.log2(len(code.core))
    rhs = (code.n * shannon_capacity(chan_w) + 1) / (1 - eps_hat)
    return ConverseCheck(lhs <= rhs, rhs - lhs, lhs, rhs)


def induced_semantic_channel(code: BlockCode, chan_w: Kernel, receiver_vocab=None, *,
                             trials: int = 100_000, rng_seed: int = 0,
                             backend: str | None = None) -> SemanticChannel:
    """End-to-end kernel of the two-layer code.

    Exact when all ``q^n`` received blocks can be listed within the dense
    guard; otherwise estimated from ``trials`` draws per message, whose
    entries carry a 95% half-width of at most ``0.98 / sqrt(trials)``.
    """
    be = _backend.get(backend)
    receiver = frozenset(code.core if receiver_vocab is None
                         else getattr(receiver_vocab, "atoms", receiver_vocab))
    if not frozenset(code.core) <= receiver:
        raise CoreLossError(frozenset(code.core) - receiver)
    out_space = tuple(sorted(receiver))
    col = [out_space.index(a) for a in code.core]
    cdf, logw = _tables(chan_w)
    q_out = len(chan_w.output_space)
    mat = np.zeros((len(code.message_set), len(out_space)))
    if q_out ** code.n <= guard(DENSE_GUARD):
        blocks = np.array(list(itertools.product(range(q_out), repeat=code.n)), dtype=np.int64)
        decoded = be.ml_decode(blocks.reshape(-1, code.n), code.codebook, logw)
        pk = ProductKernel(chan_w, code.n)
        for k, m in enumerate(code.message_set):
            probs = pk.row(code.encode(m))
            np.add.at(mat[k], [col[d] for d in decoded], probs)
    else:
        for k, m in enumerate(code.message_set):
            cw = code.codebook[code.core_index(m)]
            y = be.sample_outputs(_uniforms(rng_seed, code.n, k, 0, trials), cw, cdf)
            counts = np.bincount(be.ml_decode(y, code.codebook, logw), minlength=len(code.core))
            mat[k, col] = counts / trials
    kern = Kernel(mat, code.message_set, out_space)
    return SemanticChannel(frozenset(code.message_set), receiver, kern)
