"""Information-theoretic and structural invariants of semantic channels.

Everything is in bits. Blahut-Arimoto drives both the capacity and the
rate-distortion computations; the structural indices are finite sums
over the explicit end-to-end kernel.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from ._guards import GuardExceeded, guard
from .distortions import (
    DistortionMatrix,
    closure_matrix,
    d_closure,
    depth_matrix,
    expected_distortion,
    hamming_matrix,
    per_input_distortion,
)
from .kb import (
    ProofSystem,
    closure_fidelity,
    core_preservation_ratio,
    extract_core,
)
from .kernels import (
    ChannelConfig,
    Distribution,
    EnablingMap,
    Kernel,
    SemanticChannel,
    build_semantic_channel,
    deterministic_kernel,
    joint,
    load_channel_config,
)

__all__ = [
    "CapacityResult",
    "SemanticCapacity",
    "NoisePairIndices",
    "RateDistortionResult",
    "InvariantReport",
    "NonConvergence",
    "InfeasibleDistortion",
    "entropy",
    "mutual_information",
    "kernel_mutual_information",
    "blahut_arimoto",
    "shannon_capacity",
    "symmetric_capacity",
    "semantic_capacity",
    "noise_pair_indices",
    "quality_indices",
    "structural_shifts",
    "binary_entropy",
    "fano_lower_bound",
    "rate_distortion",
    "rd_curve",
    "canonical_injection",
    "nearest_closure_decoder",
    "channel_from_config",
    "compute_invariants",
]

BA_TOL = 1e-9
BA_MAX_ITER = 100_000
CSEM_GUARD = 10**7


class NonConvergence(RuntimeError):
    def __init__(self, message: str, gap: float):
        super().__init__(f"{message} (gap {gap:.3e})")
        self.gap = gap


class InfeasibleDistortion(ValueError):
    pass


# ------------------------------------------------------------------ entropy


def _plogp(p: np.ndarray) -> np.ndarray:
    out = np.zeros_like(p, dtype=float)
    nz = p > 0
    out[nz] = p[nz] * np.log2(p[nz])
    return out


def entropy(p) -> float:
    mass = p.mass if isinstance(p, Distribution) else np.asarray(p, dtype=float)
    return float(-_plogp(mass).sum())


def mutual_information(pair_dist: Distribution) -> float:
    """I(X;Y) of a distribution whose labels are ``(x, y)`` pairs."""
    xs, ys = {}, {}
    for (x, y), m in zip(pair_dist.space, pair_dist.mass):
        xs[x] = xs.get(x, 0.0) + m
        ys[y] = ys.get(y, 0.0) + m
    total = 0.0
    for (x, y), m in zip(pair_dist.space, pair_dist.mass):
        if m > 0:
            total += m * math.log2(m / (xs[x] * ys[y]))
    return total


def kernel_mutual_information(p, matrix) -> float:
    """I(X;Y) for input mass ``p`` through a row-stochastic ``matrix``."""
    p = np.asarray(getattr(p, "mass", p), dtype=float)
    w = np.asarray(getattr(matrix, "float_matrix", lambda: matrix)(), dtype=float)
    q = p @ w
    jm = p[:, None] * w
    nz = jm > 0
    ratio = np.ones_like(jm)
    ratio[nz] = w[nz] / q[np.nonzero(nz)[1]]
    return float((jm[nz] * np.log2(ratio[nz])).sum())


# --------------------------------------------------------- channel capacity


@dataclass(frozen=True)
class CapacityResult:
    capacity: float
    input_distribution: np.ndarray = field(compare=False)
    iterations: int
    gap: float
    history: tuple = field(default=(), compare=False, repr=False)

    def __float__(self):
        return self.capacity


def _divergences(w: np.ndarray, p: np.ndarray) -> np.ndarray:
    """D(W(.|x) || pW) for every input x, in bits."""
    q = p @ w
    nz = w > 0
    logs = np.zeros_like(w)
    cols = np.nonzero(nz)[1]
    logs[nz] = np.log2(w[nz] / q[cols])
    return (w * logs).sum(axis=1)


def _ba_step(m, p, d, upper, step):
    cand = p * np.exp2(step * (d - upper))
    cand /= cand.sum()
    d_cand = _divergences(m, cand)
    return cand, d_cand, float(cand @ d_cand)


def _mi(m, p):
    on = p > 0
    return float(p[on] @ _divergences(m[on], p[on]))


def _barrier_polish(m, p):
    """Interior-point refinement of ``p`` for ``max I(p) + mu * sum log p``.

    Near-duplicate rows and optimal masses that are tiny but positive make
    the multiplicative update crawl. The barrier keeps every mass positive
    and its duality gap is at most about ``len(p) * mu``. The caller only
    keeps the result when it certifies a smaller gap.
    """
    k = len(p)
    x = p + 1e-12
    x /= x.sum()
    ln2 = math.log(2)
    mu = 1e-3

    def objective(v, mu):
        return _mi(m, v) + mu * float(np.log(v).sum())

    while mu >= 1e-14:
        for _ in range(50):
            q = x @ m
            grad = _divergences(m, x) + mu / x
            hess = -(m / np.where(q > 0, q, 1.0)) @ m.T / ln2
            # affine scaling keeps the system well conditioned near the boundary
            scaled = x[:, None] * hess * x[None, :] - mu * np.eye(k)
            kkt = np.zeros((k + 1, k + 1))
            kkt[:k, :k] = scaled
            kkt[:k, k] = x
            kkt[k, :k] = x
            sol = np.linalg.lstsq(kkt, np.concatenate([-x * grad, [0.0]]), rcond=None)[0]
            step = x * sol[:k]
            step -= x * (step.sum() / x.sum())
            if float(grad @ step) < 1e-15:  # predicted gain below rounding
                break
            neg = step < 0
            alpha = min(1.0, 0.99 * float(np.min(-x[neg] / step[neg]))) if neg.any() else 1.0
            base = objective(x, mu)
            while alpha > 1e-16:
                trial = x + alpha * step
                trial /= trial.sum()
                if objective(trial, mu) >= base:
                    break
                alpha /= 2
            else:
                break
            x = trial
        mu /= 10
    return x


def _ba_step(m, p, d, upper, step):
    cand = p * np.exp2(step * (d - upper))
    cand /= cand.sum()
    d_cand = _divergences(m, cand)
    return cand, d_cand, float(cand @ d_cand)


def _mi(m, p):
    on = p > 0
    return float(p[on] @ _divergences(m[on], p[on]))


def blahut_arimoto(w, tol: float = BA_TOL, max_iter: int = BA_MAX_ITER,
                   record: bool = False) -> CapacityResult:
    """Capacity of a discrete memoryless channel.

    Stops once the duality gap ``max_x D(x) - sum_x p(x) D(x)`` is at most ``tol``.
    """
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    m = np.asarray(getattr(w, "float_matrix", lambda: w)(), dtype=float)
    n_in = m.shape[0]
    if n_in == 0:
        raise ValueError("channel has no inputs")
    p = np.full(n_in, 1.0 / n_in)
    d = _divergences(m, p)
    lower = float(p @ d)
    history = []
    gap = math.inf
    step = 1.0
    for it in range(1, int(max_iter) + 1):
        upper = float(d.max())
        gap = upper - lower
        if record:
            history.append(lower)
        if gap <= tol:
            return CapacityResult(max(lower, 0.0), p, it, gap, tuple(history))
        # mirror-ascent step: step 1 is the classical update; a longer step
        # is taken only when it beats the classical one, so I never drops
        cand, d_cand, i_cand = _ba_step(m, p, d, upper, 1.0)
        spread = upper - float(d.min())
        step = min(step, 30.0 / spread)  # no mass underflows to zero
        if step > 1.0:
            fast = _ba_step(m, p, d, upper, step)
            if fast[2] > i_cand:
                cand, d_cand, i_cand = fast
                step *= 2
            else:
                step = max(1.0, step / 4)
        else:
            step = 2.0
        if it % 25 == 0:
            polished = _barrier_polish(m, cand)
            with np.errstate(divide="ignore"):
                d_pol = _divergences(m, polished)
            i_pol = _mi(m, polished)
            if i_pol >= i_cand and d_pol.max() - i_pol < float(d_cand.max()) - i_cand:
                cand, d_cand, i_cand = polished, d_pol, i_pol
        p, d, lower = cand, d_cand, i_cand
    raise NonConvergence(f"Blahut-Arimoto did not converge in {max_iter} iterations", gap)


def shannon_capacity(w: Kernel, tol: float = BA_TOL) -> float:
    return blahut_arimoto(w, tol).capacity


def symmetric_capacity(q: int, p: float) -> float:
    """Closed form for the q-ary symmetric channel."""
    c = math.log2(q)
    if p < 1:
        c += (1 - p) * math.log2(1 - p)
    if p > 0:
        c += p * math.log2(p / (q - 1))
    return c


@dataclass(frozen=True)
class SemanticCapacity:
    value: float
    provenance: str  # "exact" | "equality" | "upper-bound"
    lower: float
    upper: float
    encoder: tuple | None = None
    decoder: tuple | None = None

    def __float__(self):
        return self.value


def semantic_capacity(sender_space: Sequence, carrier_space: Sequence, receiver_space: Sequence,
                      w: Kernel, enabling_enc: EnablingMap | None = None,
                      enabling_dec: EnablingMap | None = None, tol: float = BA_TOL) -> SemanticCapacity:
    """Maximum semantic MI over admissible encoders, decoders and sources.

    Uses the data-processing equality when enabling is full and the
    semantic spaces are at least as large as the carrier; otherwise
    enumerates deterministic encoder/decoder pairs, provided their number
    stays under the guard.
    """
    sender_space, receiver_space = tuple(sender_space), tuple(receiver_space)
    carrier_in, carrier_out = tuple(w.input_space), tuple(w.output_space)
    if tuple(carrier_space) != carrier_in:
        raise ValueError("carrier space does not match the channel input space")
    enc = enabling_enc or EnablingMap.full(sender_space, carrier_in)
    dec = enabling_dec or EnablingMap.full(carrier_out, receiver_space)
    c_w = shannon_capacity(w, tol)
    if (enc.is_full() and dec.is_full()
            and len(sender_space) >= len(carrier_in) and len(receiver_space) >= len(carrier_out)):
        return SemanticCapacity(c_w, "equality", c_w, c_w)

    count = enc.size() * dec.size()
    cap = guard(CSEM_GUARD)
    if count > cap:
        raise GuardExceeded(
            f"{count} deterministic encoder/decoder pairs exceed the enumeration guard of {cap}"
        )
    wm = w.float_matrix()
    r_idx = {r: j for j, r in enumerate(receiver_space)}
    c_idx = {c: i for i, c in enumerate(carrier_in)}
    enc_choices = [sorted(enc.allowed[s], key=c_idx.__getitem__) for s in sender_space]
    dec_choices = [sorted(dec.allowed[y], key=r_idx.__getitem__) for y in carrier_out]
    best, best_pair = -1.0, None
    seen: dict = {}
    for g in itertools.product(*dec_choices):
        merged = np.zeros((len(carrier_in), len(receiver_space)))
        for j, r in enumerate(g):
            merged[:, r_idx[r]] += wm[:, j]
        for f in itertools.product(*enc_choices):
            rows = tuple(sorted(set(c_idx[c] for c in f)))
            key = (g, rows)
            if key not in seen:
                seen[key] = blahut_arimoto(merged[list(rows)], tol).capacity
            if seen[key] > best + 1e-15:
                best, best_pair = seen[key], (f, g)
    return SemanticCapacity(best, "exact", best, best, *best_pair)


# ------------------------------------------------------- noise-pair indices


@dataclass(frozen=True)
class NoisePairIndices:
    phi_atom: float
    psi_plus: float
    p_cap: Mapping = field(hash=False)
    p_plus: Mapping = field(hash=False)
    pi: Mapping = field(hash=False)


def noise_pair_indices(chan: SemanticChannel, core) -> NoisePairIndices:
    core = frozenset(getattr(core, "core", core))
    k = chan.end_to_end.float_matrix()
    spurious = np.array([c in chan.spurious for c in chan.receiver_states], dtype=bool)
    p_plus = {s: float(k[i, spurious].sum()) for i, s in enumerate(chan.sender_states)}
    p_cap = {s: float(k[i, ~spurious].sum()) for i, s in enumerate(chan.sender_states)}
    pi = {}
    if not (core & chan.lost):
        pi = {a: float(chan.end_to_end.prob(a, a)) for a in sorted(core)}
    if core & chan.lost:
        phi = 0.0
    else:
        phi = min(pi.values(), default=1.0)
    psi = max(p_plus.values(), default=0.0)
    return NoisePairIndices(phi, psi, p_cap, p_plus, pi)


def quality_indices(chan: SemanticChannel, ps: ProofSystem) -> tuple[float, float]:
    """(fidelity index F, depth expansion index E) of a channel."""
    d_cn = closure_matrix(chan.sender_kb, chan.receiver_vocab, ps)
    d_dd = depth_matrix(chan.sender_kb, chan.receiver_vocab, ps)
    per_cn = per_input_distortion(chan, d_cn)
    per_dd = per_input_distortion(chan, d_dd)
    f = 1.0 - float(per_cn.max(initial=0.0))
    e = float(per_dd.max(initial=0.0))
    return f, e


def structural_shifts(sender, receiver_vocab, ps: ProofSystem) -> tuple[int, int]:
    a = extract_core(frozenset(getattr(sender, "atoms", sender)), ps)
    b = extract_core(frozenset(getattr(receiver_vocab, "atoms", receiver_vocab)), ps)
    return b.atomicity - a.atomicity, b.max_depth - a.max_depth


# -------------------------------------------------------------------- Fano


def binary_entropy(p: float) -> float:
    if p <= 0 or p >= 1:
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def fano_lower_bound(h_source: float, eps: float, out_size: int) -> float:
    """``H - h_b(eps) - eps log(out_size - 1)``, clamped at 0."""
    if not 0 <= eps <= 1:
        raise ValueError("error probability must lie in [0, 1]")
    if out_size < 1:
        raise ValueError("output alphabet must be non-empty")
    if out_size == 1:
        if eps > 0:
            raise ValueError("a single-letter output alphabet needs eps = 0")
        return max(h_source, 0.0)
    return max(h_source - binary_entropy(eps) - eps * math.log2(out_size - 1), 0.0)


# ---------------------------------------------------------- rate-distortion


@dataclass(frozen=True)
class RateDistortionResult:
    rate: float
    distortion: float
    slope: float  # Lagrange multiplier; inf on the zero-slack boundary
    conditional: np.ndarray = field(compare=False, repr=False)

    def __float__(self):
        return self.rate


def _rd_point(p: np.ndarray, d: np.ndarray, beta: float | None, tol: float = 1e-10,
              max_iter: int = BA_MAX_ITER) -> RateDistortionResult:
    """One Blahut-Arimoto rate-distortion solve at slope ``beta`` (None = infinite).

    Iterates the output law until the dual bound ``max_y log c(y)`` on the
    Lagrangian is at most ``tol`` nats.
    """
    if beta is None:
        weights = (d <= d.min(axis=1, keepdims=True) + 1e-15).astype(float)
    else:
        weights = np.exp(-beta * (d - d.min(axis=1, keepdims=True)))
    slope = math.inf if beta is None else beta
    live = p > 0
    # zero-rate optimum: a point mass on y* satisfies the optimality conditions
    for y in np.argsort(p @ d, kind="stable"):
        col = weights[live, y]
        if np.all(col > 0) and ((p[live] / col) @ weights[live]).max() <= 1 + 1e-12:
            cond = np.zeros_like(d)
            cond[:, y] = 1.0
            return RateDistortionResult(0.0, float(p @ d[:, y]), slope, cond)
    q = np.full(d.shape[1], 1.0 / d.shape[1])
    gap = math.inf
    for _ in range(int(max_iter)):
        z = weights @ q
        c = (p / z) @ weights
        gap = math.log(c.max())
        if gap <= tol:
            break
        q = q * c
    else:
        raise NonConvergence("rate-distortion iteration did not converge", gap)
    a = weights * q[None, :]
    cond = a / a.sum(axis=1, keepdims=True)
    rate = kernel_mutual_information(p, cond)
    dist = float(p @ (cond * d).sum(axis=1))
    return RateDistortionResult(max(rate, 0.0), dist, slope, cond)


def rd_curve(p_source: Distribution, d: DistortionMatrix, slopes=None) -> list[RateDistortionResult]:
    """Points on the rate-distortion curve for a sweep of Lagrange slopes."""
    p = p_source.mass
    if slopes is None:
        slopes = np.logspace(-3, 3, 200)
    return [_rd_point(p, d.values, float(b)) for b in slopes]


def rate_distortion(p_source: Distribution, d: DistortionMatrix, D: float, tol: float = 1e-6,
                    slopes=None) -> RateDistortionResult:
    """Minimum rate with expected distortion at most ``D``.

    A log-spaced slope sweep brackets the target, then bisection on the
    slope pins the achieved distortion to within ``tol``.
    """
    if D < 0:
        raise ValueError("distortion level must be non-negative")
    if p_source.space != d.rows:
        raise ValueError("source distribution is not on the distortion rows")
    p, dv = p_source.mass, d.values
    d_min = float(p @ dv.min(axis=1))
    col_cost = p @ dv
    d_zero_rate = float(col_cost.min())
    if D < d_min - tol:
        raise InfeasibleDistortion(f"distortion {D} is below the minimum achievable {d_min:.6g}")
    if D >= d_zero_rate:
        cond = np.zeros_like(dv)
        cond[:, int(col_cost.argmin())] = 1.0
        return RateDistortionResult(0.0, d_zero_rate, 0.0, cond)
    if D <= d_min + tol:
        return _rd_point(p, dv, None)

    if slopes is None:
        slopes = np.logspace(-3, 3, 200)
    pts = [(float(b), _rd_point(p, dv, float(b))) for b in slopes]
    lo = hi = None
    for b, r in pts:
        if r.distortion > D:
            lo = (b, r)
        else:
            hi = (b, r)
            break
    if hi is None:
        b = pts[-1][0]
        while hi is None:
            b *= 4
            r = _rd_point(p, dv, b)
            if r.distortion <= D:
                hi = (b, r)
            elif b > 1e9:
                return _rd_point(p, dv, None)
            else:
                lo = (b, r)
    if lo is None or abs(hi[1].distortion - D) <= tol:
        return hi[1]
    b_lo, b_hi = lo[0], hi[0]
    best = hi[1]
    for _ in range(200):
        mid = math.sqrt(b_lo * b_hi)
        r = _rd_point(p, dv, mid)
        if r.distortion > D:
            b_lo = mid
        else:
            b_hi, best = mid, r
        if abs(best.distortion - D) <= tol or b_hi / b_lo - 1 < 1e-12:
            break
    return best


# ----------------------------------------------------- example encoder/decoder


def canonical_injection(sender, carrier_space: Sequence) -> dict:
    """Map the i-th sender state (canonical order) to the i-th carrier symbol."""
    states = tuple(sorted(getattr(sender, "atoms", sender)))
    carrier_space = tuple(carrier_space)
    if len(states) > len(carrier_space):
        raise ValueError(f"{len(states)} sender states do not fit in {len(carrier_space)} carrier symbols")
    return dict(zip(states, carrier_space))


def nearest_closure_decoder(sender, receiver_vocab, encoder_map: Mapping, carrier_outputs: Sequence,
                            ps: ProofSystem, reference=None) -> Kernel:
    """Deterministic decoder for a receiver vocabulary.

    A received symbol is read back through the encoder (unused symbols
    fall to the canonical-first sender state). A state the receiver holds
    is output as is; otherwise the receiver state at least closure
    distortion from it (relative to ``reference``, the sender by default)
    is output, first in canonical order on ties.
    """
    sender_states = tuple(sorted(getattr(sender, "atoms", sender)))
    receiver_states = tuple(sorted(getattr(receiver_vocab, "atoms", receiver_vocab)))
    ref = frozenset(getattr(reference, "atoms", reference)) if reference is not None else frozenset(sender_states)
    inverse = {y: s for s, y in encoder_map.items()}
    vocab = frozenset(receiver_states)
    fallback = sender_states[0]
    memo: dict = {}

    def decode(y):
        s = inverse.get(y, fallback)
        if s in vocab:
            return s
        if s not in memo:
            memo[s] = min(receiver_states, key=lambda r: d_closure(s, r, ref, ps))
        return memo[s]

    return deterministic_kernel(decode, carrier_outputs, receiver_states)


def channel_from_config(sender, receiver_vocab, config: ChannelConfig | Mapping | str,
                        ps: ProofSystem) -> SemanticChannel:
    if not isinstance(config, ChannelConfig):
        config = load_channel_config(config)
    w = config.carrier
    sender_states = tuple(sorted(getattr(sender, "atoms", sender)))
    f = canonical_injection(sender_states, w.input_space)
    enc = deterministic_kernel(f, sender_states, w.input_space)
    dec = nearest_closure_decoder(sender_states, receiver_vocab, f, w.output_space, ps)
    return build_semantic_channel(sender_states, receiver_vocab, enc, w, dec)


# ------------------------------------------------------------------- report

FAMILIES = {
    "I_source": ("atomicity", "max_depth"),
    "II_set_level": ("rho_atom", "f_cn"),
    "III_noise_pair": ("phi_atom", "psi_plus", "p_cap", "p_plus", "pi"),
    "IV_quality": ("fidelity_index", "depth_expansion"),
    "V_receiver": ("delta_A", "delta_Dd"),
    "VI_information": ("shannon_capacity", "semantic_capacity", "semantic_mi", "fano_lower"),
}


@dataclass(frozen=True)
class InvariantReport:
    atomicity: int
    max_depth: int
    rho_atom: Fraction
    f_cn: Fraction
    phi_atom: float
    psi_plus: float
    p_cap: Mapping = field(hash=False)
    p_plus: Mapping = field(hash=False)
    pi: Mapping = field(hash=False)
    fidelity_index: float = 1.0
    depth_expansion: float = 0.0
    delta_A: int = 0
    delta_Dd: int = 0
    shannon_capacity: float = 0.0
    semantic_capacity: float = 0.0
    semantic_mi: float = 0.0
    fano_lower: float = 0.0
    semantic_capacity_lower: float = 0.0
    semantic_capacity_provenance: str = "exact"
    source_entropy: float = 0.0
    expected_hamming: float = 0.0

    def _jsonable(self, name):
        v = getattr(self, name)
        if isinstance(v, Fraction):
            return float(v)
        if isinstance(v, Mapping):
            return {str(k): float(x) for k, x in v.items()}
        return v

    def to_dict(self) -> dict:
        out = {fam: {k: self._jsonable(k) for k in keys} for fam, keys in FAMILIES.items()}
        out["II_set_level"]["rho_atom_exact"] = str(self.rho_atom)
        out["II_set_level"]["f_cn_exact"] = str(self.f_cn)
        out["VI_information"]["semantic_capacity_lower"] = self.semantic_capacity_lower
        out["VI_information"]["semantic_capacity_provenance"] = self.semantic_capacity_provenance
        out["VI_information"]["source_entropy"] = self.source_entropy
        out["VI_information"]["expected_hamming"] = self.expected_hamming
        return out

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def to_csv(self) -> str:
        names = [k for keys in FAMILIES.values() for k in keys]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(names)
        row = []
        for k in names:
            v = self._jsonable(k)
            row.append(json.dumps(v, sort_keys=True) if isinstance(v, dict) else v)
        w.writerow(row)
        return buf.getvalue()


def compute_invariants(sender, receiver_vocab, ps: ProofSystem, config, p_source: Distribution | None = None,
                       tol: float = BA_TOL) -> InvariantReport:
    """All six invariant families for one sender/receiver pair."""
    sender = frozenset(getattr(sender, "atoms", sender))
    receiver = frozenset(getattr(receiver_vocab, "atoms", receiver_vocab))
    if not isinstance(config, ChannelConfig):
        config = load_channel_config(config)
    chan = channel_from_config(sender, receiver, config, ps)
    if p_source is None:
        p_source = Distribution.uniform(chan.sender_states)
    core = extract_core(sender, ps)
    noise = noise_pair_indices(chan, core.core)
    f_idx, e_idx = quality_indices(chan, ps)
    d_a, d_dd = structural_shifts(sender, receiver, ps)

    w = config.carrier
    c_w = shannon_capacity(w, tol)
    try:
        c_sem = semantic_capacity(chan.sender_states, w.input_space, chan.receiver_states, w, tol=tol)
    except GuardExceeded:
        upper = min(c_w, math.log2(len(sender)), math.log2(len(receiver)))
        lower = blahut_arimoto(chan.end_to_end, tol).capacity
        c_sem = SemanticCapacity(upper, "upper-bound", lower, upper)

    i_sem = mutual_information(joint(p_source, chan.end_to_end))
    h = entropy(p_source)
    eps = expected_distortion(chan, p_source, hamming_matrix(sender, receiver))
    fano = fano_lower_bound(h, min(max(eps, 0.0), 1.0), len(sender | receiver))
    return InvariantReport(
        atomicity=core.atomicity,
        max_depth=core.max_depth,
        rho_atom=core_preservation_ratio(sender, receiver, ps),
        f_cn=closure_fidelity(sender, receiver, ps),
        phi_atom=noise.phi_atom,
        psi_plus=noise.psi_plus,
        p_cap=noise.p_cap,
        p_plus=noise.p_plus,
        pi=noise.pi,
        fidelity_index=f_idx,
        depth_expansion=e_idx,
        delta_A=d_a,
        delta_Dd=d_dd,
        shannon_capacity=c_w,
        semantic_capacity=c_sem.value,
        semantic_mi=i_sem,
        fano_lower=fano,
        semantic_capacity_lower=c_sem.lower,
        semantic_capacity_provenance=c_sem.provenance,
        source_entropy=h,
        expected_hamming=eps,
    )
