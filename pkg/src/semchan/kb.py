"""Ground Datalog knowledge bases.

Facts are ground atoms, rules are range-restricted Horn clauses. The
closure is the least fixpoint of the immediate-consequence operator,
computed semi-naively while recording the generation at which each atom
first appears (its derivation depth).
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Iterator, Mapping, NamedTuple, Union

from ._guards import GuardExceeded, guard

__all__ = [
    "INF",
    "GroundAtom",
    "Var",
    "Pattern",
    "Rule",
    "ProofSystem",
    "KnowledgeBase",
    "CoreAnalysis",
    "KBSyntaxError",
    "RangeRestrictionError",
    "HerbrandGuardError",
    "PerturbationError",
    "atom",
    "parse_kb",
    "serialize_kb",
    "tps_step",
    "closure",
    "strata",
    "derivation_depth",
    "entails",
    "extract_core",
    "closure_fidelity",
    "core_preservation_ratio",
    "perturb",
    "herbrand_size",
]

DEFAULT_GUARD = 10**6
_TOKEN_RE = re.compile(r"^[A-Za-z0-9_]+$")


class _Infinity:
    """Depth of an atom that is not derivable. Orders above every int."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INF"

    def __str__(self):
        return "∞"

    def __eq__(self, other):
        return other is self

    def __hash__(self):
        return hash("semchan.INF")

    def __lt__(self, other):
        return False

    def __le__(self, other):
        return other is self

    def __gt__(self, other):
        return other is not self

    def __ge__(self, other):
        return True

    def __reduce__(self):
        return (_Infinity, ())


INF = _Infinity()


class KBSyntaxError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, col {col}: {message}")
        self.line = line
        self.col = col


class RangeRestrictionError(ValueError):
    pass


class HerbrandGuardError(GuardExceeded):
    pass


class PerturbationError(ValueError):
    def __init__(self, message: str, offending: Iterable["GroundAtom"]):
        self.offending = tuple(sorted(offending))
        super().__init__(f"{message}: {', '.join(map(str, self.offending))}")


class GroundAtom(NamedTuple):
    """A predicate applied to constants. Tuple ordering is the canonical order."""

    predicate: str
    args: tuple

    def __str__(self):
        return f"{self.predicate}({','.join(self.args)})"

    @property
    def arity(self) -> int:
        return len(self.args)


def atom(predicate: str, *args: str) -> GroundAtom:
    """Build a validated ground atom, e.g. ``atom("Edge", "a", "b")``."""
    if len(args) == 1 and isinstance(args[0], (tuple, list)):
        args = tuple(args[0])
    for tok in (predicate, *args):
        if not isinstance(tok, str) or not _TOKEN_RE.match(tok):
            raise ValueError(f"invalid token {tok!r}")
    return GroundAtom(predicate, tuple(args))


class Var(NamedTuple):
    name: str

    def __str__(self):
        return self.name


Term = Union[str, Var]


class Pattern(NamedTuple):
    predicate: str
    terms: tuple

    def __str__(self):
        return f"{self.predicate}({','.join(map(str, self.terms))})"

    def variables(self) -> set:
        return {t for t in self.terms if isinstance(t, Var)}

    def constants(self) -> set:
        return {t for t in self.terms if not isinstance(t, Var)}


@dataclass(frozen=True)
class Rule:
    head: Pattern
    body: tuple

    def __post_init__(self):
        object.__setattr__(self, "body", tuple(self.body))
        if not self.body:
            raise RangeRestrictionError(f"rule with head {self.head} has an empty body")
        bound = set().union(*(p.variables() for p in self.body))
        free = self.head.variables() - bound
        if free:
            names = ", ".join(sorted(v.name for v in free))
            raise RangeRestrictionError(
                f"rule {self}: head variable(s) {names} do not occur in the body"
            )

    def __str__(self):
        return f"{self.head} :- {', '.join(map(str, self.body))}."


@dataclass(frozen=True)
class ProofSystem:
    rules: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))

    def __iter__(self):
        return iter(self.rules)

    def __len__(self):
        return len(self.rules)

    def constants(self) -> set:
        out = set()
        for r in self.rules:
            for p in (r.head, *r.body):
                out |= p.constants()
        return out

    def signatures(self) -> set:
        out = set()
        for r in self.rules:
            for p in (r.head, *r.body):
                out.add((p.predicate, len(p.terms)))
        return out


@dataclass(frozen=True, init=False)
class KnowledgeBase:
    """A finite set of ground atoms; iterates in canonical order."""

    atoms: frozenset

    def __init__(self, atoms: Iterable[GroundAtom] = ()):
        object.__setattr__(self, "atoms", frozenset(atoms))

    def __iter__(self) -> Iterator[GroundAtom]:
        return iter(self.sorted)

    def __len__(self):
        return len(self.atoms)

    def __contains__(self, item):
        return item in self.atoms

    @property
    def sorted(self) -> tuple:
        return tuple(sorted(self.atoms))

    @property
    def domain(self) -> frozenset:
        return frozenset(c for a in self.atoms for c in a.args)

    def __str__(self):
        return "{" + ", ".join(map(str, self.sorted)) + "}"


# --------------------------------------------------------------------- parsing

_LEX_RE = re.compile(r"\s+|%[^\n]*|:-|[A-Za-z0-9_]+|[(),.]|.", re.S)


def _tokenize(text: str):
    line, line_start = 1, 0
    for m in _LEX_RE.finditer(text):
        tok = m.group()
        col = m.start() - line_start + 1
        if tok[0].isspace() or tok[0] == "%":
            nl = tok.count("\n")
            if nl:
                line += nl
                line_start = m.start() + tok.rfind("\n") + 1
            continue
        if not (_TOKEN_RE.match(tok) or tok in ("(", ")", ",", ".", ":-")):
            raise KBSyntaxError(f"unexpected character {tok!r}", line, col)
        yield tok, line, col
    yield "", line, len(text) - line_start + 1


class _Parser:
    def __init__(self, text: str):
        self.tokens = list(_tokenize(text))
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def take(self, expected=None):
        tok, line, col = self.tokens[self.pos]
        if expected is not None and tok != expected:
            shown = repr(tok) if tok else "end of input"
            raise KBSyntaxError(f"expected {expected!r}, found {shown}", line, col)
        self.pos += 1
        return tok, line, col

    def ident(self, what):
        tok, line, col = self.tokens[self.pos]
        if not tok or not _TOKEN_RE.match(tok):
            shown = repr(tok) if tok else "end of input"
            raise KBSyntaxError(f"expected {what}, found {shown}", line, col)
        self.pos += 1
        return tok

    def pattern(self) -> Pattern:
        pred = self.ident("predicate name")
        self.take("(")
        terms = [self.term()]
        while self.peek()[0] == ",":
            self.take(",")
            terms.append(self.term())
        self.take(")")
        return Pattern(pred, tuple(terms))

    def term(self) -> Term:
        tok = self.ident("term")
        if tok[0].isupper() or tok[0] == "_":
            return Var(tok)
        return tok

    def statements(self):
        while self.peek()[0] != "":
            _, line, col = self.peek()
            head = self.pattern()
            if self.peek()[0] == ":-":
                self.take(":-")
                body = [self.pattern()]
                while self.peek()[0] == ",":
                    self.take(",")
                    body.append(self.pattern())
                self.take(".")
                try:
                    yield Rule(head, tuple(body))
                except RangeRestrictionError as exc:
                    raise RangeRestrictionError(f"line {line}, col {col}: {exc}") from None
            else:
                self.take(".")
                if head.variables():
                    raise KBSyntaxError(f"fact {head} is not ground", line, col)
                yield GroundAtom(head.predicate, head.terms)


def parse_kb(text: str) -> tuple[KnowledgeBase, ProofSystem]:
    """Parse KB-file text into its facts and rules.

    Duplicate facts merge silently; rule order is kept.
    """
    facts, rules = set(), []
    for stmt in _Parser(text).statements():
        if isinstance(stmt, Rule):
            if stmt not in rules:
                rules.append(stmt)
        else:
            facts.add(stmt)
    return KnowledgeBase(facts), ProofSystem(tuple(rules))


def serialize_kb(kb: KnowledgeBase, ps: ProofSystem | None = None) -> str:
    lines = [str(r) for r in (ps or ())]
    lines += [f"{a}." for a in kb.sorted]
    return "\n".join(lines) + ("\n" if lines else "")


# ------------------------------------------------------------------ inference


def herbrand_size(atoms: Iterable[GroundAtom], ps: ProofSystem) -> int:
    """Number of ground atoms expressible over the constants in play."""
    atoms = list(atoms)
    domain = {c for a in atoms for c in a.args} | ps.constants()
    sigs = {(a.predicate, len(a.args)) for a in atoms} | ps.signatures()
    return sum(len(domain) ** k for _, k in sigs)


def _check_guard(atoms, ps):
    size = herbrand_size(atoms, ps)
    cap = guard(DEFAULT_GUARD)
    if size > cap:
        raise HerbrandGuardError(
            f"Herbrand base has {size} atoms, above the guard of {cap} "
            "(set SEMCHAN_GUARD to raise it)"
        )


def _index(atoms) -> dict:
    idx: dict = {}
    for a in atoms:
        idx.setdefault((a.predicate, len(a.args)), []).append(a)
    return idx


def _match(pattern: Pattern, fact: GroundAtom, binding: dict):
    new = None
    for term, const in zip(pattern.terms, fact.args):
        if isinstance(term, Var):
            cur = binding.get(term) if new is None else new.get(term)
            if cur is None:
                if new is None:
                    new = dict(binding)
                new[term] = const
            elif cur != const:
                return None
        elif term != const:
            return None
    return binding if new is None else new


def _instantiate(pattern: Pattern, binding: dict) -> GroundAtom:
    return GroundAtom(
        pattern.predicate,
        tuple(binding[t] if isinstance(t, Var) else t for t in pattern.terms),
    )


def _join(body, i, binding, full, out_bindings):
    if i == len(body):
        out_bindings.append(binding)
        return
    pat = body[i]
    for fact in full.get((pat.predicate, len(pat.terms)), ()):
        b = _match(pat, fact, binding)
        if b is not None:
            _join(body, i + 1, b, full, out_bindings)


def _fire(ps: ProofSystem, full: dict, delta: dict) -> set:
    """Heads of rule instances with body in ``full`` and some body atom in ``delta``."""
    derived = set()
    for rule in ps.rules:
        body = rule.body
        for pivot, pat in enumerate(body):
            seeds = delta.get((pat.predicate, len(pat.terms)))
            if not seeds:
                continue
            rest = body[:pivot] + body[pivot + 1:]
            for fact in seeds:
                b = _match(pat, fact, {})
                if b is None:
                    continue
                bindings: list = []
                _join(rest, 0, b, full, bindings)
                for bb in bindings:
                    derived.add(_instantiate(rule.head, bb))
    return derived


def tps_step(gamma: Iterable[GroundAtom], ps: ProofSystem) -> frozenset:
    """One application of the immediate-consequence operator."""
    gamma = frozenset(gamma)
    idx = _index(gamma)
    return gamma | _fire(ps, idx, idx)


@lru_cache(maxsize=8192)
def _strata(base: frozenset, ps: ProofSystem) -> tuple:
    _check_guard(base, ps)
    layers = [base]
    full = _index(base)
    delta = full
    seen = set(base)
    while True:
        new = _fire(ps, full, delta) - seen
        if not new:
            break
        layers.append(frozenset(new))
        seen |= new
        for a in new:
            full.setdefault((a.predicate, len(a.args)), []).append(a)
        delta = _index(new)
    return tuple(layers)


def strata(base: Iterable[GroundAtom], ps: ProofSystem) -> tuple:
    """Layers ``T^0, T^1 minus T^0, ...`` of the fixpoint iteration from ``base``."""
    return _strata(frozenset(base), ps)


@lru_cache(maxsize=8192)
def _closure(base: frozenset, ps: ProofSystem) -> frozenset:
    return frozenset().union(*_strata(base, ps))


def closure(gamma: Iterable[GroundAtom], ps: ProofSystem) -> frozenset:
    return _closure(frozenset(gamma), ps)


def entails(gamma: Iterable[GroundAtom], s: GroundAtom, ps: ProofSystem) -> bool:
    return s in _closure(frozenset(gamma), ps)


@lru_cache(maxsize=8192)
def _depths(base: frozenset, ps: ProofSystem) -> dict:
    return {a: n for n, layer in enumerate(_strata(base, ps)) for a in layer}


def derivation_depth(s: GroundAtom, base: Iterable[GroundAtom], ps: ProofSystem):
    """First generation at which ``s`` appears when iterating from ``base``; ``INF`` if never."""
    return _depths(frozenset(base), ps).get(s, INF)


@dataclass(frozen=True)
class CoreAnalysis:
    core: frozenset
    shortcuts: frozenset
    depth_by_atom: Mapping = field(hash=False)
    atomicity: int
    max_depth: int
    strata: tuple = field(default=(), hash=False)

    @property
    def core_sorted(self) -> tuple:
        return tuple(sorted(self.core))


def extract_core(kb: KnowledgeBase | Iterable[GroundAtom], ps: ProofSystem) -> CoreAnalysis:
    """Greedy canonical-order irredundantization.

    Each atom is dropped when it is derivable from what currently remains.
    """
    atoms = kb.sorted if isinstance(kb, KnowledgeBase) else tuple(sorted(set(kb)))
    current = set(atoms)
    for s in atoms:
        current.discard(s)
        if s not in _closure(frozenset(current), ps):
            current.add(s)
    core = frozenset(current)
    depths = _depths(core, ps)
    by_atom = {q: depths[q] for q in atoms}
    return CoreAnalysis(
        core=core,
        shortcuts=frozenset(atoms) - core,
        depth_by_atom=by_atom,
        atomicity=len(core),
        max_depth=max(by_atom.values(), default=0),
        strata=_strata(core, ps),
    )


def _as_set(x) -> frozenset:
    return x.atoms if isinstance(x, KnowledgeBase) else frozenset(x)


def closure_fidelity(s, s_hat, ps: ProofSystem) -> Fraction:
    """Jaccard index of the two closures (empty vs empty counts as 1)."""
    a, b = closure(_as_set(s), ps), closure(_as_set(s_hat), ps)
    union = len(a | b)
    return Fraction(1) if union == 0 else Fraction(len(a & b), union)


def core_preservation_ratio(sender, receiver_vocab, ps: ProofSystem) -> Fraction:
    core = extract_core(_as_set(sender), ps).core
    if not core:
        return Fraction(1)
    return Fraction(len(core & _as_set(receiver_vocab)), len(core))


def perturb(kb, lost, spurious) -> KnowledgeBase:
    """Remove ``lost`` from ``kb`` and add ``spurious``."""
    atoms, lost, spurious = _as_set(kb), frozenset(lost), frozenset(spurious)
    if not lost <= atoms:
        raise PerturbationError("lost atoms not in the knowledge base", lost - atoms)
    if spurious & atoms:
        raise PerturbationError("spurious atoms already in the knowledge base", spurious & atoms)
    return KnowledgeBase((atoms - lost) | spurious)
