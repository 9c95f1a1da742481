import pytest

from conftest import E, P
from oracles import naive_closure
from semchan.kb import (
    INF,
    GroundAtom,
    HerbrandGuardError,
    KBSyntaxError,
    KnowledgeBase,
    PerturbationError,
    RangeRestrictionError,
    atom,
    closure,
    closure_fidelity,
    core_preservation_ratio,
    derivation_depth,
    entails,
    extract_core,
    parse_kb,
    perturb,
    serialize_kb,
    strata,
    tps_step,
)

EDGES = {E("a", "b"), E("a", "c"), E("b", "c"), E("c", "d")}


def test_parse_single_fact():
    kb, ps = parse_kb("Edge(a,b).")
    assert kb.atoms == {E("a", "b")}
    assert len(ps) == 0


def test_parse_rules(ps):
    assert [str(r) for r in ps.rules] == ["Path(X,Y) :- Edge(X,Y).", "Path(X,Z) :- Edge(X,Y), Path(Y,Z)."]


def test_parse_comments_and_duplicates():
    kb, _ = parse_kb("% header\nEdge(a,b). Edge(a,b).  % again\n\nEdge(b,c).")
    assert kb.sorted == (E("a", "b"), E("b", "c"))


def test_syntax_error_location():
    with pytest.raises(KBSyntaxError) as ei:
        parse_kb("Edge(a,b).\nEdge(a b).")
    assert (ei.value.line, ei.value.col) == (2, 8)


@pytest.mark.parametrize("text", ["Edge(a,b)", "Edge(a,b", "Edge(a,b). :- Edge(a,b).", "Edge(a,$)."])
def test_syntax_errors(text):
    with pytest.raises(KBSyntaxError):
        parse_kb(text)


def test_nonground_fact_rejected():
    with pytest.raises(KBSyntaxError):
        parse_kb("Edge(X,b).")


def test_range_restriction():
    with pytest.raises(RangeRestrictionError, match="Z"):
        parse_kb("Path(X,Z) :- Edge(X,Y).")


def test_serialize_roundtrip(s1, ps):
    text = serialize_kb(s1, ps)
    kb2, ps2 = parse_kb(text)
    assert kb2 == s1 and ps2 == ps
    assert serialize_kb(kb2, ps2) == text
    facts = [ln for ln in text.splitlines() if ":-" not in ln]
    assert facts == sorted(facts)


def test_canonical_order():
    assert atom("Edge", "a", "b") < atom("Edge", "a", "c") < atom("Path", "a", "a")
    assert list(KnowledgeBase([P("a", "b"), E("b", "c")])) == [E("b", "c"), P("a", "b")]


def test_atom_validation():
    with pytest.raises(ValueError):
        atom("Ed ge", "a")
    with pytest.raises(ValueError):
        atom("Edge", "")


def test_tps_step(ps):
    assert tps_step({E("a", "b")}, ps) == {E("a", "b"), P("a", "b")}
    assert tps_step(set(), ps) == frozenset()
    assert tps_step(EDGES, ps) == EDGES | {P("a", "b"), P("a", "c"), P("b", "c"), P("c", "d")}


def test_closure_sizes(ps, r2):
    assert len(closure(EDGES, ps)) == 10
    assert closure(set(), ps) == frozenset()
    paths = {a for a in closure(r2.atoms, ps) if a.predicate == "Path"}
    assert len(paths) == 16


def test_closure_matches_naive(ps, s1, r2, r3):
    for kb in (s1, r2, r3):
        assert closure(kb.atoms, ps) == naive_closure(kb.atoms, ps)


def test_entails(ps):
    assert entails(EDGES, P("a", "d"), ps)
    assert not entails(EDGES, E("d", "a"), ps)


def test_derivation_depth(ps):
    assert derivation_depth(E("a", "b"), EDGES, ps) == 0
    assert derivation_depth(P("a", "d"), EDGES, ps) == 2
    a2 = {E("a", "b"), E("b", "c"), E("c", "d"), E("d", "a")}
    assert derivation_depth(P("a", "d"), a2, ps) == 3
    assert derivation_depth(E("d", "a"), EDGES, ps) is INF


def test_inf_sentinel():
    assert INF > 10**9 and not INF < 3 and INF == INF and INF != 5
    with pytest.raises(TypeError):
        INF + 1


def test_strata_table(ps):
    layers = strata(EDGES, ps)
    assert layers[0] == EDGES
    assert layers[1] == {P("a", "b"), P("a", "c"), P("b", "c"), P("c", "d")}
    assert layers[2] == {P("a", "d"), P("b", "d")}
    assert len(layers) == 3


def test_core_sender(s1, ps):
    ca = extract_core(s1, ps)
    assert ca.core == EDGES
    assert ca.atomicity == 4 and ca.max_depth == 2
    assert ca.shortcuts == s1.atoms - EDGES
    assert ca.depth_by_atom[P("a", "d")] == 2


def test_core_irredundant_input(ps):
    ca = extract_core(EDGES, ps)
    assert ca.core == EDGES and ca.max_depth == 0 and not ca.shortcuts


def test_core_receiver2(r2, ps):
    ca = extract_core(r2, ps)
    assert ca.core == {E("a", "b"), E("b", "c"), E("c", "d"), E("d", "a")}
    assert ca.max_depth == 3


def test_core_empty(ps):
    ca = extract_core(KnowledgeBase(), ps)
    assert ca.atomicity == 0 and ca.max_depth == 0


def test_core_order_dependence():
    # mutually derivable pair: the canonical scan keeps the later atom
    _, ps = parse_kb("Q(X) :- R(X). R(X) :- Q(X).")
    ca = extract_core({atom("Q", "a"), atom("R", "a")}, ps)
    assert ca.core == {atom("R", "a")}


def test_closure_fidelity(s1, r2, r2p, ps):
    f = closure_fidelity(s1, r2, ps)
    assert f == pytest.approx(3 / 7) and f.numerator == 3 and f.denominator == 7
    assert closure_fidelity(s1, s1, ps) == 1
    assert closure_fidelity(s1, r2p, ps) == 1
    assert closure_fidelity(set(), set(), ps) == 1


def test_core_preservation(s1, r2, r3, ps):
    assert core_preservation_ratio(s1, r2, ps) == pytest.approx(0.75)
    assert core_preservation_ratio(s1, s1, ps) == 1
    assert core_preservation_ratio(s1, r3, ps) == 1
    assert core_preservation_ratio(set(), {E("a", "b")}, ps) == 1


def test_perturb(s1, r2, r3):
    assert perturb(s1, set(), set()) == s1
    assert perturb(s1, {E("a", "c")}, {P("b", "d"), E("d", "a")}) == r2
    paths = {P("a", "b"), P("b", "c"), P("c", "d"), P("a", "d")}
    assert perturb(s1, paths, {P("a", "c"), P("b", "d")}) == r3


def test_perturb_errors(s1):
    with pytest.raises(PerturbationError) as ei:
        perturb(s1, {E("z", "z")}, set())
    assert ei.value.offending == (E("z", "z"),)
    with pytest.raises(PerturbationError):
        perturb(s1, set(), {E("a", "b")})


def test_herbrand_guard(monkeypatch, ps):
    big = {E(f"c{i}", f"c{i+1}") for i in range(40)}
    monkeypatch.setenv("SEMCHAN_GUARD", "100")
    with pytest.raises(HerbrandGuardError):
        closure(big, ps)
    monkeypatch.setenv("SEMCHAN_GUARD", "1e7")
    assert len(closure(big, ps)) > 40


def test_ground_atom_str():
    assert str(GroundAtom("Edge", ("a", "b"))) == "Edge(a,b)"
