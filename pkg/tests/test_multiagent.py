import json
import math
from fractions import Fraction

import pytest

from conftest import E, P
from semchan.kb import atom, closure_fidelity, core_preservation_ratio, extract_core, parse_kb
from semchan.multiagent import (
    CLOSURE_INFEASIBLE,
    VOCABULARY_LOSS,
    blocklengths,
    broadcast_analysis,
    feasibility,
    min_vocabulary,
    overlap,
)

C = 2.5359400011538504


def test_overlap_counts(s1, r2, r2p, r3, ps):
    assert overlap(s1, r2, ps).counts() == (7, 1, 2, 3, 1, 1, 1)
    assert overlap(s1, r2p, ps).counts() == (8, 0, 1, 4, 0, 1, 0)
    assert overlap(s1, r3, ps).counts() == (4, 4, 2, 4, 0, 2, 0)
    same = overlap(s1, s1, ps)
    assert not same.lost and not same.surplus


def test_overlap_sets(s1, r2, ps):
    ov = overlap(s1, r2, ps)
    assert ov.lost_core == {E("a", "c")}
    assert ov.derivable_surplus == {P("b", "d")} and ov.nonderivable_surplus == {E("d", "a")}
    d = json.loads(json.dumps(ov.to_dict()))
    assert d["n_lost_core"] == 1 and d["lost_core"] == ["Edge(a,c)"]


def test_transposition(s1, r2, r3, ps):
    for r in (r2, r3):
        a, b = overlap(s1, r, ps), overlap(r, s1, ps)
        assert a.lost == b.surplus and a.surplus == b.lost


def test_feasibility(s1, r2, r3, ps):
    f = feasibility(s1, r2, ps)
    assert not f.f1_strong and not f.f2 and not f.closure_fidelity_one
    assert closure_fidelity(s1, r2, ps) < 1
    f3 = feasibility(s1, r3, ps)
    assert f3.f1 and f3.f1_strong and f3.f2 and f3.closure_fidelity_one
    fv = feasibility(s1, min_vocabulary(s1, ps), ps)
    assert fv.f1 and fv.f1_strong and fv.f2 and fv.closure_fidelity_one


def test_blocklengths(s1, r2, r2p, r3, ps):
    b = blocklengths(s1, r2p, C, ps)
    assert b.n_hamming == pytest.approx(1.183, abs=1e-3)
    assert b.n_closure == pytest.approx(0.789, abs=1e-3)
    assert b.ratio == pytest.approx(0.667, abs=1e-3)
    assert abs(b.ratio - math.log2(4) / math.log2(8)) <= 1e-9
    b2 = blocklengths(s1, r2, C, ps)
    assert b2.n_closure is None and b2.closure_reason == CLOSURE_INFEASIBLE
    b3 = blocklengths(s1, r3, C, ps)
    assert b3.n_hamming is None and b3.hamming_reason == VOCABULARY_LOSS and b3.n_closure is not None
    with pytest.raises(ValueError):
        blocklengths(s1, r3, 0.0, ps)


def test_blocklength_irredundant(ps):
    edges = {E("a", "b"), E("b", "c")}
    assert blocklengths(edges, edges, C, ps).ratio == 1


def test_blocklength_weak_f1(ps):
    # a core atom that the receiver can derive but does not store
    _, ps2 = parse_kb("Q(X) :- R(X). R(X) :- Q(X).")
    sender = {atom("R", "a"), atom("S", "b")}
    recv = {atom("Q", "a"), atom("S", "b")}
    f = feasibility(sender, recv, ps2)
    assert f.f1 and not f.f1_strong and f.closure_fidelity_one
    b = blocklengths(sender, recv, C, ps2)
    assert b.n_closure is None and b.closure_reason == VOCABULARY_LOSS


def test_min_vocabulary(s1, ps):
    v = min_vocabulary(s1, ps)
    assert v == {E("a", "b"), E("a", "c"), E("b", "c"), E("c", "d")}
    assert len(v) == extract_core(s1, ps).atomicity
    assert min_vocabulary(v, ps) == v


def test_rho_from_overlap(s1, r2, r2p, r3, ps):
    for r in (r2, r2p, r3):
        ov = overlap(s1, r, ps)
        a = len(ov.preserved_core) + len(ov.lost_core)
        assert core_preservation_ratio(s1, r, ps) == 1 - Fraction(len(ov.lost_core), a)


def test_broadcast(s1, r2, r3, ps):
    rep = broadcast_analysis(s1, [r2, r3], C, ps)
    assert rep.bottlenecks == (0,)
    assert rep.receivers[0].f_cn < 1 and not rep.receivers[1].bottleneck
    assert rep.n_broadcast == pytest.approx(0.789, abs=1e-3)
    five = broadcast_analysis(s1, [r2] + [r3] * 5, C, ps)
    assert five.n_broadcast == rep.n_broadcast
    one = broadcast_analysis(s1, [r3], C, ps)
    assert one.n_broadcast == rep.n_broadcast
    assert json.loads(rep.to_json())["bottlenecks"] == [0]
    assert rep.to_csv().splitlines()[0].startswith("receiver,f1")


def test_broadcast_classical(s1, ps):
    rep = broadcast_analysis(s1, [s1, s1], C, ps)
    assert rep.bottlenecks == () and all(r.compliant and r.f_cn == 1 for r in rep.receivers)


def test_broadcast_all_bottleneck(s1, r2, ps):
    rep = broadcast_analysis(s1, [r2], C, ps)
    assert rep.n_broadcast is None and rep.reason == CLOSURE_INFEASIBLE
    with pytest.raises(ValueError):
        broadcast_analysis(s1, [], C, ps)
