"""Command-line front end.

Exit codes: 0 ok, 1 usage, 2 parse error, 3 size guard exceeded,
4 golden mismatch in ``example``.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from pathlib import Path

from ._guards import GuardExceeded
from .coding import CoreLossError, build_two_layer_code, converse_check, results_to_csv, simulate
from .distortions import distortion_matrix
from .invariants import compute_invariants, shannon_capacity
from .kb import (INF, KBSyntaxError, RangeRestrictionError, closure_fidelity, core_preservation_ratio,
                 extract_core, parse_kb)
from .kernels import load_channel_config
from .multiagent import blocklengths, broadcast_analysis, feasibility, overlap

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_GUARD, EXIT_GOLDEN = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class ConfigParseError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


@dataclass(frozen=True)
class RunConfig:
    command: str
    kb: Path | None
    receivers: tuple
    channel: Path | None
    fmt: str
    seed: int
    trials: int
    n: tuple
    tol: float


def _fmt(x):
    if isinstance(x, Fraction):
        return f"{x} ({float(x):.3f})"
    if isinstance(x, float):
        return f"{x:.3f}"
    if x is None:
        return "-"
    return str(x)


def _json_default(x):
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, (set, frozenset)):
        return sorted(map(str, x))
    if x is INF:
        return None
    return str(x)


def _read_kb(path):
    if path is None:
        raise UsageError("--kb is required")
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"no such KB file: {p}")
    return parse_kb(p.read_text(encoding="utf-8"))


def _read_channel(path):
    if path is None:
        raise UsageError("--channel is required")
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"no such channel file: {p}")
    try:
        return load_channel_config(p)
    except (ValueError, KeyError, TypeError) as e:
        raise ConfigParseError(f"{p}: {e}") from None


def _receivers(cfg: RunConfig, need_one=False):
    if not cfg.receivers:
        raise UsageError("at least one --receiver is required")
    if need_one and len(cfg.receivers) != 1:
        raise UsageError("exactly one --receiver is expected")
    return [_read_kb(r)[0] for r in cfg.receivers]


def _table(rows, header) -> str:
    cells = [[_fmt(c) for c in r] for r in rows]
    widths = [max(len(h), *(len(r[i]) for r in cells)) if cells else len(h) for i, h in enumerate(header)]
    line = lambda r: "  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip()
    return "\n".join([line(header), line(["-" * w for w in widths]), *map(line, cells)]) + "\n"


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([str(c) if isinstance(c, Fraction) else c for c in r])
    return buf.getvalue()


def _emit(cfg, payload, rows=None, header=None):
    if cfg.fmt == "json":
        return json.dumps(payload, indent=2, default=_json_default) + "\n"
    if cfg.fmt == "csv":
        return _csv(rows, header)
    return _table(rows, header)


# ---------------------------------------------------------------- commands


def cmd_analyze(cfg):
    kb, ps = _read_kb(cfg.kb)
    ca = extract_core(kb, ps)
    payload = {
        "core": ca.core, "shortcuts": ca.shortcuts, "atomicity": ca.atomicity,
        "max_depth": ca.max_depth,
        "strata": [sorted(map(str, layer)) for layer in ca.strata],
        "depth_by_atom": {str(a): d for a, d in sorted(ca.depth_by_atom.items())},
    }
    rows = [[str(a), d, "core" if a in ca.core else "shortcut"] for a, d in sorted(ca.depth_by_atom.items())]
    if cfg.fmt == "text":
        head = f"atomicity A = {ca.atomicity}\nmax depth D_d = {ca.max_depth}\n"
        strata = "".join(f"T{i}: {', '.join(sorted(map(str, layer)))}\n" for i, layer in enumerate(ca.strata))
        return head + strata + _table(rows, ["atom", "depth", "role"])
    return _emit(cfg, payload, rows, ["atom", "depth", "role"])


def cmd_overlap(cfg):
    kb, ps = _read_kb(cfg.kb)
    rows, payload = [], []
    for path, r in zip(cfg.receivers, _receivers(cfg)):
        ov = overlap(kb, r, ps)
        fe = feasibility(kb, r, ps)
        rho, fcn = core_preservation_ratio(kb, r, ps), closure_fidelity(kb, r, ps)
        rows.append([str(path), *ov.counts(), rho, fcn, fe.f1_strong, fe.f2])
        payload.append({"receiver": str(path), **ov.to_dict(), **fe.to_dict(),
                        "rho_atom": rho, "f_cn": fcn, "rho_atom_float": float(rho), "f_cn_float": float(fcn)})
    header = ["receiver", "S_common", "S_lost", "S_surplus", "A_common", "A_lost",
              "S_surplus_d", "S_surplus_n", "rho_atom", "F_Cn", "H1", "H2"]
    return _emit(cfg, payload, rows, header)


def cmd_invariants(cfg):
    kb, ps = _read_kb(cfg.kb)
    chan = _read_channel(cfg.channel)
    reports = [(p, compute_invariants(kb, r, ps, chan, tol=cfg.tol)) for p, r in zip(cfg.receivers, _receivers(cfg))]
    if cfg.fmt == "json":
        return json.dumps([{"receiver": str(p), **rep.to_dict()} for p, rep in reports], indent=2) + "\n"
    if cfg.fmt == "csv":
        parts = [rep.to_csv().splitlines() for _, rep in reports]
        return "\n".join(["receiver," + parts[0][0]] + [f"{p},{lines[1]}" for (p, _), lines in zip(reports, parts)]) + "\n"
    names = ["atomicity", "max_depth", "rho_atom", "f_cn", "phi_atom", "psi_plus", "fidelity_index",
             "depth_expansion", "delta_A", "delta_Dd", "shannon_capacity", "semantic_capacity",
             "semantic_capacity_provenance", "semantic_mi", "fano_lower"]
    rows = [[k, *(getattr(rep, k) for _, rep in reports)] for k in names]
    return _table(rows, ["invariant", *(str(p) for p, _ in reports)])


def cmd_capacity(cfg):
    chan = _read_channel(cfg.channel)
    c = shannon_capacity(chan.carrier, cfg.tol)
    if cfg.fmt == "json":
        return json.dumps({"capacity_bits": c}) + "\n"
    if cfg.fmt == "csv":
        return f"capacity_bits\n{c!r}\n"
    return f"C(W) = {c:.3f} bits\n"


def cmd_simulate(cfg):
    kb, ps = _read_kb(cfg.kb)
    (r,) = _receivers(cfg, need_one=True)
    w = _read_channel(cfg.channel).carrier
    results, checks = [], []
    for n in cfg.n:
        code = build_two_layer_code(kb, r, w, n, cfg.seed, ps)
        res = simulate(code, w, cfg.trials, cfg.seed)
        results.append(res)
        checks.append(converse_check(code, w, min(res.p_e_hat, 1 - 1e-12)))
    if cfg.fmt == "csv":
        return results_to_csv(results)
    payload = [{"n": s.n, "trials": s.trials, "p_e": s.p_e_hat, "p_e_cn": s.p_e_cn_hat,
                "ci": s.ci_halfwidth, "seed": s.seed, "converse_slack": c.slack,
                "redundant_closure_errors": s.redundant_closure_errors} for s, c in zip(results, checks)]
    rows = [[s.n, s.trials, s.p_e_hat, s.p_e_cn_hat, s.ci_halfwidth, c.slack] for s, c in zip(results, checks)]
    return _emit(cfg, payload, rows, ["n", "trials", "p_e", "p_e_cn", "ci", "converse_slack"])


def cmd_broadcast(cfg):
    kb, ps = _read_kb(cfg.kb)
    rs = _receivers(cfg)
    c = shannon_capacity(_read_channel(cfg.channel).carrier, cfg.tol)
    rep = broadcast_analysis(kb, rs, c, ps)
    if cfg.fmt == "json":
        return rep.to_json(indent=2) + "\n"
    if cfg.fmt == "csv":
        return rep.to_csv()
    rows = [[str(cfg.receivers[s.index]), s.bottleneck, s.f_cn, s.compliant] for s in rep.receivers]
    tail = f"n_bc = {_fmt(rep.n_broadcast)}" + (f" ({rep.reason})" if rep.reason else "") + "\n"
    return _table(rows, ["receiver", "bottleneck", "F_Cn", "compliant"]) + tail


def cmd_distortion(cfg, kind):
    kb, ps = _read_kb(cfg.kb)
    (r,) = _receivers(cfg, need_one=True)
    d = distortion_matrix(kind, kb, r, ps)
    if cfg.fmt == "json":
        return json.dumps({"kind": kind, "rows": [str(a) for a in d.rows], "cols": [str(a) for a in d.cols],
                           "values": d.values.tolist()}) + "\n"
    return d.to_csv()


# ------------------------------------------------------------------ example

_EXAMPLE = ("receiver2", "receiver2prime", "receiver3")


def _data(name) -> str:
    return resources.files("semchan").joinpath("data", name).read_text(encoding="utf-8")


def example_tables():
    """Overlap, invariant and blocklength tables for the bundled example."""
    sender, ps = parse_kb(_data("sender.kb"))
    chan = load_channel_config(json.loads(_data("channel.json")))
    recv = {k: parse_kb(_data(f"{k}.kb"))[0] for k in _EXAMPLE}
    c = shannon_capacity(chan.carrier)
    ov, inv, bl = {}, {}, {}
    for k, r in recv.items():
        ov[k] = {"counts": list(overlap(sender, r, ps).counts()),
                 "rho_atom": str(core_preservation_ratio(sender, r, ps)),
                 "f_cn": str(closure_fidelity(sender, r, ps))}
        rep = compute_invariants(sender, r, ps, chan)
        inv[k] = {"phi_atom": rep.phi_atom, "psi_plus": rep.psi_plus, "fidelity_index": rep.fidelity_index,
                  "depth_expansion": rep.depth_expansion, "semantic_mi": rep.semantic_mi,
                  "shannon_capacity": rep.shannon_capacity, "semantic_capacity": rep.semantic_capacity,
                  "delta_A": rep.delta_A, "delta_Dd": rep.delta_Dd}
        b = blocklengths(sender, r, c, ps)
        bl[k] = b.to_dict()
    core = extract_core(sender, ps)
    return {"sender": {"atomicity": core.atomicity, "max_depth": core.max_depth},
            "overlap": ov, "invariants": inv, "blocklengths": bl}


def golden_mismatches(tables, golden, tol=5e-4) -> list[str]:
    out = []
    for k, v in golden["sender"].items():
        if tables["sender"][k] != v:
            out.append(f"sender.{k}: {tables['sender'][k]} != {v}")
    for r, exp in golden["overlap"].items():
        for k, v in exp.items():
            if tables["overlap"][r][k] != v:
                out.append(f"overlap.{r}.{k}: {tables['overlap'][r][k]} != {v}")
    for r, exp in golden["invariants"].items():
        for k, v in exp.items():
            got = tables["invariants"][r][k]
            if not math.isclose(got, v, abs_tol=tol):
                out.append(f"invariants.{r}.{k}: {got:.6g} != {v}")
    for r, exp in golden["blocklengths"].items():
        for k, v in exp.items():
            got = tables["blocklengths"][r][k]
            bad = (got != v) if (v is None or isinstance(v, str) or got is None) else not math.isclose(got, v, abs_tol=tol)
            if bad:
                out.append(f"blocklengths.{r}.{k}: {got} != {v}")
    return out


def cmd_example(cfg):
    tables = example_tables()
    golden = json.loads(_data("golden.json"))
    bad = golden_mismatches(tables, golden)
    if cfg.fmt == "json":
        text = json.dumps({**tables, "mismatches": bad}, indent=2) + "\n"
    else:
        ov_rows, inv_rows, bl_rows = [], [], []
        for k in _EXAMPLE:
            o = tables["overlap"][k]
            ov_rows.append([k, *o["counts"], o["rho_atom"], o["f_cn"]])
            i = tables["invariants"][k]
            inv_rows.append([k, *i.values()])
            b = tables["blocklengths"][k]
            bl_rows.append([k, b["n_hamming"] if b["n_hamming"] is not None else b["hamming_reason"],
                            b["n_closure"] if b["n_closure"] is not None else b["closure_reason"], b["ratio"]])
        ov_h = ["receiver", "S_common", "S_lost", "S_surplus", "A_common", "A_lost",
                "S_surplus_d", "S_surplus_n", "rho_atom", "F_Cn"]
        inv_h = ["receiver", *next(iter(tables["invariants"].values())).keys()]
        bl_h = ["receiver", "n_H", "n_Cn", "ratio"]
        render = _csv if cfg.fmt == "csv" else _table
        text = "\n".join([render(ov_rows, ov_h), render(inv_rows, inv_h), render(bl_rows, bl_h)])
        text += "".join(f"MISMATCH {m}\n" for m in bad) or ("" if cfg.fmt == "csv" else "all golden cells match\n")
    return text, (EXIT_GOLDEN if bad else EXIT_OK)


# --------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--kb", help="sender KB file")
    common.add_argument("--receiver", action="append", default=[], help="receiver KB file (repeatable)")
    common.add_argument("--channel", help="channel config (JSON)")
    common.add_argument("--format", choices=("json", "csv", "text"), default="text")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--trials", type=int, default=100_000)
    common.add_argument("--n", default="1,2,3,4", help="blocklength(s), comma separated")
    common.add_argument("--tol", type=float, default=1e-9, help="Blahut-Arimoto duality gap")
    p = _Parser(prog="semchan", description="Semantic channel analysis for ground Datalog KBs.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, hlp in [("analyze", "core, strata and depth of one KB"),
                      ("overlap", "overlap decomposition against receivers"),
                      ("invariants", "all invariant families per receiver"),
                      ("capacity", "carrier capacity"),
                      ("simulate", "Monte Carlo two-layer code"),
                      ("broadcast", "broadcast feasibility and blocklength"),
                      ("example", "reproduce the bundled example tables")]:
        sub.add_parser(name, parents=[common], help=hlp)
    d = sub.add_parser("distortion", parents=[common], help="distortion matrix as CSV")
    d.add_argument("--kind", choices=("hamming", "closure", "depth"), default="closure")
    return p


def _config(ns) -> RunConfig:
    try:
        n = tuple(int(x) for x in str(ns.n).split(",") if x.strip())
    except ValueError:
        raise UsageError(f"bad --n value {ns.n!r}") from None
    if not n or min(n) < 1:
        raise UsageError("--n needs positive blocklengths")
    if ns.trials < 1:
        raise UsageError("--trials must be positive")
    if not ns.tol > 0:
        raise UsageError("--tol must be positive")
    return RunConfig(ns.command, Path(ns.kb) if ns.kb else None, tuple(ns.receiver),
                     Path(ns.channel) if ns.channel else None, ns.format, ns.seed, ns.trials, n, ns.tol)


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        cfg = _config(ns)
        if cfg.command == "example":
            text, code = cmd_example(cfg)
        elif cfg.command == "distortion":
            text, code = cmd_distortion(cfg, ns.kind), EXIT_OK
        else:
            text, code = globals()[f"cmd_{cfg.command}"](cfg), EXIT_OK
    except UsageError as e:
        print(f"semchan: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (KBSyntaxError, RangeRestrictionError, ConfigParseError) as e:
        print(f"semchan: parse error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except GuardExceeded as e:
        print(f"semchan: guard exceeded: {e}", file=sys.stderr)
        return EXIT_GUARD
    except (CoreLossError, ValueError, KeyError) as e:
        print(f"semchan: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
