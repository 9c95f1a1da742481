"""Compare the compiled and numpy simulation backends.

    python3 benchmarks/bench_backends.py [--trials 20000] [--repeat 5]
"""
import argparse
import json
import time

from semchan import _backend
from semchan.cli import _data
from semchan.coding import build_two_layer_code, simulate
from semchan.kb import parse_kb
from semchan.kernels import q_symmetric_channel


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    sender, ps = parse_kb(_data("sender.kb"))
    receiver, _ = parse_kb(_data("receiver2prime.kb"))
    w = q_symmetric_channel(10, 0.1)
    names = ["numpy"] + (["cython"] if _backend.COMPILED is not None else [])
    rows = []
    for n in (1, 2, 4, 8):
        code = build_two_layer_code(sender, receiver, w, n, 0, ps)
        timing, results = {}, {}
        for name in names:
            timing[name], results[name] = best_of(lambda: simulate(code, w, args.trials, 0, backend=name), args.repeat)
        if len(names) == 2:
            a, b = results["numpy"], results["cython"]
            assert a.hamming_errors == b.hamming_errors and a.closure_errors == b.closure_errors
        row = {"n": n, **{f"{k}_s": round(v, 4) for k, v in timing.items()}}
        if len(names) == 2:
            row["speedup"] = round(timing["numpy"] / timing["cython"], 2)
        rows.append(row)
        print(json.dumps(row))
    if len(names) == 1:
        print("compiled backend not built; only numpy timed")
    return rows


if __name__ == "__main__":
    main()
