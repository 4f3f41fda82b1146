"""Time the compiled and pure-Python kernels on the bundled DecARt leg.

Usage: python3 benchmarks/bench_backends.py [--repeat N]

Reports microseconds per call for the per-step kernels and the QP solve,
and the wall time of one full FAST scan with each backend.
"""
import argparse
import time

import numpy as np

from fastbench import decart, kernels, metric, tsid
from fastbench.dynamics import GRAVITY, JointState, compute_quantities
from fastbench.trajectory import compute_geometry


def _time(fn, repeat):
    fn()
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - t0) / repeat * 1e6


def _scan_seconds(model, geometry, kb):
    # route the whole pipeline through one backend
    saved = kernels.backend
    kernels.backend = kb
    try:
        t0 = time.perf_counter()
        result = metric.compute_fast(model, geometry, options=metric.FastOptions(0.05, 0.3, 0.01, workers=1))
        return time.perf_counter() - t0, result.fastest_time
    finally:
        kernels.backend = saved


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=2000)
    args = ap.parse_args()

    model = decart.load_variant(decart.DecartLegParams(), "decoupled")
    tree = model.tree
    rng = np.random.default_rng(0)
    q = rng.uniform(-0.5, 0.5, tree.nq)
    v = rng.normal(size=tree.nq)
    a = rng.normal(size=tree.nq)
    foot = model.frame_index(model.foot_frame)
    state = JointState(rng.uniform(-0.3, 0.3, model.independent_dof), rng.normal(size=model.independent_dof))
    geometry = compute_geometry(model)
    ref = tsid.FootReference(geometry.to_world(geometry.start), np.zeros(3), np.zeros(3))
    problem = tsid.formulate(model, state, ref, quantities=compute_quantities(model, state))
    H, g, C, d = problem.hessian, problem.gradient, problem.constraint_matrix, problem.constraint_bound

    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled extension not built; timing the Python kernels only")
    cases = {
        "placements": lambda kb: kb.placements(tree, q),
        "rnea": lambda kb: kb.rnea(tree, q, v, a, GRAVITY),
        "crba": lambda kb: kb.crba(tree, q),
        "jacobian": lambda kb: kb.jacobian(tree, q, foot),
        "dynamics_terms": lambda kb: kb.dynamics_terms(tree, q, v, foot, GRAVITY),
        "solve_qp": lambda kb: kb.solve_qp(H, g, C, d),
    }
    names = list(backends)
    print(f"{'kernel':<16}" + "".join(f"{n + ' (us)':>16}" for n in names) + ("   speedup" if len(names) > 1 else ""))
    for case, fn in cases.items():
        times = [_time(lambda kb=backends[n]: fn(kb), args.repeat) for n in names]
        line = f"{case:<16}" + "".join(f"{t:16.1f}" for t in times)
        if len(times) > 1:
            line += f"   {times[0] / times[1]:7.1f}x"
        print(line)
    for n in names:
        secs, fast = _scan_seconds(model, geometry, backends[n])
        print(f"FAST scan [{n}]: {secs:.2f} s (FAST = {fast} s)")


if __name__ == "__main__":
    main()
