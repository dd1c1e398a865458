#!/usr/bin/env python3
"""Timing smoke test: solve and decompose a 100-node, 400-edge instance."""

import pathlib
import sys
import time

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from pcnflow.cli import generate_instance
from pcnflow.cycles import decompose, validate_decomposition
from pcnflow.solver import solve_rebalancing


def main() -> int:
    instance = generate_instance(n=100, m=400, cap_max=2**20, weight_max=1, seed=11)

    t0 = time.perf_counter()
    report = solve_rebalancing(instance)
    t1 = time.perf_counter()
    dec = decompose(report.circulation)
    t2 = time.perf_counter()

    assert validate_decomposition(dec)
    print(f"objective   : {report.objective}")
    print(f"iterations  : {report.iterations}")
    print(f"solve time  : {(t1 - t0) * 1000:.1f} ms")
    print(f"decompose   : {(t2 - t1) * 1000:.1f} ms ({len(dec.cycles)} cycles)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
