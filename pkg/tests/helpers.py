"""Cached solves shared by every test module, and the acceptance log."""

from functools import lru_cache

import numpy as np

import choquard as cq
from choquard.continuation import h1_distance

ACCEPTANCE = []


def record(criterion: int, title: str, ok: bool, detail: str = "") -> bool:
    ACCEPTANCE.append((criterion, title, bool(ok), detail))
    print(f"[criterion {criterion:2d}] {'PASS' if ok else 'FAIL'} {title} {detail}")
    return bool(ok)


@lru_cache(maxsize=None)
def state(p: float, N: float = 1.0, method: str = "flow", initial: str = "gaussian"):
    return cq.solve(p, N, method=method, initial=initial)


@lru_cache(maxsize=None)
def sweep_records(p_from=2.0, p_to=2.25, steps=11):
    return tuple(cq.sweep(p_from, p_to, steps))


@lru_cache(maxsize=None)
def nondegeneracy(p: float):
    return cq.nondegeneracy_report(state(p))


def sup_rel(a, b) -> float:
    return float(np.max(np.abs(a.values - b.values)) / np.max(np.abs(a.values)))


def h1_to_anchor(p: float) -> float:
    return h1_distance(state(p), state(2.0))
