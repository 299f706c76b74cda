"""Jitted fast path for complete K-ary trees.

Node state lives in flat arrays indexed by heap id (root 0, children of v are
arity*v+1 .. arity*v+arity). The recursions here mirror the generic pure-Python
path in hsb.py; agreement between the two is covered by tests.
"""

from __future__ import annotations

import math

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap

_LOG2 = math.log(2.0)


@njit(cache=True)
def _logaddexp(a: float, b: float) -> float:
    if a < b:
        a, b = b, a
    return a + math.log1p(math.exp(b - a))


@njit(cache=True)
def _row_logsumexp(row) -> float:
    mx = row[0]
    for m in range(1, row.shape[0]):
        if row[m] > mx:
            mx = row[m]
    acc = 0.0
    for m in range(row.shape[0]):
        acc += math.exp(row[m] - mx)
    return mx + math.log(acc)


@njit(cache=True)
def tree_simplex(la, lw, arity, depth, cell):
    """Arm distribution at a leaf cell via the bottom-up mixture recursion."""
    n_arms = la.shape[1]
    log_m = math.log(n_arms)
    leaf_start = (arity**depth - 1) // (arity - 1)
    node = leaf_start + cell
    g = np.empty(n_arms)
    for m in range(n_arms):
        g[m] = la[node, m] - log_m
    while node > 0:
        parent = (node - 1) // arity
        first = arity * parent + 1
        sib_sum = 0.0
        for c in range(first, first + arity):
            if c != node:
                sib_sum += lw[c]
        for m in range(n_arms):
            g[m] = _logaddexp(la[parent, m] - log_m, sib_sum + g[m]) - _LOG2
        node = parent
    root_w = lw[0]
    p = np.empty(n_arms)
    for m in range(n_arms):
        p[m] = math.exp(g[m] - root_w)
    return p


@njit(cache=True)
def pick_arm(p, u: float) -> int:
    acc = 0.0
    arm = p.shape[0] - 1
    for m in range(p.shape[0]):
        acc += p[m]
        if u < acc:
            arm = m
            break
    return arm


@njit(cache=True)
def tree_update(la, lw, arity, depth, cell, arm, delta: float):
    """Subtract delta from the chosen arm's log weight along the leaf-to-root
    path and refresh the node mixture weights bottom-up."""
    n_arms = la.shape[1]
    log_m = math.log(n_arms)
    leaf_start = (arity**depth - 1) // (arity - 1)
    node = leaf_start + cell
    la[node, arm] -= delta
    lw[node] = _row_logsumexp(la[node]) - log_m
    while node > 0:
        parent = (node - 1) // arity
        la[parent, arm] -= delta
        lsa = _row_logsumexp(la[parent]) - log_m
        first = arity * parent + 1
        group = 0.0
        for c in range(first, first + arity):
            group += lw[c]
        lw[parent] = _logaddexp(lsa, group) - _LOG2
        node = parent


@njit(cache=True)
def tree_run_bandit(la, lw, arity, depth, eta, cells, losses, us, arms_out,
                    incurred_out, probs_out, record_probs):
    """Run select+update over a whole round sequence inside compiled code.

    losses holds the full per-arm loss matrix; only the chosen entry is read
    each round, so feedback stays bandit.
    """
    horizon = cells.shape[0]
    for t in range(horizon):
        cell = cells[t]
        p = tree_simplex(la, lw, arity, depth, cell)
        arm = pick_arm(p, us[t])
        if record_probs:
            for m in range(p.shape[0]):
                probs_out[t, m] = p[m]
        loss = losses[t, arm]
        arms_out[t] = arm
        incurred_out[t] = loss
        if loss != 0.0:
            tree_update(la, lw, arity, depth, cell, arm, eta * (loss / p[arm]))


def warm_up() -> None:
    """Force compilation of all kernels (first call pays the jit cost)."""
    la = np.zeros((3, 2))
    lw = np.zeros(3)
    p = tree_simplex(la, lw, 2, 1, 0)
    pick_arm(p, 0.5)
    tree_update(la, lw, 2, 1, 0, 0, 0.1)
    tree_run_bandit(
        la, lw, 2, 1, 0.1,
        np.zeros(1, dtype=np.int64), np.full((1, 2), 0.5), np.full(1, 0.5),
        np.zeros(1, dtype=np.int64), np.zeros(1), np.zeros((1, 2)), True,
    )
