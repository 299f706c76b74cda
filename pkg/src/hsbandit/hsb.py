"""Hierarchical exponential-weights learner over a splitting structure.

Every node keeps one log weight per arm (all starting at log 1 = 0) plus a
cached node mixture weight log_w. Selection computes, bottom-up over the nodes
containing the current cell, the per-arm share gamma of each node's mixture
weight; the root's gamma normalized by the root's w is the sampling simplex.
Updates importance-weight the observed loss by the chosen arm's probability and
touch only the nodes containing the cell.

All weights are held in natural-log domain and combined with log-sum-exp.
"""

from __future__ import annotations

import io
import json
import math

import numpy as np

from . import _kernels
from .decision import AlternationGuard, ArmDecision, check_loss, sample_arm
from .errors import ConfigError, DomainError, SnapshotFormatError
from .structures import Structure, UniformTreeStructure

_SNAPSHOT_VERSION = 1


def optimal_eta(psi: int, hs: int, a_r: int, num_arms: int, horizon: int) -> float:
    """Learning rate minimizing the regret bound of the structured mixture.

    sqrt(2 * psi * (a_r + 1) * ln((hs + 1) * num_arms) / (num_arms * horizon)).
    """
    if psi < 1:
        raise DomainError(f"psi must be >= 1, got {psi}")
    if hs < 0:
        raise DomainError(f"hs must be >= 0, got {hs}")
    if a_r < 0:
        raise DomainError(f"a_r must be >= 0, got {a_r}")
    if num_arms < 1:
        raise DomainError(f"num_arms must be >= 1, got {num_arms}")
    if horizon < 1:
        raise DomainError(f"horizon must be >= 1, got {horizon}")
    log_term = math.log((hs + 1) * num_arms)
    if log_term <= 0.0:
        raise DomainError(
            f"(hs+1)*num_arms = {(hs + 1) * num_arms} leaves no room to learn"
        )
    return math.sqrt(2.0 * psi * (a_r + 1) * log_term / (num_arms * horizon))


class HsbLearner(AlternationGuard):
    """Bandit learner whose policy class is the structure's mapping family.

    Complete K-ary trees run on jitted flat-array kernels when numba is
    available; every other structure (and force_generic=True) uses the generic
    pure-Python path driven by Structure.routing.
    """

    def __init__(self, structure: Structure, num_arms: int, eta: float,
                 force_generic: bool = False):
        super().__init__()
        if num_arms < 2:
            raise ConfigError(f"need at least 2 arms, got {num_arms}")
        if not (eta > 0.0 and math.isfinite(eta)):
            raise DomainError(f"eta must be positive and finite, got {eta}")
        declared = structure.params.detail.get("arm_count")
        if declared is not None and declared != num_arms:
            raise ConfigError(
                f"structure was built for {declared} arms, learner has {num_arms}"
            )
        self.structure = structure
        self.grid = structure.grid
        self.num_arms = int(num_arms)
        self.eta = float(eta)
        self.t = 1
        self.last_select_touch = 0
        self.last_update_touch = 0
        self.last_update_nodes: tuple[int, ...] | None = None
        self._log_m = math.log(self.num_arms)

        self._kernel = (
            not force_generic
            and _kernels.HAVE_NUMBA
            and isinstance(structure, UniformTreeStructure)
        )
        if self._kernel:
            self._arity = structure.arity
            self._depth = structure.depth
            self._la = np.zeros((structure.node_count, self.num_arms))
            self._lw = np.zeros(structure.node_count)
        else:
            self._la_map: dict[int, list[float]] = {}
            self._lw_map: dict[int, float] = {}

    # -- selection ---------------------------------------------------------

    def simplex_at(self, cell: int) -> np.ndarray:
        """Current arm distribution for a cell, without sampling."""
        if self._kernel:
            return _kernels.tree_simplex(
                self._la, self._lw, self._arity, self._depth, int(cell)
            )
        return self._simplex_generic(int(cell))

    def select_arm(self, context, rng) -> ArmDecision:
        cell = self.grid.cell_of(context)
        if self._kernel:
            p = _kernels.tree_simplex(self._la, self._lw, self._arity,
                                      self._depth, cell)
            self.last_select_touch = self._depth + 1
            arm = int(_kernels.pick_arm(p, rng.random()))
        else:
            p = self._simplex_generic(cell)
            self.last_select_touch = len(self.structure.routing(cell))
            arm = sample_arm(p, rng)
        return self._issue(ArmDecision(arm, cell, p))

    # Uniform algorithm protocol used by the harnesses.
    select = select_arm

    def _simplex_generic(self, cell: int) -> np.ndarray:
        la = self._la_map
        lw = self._lw_map
        n_arms = self.num_arms
        log_m = self._log_m
        zeros = [0.0] * n_arms
        gamma: dict[int, list[float]] = {}
        steps = self.structure.routing(cell)
        for nid, groups in steps:
            row = la.get(nid, zeros)
            g = [x - log_m for x in row]
            if groups:
                for child, siblings in groups:
                    sib_sum = 0.0
                    for s in siblings:
                        sib_sum += lw.get(s, 0.0)
                    child_g = gamma[child]
                    for m in range(n_arms):
                        g[m] = _logaddexp(g[m], sib_sum + child_g[m])
                norm = math.log(len(groups) + 1)
                for m in range(n_arms):
                    g[m] -= norm
            gamma[nid] = g
        root_id, _ = steps[-1]
        root_w = lw.get(root_id, 0.0)
        return np.array([math.exp(x - root_w) for x in gamma[root_id]])

    # -- feedback ----------------------------------------------------------

    def update(self, decision: ArmDecision, loss) -> None:
        """Importance-weighted exponential update along the containment chain."""
        self._consume(decision)
        loss = check_loss(loss)
        cell = decision.cell
        p_arm = decision.chosen_probability
        if not p_arm > 0.0:
            raise DomainError(f"decision probability {p_arm} is not positive")
        delta = self.eta * (loss / p_arm)
        if self._kernel:
            self.last_update_touch = self._depth + 1
            self.last_update_nodes = None
            if delta != 0.0:
                _kernels.tree_update(
                    self._la, self._lw, self._arity, self._depth, cell,
                    decision.arm, delta,
                )
        else:
            self._update_generic(cell, decision.arm, delta)
        self.t += 1

    def _update_generic(self, cell: int, arm: int, delta: float) -> None:
        steps = self.structure.routing(cell)
        self.last_update_touch = len(steps)
        self.last_update_nodes = tuple(nid for nid, _ in steps)
        if delta == 0.0:  # zero loss leaves every weight untouched
            return
        la = self._la_map
        lw = self._lw_map
        n_arms = self.num_arms
        log_m = self._log_m
        for nid, groups in steps:
            row = la.get(nid)
            if row is None:
                row = la[nid] = [0.0] * n_arms
            row[arm] -= delta
            acc = _logsumexp_list(row) - log_m
            if groups:
                for child, siblings in groups:
                    term = lw.get(child, 0.0)
                    for s in siblings:
                        term += lw.get(s, 0.0)
                    acc = _logaddexp(acc, term)
                acc -= math.log(len(groups) + 1)
            lw[nid] = acc

    # -- batch driver ------------------------------------------------------

    def run_bandit_rounds(self, cells, loss_matrix, rng, record_probs=False):
        """Play select/update over a full round sequence.

        cells: int array (T,) of pre-quantized contexts. loss_matrix: (T, M)
        full loss table; only the chosen arm's entry is ever read. Returns
        (arms, incurred_losses, probs-or-None). Uses the jitted whole-run loop
        on tree structures, an equivalent Python loop otherwise.
        """
        cells = np.ascontiguousarray(cells, dtype=np.int64)
        loss_matrix = np.ascontiguousarray(loss_matrix, dtype=np.float64)
        horizon = len(cells)
        if loss_matrix.shape != (horizon, self.num_arms):
            raise DomainError(
                f"loss matrix shape {loss_matrix.shape} does not match "
                f"({horizon}, {self.num_arms})"
            )
        self._pending = None
        us = rng.random(horizon)
        arms = np.zeros(horizon, dtype=np.int64)
        incurred = np.zeros(horizon)
        probs = np.zeros((horizon if record_probs else 0, self.num_arms))
        if self._kernel:
            _kernels.tree_run_bandit(
                self._la, self._lw, self._arity, self._depth, self.eta,
                cells, loss_matrix, us, arms, incurred, probs, record_probs,
            )
            self.t += horizon
            self.last_select_touch = self.last_update_touch = self._depth + 1
        else:
            for i in range(horizon):
                cell = int(cells[i])
                p = self._simplex_generic(cell)
                arm = sample_arm_with(p, us[i])
                if record_probs:
                    probs[i] = p
                loss = loss_matrix[i, arm]
                arms[i] = arm
                incurred[i] = loss
                delta = self.eta * (loss / p[arm]) if loss != 0.0 else 0.0
                self._update_generic(cell, arm, delta)
                self.t += 1
        return arms, incurred, (probs if record_probs else None)

    # -- verification helpers ---------------------------------------------

    def recompute_log_w(self, node_id: int) -> float:
        """Mixture weight of a node recomputed from raw arm weights only.

        Ignores the cached log_w values, so it certifies that the incremental
        maintenance agrees with the defining recursion.
        """
        memo: dict[int, float] = {}

        def rec(nid):
            if nid in memo:
                return memo[nid]
            row = self._get_row(nid)
            acc = _logsumexp_list(row) - self._log_m
            groups = self.structure.child_groups_of(nid)
            if groups:
                for group in groups:
                    term = 0.0
                    for child in group:
                        term += rec(child)
                    acc = _logaddexp(acc, term)
                acc -= math.log(len(groups) + 1)
            memo[nid] = acc
            return acc

        return rec(node_id)

    def log_w(self, node_id: int) -> float:
        """Cached mixture weight of a node (0.0 for never-touched nodes)."""
        if self._kernel:
            return float(self._lw[node_id])
        return self._lw_map.get(node_id, 0.0)

    def _get_row(self, nid) -> list[float]:
        if self._kernel:
            return [float(x) for x in self._la[nid]]
        return list(self._la_map.get(nid, [0.0] * self.num_arms))

    # -- snapshots ---------------------------------------------------------

    def _fingerprint(self) -> dict:
        return {
            "kind": self.structure.params.kind,
            "node_count": self.structure.node_count,
            "splits_per_dim": list(self.grid.splits_per_dim),
            "num_arms": self.num_arms,
        }

    def snapshot(self) -> bytes:
        """Serialize weights and the round counter to a self-describing blob."""
        if self._kernel:
            touched = np.flatnonzero(
                (self._la != 0.0).any(axis=1) | (self._lw != 0.0)
            )
            ids = touched.astype(np.int64)
            la = self._la[touched]
            lw = self._lw[touched]
        else:
            keys = sorted(set(self._la_map) | set(self._lw_map))
            ids = np.array(keys, dtype=np.int64)
            la = np.array(
                [self._la_map.get(k, [0.0] * self.num_arms) for k in keys]
            ).reshape(len(keys), self.num_arms)
            lw = np.array([self._lw_map.get(k, 0.0) for k in keys])
        meta = {
            "version": _SNAPSHOT_VERSION,
            "t": self.t,
            "eta": self.eta,
            "fingerprint": self._fingerprint(),
        }
        buf = io.BytesIO()
        np.savez(
            buf,
            meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8),
            ids=ids,
            la=la,
            lw=lw,
        )
        return buf.getvalue()

    def load_snapshot(self, blob: bytes) -> None:
        """Restore weights from snapshot(); behavior afterwards is identical."""
        try:
            with np.load(io.BytesIO(blob)) as data:
                meta = json.loads(bytes(data["meta"]).decode())
                ids = data["ids"]
                la = data["la"]
                lw = data["lw"]
        except (KeyError, ValueError, OSError) as exc:
            raise SnapshotFormatError(f"unreadable snapshot: {exc}") from exc
        if meta.get("version") != _SNAPSHOT_VERSION:
            raise SnapshotFormatError(
                f"snapshot version {meta.get('version')} unsupported"
            )
        if meta["fingerprint"] != self._fingerprint():
            raise SnapshotFormatError(
                "snapshot belongs to a different structure/arm configuration"
            )
        if la.shape != (len(ids), self.num_arms) or lw.shape != (len(ids),):
            raise SnapshotFormatError("snapshot arrays have inconsistent shapes")
        self.t = int(meta["t"])
        self.eta = float(meta["eta"])
        self._pending = None
        if self._kernel:
            self._la[:] = 0.0
            self._lw[:] = 0.0
            self._la[ids] = la
            self._lw[ids] = lw
        else:
            self._la_map = {int(i): [float(x) for x in row]
                            for i, row in zip(ids, la)}
            self._lw_map = {int(i): float(w) for i, w in zip(ids, lw)}

    @classmethod
    def restore(cls, structure: Structure, blob: bytes, num_arms: int,
                force_generic: bool = False) -> "HsbLearner":
        learner = cls(structure, num_arms, 1.0, force_generic=force_generic)
        learner.load_snapshot(blob)
        return learner


def sample_arm_with(p, u: float) -> int:
    """Inverse-CDF arm draw from a pre-drawn uniform (batch path)."""
    acc = 0.0
    last = len(p) - 1
    for m in range(last + 1):
        acc += p[m]
        if u < acc:
            return m
    return last


def _logaddexp(a: float, b: float) -> float:
    if a < b:
        a, b = b, a
    return a + math.log1p(math.exp(b - a))


def _logsumexp_list(row) -> float:
    mx = max(row)
    return mx + math.log(sum(math.exp(x - mx) for x in row))
