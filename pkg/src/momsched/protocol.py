"""Synchronous round-based simulator for the momentum gradient-tracking dynamics.

Each round every realized link carries both agents' (possibly quantized)
gradients, stamped with the emission round and delayed by a common number of
rounds in both directions.  On delivery the receiver adds
``eta * W_ij * (payload_j(s) - payload_i(s))`` using its *own* payload from the
same stamp ``s``, so the two directions of a link cancel exactly in the sum
and ``sum_i x_i`` never moves.  The momentum term ``mu * y_i`` is the previous
state change.

With ``tau_bar = 0`` this reduces to the delay-free nonlinear dynamics, and
with the identity map to the linear ones.
"""

from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .analysis import feasibility_gap, gradient_dispersion
from .costs import Problem
from .graph import SwitchingNetwork, Topology
from .nonlinearity import Identity, SectorMap


class ProtocolError(RuntimeError):
    pass


class HistoryMissError(ProtocolError):
    """A message arrived with a stamp older than the delay bound allows."""


DelaySampler = Callable[[np.random.Generator, int, int], np.ndarray]


@dataclass(frozen=True)
class DelayModel:
    """Per-link, per-round integer delays in ``[0, tau_bar]``.

    One delay is drawn per undirected base edge and round, and is used for
    both directions.  ``distribution`` is ``"uniform"``, ``"max"`` (always
    ``tau_bar``) or a callable ``(rng, m, tau_bar) -> int array``.
    """

    tau_bar: int = 0
    seed: int = 0
    distribution: Union[str, DelaySampler] = "uniform"

    def __post_init__(self):
        if self.tau_bar < 0 or int(self.tau_bar) != self.tau_bar:
            raise ValueError(f"tau_bar must be a nonnegative integer, got {self.tau_bar}")
        if isinstance(self.distribution, str) and self.distribution not in ("uniform", "max"):
            raise ValueError(f"unknown delay distribution {self.distribution!r}")

    def draw(self, k: int, m: int) -> np.ndarray:
        if self.tau_bar == 0:
            return np.zeros(m, dtype=np.int64)
        if self.distribution == "max":
            return np.full(m, self.tau_bar, dtype=np.int64)
        rng = np.random.default_rng([self.seed, 0xDE1A, k])
        if self.distribution == "uniform":
            return rng.integers(0, self.tau_bar + 1, m)
        r = np.asarray(self.distribution(rng, m, self.tau_bar), dtype=np.int64)
        if r.shape != (m,) or r.min(initial=0) < 0 or r.max(initial=0) > self.tau_bar:
            raise ProtocolError("custom delay sampler returned out-of-range delays")
        return r


NO_DELAY = DelayModel()


@dataclass(frozen=True)
class Message:
    sender: int
    receiver: int
    stamp: int
    payload: float


@dataclass
class AgentState:
    x: float
    y: float
    history: dict[int, float]


@dataclass(frozen=True)
class RoundSummary:
    k: int
    F: float
    feas_gap: float
    edges: int
    msgs: int


@dataclass
class Trace:
    """Per-round record; row k is the state after k updates (row 0 = init)."""

    k: np.ndarray
    F: np.ndarray
    feas_gap: np.ndarray
    edges: np.ndarray
    msgs: np.ndarray
    x: np.ndarray
    y: np.ndarray
    residual: np.ndarray | None = None
    status: str = "completed"  # completed | converged | diverged

    @property
    def rounds(self) -> int:
        return len(self.k) - 1

    @property
    def n(self) -> int:
        return self.x.shape[1]

    def header(self) -> list[str]:
        return (["k", "F", "residual", "feas_gap", "edges", "msgs"]
                + [f"x_{i}" for i in range(self.n)] + [f"y_{i}" for i in range(self.n)])

    def to_csv(self, path) -> None:
        res = self.residual if self.residual is not None else np.full(len(self.k), np.nan)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.header())
            for r in range(len(self.k)):
                w.writerow([int(self.k[r]), _fmt(self.F[r]), _fmt(res[r]), _fmt(self.feas_gap[r]),
                            int(self.edges[r]), int(self.msgs[r])]
                           + [_fmt(v) for v in self.x[r]] + [_fmt(v) for v in self.y[r]])

    @classmethod
    def from_csv(cls, path) -> Trace:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise ProtocolError(f"{path}: empty trace file")
        head, body = rows[0], rows[1:]
        if head[:6] != ["k", "F", "residual", "feas_gap", "edges", "msgs"]:
            raise ProtocolError(f"{path}: unexpected header {head[:6]}")
        n = (len(head) - 6) // 2
        data = np.array([[float(v) for v in row] for row in body]).reshape(len(body), len(head))
        res = data[:, 2]
        return cls(
            k=data[:, 0].astype(np.int64), F=data[:, 1], feas_gap=data[:, 3],
            edges=data[:, 4].astype(np.int64), msgs=data[:, 5].astype(np.int64),
            x=data[:, 6:6 + n], y=data[:, 6 + n:6 + 2 * n],
            residual=None if np.all(np.isnan(res)) else res,
        )


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


class Engine:
    """State of one simulation run; advance it with :meth:`step` or :meth:`run`."""

    def __init__(self, problem: Problem, network: SwitchingNetwork | Topology,
                 map: SectorMap | None = None, delays: DelayModel | None = None,
                 eta: float = 0.1, mu: float = 0.0, record_messages: bool = False):
        if not 0.0 <= mu < 1.0:
            raise ValueError(f"momentum rate must lie in [0, 1), got {mu}")
        if not eta > 0:
            raise ValueError(f"step rate must be positive, got {eta}")
        if isinstance(network, Topology):
            network = SwitchingNetwork(network)
        if network.base.n != problem.n:
            raise ValueError(f"network has {network.base.n} nodes, problem has {problem.n}")
        self.problem = problem
        self.network = network
        self.map = Identity() if map is None else map
        self.delays = NO_DELAY if delays is None else delays
        self.eta = float(eta)
        self.mu = float(mu)
        self.k = 0

        base = network.base
        self._ends = base.edge_array()
        self._w = base.weight_array()
        # both directions of every base edge, ordered by sender
        e_idx = np.arange(base.m)
        d_edge = np.concatenate([e_idx, e_idx])
        d_recv = np.concatenate([self._ends[:, 0], self._ends[:, 1]])
        d_send = np.concatenate([self._ends[:, 1], self._ends[:, 0]])
        order = np.argsort(d_send, kind="stable")
        self._dir_edge, self._dir_recv, self._dir_send = d_edge[order], d_recv[order], d_send[order]

        self.x = problem.demands.astype(float).copy()
        self.y = np.zeros(problem.n)
        depth = self.delays.tau_bar + 1
        self._hist = np.zeros((depth, problem.n))
        self._stamps = np.full(depth, -1, dtype=np.int64)
        self._store_payload(0)
        self._queue: dict[int, list[tuple]] = defaultdict(list)
        self.record_messages = record_messages
        self.consumed: list[tuple[int, int, int, int]] = []  # (edge, stamp, receiver, round)

    # -- per-agent view ------------------------------------------------------

    def agent(self, i: int) -> AgentState:
        hist = {int(s): float(self._hist[slot, i])
                for slot, s in enumerate(self._stamps) if s >= 0}
        return AgentState(float(self.x[i]), float(self.y[i]), hist)

    def payload(self) -> np.ndarray:
        """Current transmitted value ``g(df_i(x_i(k)))`` for every agent."""
        return self._hist[self.k % len(self._stamps)].copy()

    # -- dynamics ------------------------------------------------------------

    def _store_payload(self, k: int) -> None:
        slot = k % len(self._stamps)
        self._hist[slot] = self.map.apply(self.problem.gradients(self.x))
        self._stamps[slot] = k

    def _emit(self, k: int) -> tuple[int, tuple | None]:
        """Send this round's payloads; returns the edge count and the lag-0 batch."""
        mask = self.network.survival_mask(k)
        n_live = int(np.count_nonzero(mask))
        if n_live == 0:
            return 0, None
        live = mask[self._dir_edge]
        edge, recv, send = self._dir_edge[live], self._dir_recv[live], self._dir_send[live]
        pay = self._hist[k % len(self._stamps)][send]
        stamp = np.full(edge.size, k)
        if self.delays.tau_bar == 0:
            return n_live, (edge, recv, send, stamp, pay)
        lag = self.delays.draw(k, len(self._w))[edge]
        now = None
        for r in range(self.delays.tau_bar + 1):
            sel = lag == r
            if not sel.any():
                continue
            batch = (edge[sel], recv[sel], send[sel], stamp[sel], pay[sel])
            if r == 0:
                now = batch
            else:
                self._queue[k + r].append(batch)
        return n_live, now

    def _consume(self, k: int, now: tuple | None) -> tuple[np.ndarray, int]:
        chunks = self._queue.pop(k, [])
        if now is not None:
            chunks.append(now)
        n = self.problem.n
        if not chunks:
            return np.zeros(n), 0
        if len(chunks) == 1:
            # one batch has one stamp and is already in sender order
            edge, recv, send, stamp, pay = chunks[0]
        else:
            edge, recv, send, stamp, pay = (np.concatenate(c) for c in zip(*chunks))
            # accumulate per receiver in (stamp, sender) order
            order = np.lexsort((send, stamp))
            edge, recv, send, stamp, pay = (edge[order], recv[order], send[order],
                                            stamp[order], pay[order])
        depth = len(self._stamps)
        slot = stamp % depth
        if np.any(self._stamps[slot] != stamp):
            bad = int(stamp[np.argmax(self._stamps[slot] != stamp)])
            raise HistoryMissError(f"round {k}: stamp {bad} is outside the delay window")
        own = self._hist[slot, recv]
        terms = self._w[edge] * (pay - own)
        if self.record_messages:
            self.consumed.extend(zip(edge.tolist(), stamp.tolist(), recv.tolist(), [k] * edge.size))
        return np.bincount(recv, weights=terms, minlength=n), int(recv.size)

    def in_flight(self) -> list[Message]:
        """Messages emitted but not yet delivered, in delivery order."""
        out = []
        for due in sorted(self._queue):
            for edge, recv, send, stamp, pay in self._queue[due]:
                out += [Message(int(a), int(b), int(c), float(d))
                        for a, b, c, d in zip(send, recv, stamp, pay)]
        return out

    def step(self) -> RoundSummary:
        k = self.k
        n_edges, now = self._emit(k)
        s, n_msgs = self._consume(k, now)
        x_new = self.x + self.mu * self.y + self.eta * s
        self.y = x_new - self.x
        self.x = x_new
        self.k = k + 1
        self._store_payload(self.k)
        return RoundSummary(self.k, self.problem.total_cost(self.x),
                            feasibility_gap(self.problem, self.x), n_edges, n_msgs)

    def run(self, rounds: int, stop_dispersion: float | None = None,
            divergence_limit: float | None = 1e12) -> Trace:
        """Advance ``rounds`` steps.

        Stops early once the gradient dispersion falls below ``stop_dispersion``
        (status ``converged``) or once ``max|x_i|`` leaves
        ``divergence_limit * (1 + max|b_i|)`` or turns non-finite (status
        ``diverged``).
        """
        if rounds < 1:
            raise ValueError(f"need at least one round, got {rounds}")
        n = self.problem.n
        X = np.empty((rounds + 1, n))
        Y = np.empty((rounds + 1, n))
        F = np.empty(rounds + 1)
        gap = np.empty(rounds + 1)
        edges = np.zeros(rounds + 1, dtype=np.int64)
        msgs = np.zeros(rounds + 1, dtype=np.int64)
        k0 = self.k
        X[0], Y[0] = self.x, self.y
        F[0] = self.problem.total_cost(self.x)
        gap[0] = feasibility_gap(self.problem, self.x)
        limit = np.inf
        if divergence_limit is not None:
            limit = divergence_limit * (1.0 + float(np.abs(self.problem.demands).max()))
        last, status = rounds, "completed"
        with np.errstate(over="ignore", invalid="ignore"):
            for r in range(1, rounds + 1):
                summ = self.step()
                X[r], Y[r] = self.x, self.y
                F[r], gap[r] = summ.F, summ.feas_gap
                edges[r], msgs[r] = summ.edges, summ.msgs
                if not np.abs(self.x).max() <= limit:
                    last, status = r, "diverged"
                    break
                if stop_dispersion is not None and \
                        gradient_dispersion(self.problem, self.x) < stop_dispersion:
                    last, status = r, "converged"
                    break
        sl = slice(0, last + 1)
        return Trace(np.arange(k0, k0 + last + 1), F[sl], gap[sl], edges[sl], msgs[sl],
                     X[sl], Y[sl], status=status)


def init(problem: Problem, network, map: SectorMap | None = None,
         delays: DelayModel | None = None, eta: float = 0.1, mu: float = 0.0) -> Engine:
    return Engine(problem, network, map, delays, eta, mu)

