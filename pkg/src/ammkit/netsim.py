"""Synchronous message-passing harness for the distributed engines.

A round runs the engine's per-node phases (primal, exchange, dual, exchange).
In strict mode every neighbor value a node uses is read from its mailbox,
so an update that touches a non-neighbor's state aborts the run with the
offending pair and round. Fast mode runs the vectorized engine and records
the messages the per-node program would have sent. Centralized engines run
in oracle mode with their declared communication cost.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .engines.base import AmmState, Engine
from .errors import InnerSolverError, LocalityViolation, TopologyError
from .graph_topology import Topology

log = logging.getLogger(__name__)

PAYLOAD_TAGS = {"x": "x", "z_tilde": "z̃", "w": "y−∇f−q", "z": "z"}


@dataclass(frozen=True)
class Message:
    """One d-vector sent over an edge (0-based node indices)."""

    sender: int
    receiver: int
    tag: str
    bytes: int


@dataclass
class RoundLog:
    """Messages of one round; ``k = 0`` holds the initialization exchange."""

    k: int
    messages: list = field(default_factory=list)

    def count(self, tag: str | None = None) -> int:
        return sum(1 for m in self.messages if tag is None or m.tag == tag)

    def tags(self) -> set:
        return {m.tag for m in self.messages}


class Mailbox:
    """Inbound buffer of one node, keyed by (payload key, sender)."""

    def __init__(self, node: int, neighbors):
        self.node = node
        self.neighbors = frozenset(int(j) for j in neighbors)
        self._buf = {}

    def deliver(self, sender: int, key: str, value: np.ndarray) -> None:
        if sender not in self.neighbors:
            raise TopologyError(f"no channel from node {sender + 1} to node {self.node + 1}")
        self._buf[(key, sender)] = value

    def get(self, key: str, sender: int) -> np.ndarray:
        if sender not in self.neighbors:
            raise KeyError((key, sender))
        return self._buf[(key, sender)]


@dataclass
class LocalityAudit:
    """Counts of state reads and any attempted non-neighbor accesses (1-based)."""

    own_reads: int = 0
    neighbor_reads: int = 0
    violations: list = field(default_factory=list)

    @property
    def clean(self) -> bool:
        return not self.violations

    def report(self) -> str:
        lines = [f"own reads: {self.own_reads}", f"neighbor reads: {self.neighbor_reads}",
                 f"non-neighbor accesses: {len(self.violations)}"]
        lines += [f"  node {r} read {t} of node {j} in round {k}" for r, j, k, t in self.violations]
        return "\n".join(lines)


class NodeView:
    """What node i may see during one phase: its own state and its mailbox."""

    def __init__(self, i: int, state: dict, mailbox: Mailbox, k: int, audit: LocalityAudit):
        self.i = i
        self.k = k
        self._state = state
        self._mailbox = mailbox
        self._audit = audit

    def own(self, key: str) -> np.ndarray:
        self._audit.own_reads += 1
        return self._state[key]

    def read(self, key: str, j: int) -> np.ndarray:
        if j == self.i:
            return self.own(key)
        try:
            value = self._mailbox.get(key, j)
        except KeyError:
            self._audit.violations.append((self.i + 1, j + 1, self.k, key))
            raise LocalityViolation(self.i + 1, j + 1, self.k, PAYLOAD_TAGS.get(key, key)) from None
        self._audit.neighbor_reads += 1
        return value


@dataclass
class RunResult:
    """Outcome of a harness run.

    Attributes
    ----------
    states : list of AmmState
        States k = 0..K (only the last one when ``keep_states`` is False).
    logs : list of RoundLog
        Initialization log first, then one log per round.
    mode : {"strict", "fast", "oracle"}
    aborted : bool
        True when an inner solve failed; data up to the failure is kept.
    """

    engine: str
    mode: str
    states: list
    logs: list
    audit: LocalityAudit
    n_edges: int
    declared_cost: float
    rounds: int = 0
    aborted: bool = False
    error: str | None = None

    @property
    def final(self) -> AmmState:
        return self.states[-1]

    def round_logs(self) -> list:
        return [g for g in self.logs if g.k > 0]


def _broadcast(topo: Topology, keys, d: int, rlog: RoundLog, deliver: Callable | None = None, values=None):
    for i in range(topo.n_nodes):
        for key in keys:
            tag = PAYLOAD_TAGS.get(key, key)
            for j in topo.neighbors(i):
                rlog.messages.append(Message(i, int(j), tag, 8 * d))
                if deliver is not None:
                    deliver(int(j), i, key, values[i][key].copy())


def _state_from_nodes(nodes: list, k: int) -> AmmState:
    def stack(key):
        return np.stack([nd[key] for nd in nodes]) if key in nodes[0] else None

    return AmmState(stack("x"), stack("q"), k, y=stack("y"), z=stack("z"))


def run(engine: Engine, iters: int, strict: bool = True, workers: int = 1, x0=None, q0=None,
        observer: Callable | None = None, keep_states: bool = True, **init_kw) -> RunResult:
    """Run ``iters`` synchronous rounds of ``engine``.

    Parameters
    ----------
    strict : bool
        Route every neighbor read through the mailboxes (distributed engines only).
    workers : int
        Threads used for the per-node compute of each phase; results do not depend on it.
    observer : callable, optional
        Called with every state, k = 0..iters; returning True ends the run after that state.
    init_kw
        Extra initialization inputs (``z_tilde`` for DAMM-SC).
    """
    topo = engine.prob.topo
    d = engine.shape[1]
    audit = LocalityAudit()
    declared = engine.communication_cost()

    if not engine.distributed:
        if strict:
            log.warning("oracle mode: %s is centralized, strict locality is not available", engine.name)
        return _run_vectorized(engine, iters, x0, q0, observer, keep_states, init_kw, "oracle", audit, declared)
    if not strict:
        return _run_vectorized(engine, iters, x0, q0, observer, keep_states, init_kw, "fast", audit, declared)
    return _run_strict(engine, iters, workers, x0, q0, observer, keep_states, init_kw, audit, declared)


def _result(engine, mode, states, logs, audit, declared, rounds, err=None):
    return RunResult(engine.name, mode, states, logs, audit, engine.prob.topo.n_edges, declared, rounds,
                     aborted=err is not None, error=None if err is None else str(err))


def _run_vectorized(engine, iters, x0, q0, observer, keep_states, init_kw, mode, audit, declared):
    topo, d = engine.prob.topo, engine.shape[1]
    s = engine.init_state(x0, q0, **init_kw)
    states, logs = [s], []
    prog = engine.program() if mode == "fast" else None
    if prog is not None:
        g = RoundLog(0)
        for ph in prog.init_phases:
            _broadcast(topo, ph.send, d, g)
        logs.append(g)
    done = observer is not None and bool(observer(s))
    rounds = 0
    for k in range(1, 0 if done else iters + 1):
        try:
            s = engine.step(s)
        except InnerSolverError as e:
            return _result(engine, mode, states, logs, audit, declared, rounds, e)
        rounds = k
        if prog is not None:
            g = RoundLog(k)
            for ph in prog.round_phases:
                _broadcast(topo, ph.send, d, g)
            logs.append(g)
        stop = observer is not None and observer(s)
        if keep_states:
            states.append(s)
        else:
            states[-1] = s
        if stop:
            break
    return _result(engine, mode, states, logs, audit, declared, rounds)


def _run_strict(engine, iters, workers, x0, q0, observer, keep_states, init_kw, audit, declared):
    topo, d = engine.prob.topo, engine.shape[1]
    prog = engine.program()
    init = engine.node_init(x0, q0, **init_kw)
    nodes = [{key: np.array(init[key][i]) for key in prog.init_keys} for i in range(topo.n_nodes)]
    boxes = [Mailbox(i, topo.neighbors(i)) for i in range(topo.n_nodes)]
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None

    def deliver(j, i, key, value):
        boxes[j].deliver(i, key, value)

    def phase(ph, k, rlog):
        def compute(i):
            return ph.compute(i, NodeView(i, nodes[i], boxes[i], k, audit))

        updates = list(pool.map(compute, range(topo.n_nodes))) if pool else [compute(i) for i in range(topo.n_nodes)]
        for nd, up in zip(nodes, updates):
            nd.update(up)
        _broadcast(topo, ph.send, d, rlog, deliver, nodes)

    logs, states, rounds = [RoundLog(0)], [], 0
    try:
        for ph in prog.init_phases:
            phase(ph, 0, logs[0])
        s = _state_from_nodes(nodes, 0)
        states.append(s)
        done = observer is not None and bool(observer(s))
        for k in range(1, 0 if done else iters + 1):
            g = RoundLog(k)
            for ph in prog.round_phases:
                phase(ph, k, g)
            logs.append(g)
            rounds = k
            s = _state_from_nodes(nodes, k)
            stop = observer is not None and observer(s)
            if keep_states:
                states.append(s)
            else:
                states[-1] = s
            if stop:
                break
    except InnerSolverError as e:
        return _result(engine, "strict", states, logs, audit, declared, rounds, e)
    finally:
        if pool is not None:
            pool.shutdown()
    return _result(engine, "strict", states, logs, audit, declared, rounds)


def communication_cost(result: RunResult) -> float:
    """d-vectors broadcast per node per round, from the round logs when available."""
    rl = result.round_logs()
    if result.mode == "oracle" or not rl or result.n_edges == 0:
        return float(result.declared_cost)
    return sum(g.count() for g in rl) / (2.0 * result.n_edges * len(rl))


def write_message_log(result: RunResult, path) -> None:
    """CSV with columns k, node, receiver, payload_tag, bytes (1-based nodes)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "node", "receiver", "payload_tag", "bytes"])
        for g in result.logs:
            for m in g.messages:
                w.writerow([g.k, m.sender + 1, m.receiver + 1, m.tag, m.bytes])


__all__ = ["PAYLOAD_TAGS", "Message", "RoundLog", "Mailbox", "LocalityAudit", "NodeView", "RunResult", "run",
           "communication_cost", "write_message_log"]
