"""Synchronous message-passing simulation of distributed Chebyshev filtering.

Every vertex runs as an isolated :class:`NodeState`. A node knows its own
value(s), its neighbors and the Laplacian entries of its row, and the shared
read-only configuration (Chebyshev coefficients and the half-width ``alpha``
derived from the spectral upper bound). Nothing else: no global ``N``, no
global signal, no eigenpairs.

Each round ``k`` has a send phase, a barrier, and a compute phase. In the send
phase every node transmits its latest recurrence value ``T_{k-1}(L) x`` at its
own vertex to each neighbor; in the compute phase every node advances to
``T_k(L) x`` using only its inbox. A depth-``K`` run therefore costs exactly
``K * 2|E|`` messages.

While a node's code runs, touching any other node's state raises
:class:`ProtocolError`.
"""

from __future__ import annotations

import json
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

from .chebyshev import series_weights
from .graph import WeightedGraph
from .operators import ChebOperator, gram_expansion, split_blocks

LEDGER_MODES = ("full", "counts")

_ACTIVE_NODE: ContextVar[int | None] = ContextVar("chebdist_active_node", default=None)


class ProtocolError(RuntimeError):
    """A node broke the protocol: foreign state access, bad send, desync."""


@dataclass(frozen=True, slots=True)
class Message:
    sender: int
    receiver: int
    round: int
    payload: tuple[float, ...]

    @property
    def payload_len(self) -> int:
        return len(self.payload)


@dataclass(frozen=True, eq=False)
class NodeConfig:
    """Read-only configuration shared by every node.

    ``coeffs`` has one row per output filter. In ``"stack"`` mode the node
    carries one scalar per round and emits one value per row (forward
    transform). In ``"reduce"`` mode the node carries one scalar per row and
    emits the single sum over rows (adjoint, Gram).
    """

    alpha: float
    coeffs: np.ndarray
    mode: str = "stack"

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.float64, ndmin=2)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        if self.mode not in ("stack", "reduce"):
            raise ValueError(f"unknown node mode {self.mode!r}")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")

    @property
    def depth(self) -> int:
        return self.coeffs.shape[1] - 1

    @property
    def width(self) -> int:
        return 1 if self.mode == "stack" else self.coeffs.shape[0]


class NodeState:
    """Private state of one sensor node."""

    __slots__ = ("node_id", "neighbors", "stencil", "config", "history", "inbox", "output")

    def __init__(
        self,
        node_id: int,
        incident: Sequence[tuple[int, float]],
        config: NodeConfig,
        value: Sequence[float],
    ):
        self.node_id = node_id
        self.neighbors = tuple(m for m, _ in incident)
        degree = sum(w for _, w in incident)
        # Laplacian row entries over N_n and n itself, in ascending vertex id
        self.stencil = tuple(sorted([(m, -w) for m, w in incident] + [(node_id, degree)]))
        self.config = config
        self.history: list[tuple[float, ...]] = [tuple(float(v) for v in value)]
        self.inbox: dict[int, Message] = {}
        self.output: tuple[float, ...] | None = None

    def __getattribute__(self, name):
        active = _ACTIVE_NODE.get()
        if active is not None and active != object.__getattribute__(self, "node_id"):
            raise ProtocolError(
                f"node {active} tried to read {name!r} of node "
                f"{object.__getattribute__(self, 'node_id')}"
            )
        return object.__getattribute__(self, name)

    def __setattr__(self, name, value):
        active = _ACTIVE_NODE.get()
        if active is not None:
            try:
                owner = object.__getattribute__(self, "node_id")
            except AttributeError:
                owner = value if name == "node_id" else None
            if owner != active:
                raise ProtocolError(f"node {active} tried to write {name!r} of node {owner}")
        object.__setattr__(self, name, value)


@contextmanager
def _acting_as(node_id: int) -> Iterator[None]:
    token = _ACTIVE_NODE.set(node_id)
    try:
        yield
    finally:
        _ACTIVE_NODE.reset(token)


def node_send(state: NodeState, k: int) -> list[Message]:
    """Send phase of round ``k``: broadcast ``T_{k-1}`` to every neighbor."""
    value = state.history[k - 1]
    return [Message(state.node_id, m, k, value) for m in state.neighbors]


def local_recurrence_step(state: NodeState, k: int) -> NodeState:
    """Compute phase of round ``k``: store this node's entry of ``T_k(L) x``.

    Round 1:  sum_{m in N_n + n} (1/alpha) L_nm x_m - x_n
    Round k:  sum_{m in N_n + n} (2/alpha) L_nm T_{k-1,m} - 2 T_{k-1,n} - T_{k-2,n}

    The sum runs in ascending vertex id with the node's own term in place.
    """
    inbox = state.inbox
    me = state.node_id
    for m in state.neighbors:
        msg = inbox.get(m)
        if msg is None:
            raise ProtocolError(f"node {me} round {k}: no message from neighbor {m}")
        if msg.round != k:
            raise ProtocolError(f"node {me} round {k}: stale message from {m} (round {msg.round})")
    if len(inbox) != len(state.neighbors):
        raise ProtocolError(f"node {me} round {k}: unexpected senders in inbox")

    history = state.history
    if len(history) != k:
        raise ProtocolError(f"node {me}: expected {k} stored values, have {len(history)}")
    prev = history[k - 1]
    width = len(prev)
    scale = (1.0 if k == 1 else 2.0) / state.config.alpha
    acc = [0.0] * width
    for m, lnm in state.stencil:
        vals = prev if m == me else inbox[m].payload
        if len(vals) != width:
            raise ProtocolError(f"node {me} round {k}: payload width {len(vals)} != {width}")
        c = scale * lnm
        for i in range(width):
            acc[i] += c * vals[i]
    if k == 1:
        new = tuple(acc[i] - prev[i] for i in range(width))
    else:
        prev2 = history[k - 2]
        new = tuple(acc[i] - 2.0 * prev[i] - prev2[i] for i in range(width))
    history.append(new)
    state.inbox = {}
    return state


def node_output(state: NodeState) -> tuple[float, ...]:
    """Combine the stored recurrence values with the shared coefficients."""
    cfg = state.config
    w = series_weights(cfg.coeffs)
    hist = state.history
    depth = w.shape[1] - 1
    if len(hist) != depth + 1:
        raise ProtocolError(f"node {state.node_id}: output before completing {depth} rounds")
    if cfg.mode == "stack":
        col = [h[0] for h in hist]
        out = tuple(float(sum(wj[k] * col[k] for k in range(depth + 1))) for wj in w)
    else:
        total = 0.0
        for j in range(w.shape[0]):
            total += sum(w[j, k] * hist[k][j] for k in range(depth + 1))
        out = (float(total),)
    state.output = out
    return out


@dataclass
class RoundRecord:
    round: int
    phase: str
    k: int
    messages: int
    scalars: int
    payload_len: int
    cumulative_messages: int
    cumulative_scalars: int
    ledger: tuple[Message, ...] | None = None

    def to_dict(self) -> dict:
        d = {
            "round": self.round,
            "phase": self.phase,
            "k": self.k,
            "messages": self.messages,
            "scalars": self.scalars,
            "payload_len": self.payload_len,
            "cumulative_messages": self.cumulative_messages,
            "cumulative_scalars": self.cumulative_scalars,
        }
        if self.ledger is not None:
            d["ledger"] = [[m.sender, m.receiver, list(m.payload)] for m in self.ledger]
        return d


@dataclass
class RoundTrace:
    """Exact per-round message accounting; optionally every message itself."""

    mode: str = "full"
    records: list[RoundRecord] = field(default_factory=list)

    def __post_init__(self):
        if self.mode not in LEDGER_MODES:
            raise ValueError(f"ledger mode must be one of {LEDGER_MODES}, got {self.mode!r}")

    @property
    def total_messages(self) -> int:
        return self.records[-1].cumulative_messages if self.records else 0

    @property
    def total_scalars(self) -> int:
        return self.records[-1].cumulative_scalars if self.records else 0

    @property
    def num_rounds(self) -> int:
        return len(self.records)

    def add_round(self, phase: str, k: int, messages: Sequence[Message]) -> RoundRecord:
        lengths = {m.payload_len for m in messages}
        if len(lengths) > 1:
            raise ProtocolError(f"mixed payload lengths {sorted(lengths)} in one round")
        plen = lengths.pop() if lengths else 0
        n = len(messages)
        rec = RoundRecord(
            round=self.num_rounds + 1,
            phase=phase,
            k=k,
            messages=n,
            scalars=n * plen,
            payload_len=plen,
            cumulative_messages=self.total_messages + n,
            cumulative_scalars=self.total_scalars + n * plen,
            ledger=tuple(messages) if self.mode == "full" else None,
        )
        self.records.append(rec)
        return rec

    def extend(self, other: "RoundTrace") -> "RoundTrace":
        """Append another trace's rounds, renumbering and re-accumulating."""
        for r in other.records:
            self.records.append(
                RoundRecord(
                    round=self.num_rounds + 1,
                    phase=r.phase,
                    k=r.k,
                    messages=r.messages,
                    scalars=r.scalars,
                    payload_len=r.payload_len,
                    cumulative_messages=self.total_messages + r.messages,
                    cumulative_scalars=self.total_scalars + r.scalars,
                    ledger=r.ledger if self.mode == "full" else None,
                )
            )
        return self

    def messages_by_payload_len(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for r in self.records:
            out[r.payload_len] = out.get(r.payload_len, 0) + r.messages
        return dict(sorted(out.items()))

    def iter_messages(self) -> Iterator[Message]:
        if self.mode != "full":
            raise ValueError("message ledger not recorded in counts mode")
        for r in self.records:
            yield from r.ledger

    def summary(self) -> dict:
        return {
            "summary": True,
            "rounds": self.num_rounds,
            "messages": self.total_messages,
            "scalars": self.total_scalars,
            "messages_by_payload_len": {str(k): v for k, v in self.messages_by_payload_len().items()},
        }

    def to_jsonl(self) -> str:
        lines = [json.dumps(r.to_dict()) for r in self.records]
        lines.append(json.dumps(self.summary()))
        return "\n".join(lines) + "\n"


class Simulator:
    """Lockstep round scheduler over isolated node states.

    Parameters
    ----------
    graph : WeightedGraph
        Communication topology; only its edges may carry messages.
    config : NodeConfig
        Shared read-only configuration handed to every node.
    initial_values : sequence
        Per-node starting vector (length ``config.width``).
    ledger : {"full", "counts"}
        Keep every message, or only the per-round counts.
    """

    def __init__(self, graph: WeightedGraph, config: NodeConfig, initial_values, ledger: str = "full"):
        if len(initial_values) != graph.num_vertices:
            raise ValueError(
                f"got {len(initial_values)} initial values for {graph.num_vertices} nodes"
            )
        self.graph = graph
        self.config = config
        self.trace = RoundTrace(mode=ledger)
        self._links = [frozenset(graph.neighbors(n)) for n in range(graph.num_vertices)]
        self.nodes = [
            NodeState(n, graph.neighbor_lists[n], config, initial_values[n])
            for n in range(graph.num_vertices)
        ]
        for n, node in enumerate(self.nodes):
            if len(node.history[0]) != config.width:
                raise ValueError(f"node {n} initial value has width {len(node.history[0])}")
        self.round = 0

    def execute(self, node_id: int, fn: Callable, *args):
        """Run ``fn(node_state, *args)`` with ``node_id`` as the acting node."""
        node = self.nodes[node_id]
        with _acting_as(node_id):
            return fn(node, *args)

    def transmit(self, msg: Message) -> None:
        if msg.receiver not in self._links[msg.sender]:
            raise ProtocolError(f"node {msg.sender} sent to non-neighbor {msg.receiver}")
        inbox = self.nodes[msg.receiver].inbox
        if msg.sender in inbox:
            raise ProtocolError(f"duplicate message {msg.sender}->{msg.receiver} in round {msg.round}")
        inbox[msg.sender] = msg

    def step(self, phase: str = "run") -> RoundRecord:
        k = self.round + 1
        if k > self.config.depth:
            raise ProtocolError(f"already completed all {self.config.depth} rounds")
        sent: list[Message] = []
        for n in range(len(self.nodes)):
            for msg in self.execute(n, node_send, k):
                if msg.sender != n:
                    raise ProtocolError(f"node {n} forged sender {msg.sender}")
                self.transmit(msg)
                sent.append(msg)
        # barrier: all sends delivered before any node computes
        for n in range(len(self.nodes)):
            self.execute(n, local_recurrence_step, k)
        self.round = k
        return self.trace.add_round(phase, k, sent)

    def run(self, phase: str = "run") -> tuple[list[tuple[float, ...]], RoundTrace]:
        while self.round < self.config.depth:
            self.step(phase)
        outputs = [self.execute(n, node_output) for n in range(len(self.nodes))]
        return outputs, self.trace


def _signal(x, n: int, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (n,):
        raise ValueError(f"{what} must have shape ({n},), got {x.shape}")
    return x


def run_forward(
    g: WeightedGraph, op: ChebOperator, f, ledger: str = "full"
) -> tuple[np.ndarray, RoundTrace]:
    """Distributed forward transform; returns the stacked ``eta * N`` result."""
    f = _signal(f, g.num_vertices, "f")
    cfg = NodeConfig(op.alpha, op.coeffs, mode="stack")
    sim = Simulator(g, cfg, [(v,) for v in f], ledger=ledger)
    outputs, trace = sim.run("forward")
    return np.asarray(outputs).T.ravel(), trace


def run_adjoint(
    g: WeightedGraph, op: ChebOperator, a, ledger: str = "full"
) -> tuple[np.ndarray, RoundTrace]:
    """Distributed adjoint; all ``eta`` blocks advance together in each message."""
    blocks = split_blocks(a, op.eta)
    if blocks.shape[1] != g.num_vertices:
        raise ValueError(f"stacked length {blocks.size} != eta * N = {op.eta * g.num_vertices}")
    cfg = NodeConfig(op.alpha, op.coeffs, mode="reduce")
    sim = Simulator(g, cfg, [tuple(col) for col in blocks.T], ledger=ledger)
    outputs, trace = sim.run("adjoint")
    return np.asarray(outputs)[:, 0], trace


def run_gram(
    g: WeightedGraph, op: ChebOperator, f, ledger: str = "full"
) -> tuple[np.ndarray, RoundTrace]:
    """Distributed Gram operator through its single order-2M expansion."""
    f = _signal(f, g.num_vertices, "f")
    d = gram_expansion(op)
    cfg = NodeConfig(d.alpha, d.coeffs, mode="reduce")
    sim = Simulator(g, cfg, [(v,) for v in f], ledger=ledger)
    outputs, trace = sim.run("gram")
    return np.asarray(outputs)[:, 0], trace
