"""Slot-synchronous packet engine.

Each slot, every scheduled cell with a nonempty queue transmits its head
packet; the set of concurrent transmitters defines the interference seen
by every receiver, receptions succeed independently with the link
model's probability at the measured SINR, and a hop whose attempt budget
is exhausted drops its packet.  Runs are fully deterministic given the
configuration seed.

Saturated traffic keeps every occupied cell transmitting in each of its
slots (dummy relays fill idle queues), which makes the per-slot
transmitter set periodic in the schedule; the per-hop SINR and
nearest-interferer measurements used by the claim checkers are taken
against those per-slot transmitter sets.
"""

from __future__ import annotations

import dataclasses
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .errors import ConfigurationError
from .links import LinkModel, RadioParams, path_gain
from .routing import Route, all_cell_relays
from .scheduling import Schedule
from .tessellation import Deployment, Tessellation

TRAFFIC_MODES = ("bernoulli", "periodic", "saturated")
_RESERVOIR_CAP = 32


@dataclass(frozen=True)
class EngineConfig:
    injection_rate: float = 0.01  # per source per slot
    attempts_per_hop: int = 1
    measure_slots: int = 10_000
    warmup_slots: int | None = None  # default: 10 schedule rotations
    traffic: str = "bernoulli"
    seed: int = 0
    interference_radius: float | None = None  # speed knob, default off
    queue_cap: int | None = None
    fair_queueing: bool = False
    trace: bool = False
    debug_checks: bool = False

    def __post_init__(self):
        if self.traffic not in TRAFFIC_MODES:
            raise ConfigurationError(f"traffic must be one of {TRAFFIC_MODES}")
        if self.traffic == "saturated":
            if not 0.0 <= self.injection_rate <= 1.0:
                raise ConfigurationError("injection rate must lie in [0, 1]")
        elif not 0.0 < self.injection_rate <= 1.0:
            raise ConfigurationError("injection rate must lie in (0, 1]")
        if self.attempts_per_hop < 1:
            raise ConfigurationError("attempt budget must be at least 1")
        if self.measure_slots < 1:
            raise ConfigurationError("measure_slots must be at least 1")


def saturated_mode(cfg: EngineConfig) -> EngineConfig:
    """The same configuration with saturated traffic."""
    return dataclasses.replace(cfg, traffic="saturated")


class _Packet:
    __slots__ = ("conn", "seq", "hop", "attempts", "injected_slot", "measured")

    def __init__(self, conn, seq, injected_slot, measured):
        self.conn = conn
        self.seq = seq
        self.hop = 0
        self.attempts = 0
        self.injected_slot = injected_slot
        self.measured = measured


class _FifoQueue:
    """Single FIFO shared by every connection relaying through the cell."""

    __slots__ = ("_q",)

    def __init__(self):
        self._q = deque()

    def __len__(self):
        return len(self._q)

    def __iter__(self):
        return iter(self._q)

    def head(self):
        return self._q[0]

    def pop_head(self):
        return self._q.popleft()

    def append(self, pkt):
        self._q.append(pkt)


class _FairQueue:
    """Per-connection subqueues served round-robin (ablation mode)."""

    __slots__ = ("_queues", "_order", "_len")

    def __init__(self):
        self._queues = {}
        self._order = deque()
        self._len = 0

    def __len__(self):
        return self._len

    def __iter__(self):
        for conn in self._order:
            yield from self._queues[conn]

    def head(self):
        return self._queues[self._order[0]][0]

    def pop_head(self):
        conn = self._order.popleft()
        pkt = self._queues[conn].popleft()
        if self._queues[conn]:
            self._order.append(conn)
        self._len -= 1
        return pkt

    def append(self, pkt):
        q = self._queues.setdefault(pkt.conn, deque())
        if not q:
            self._order.append(pkt.conn)
        q.append(pkt)
        self._len += 1


@dataclass(frozen=True)
class HopSample:
    """Stationary per-hop measurement from a saturated run."""

    gamma: float
    nearest_interferer: float | None  # surface distance; None = no interferer
    slot: int


@dataclass
class RunMetrics:
    n: int
    rho_n: float
    schedule_length: int
    slots: int
    warmup_slots: int
    saturated: bool
    connection_ids: np.ndarray
    injected: np.ndarray
    delivered: np.ndarray
    dropped: np.ndarray
    in_flight: np.ndarray
    lambda_realized: float  # injected packets per node per slot
    throughput: float  # delivered packets per node per slot
    utilization: np.ndarray  # transmissions / active slots, per cell
    cell_occupancy: np.ndarray  # nodes per cell
    attempt_sinrs: dict[int, list[list[float]]] = field(repr=False)
    hop_samples: dict[int, list[HopSample]] = field(default_factory=dict, repr=False)
    trace: list[tuple] = field(default_factory=list, repr=False)

    def delivery_probability(self) -> np.ndarray:
        """Delivered fraction of resolved in-window packets (in flight censored)."""
        resolved = self.delivered + self.dropped
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(resolved > 0, self.delivered / resolved, np.nan)

    def check_conservation(self) -> None:
        bad = self.injected != self.delivered + self.dropped + self.in_flight
        if np.any(bad):
            raise AssertionError("packet conservation violated")


def _slot_distances(tx_pos: np.ndarray, rx_pos: np.ndarray) -> np.ndarray:
    cos = np.clip(tx_pos @ rx_pos.T, -1.0, 1.0)
    return geometry.RADIUS * np.arccos(cos)


def run(
    dep: Deployment,
    tess: Tessellation,
    schedule: Schedule,
    routes: list[Route],
    model: LinkModel,
    radio: RadioParams,
    cfg: EngineConfig,
) -> RunMetrics:
    """Execute one simulation and aggregate per-connection delivery."""
    routes_by_conn = {r.connection_id: r for r in routes}
    conn_ids = sorted(routes_by_conn)
    conn_index = {cid: k for k, cid in enumerate(conn_ids)}
    nodes = dep.nodes
    saturated = cfg.traffic == "saturated"
    K = schedule.num_colors
    warmup = cfg.warmup_slots if cfg.warmup_slots is not None else 10 * K
    total_slots = warmup + cfg.measure_slots
    rng = np.random.default_rng(cfg.seed)

    relay_of_cell = all_cell_relays(tess, dep)
    dummy_rx = _dummy_receivers(tess, routes_by_conn, relay_of_cell, conn_ids)

    queue_cls = _FairQueue if cfg.fair_queueing else _FifoQueue
    queues = {c: queue_cls() for c in range(tess.num_cells)}
    injected = np.zeros(len(conn_ids), dtype=np.int64)
    delivered = np.zeros(len(conn_ids), dtype=np.int64)
    dropped = np.zeros(len(conn_ids), dtype=np.int64)
    seq_counter = np.zeros(len(conn_ids), dtype=np.int64)
    active_slots = np.zeros(tess.num_cells, dtype=np.int64)
    transmit_slots = np.zeros(tess.num_cells, dtype=np.int64)
    attempt_sinrs: dict[int, list[list[float]]] = {
        cid: [[] for _ in range(routes_by_conn[cid].hop_count)] for cid in conn_ids
    }
    sample_counts: dict[int, list[int]] = {
        cid: [0] * routes_by_conn[cid].hop_count for cid in conn_ids
    }
    trace_rows: list[tuple] = []
    inject_period = max(int(math.ceil(1.0 / cfg.injection_rate)), 1) if (
        cfg.traffic == "periodic"
    ) else 0

    alpha, P, N0 = radio.alpha, radio.tx_power, radio.noise
    for slot in range(total_slots):
        measuring = slot >= warmup
        active = schedule.active_cells(slot)
        txs = []  # (cell, tx_node, rx_node, packet_or_None)
        for c in active:
            c = int(c)
            if measuring:
                active_slots[c] += 1
            q = queues[c]
            if len(q):
                pkt = q.head()
                r = routes_by_conn[pkt.conn]
                txs.append((c, r.relays[pkt.hop], r.relays[pkt.hop + 1], pkt))
            elif saturated and relay_of_cell[c] >= 0 and dummy_rx[c] >= 0:
                txs.append((c, int(relay_of_cell[c]), int(dummy_rx[c]), None))
        if txs:
            if measuring:
                for c, _, _, _ in txs:
                    transmit_slots[c] += 1
            _resolve_slot(
                txs, nodes, model, alpha, P, N0, cfg, rng, slot, measuring,
                routes_by_conn, conn_index, queues, delivered, dropped,
                attempt_sinrs, sample_counts, trace_rows, schedule, tess,
            )
        # Inject after transmissions so a fresh packet waits at least one slot.
        if cfg.traffic == "bernoulli" and cfg.injection_rate > 0.0:
            draws = rng.random(len(conn_ids))
            hits = np.flatnonzero(draws < cfg.injection_rate)
        elif cfg.traffic == "periodic":
            hits = np.arange(len(conn_ids)) if slot % inject_period == 0 else []
        elif saturated and cfg.injection_rate > 0.0:
            draws = rng.random(len(conn_ids))
            hits = np.flatnonzero(draws < cfg.injection_rate)
        else:
            hits = []
        for k in hits:
            cid = conn_ids[int(k)]
            r = routes_by_conn[cid]
            start_cell = r.cells[0]
            if cfg.queue_cap is not None and len(queues[start_cell]) >= cfg.queue_cap:
                raise ConfigurationError("queue overflow beyond the configured cap")
            queues[start_cell].append(_Packet(cid, int(seq_counter[k]), slot, measuring))
            seq_counter[k] += 1
            if measuring:
                injected[conn_index[cid]] += 1

    in_flight = np.zeros(len(conn_ids), dtype=np.int64)
    for q in queues.values():
        for pkt in q:
            if pkt.measured:
                in_flight[conn_index[pkt.conn]] += 1

    with np.errstate(invalid="ignore", divide="ignore"):
        utilization = np.where(active_slots > 0, transmit_slots / active_slots, 0.0)
    metrics = RunMetrics(
        n=dep.n,
        rho_n=tess.rho_n,
        schedule_length=K,
        slots=cfg.measure_slots,
        warmup_slots=warmup,
        saturated=saturated,
        connection_ids=np.asarray(conn_ids, dtype=np.int64),
        injected=injected,
        delivered=delivered,
        dropped=dropped,
        in_flight=in_flight,
        lambda_realized=float(injected.sum()) / (dep.n * cfg.measure_slots),
        throughput=float(delivered.sum()) / (dep.n * cfg.measure_slots),
        utilization=utilization,
        cell_occupancy=tess.occupancy(),
        attempt_sinrs=attempt_sinrs,
        trace=trace_rows,
    )
    metrics.check_conservation()
    if saturated:
        metrics.hop_samples = saturated_hop_samples(
            dep, tess, schedule, routes, radio, relay_of_cell
        )
    return metrics


def _resolve_slot(
    txs, nodes, model, alpha, P, N0, cfg, rng, slot, measuring,
    routes_by_conn, conn_index, queues, delivered, dropped,
    attempt_sinrs, sample_counts, trace_rows, schedule, tess,
):
    tx_nodes = np.array([t[1] for t in txs])
    rx_nodes = np.array([t[2] for t in txs])
    dist = _slot_distances(nodes[tx_nodes], nodes[rx_nodes])
    power = P * path_gain(np.maximum(dist, 1e-12), alpha)
    if cfg.interference_radius is not None:
        power = np.where(dist <= cfg.interference_radius, power, 0.0)
        np.fill_diagonal(power, P * path_gain(np.maximum(np.diag(dist), 1e-12), alpha))
    signal = np.diag(power)
    interference = power.sum(axis=0) - signal
    gamma = signal / (N0 + interference)

    if cfg.debug_checks:
        active_set = {int(c) for c in schedule.active_cells(slot)}
        for _, _, rx, pkt in txs:
            if pkt is not None and int(tess.cell_of_node[rx]) in active_set:
                raise AssertionError("receiver's cell is active in the same slot")

    # A node decodes at most one packet per slot: only the strongest inbound
    # signal is attempted, the rest fail (but still interfere network-wide).
    strongest: dict[int, int] = {}
    for j, (_, _, rx, pkt) in enumerate(txs):
        if pkt is None:
            continue
        best = strongest.get(rx)
        if best is None or signal[j] > signal[best]:
            strongest[rx] = j

    for j, (cell, tx, rx, pkt) in enumerate(txs):
        if pkt is None:
            if cfg.trace and measuring:
                trace_rows.append((slot, cell, tx, rx, float(gamma[j]), "dummy"))
            continue
        g = float(gamma[j])
        cid = pkt.conn
        hop = pkt.hop
        if pkt.measured and measuring:
            _reservoir_add(attempt_sinrs[cid][hop], sample_counts[cid], hop, g, rng)
        if strongest[rx] != j:
            success = False
            outcome = "collision"
        else:
            success = rng.random() < model.success(g)
            outcome = "ok" if success else "fail"
        if cfg.trace and measuring:
            trace_rows.append((slot, cell, tx, rx, g, outcome))
        q = queues[cell]
        if success:
            q.pop_head()
            pkt.hop += 1
            pkt.attempts = 0
            r = routes_by_conn[cid]
            if pkt.hop >= r.hop_count:
                if pkt.measured and measuring:
                    delivered[conn_index[cid]] += 1
            else:
                queues[r.tx_cell(pkt.hop)].append(pkt)
        else:
            pkt.attempts += 1
            if pkt.attempts >= cfg.attempts_per_hop:
                q.pop_head()
                if pkt.measured and measuring:
                    dropped[conn_index[cid]] += 1


def _reservoir_add(samples, counts, hop, value, rng):
    counts[hop] += 1
    if len(samples) < _RESERVOIR_CAP:
        samples.append(value)
    else:
        k = int(rng.integers(counts[hop]))
        if k < _RESERVOIR_CAP:
            samples[k] = value


def _dummy_receivers(tess, routes_by_conn, relay_of_cell, conn_ids) -> np.ndarray:
    """Per cell, the receiver its idle-slot dummy transmission targets.

    Prefers the next relay of the lowest-id route through the cell, then the
    relay of the lowest-id occupied neighbor cell, then any other node in the
    cell; -1 if the cell cannot transmit to anyone.
    """
    dummy_rx = np.full(tess.num_cells, -1, dtype=np.int64)
    for cid in conn_ids:
        r = routes_by_conn[cid]
        for hop in range(r.hop_count):
            c = r.tx_cell(hop)
            if dummy_rx[c] < 0 and r.relays[hop + 1] != relay_of_cell[c]:
                dummy_rx[c] = r.relays[hop + 1]
    for c in range(tess.num_cells):
        if dummy_rx[c] >= 0 or relay_of_cell[c] < 0:
            continue
        for d in tess.neighbors[c]:
            if relay_of_cell[int(d)] >= 0:
                dummy_rx[c] = relay_of_cell[int(d)]
                break
        else:
            others = [i for i in tess.nodes_in_cell[c] if i != relay_of_cell[c]]
            if others:
                dummy_rx[c] = int(others[0])
    return dummy_rx


def saturated_hop_samples(
    dep: Deployment,
    tess: Tessellation,
    schedule: Schedule,
    routes: list[Route],
    radio: RadioParams,
    relay_of_cell: np.ndarray | None = None,
) -> dict[int, list[HopSample]]:
    """Per-hop SINR and nearest-interferer distance under saturation.

    With every occupied cell transmitting in each of its slots the
    transmitter set of a slot depends only on its color, so one measurement
    per hop covers every attempt that hop can experience.  The transmitter
    field is each concurrent cell's relay node, with the measured hop's own
    cell transmitting the hop's actual source node.
    """
    if relay_of_cell is None:
        relay_of_cell = all_cell_relays(tess, dep)
    occupied = relay_of_cell >= 0
    field_by_color: list[np.ndarray] = []
    for k in range(schedule.num_colors):
        cells = schedule.cells_by_color[k]
        cells = cells[occupied[cells]]
        field_by_color.append(cells)

    samples: dict[int, list[HopSample]] = {}
    alpha, P, N0 = radio.alpha, radio.tx_power, radio.noise
    for r in routes:
        out = []
        for hop in range(r.hop_count):
            cell = r.tx_cell(hop)
            color = int(schedule.color_of_cell[cell])
            tx = r.relays[hop]
            rx = r.relays[hop + 1]
            others = field_by_color[color]
            others = others[others != cell]
            rx_pos = dep.nodes[rx]
            d_signal = float(geometry.surface_distance(dep.nodes[tx], rx_pos))
            signal = P * float(path_gain(max(d_signal, 1e-12), alpha))
            if len(others):
                d_int = geometry.surface_distance(
                    dep.nodes[relay_of_cell[others]], rx_pos
                )
                interference = P * float(path_gain(np.maximum(d_int, 1e-12), alpha).sum())
                nearest = float(np.min(d_int))
            else:
                interference = 0.0
                nearest = None
            out.append(
                HopSample(
                    gamma=signal / (N0 + interference),
                    nearest_interferer=nearest,
                    slot=color,
                )
            )
        samples[r.connection_id] = out
    return samples


@dataclass(frozen=True)
class ThroughputSummary:
    lambda_realized: float
    throughput: float
    schedule_length: int
    min_occupancy: int
    max_occupancy: int
    injection_ceiling: float  # 1 / (max occupancy * K)
    occupancy_rate_bound: float  # 4 / (pi * n * rho_n^2)
    delivery_histogram: np.ndarray  # counts in ten delivery-probability bins


def throughput_summary(metrics: RunMetrics) -> ThroughputSummary:
    """Realized rates plus the cell-sharing feasibility ceilings.

    A cell with ``Q`` resident nodes transmitting once per ``K`` slots cannot
    give any of them more than ``1/(Q*K)`` injections per slot, and for any
    certified tessellation the per-node rate is capped by
    ``4 / (pi * n * rho_n**2)``.
    """
    occ = metrics.cell_occupancy
    delivery = metrics.delivery_probability()
    finite = delivery[np.isfinite(delivery)]
    hist, _ = np.histogram(finite, bins=10, range=(0.0, 1.0))
    max_occ = int(occ.max())
    return ThroughputSummary(
        lambda_realized=metrics.lambda_realized,
        throughput=metrics.throughput,
        schedule_length=metrics.schedule_length,
        min_occupancy=int(occ.min()),
        max_occupancy=max_occ,
        injection_ceiling=1.0 / (max_occ * metrics.schedule_length),
        occupancy_rate_bound=4.0 / (math.pi * metrics.n * metrics.rho_n**2),
        delivery_histogram=hist,
    )
