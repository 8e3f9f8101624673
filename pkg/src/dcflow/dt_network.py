"""Slotted packet network that emulates the continuous reference network.

Flows are split into slot-sized packets.  A node transmits at most one
packet per slot.  Scheduling is preemptive LCFS keyed not on a flow's
actual arrival instant but on its schedule time S = eps * ceil(tau / eps),
where tau is the flow's arrival instant at the same queue in the
continuous reference run; ties prefer the larger tau, then the larger
uid.  Packets of a flow only become transmittable once the whole flow is
present, and a packet sent during slot k is available at the next queue
when the slot ends.

Two sample-path invariants are asserted for every flow at every queue,
as exact integer slot comparisons:

  * the flow has fully arrived by its schedule time (A <= S), and
  * it departs no later than the slot boundary that covers its
    continuous-time departure (Delta <= eps * ceil(delta / eps)).

A violation raises EmulationInfeasibilityError naming the flow and queue.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass

from .ct_network import CtResult, EpsilonConfig, slot_ceil
from .errors import EmulationInfeasibilityError, InternalConsistencyError
from .flow_gen import FlowType
from .topology import LoadProfile, QueueNode, Route


@dataclass(frozen=True)
class Packet:
    """One slot-sized piece of a flow; the last piece may be logically
    short but still occupies a full slot."""

    flow_uid: int
    index: int
    size: float


def packetize(size: float, eps: EpsilonConfig, flow_uid: int = 0) -> list[Packet]:
    if size <= 0:
        raise ValueError("flow size must be positive")
    count = eps.n_slots.get(size, slot_ceil(size, eps.epsilon))
    packets = []
    for i in range(1, count + 1):
        last = size - (count - 1) * eps.epsilon
        packets.append(Packet(flow_uid, i, eps.epsilon if i < count else last))
    return packets


class _DtFlow:
    __slots__ = ("uid", "ti", "hop", "remaining", "s_slots", "a_times", "delta_slots")

    def __init__(self, uid: int, ti: int, s_slots: list[int], t_inject: float):
        self.uid = uid
        self.ti = ti
        self.hop = 0
        self.remaining = 0
        self.s_slots = s_slots
        self.a_times: list[float] = [t_inject]
        self.delta_slots: list[int] = []


@dataclass
class FlowDelayRecord:
    """Per-flow delay decomposition plus the per-queue timestamp trail.

    hops[i] = (tau, delta, a, s_slot, delta_slot) at the i-th queue of the
    route; continuous instants from the reference run, slot indices from
    the discrete run.
    """

    uid: int
    route: int
    size: float
    t_arrive: float
    t_inject: float
    d_w: float
    d_s: float
    d: float
    hops: tuple[tuple[float, float, float, int, int], ...]

    @property
    def dummy(self) -> bool:
        return self.uid < 0


@dataclass
class DelayLedger:
    epsilon: float
    rows: list[FlowDelayRecord]

    def real_rows(self) -> list[FlowDelayRecord]:
        return [r for r in self.rows if not r.dummy]


@dataclass
class DtRunResult:
    ledger: DelayLedger
    n_slots_processed: int
    n_transmissions: int
    transmissions: list[tuple[int, QueueNode, int, int]] | None  # (slot, queue, uid, pkt index)


def run_dt(
    ct: CtResult,
    injections: list[tuple[float, int, int]],
    routes: list[Route],
    types: tuple[FlowType, ...],
    eps: EpsilonConfig,
    arrive_times: dict[int, float] | None = None,
    node_order: list[QueueNode] | None = None,
    record_transmissions: bool = False,
) -> DtRunResult:
    """Run the slot engine against a finished reference run.

    `injections` lists (t_inject, type_index, uid); `arrive_times` maps a
    flow back to its external arrival (defaults to its injection time).
    `node_order` only fixes the per-slot iteration order over queues; any
    order yields the identical ledger because a slot's decisions depend
    only on state at the slot boundary.
    """
    epsv = eps.epsilon
    by_id = {r.id: r for r in routes}
    paths = [tuple(by_id[t.route].queue_path) for t in types]
    pkts = [eps.n_slots[t.size] for t in types]

    queues: list[QueueNode] = []
    for path in paths:
        for q in path:
            if q not in queues:
                queues.append(q)
    if node_order is not None:
        if sorted(map(str, node_order)) != sorted(map(str, queues)):
            raise ValueError("node_order must be a permutation of the queues in use")
        queues = list(node_order)
    qidx = {q: i for i, q in enumerate(queues)}

    eligible: list[list[tuple[int, float, int, _DtFlow]]] = [[] for _ in queues]
    activations: list[tuple[int, int, int, _DtFlow]] = []  # (slot, qi, uid-as-tiebreak, flow)

    flows: dict[int, _DtFlow] = {}
    for t_inject, ti, uid in injections:
        s_slots = [slot_ceil(tau, epsv) for tau in ct.taus[uid]]
        fl = _DtFlow(uid, ti, s_slots, t_inject)
        fl.remaining = pkts[ti]
        flows[uid] = fl
        if t_inject > s_slots[0] * epsv + 1e-9 * max(1.0, abs(t_inject)):
            raise EmulationInfeasibilityError(
                f"flow {uid} injected after its first schedule time"
            )
        heapq.heappush(activations, (s_slots[0], qidx[paths[ti][0]], uid, fl))

    done: list[_DtFlow] = []
    trans_log: list[tuple[int, QueueNode, int, int]] | None = [] if record_transmissions else None
    n_trans = 0
    n_slots_processed = 0
    k = -1
    any_eligible = False

    while True:
        if any_eligible:
            k += 1
            if activations and activations[0][0] < k:
                raise InternalConsistencyError("activation slipped behind the slot clock")
        elif activations:
            k = activations[0][0]
        else:
            break
        while activations and activations[0][0] <= k:
            s, qi, _, fl = heapq.heappop(activations)
            tau = ct.taus[fl.uid][fl.hop]
            heapq.heappush(eligible[qi], (-s, -tau, -fl.uid, fl))
        n_slots_processed += 1

        for qi in range(len(queues)):
            heap = eligible[qi]
            if not heap:
                continue
            entry = heap[0]
            fl = entry[3]
            fl.remaining -= 1
            n_trans += 1
            if trans_log is not None:
                trans_log.append((k, queues[qi], fl.uid, pkts[fl.ti] - fl.remaining))
            if fl.remaining:
                continue
            heapq.heappop(heap)
            hop = fl.hop
            delta_slot = k + 1
            limit = slot_ceil(ct.deltas[fl.uid][hop], epsv)
            if delta_slot > limit:
                raise EmulationInfeasibilityError(
                    f"flow {fl.uid} left {queues[qi]} in slot {delta_slot}, "
                    f"reference bound is {limit}"
                )
            fl.delta_slots.append(delta_slot)
            fl.hop += 1
            if fl.hop < len(paths[fl.ti]):
                a_slot = k + 1
                s_next = fl.s_slots[fl.hop]
                if a_slot > s_next:
                    raise EmulationInfeasibilityError(
                        f"flow {fl.uid} reached {paths[fl.ti][fl.hop]} in slot {a_slot}, "
                        f"after its schedule slot {s_next}"
                    )
                fl.a_times.append(a_slot * epsv)
                fl.remaining = pkts[fl.ti]
                heapq.heappush(activations, (s_next, qidx[paths[fl.ti][fl.hop]], fl.uid, fl))
            else:
                done.append(fl)
        any_eligible = any(eligible)

    if len(done) != len(flows):
        raise InternalConsistencyError("some flows never drained from the slot engine")

    rows = []
    for t_inject, ti, uid in injections:
        fl = flows[uid]
        if len(fl.delta_slots) != len(paths[ti]):
            raise InternalConsistencyError(f"flow {uid} is missing hop records")
        t_arr = arrive_times.get(uid, t_inject) if arrive_times else t_inject
        d_w = t_inject - t_arr
        d_s = fl.delta_slots[-1] * epsv - t_inject
        hops = tuple(
            (ct.taus[uid][h], ct.deltas[uid][h], fl.a_times[h], fl.s_slots[h], fl.delta_slots[h])
            for h in range(len(paths[ti]))
        )
        rows.append(
            FlowDelayRecord(
                uid=uid,
                route=types[ti].route,
                size=types[ti].size,
                t_arrive=t_arr,
                t_inject=t_inject,
                d_w=d_w,
                d_s=d_s,
                d=d_w + d_s,
                hops=hops,
            )
        )
    rows.sort(key=lambda r: (r.t_arrive, r.uid))
    ledger = DelayLedger(epsilon=epsv, rows=rows)
    return DtRunResult(
        ledger=ledger,
        n_slots_processed=n_slots_processed,
        n_transmissions=n_trans,
        transmissions=trans_log,
    )


def dt_delay_bound(eps: EpsilonConfig, profile: LoadProfile) -> dict[tuple[int, float], float]:
    """Scheduling-delay bound per type:
    (C0 / (C0 - 1)) * (x * d / (1 - rho) + d)."""
    scale = eps.c0 / (eps.c0 - 1.0)
    out = {}
    for (j, x) in profile.lam:
        d = profile.routes[j].hop_count
        out[(j, x)] = scale * (x * d / (1.0 - profile.rho[j]) + d)
    return out


LEDGER_VERSION = "# dcflow ledger v1"
LEDGER_COLUMNS = "uid,route,size,t_arrive,t_inject,D_W,D_S,D"


def write_ledger_csv(ledger: DelayLedger, path: str) -> None:
    with open(path, "w") as fh:
        fh.write(LEDGER_VERSION + "\n")
        fh.write(LEDGER_COLUMNS + "\n")
        for r in ledger.rows:
            fh.write(
                f"{r.uid},{r.route},{r.size!r},{r.t_arrive!r},{r.t_inject!r},"
                f"{r.d_w!r},{r.d_s!r},{r.d!r}\n"
            )


def write_hop_table_jsonl(ledger: DelayLedger, routes: list[Route], path: str) -> None:
    """Per-flow per-queue timestamps, one JSON object per line."""
    by_id = {r.id: r for r in routes}
    with open(path, "w") as fh:
        fh.write(json.dumps({"format": "dcflow-hops", "version": 1}) + "\n")
        for r in ledger.rows:
            qpath = by_id[r.route].queue_path
            for q, (tau, delta, a, s_slot, d_slot) in zip(qpath, r.hops):
                fh.write(
                    json.dumps(
                        {
                            "uid": r.uid,
                            "node": str(q),
                            "tau": tau,
                            "delta": delta,
                            "A": a,
                            "S": s_slot * ledger.epsilon,
                            "delta_slot": d_slot,
                        }
                    )
                    + "\n"
                )
