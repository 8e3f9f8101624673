"""Continuous-time reference network with preemptive LCFS at every queue.

Flows enter at their injection instants, require a slot-rounded service
x_eps = eps * ceil(x / eps) at every queue on their route, and hop with
zero transfer latency.  The newest arrival at a queue always preempts;
preempted work resumes where it left off.  The per-flow, per-queue
arrival and departure instants recorded here drive the discrete-time
emulation and its invariant checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError, InternalConsistencyError, StabilityViolationError
from .events import EventQueue
from .topology import LoadProfile, QueueNode, Route
from .flow_gen import FlowType

_GUARD = 1e-9


def slot_ceil(t: float, eps: float) -> int:
    """Smallest slot index k with k*eps >= t, with a relative guard band.

    A ratio within 1e-9 of an integer snaps to that integer before the
    ceiling, so boundary values survive float noise.
    """
    if t <= 0:
        return 0
    r = t / eps
    return math.ceil(r - _GUARD * max(1.0, r))


@dataclass(frozen=True)
class EpsilonConfig:
    """Slot length and the rounded sizes/loads it induces."""

    epsilon: float
    c0: float
    x_eps: dict[float, float]          # size -> eps * ceil(size / eps)
    n_slots: dict[float, int]          # size -> packet count
    f_eps: dict[QueueNode, float]      # queue -> load at rounded sizes
    rule_chosen: bool = True

    def size_slots(self, x: float) -> int:
        return self.n_slots[x]


def choose_epsilon(profile: LoadProfile, c0: float, override: float | None = None) -> EpsilonConfig:
    """Pick the slot length from the gap-to-capacity rule, or validate an override.

    Rule: eps = min( min_v (1 - f_v) / (c0 * nu_v), min_j (1 - rho_j) ),
    where nu_v counts flows per unit time entering queue v.  The chosen
    value keeps every rounded load f_eps_v at least (c0-1)/c0 of the way
    to its unrounded gap, which is asserted.
    """
    if c0 <= 1:
        raise ConfigError("C0 must exceed 1")
    if any(fv >= 1.0 for fv in profile.f.values()):
        raise StabilityViolationError("load is not admissible; cannot discretize")
    if not profile.lam:
        raise ConfigError("no flow types; slot length undefined")

    if override is not None:
        if override <= 0:
            raise ConfigError("slot length must be positive")
        eps = float(override)
        rule_chosen = False
    else:
        per_queue = []
        for q, fv in profile.f.items():
            nu = profile.flow_rate_at(q)
            if nu > 0:
                per_queue.append((1.0 - fv) / (c0 * nu))
        per_route = [1.0 - rho for rho in profile.rho.values()]
        eps = min(min(per_queue), min(per_route))
        rule_chosen = True

    x_eps: dict[float, float] = {}
    n_slots: dict[float, int] = {}
    for x in profile.sizes():
        k = slot_ceil(x, eps)
        n_slots[x] = k
        x_eps[x] = eps * k

    f_eps: dict[QueueNode, float] = {q: 0.0 for q in profile.f}
    for (j, x), rate in profile.lam.items():
        for q in profile.routes[j].queue_path:
            f_eps[q] += x_eps[x] * rate

    for q, fe in f_eps.items():
        if fe >= 1.0:
            raise StabilityViolationError(f"rounded load at {q} reaches capacity: {fe}")
        if rule_chosen:
            floor = (c0 - 1.0) / c0 * (1.0 - profile.f[q])
            if 1.0 - fe < floor - 1e-12:
                raise InternalConsistencyError(
                    f"slot rule failed its load-inflation guarantee at {q}"
                )

    return EpsilonConfig(epsilon=eps, c0=float(c0), x_eps=x_eps, n_slots=n_slots,
                         f_eps=f_eps, rule_chosen=rule_chosen)


def ct_delay_oracle(eps: EpsilonConfig, profile: LoadProfile) -> dict[tuple[int, float], float]:
    """Closed-form per-type sojourn: sum over queues of x_eps / (1 - f_eps)."""
    out = {}
    for (j, x) in profile.lam:
        xe = eps.x_eps[x]
        out[(j, x)] = sum(xe / (1.0 - eps.f_eps[q]) for q in profile.routes[j].queue_path)
    return out


@dataclass
class CtResult:
    """Per-flow, per-hop arrival/departure instants along each route."""

    taus: dict[int, list[float]]
    deltas: dict[int, list[float]]
    node_events: dict[QueueNode, list[tuple[float, str, int]]] | None = None

    def sojourn(self, uid: int) -> float:
        return self.deltas[uid][-1] - self.taus[uid][0]


_ARRIVAL = 1
_COMPLETION = 0


class _NodeState:
    __slots__ = ("stack", "service_start", "token")

    def __init__(self) -> None:
        self.stack: list[list] = []       # [uid, remaining]; top is in service
        self.service_start = 0.0
        self.token = 0


def run_ct(
    injections: list[tuple[float, int, int]],
    routes: list[Route],
    types: tuple[FlowType, ...],
    eps: EpsilonConfig,
    record_events: bool = False,
) -> CtResult:
    """Simulate the reference network for (time, type_index, uid) injections.

    Completions at an instant are handled before arrivals at the same
    instant; a completed flow arrives at its next queue immediately.
    Simultaneous arrivals at a queue stack in uid order, so the larger
    uid ends up on top and is served first.
    """
    by_id = {r.id: r for r in routes}
    paths = [tuple(by_id[t.route].queue_path) for t in types]
    service = [eps.x_eps[t.size] for t in types]

    nodes: dict[QueueNode, _NodeState] = {}
    for path in paths:
        for q in path:
            nodes.setdefault(q, _NodeState())

    taus: dict[int, list[float]] = {}
    deltas: dict[int, list[float]] = {}
    hop_of: dict[int, int] = {}
    type_of: dict[int, int] = {}
    node_events = {q: [] for q in nodes} if record_events else None

    queue = EventQueue()
    for t, ti, uid in sorted(injections, key=lambda e: (e[0], e[2])):
        queue.push(t, ("arr", uid), priority=_ARRIVAL)
        taus[uid] = []
        deltas[uid] = []
        hop_of[uid] = 0
        type_of[uid] = ti

    def arrive(t: float, uid: int) -> None:
        ti = type_of[uid]
        q = paths[ti][hop_of[uid]]
        node = nodes[q]
        taus[uid].append(t)
        if node_events is not None:
            node_events[q].append((t, "arr", uid))
        if node.stack:
            top = node.stack[-1]
            top[1] -= t - node.service_start
            if top[1] < -1e-9:
                raise InternalConsistencyError(f"preempted flow {top[0]} overserved at {q}")
        node.stack.append([uid, service[ti]])
        node.service_start = t
        node.token += 1
        queue.push(t + service[ti], ("done", uid, q, node.token), priority=_COMPLETION)

    while queue:
        t, payload = queue.pop()
        if payload[0] == "arr":
            arrive(t, payload[1])
            continue
        _, uid, q, token = payload
        node = nodes[q]
        if token != node.token:
            continue  # superseded by a preemption
        done_uid, remaining = node.stack.pop()
        if done_uid != uid or abs(remaining - (t - node.service_start)) > 1e-6:
            raise InternalConsistencyError(f"completion bookkeeping broken at {q}")
        deltas[uid].append(t)
        if node_events is not None:
            node_events[q].append((t, "dep", uid))
        node.token += 1
        if node.stack:
            node.service_start = t
            queue.push(t + node.stack[-1][1], ("done", node.stack[-1][0], q, node.token),
                       priority=_COMPLETION)
        hop_of[uid] += 1
        if hop_of[uid] < len(paths[type_of[uid]]):
            arrive(t, uid)

    return CtResult(taus=taus, deltas=deltas, node_events=node_events)


def write_ct_table(result: CtResult, types: tuple[FlowType, ...], routes: list[Route],
                   type_of: dict[int, int], path: str) -> None:
    """CSV table `uid,node,tau,delta`, one row per flow per hop."""
    by_id = {r.id: r for r in routes}
    with open(path, "w") as fh:
        fh.write("# dcflow ct-table v1\n")
        fh.write("uid,node,tau,delta\n")
        for uid in sorted(result.taus):
            qpath = by_id[types[type_of[uid]].route].queue_path
            for q, tau, delta in zip(qpath, result.taus[uid], result.deltas[uid]):
                fh.write(f"{uid},{q},{tau!r},{delta!r}\n")
