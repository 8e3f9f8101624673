"""Event-driven simulation of the virtual bandwidth-sharing network.

Each flow type is its own allocation class (its route's queues are the
resources it consumes, with deterministic size).  Between events the rate
vector is constant, so flow completions are computed in closed form: a
class tracks the cumulative service V granted to each of its flows, a
flow arriving when the class had accumulated V departs once the class
reaches V + size, and the allocation is re-evaluated only when the
occupancy vector changes.

The congestion-control rule is: a flow becomes eligible for the internal
network exactly when it departs this virtual network.  Its external wait
therefore equals its virtual sojourn, by construction; the run result
asserts that identity for every flow.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass

from .errors import InternalConsistencyError, StabilityViolationError, StarvationError
from .flow_gen import ArrivalStream, FlowType
from .sfa_core import BandwidthNetworkSpec, _evaluator
from .topology import LoadProfile, Route, compute_loads, is_admissible


def bandwidth_spec_for(
    routes: list[Route], types: tuple[FlowType, ...], occupancy_cap: int = 64
) -> BandwidthNetworkSpec:
    """Map queue-level routes to an allocation spec with one class per type."""
    by_id = {r.id: r for r in routes}
    queue_index: dict = {}
    for route in sorted(by_id.values(), key=lambda r: r.id):
        for q in route.queue_path:
            if q not in queue_index:
                queue_index[q] = len(queue_index)
    class_resources = []
    for ftype in types:
        path = by_id[ftype.route].queue_path
        class_resources.append(tuple(sorted(queue_index[q] for q in path)))
    return BandwidthNetworkSpec.unit(
        len(queue_index), class_resources, max_total_occupancy=occupancy_cap
    )


class NbState:
    """Mutable simulation state: clock, per-class flow sets, current rates."""

    def __init__(
        self,
        spec: BandwidthNetworkSpec,
        sizes: list[float],
        record_states: bool = True,
        record_events: bool = False,
    ):
        if len(sizes) != spec.n_routes:
            raise ValueError("need one flow size per class")
        self.spec = spec
        self.sizes = [float(x) for x in sizes]
        self.clock = 0.0
        self.n = [0] * spec.n_routes
        self.v = [0.0] * spec.n_routes            # cumulative per-flow service
        self.heaps: list[list[tuple[float, int]]] = [[] for _ in range(spec.n_routes)]
        self.phi: list[float] = [0.0] * spec.n_routes
        self.occ_integral = [0.0] * spec.n_routes
        self.state_time: dict[tuple[int, ...], float] = {} if record_states else None
        self.event_log: list[tuple] | None = [] if record_events else None
        self.n_events = 0
        self._ev = _evaluator(spec, exact=False)
        self._feas_cap = [float(c) + 1e-9 for c in spec.capacities]
        self._users = []  # per resource: [(class, consumption), ...]
        for l in range(spec.n_resources):
            row = []
            for j in spec.routes_using(l):
                k = spec.route_resources[j].index(l)
                row.append((j, float(spec.consumption[j][k])))
            self._users.append(row)

    # -- bookkeeping ------------------------------------------------------

    def advance(self, t: float) -> None:
        dt = t - self.clock
        if dt < 0:
            raise InternalConsistencyError(f"clock moved backwards: {self.clock} -> {t}")
        if dt > 0:
            n, v, phi, occ = self.n, self.v, self.phi, self.occ_integral
            for j in range(len(n)):
                nj = n[j]
                if nj:
                    v[j] += phi[j] / nj * dt
                    occ[j] += nj * dt
            if self.state_time is not None:
                key = tuple(n)
                self.state_time[key] = self.state_time.get(key, 0.0) + dt
            self.clock = t

    def _recompute(self) -> None:
        ev = self._ev
        n = tuple(self.n)
        denom = ev.phi(n)
        phi = self.phi
        for j, nj in enumerate(self.n):
            if nj == 0:
                phi[j] = 0.0
                continue
            m = list(n)
            m[j] -= 1
            phi[j] = ev.phi(tuple(m)) / denom
            if not phi[j] > 0.0:
                raise StarvationError(f"class {j} active but allocated zero rate at {n}")
        # capacity feasibility at the new allocation
        n_now = self.n
        for l, row in enumerate(self._users):
            used = 0.0
            for j, b in row:
                if n_now[j]:
                    used += b * phi[j]
            if used > self._feas_cap[l]:
                raise InternalConsistencyError(
                    f"allocation violates capacity of resource {l}: {used}"
                )

    # -- transitions -------------------------------------------------------

    def apply_arrival(self, t: float, class_idx: int, uid: int) -> None:
        self.advance(t)
        heapq.heappush(self.heaps[class_idx], (self.v[class_idx] + self.sizes[class_idx], uid))
        self.n[class_idx] += 1
        self._recompute()
        self.n_events += 1
        if self.event_log is not None:
            self.event_log.append((t, "arrival", class_idx, uid, tuple(self.n), tuple(self.phi)))

    def next_departure(self) -> tuple[float, int, int] | None:
        """Earliest completion under the current rates: (time, class, uid).

        Ties across classes break toward the smaller uid.
        """
        best = None
        for j, nj in enumerate(self.n):
            if not nj:
                continue
            thr, uid = self.heaps[j][0]
            rate = self.phi[j] / nj
            remaining = thr - self.v[j]
            if remaining < -1e-9:
                raise InternalConsistencyError(f"negative residual work {remaining} in class {j}")
            t = self.clock + (remaining / rate if remaining > 0 else 0.0)
            if best is None or (t, uid) < (best[0], best[2]):
                best = (t, j, uid)
        return best

    def apply_departure(self, t: float, class_idx: int, uid: int) -> None:
        self.advance(t)
        thr, top_uid = heapq.heappop(self.heaps[class_idx])
        if top_uid != uid:
            raise InternalConsistencyError(f"departure of {uid} but {top_uid} is due first")
        self.v[class_idx] = thr  # snap out accumulated rounding
        self.n[class_idx] -= 1
        self._recompute()
        self.n_events += 1
        if self.event_log is not None:
            self.event_log.append((t, "departure", class_idx, uid, tuple(self.n), tuple(self.phi)))


def next_departure(state: NbState):
    return state.next_departure()


def step_nb(state: NbState, event: tuple) -> NbState:
    """Apply one ('arrival'|'departure', time, class, uid) event."""
    kind, t, class_idx, uid = event
    if kind == "arrival":
        state.apply_arrival(t, class_idx, uid)
    elif kind == "departure":
        state.apply_departure(t, class_idx, uid)
    else:
        raise ValueError(f"unknown event kind {kind!r}")
    return state


@dataclass
class NbRunResult:
    """Outcome of one virtual-network run."""

    types: tuple[FlowType, ...]
    spec: BandwidthNetworkSpec
    injections: dict[int, float]                     # uid -> eligibility instant
    enter_times: dict[int, float]                    # uid -> arrival into the virtual net
    arrive_times: dict[int, float]                   # uid -> external arrival
    type_of: dict[int, int]
    departures_by_type: list[list[tuple[float, int]]]
    occupancy_time_avg: tuple[float, ...]
    state_time: dict[tuple[int, ...], float] | None
    event_log: list[tuple] | None
    n_events: int
    end_clock: float

    def waiting_delay(self, uid: int) -> float:
        return self.injections[uid] - self.arrive_times[uid]


def run_emulation(
    stream: ArrivalStream,
    routes: list[Route],
    *,
    occupancy_cap: int = 64,
    profile: LoadProfile | None = None,
    record_states: bool = True,
    record_events: bool = False,
) -> NbRunResult:
    """Drive the virtual network with a stream; injection time = departure.

    Refuses inadmissible loads.  For a regularized stream pass the profile
    computed at the effective emission rates.
    """
    types = stream.types
    if profile is None:
        profile = compute_loads(routes, {(t.route, t.size): t.rate for t in types})
    if not is_admissible(profile):
        raise StabilityViolationError("arrival rates are outside the admissible region")

    spec = bandwidth_spec_for(routes, types, occupancy_cap)
    state = NbState(spec, [t.size for t in types], record_states=record_states,
                    record_events=record_events)

    injections: dict[int, float] = {}
    enter: dict[int, float] = {}
    arrive: dict[int, float] = {}
    type_of: dict[int, int] = {}
    departures: list[list[tuple[float, int]]] = [[] for _ in types]

    events = stream.events
    i, total = 0, len(events)
    while True:
        nd = state.next_departure()
        if i < total:
            ta = events[i][0]
            if nd is None or ta < nd[0]:
                t, ti, uid = events[i]
                i += 1
                state.apply_arrival(t, ti, uid)
                enter[uid] = t
                arrive[uid] = stream.arrival_time(uid, t)
                type_of[uid] = ti
                continue
        if nd is None:
            break
        t, j, uid = nd
        state.apply_departure(t, j, uid)
        injections[uid] = t
        departures[j].append((t, uid))

    end_clock = state.clock
    occ_avg = tuple(
        (integral / end_clock if end_clock > 0 else 0.0) for integral in state.occ_integral
    )
    result = NbRunResult(
        types=types,
        spec=spec,
        injections=injections,
        enter_times=enter,
        arrive_times=arrive,
        type_of=type_of,
        departures_by_type=departures,
        occupancy_time_avg=occ_avg,
        state_time=state.state_time,
        event_log=state.event_log,
        n_events=state.n_events,
        end_clock=end_clock,
    )
    _assert_wait_identity(result)
    return result


def _assert_wait_identity(result: NbRunResult) -> None:
    # external-buffer wait of a flow is its virtual sojourn, by wiring;
    # regularized flows additionally waited for their emission epoch
    for uid, t_out in result.injections.items():
        sojourn = t_out - result.enter_times[uid]
        wait = t_out - result.arrive_times[uid]
        pre_wait = result.enter_times[uid] - result.arrive_times[uid]
        if pre_wait < 0 or wait != sojourn + pre_wait:
            raise InternalConsistencyError(f"wait/sojourn identity broken for flow {uid}")


def departure_process(result: NbRunResult, type_index: int, burn_in: float = 0.0) -> list[float]:
    """Departure epochs of one type after burn-in; dummies excluded."""
    return [t for t, uid in result.departures_by_type[type_index] if t >= burn_in and uid >= 0]


def write_injection_trace(result: NbRunResult, path: str) -> None:
    """CSV trace `uid,t_arrive,t_inject`, one row per flow, uid order."""
    with open(path, "w") as fh:
        fh.write("# dcflow injection-trace v1\n")
        fh.write("uid,t_arrive,t_inject\n")
        for uid in sorted(result.injections):
            fh.write(f"{uid},{result.arrive_times[uid]!r},{result.injections[uid]!r}\n")


def write_nb_event_log(result: NbRunResult, path: str) -> None:
    """Debug trace of the run's events as JSON lines; requires the run to
    have been made with record_events=True."""
    if result.event_log is None:
        raise ValueError("run was not recorded; pass record_events=True")
    with open(path, "w") as fh:
        fh.write(json.dumps({"format": "dcflow-nb-events", "version": 1}) + "\n")
        for t, kind, class_idx, uid, n, phi in result.event_log:
            fh.write(
                json.dumps(
                    {"t": t, "event": kind, "class": class_idx, "uid": uid,
                     "n": list(n), "phi": list(phi)}
                )
                + "\n"
            )
