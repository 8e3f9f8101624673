"""Brute-force oracle suite, runnable from the CLI and from tests.

Three families of checks, each against an implementation-independent
reference: the normalizer recurrence versus direct enumeration of the
splitting set, processor-sharing recovery in exact arithmetic, and the
slot-granularity rule's load-inflation guarantee on random admissible
networks.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .ct_network import choose_epsilon
from .sfa_core import (
    BandwidthNetworkSpec,
    phi_big,
    phi_big_bruteforce,
    phi_rate,
)
from .topology import TreeSpec, build_dag, compute_loads, make_route


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def random_spec(rng: np.random.Generator, max_resources: int = 4,
                max_routes: int = 3) -> BandwidthNetworkSpec:
    n_res = int(rng.integers(1, max_resources + 1))
    n_routes = int(rng.integers(1, max_routes + 1))
    routes = []
    consumption = []
    for _ in range(n_routes):
        k = int(rng.integers(1, n_res + 1))
        res = tuple(sorted(rng.choice(n_res, size=k, replace=False).tolist()))
        routes.append(res)
        consumption.append(tuple(int(b) for b in rng.integers(1, 4, size=k)))
    caps = tuple(int(c) for c in rng.integers(1, 5, size=n_res))
    return BandwidthNetworkSpec(
        capacities=caps,
        route_resources=tuple(routes),
        consumption=tuple(consumption),
    )


def occupancies_within(n_routes: int, cap: int):
    if n_routes == 0:
        yield ()
        return
    for head in range(cap + 1):
        for rest in occupancies_within(n_routes - 1, cap - head):
            yield (head,) + rest


def check_normalizer_oracle(n_specs: int = 200, occupancy_cap: int = 6,
                            seed: int = 2024) -> CheckResult:
    """Recurrence equals brute-force enumeration: exact in rational mode,
    1e-12 relative in float mode."""
    rng = np.random.Generator(np.random.PCG64(seed))
    checked = 0
    for _ in range(n_specs):
        spec = random_spec(rng)
        for n in occupancies_within(spec.n_routes, occupancy_cap):
            want_exact = phi_big_bruteforce(spec, n, exact=True)
            got_exact = phi_big(spec, n, exact=True)
            if got_exact != want_exact:
                return CheckResult(
                    "normalizer_oracle", False,
                    f"exact mismatch at {n} on spec {spec}: {got_exact} != {want_exact}",
                )
            want = phi_big_bruteforce(spec, n)
            got = phi_big(spec, n)
            if abs(got - want) > 1e-12 * max(1.0, abs(want)):
                return CheckResult(
                    "normalizer_oracle", False,
                    f"float mismatch at {n} on spec {spec}: {got} != {want}",
                )
            checked += 1
    return CheckResult(
        "normalizer_oracle", True,
        f"{n_specs} random specs, {checked} occupancies, exact and 1e-12 float agreement",
    )


def check_processor_sharing(occupancy_cap: int = 30) -> CheckResult:
    """Two routes on one shared unit resource: rate of route 1 must be
    exactly n1 / (n1 + n2)."""
    spec = BandwidthNetworkSpec.unit(1, [(0,), (0,)])
    for n1 in range(occupancy_cap + 1):
        for n2 in range(occupancy_cap + 1 - n1):
            if n1 + n2 == 0:
                continue
            alloc = phi_rate(spec, (n1, n2), exact=True)
            want = Fraction(n1, n1 + n2)
            if alloc.phi[0] != want:
                return CheckResult(
                    "processor_sharing", False,
                    f"phi_1({n1},{n2}) = {alloc.phi[0]} != {want}",
                )
    return CheckResult(
        "processor_sharing", True,
        f"exact n1/(n1+n2) recovery for all occupancies up to {occupancy_cap}",
    )


def random_admissible_network(rng: np.random.Generator):
    """Random small tree, routes, and rates scaled inside the admissible
    region; returns (profile, c0)."""
    n_nodes = int(rng.integers(2, 7))
    nodes = tuple(f"n{i}" for i in range(n_nodes))
    parent = {nodes[i]: nodes[int(rng.integers(0, i))] for i in range(1, n_nodes)}
    tree = TreeSpec(nodes=nodes, root=nodes[0], parent=parent)
    dag = build_dag(tree)

    n_routes = int(rng.integers(1, 4))
    routes = []
    for j in range(n_routes):
        src, dst = rng.choice(n_nodes, size=2, replace=False)
        routes.append(make_route(dag, nodes[src], nodes[dst], route_id=j))

    sizes = [0.5, 1.0, 2.0]
    lam = {}
    for route in routes:
        for x in rng.choice(sizes, size=int(rng.integers(1, 3)), replace=False):
            lam[(route.id, float(x))] = float(rng.uniform(0.05, 1.0))

    profile = compute_loads(routes, lam)
    worst = max(profile.f.values())
    target = float(rng.uniform(0.2, 0.95))
    scale = target / worst
    lam = {k: v * scale for k, v in lam.items()}
    profile = compute_loads(routes, lam)
    c0 = float(rng.uniform(1.01, 5.0))
    return profile, c0


def check_epsilon_rule(n_configs: int = 100, seed: int = 77) -> CheckResult:
    """Slot rule keeps every rounded load strictly feasible and within the
    (C0-1)/C0 inflation floor, as exact inequalities."""
    rng = np.random.Generator(np.random.PCG64(seed))
    for i in range(n_configs):
        profile, c0 = random_admissible_network(rng)
        eps = choose_epsilon(profile, c0)
        for q, fe in eps.f_eps.items():
            if not fe < 1.0:
                return CheckResult(
                    "epsilon_rule", False, f"config {i}: rounded load {fe} at {q} reaches 1"
                )
            floor = (c0 - 1.0) / c0 * (1.0 - profile.f[q])
            if not (1.0 - fe) >= floor - 1e-12:
                return CheckResult(
                    "epsilon_rule", False,
                    f"config {i}: inflation floor broken at {q}: 1-f_eps={1.0 - fe} < {floor}",
                )
    return CheckResult("epsilon_rule", True, f"{n_configs} random admissible configs")


def run_selftest(fast: bool = False) -> list[CheckResult]:
    if fast:
        return [
            check_normalizer_oracle(n_specs=40, occupancy_cap=4),
            check_processor_sharing(occupancy_cap=12),
            check_epsilon_rule(n_configs=25),
        ]
    return [
        check_normalizer_oracle(),
        check_processor_sharing(),
        check_epsilon_rule(),
    ]
