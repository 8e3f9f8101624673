import math
from fractions import Fraction

import numpy as np
import pytest

from dcflow.errors import EnumerationLimitError, StabilityViolationError
from dcflow.selftest import occupancies_within, random_spec
from dcflow.sfa_core import (
    BandwidthNetworkSpec,
    expected_flow_delay,
    expected_occupancy,
    phi_big,
    phi_big_bruteforce,
    phi_rate,
    stationary_pi,
)
from dcflow.topology import compute_loads, make_route

CHAIN2 = BandwidthNetworkSpec.unit(2, [(0, 1)])          # one route over two resources
SHARED = BandwidthNetworkSpec.unit(1, [(0,), (0,)])      # two routes, one resource
MM1 = BandwidthNetworkSpec.unit(1, [(0,)])


def test_phi_at_zero_is_one():
    for spec in (CHAIN2, SHARED, MM1):
        assert phi_big(spec, (0,) * spec.n_routes) == 1.0


def test_phi_negative_component_is_zero():
    assert phi_big(SHARED, (-1, 2)) == 0.0
    assert phi_big(SHARED, (-1, 2), exact=True) == 0


def test_phi_chain_counts_split_points():
    for n in range(12):
        assert phi_big(CHAIN2, (n,)) == pytest.approx(n + 1)


def test_phi_shared_is_binomial():
    for n1 in range(8):
        for n2 in range(8):
            assert phi_big(SHARED, (n1, n2)) == pytest.approx(math.comb(n1 + n2, n1))


def test_rate_chain():
    for n in range(1, 10):
        alloc = phi_rate(CHAIN2, (n,))
        assert alloc.phi[0] == pytest.approx(n / (n + 1))


def test_rate_processor_sharing_exact():
    for n1 in range(13):
        for n2 in range(13):
            if n1 + n2 == 0:
                continue
            alloc = phi_rate(SHARED, (n1, n2), exact=True)
            assert alloc.phi[0] == Fraction(n1, n1 + n2)
            assert alloc.phi[1] == Fraction(n2, n1 + n2)


def test_rate_zero_for_empty_route():
    alloc = phi_rate(SHARED, (0, 3))
    assert alloc.phi[0] == 0.0
    assert alloc.phi[1] == pytest.approx(1.0)


def test_phi_matches_bruteforce_on_random_specs():
    rng = np.random.Generator(np.random.PCG64(99))
    for _ in range(30):
        spec = random_spec(rng)
        for n in occupancies_within(spec.n_routes, 4):
            want = phi_big_bruteforce(spec, n)
            got = phi_big(spec, n)
            assert abs(got - want) <= 1e-12 * max(1.0, abs(want))
            assert phi_big(spec, n, exact=True) == phi_big_bruteforce(spec, n, exact=True)


def test_allocation_respects_capacities():
    rng = np.random.Generator(np.random.PCG64(3))
    for _ in range(20):
        spec = random_spec(rng)
        for n in occupancies_within(spec.n_routes, 4):
            alloc = phi_rate(spec, n)
            for l in range(spec.n_resources):
                used = 0.0
                for j in spec.routes_using(l):
                    k = spec.route_resources[j].index(l)
                    used += float(spec.consumption[j][k]) * alloc.phi[j]
                assert used <= float(spec.capacities[l]) + 1e-9


def test_per_route_rate_never_exceeds_capacity_ratio():
    rng = np.random.Generator(np.random.PCG64(4))
    for _ in range(20):
        spec = random_spec(rng)
        for n in occupancies_within(spec.n_routes, 3):
            alloc = phi_rate(spec, n)
            for j in range(spec.n_routes):
                for k, l in enumerate(spec.route_resources[j]):
                    cap = float(spec.capacities[l]) / float(spec.consumption[j][k])
                    assert alloc.phi[j] <= cap + 1e-9


def test_normalizer_monotone_on_unit_specs():
    for spec in (CHAIN2, SHARED, MM1):
        for n in occupancies_within(spec.n_routes, 8):
            for j in range(spec.n_routes):
                if n[j] == 0:
                    continue
                m = list(n)
                m[j] -= 1
                assert phi_big(spec, n) >= phi_big(spec, tuple(m)) - 1e-12


def test_enumeration_budget_error():
    spec = BandwidthNetworkSpec.unit(1, [(0,)], max_total_occupancy=5)
    with pytest.raises(EnumerationLimitError):
        phi_big(spec, (6,))


def test_stationary_pi_mm1():
    law = stationary_pi(MM1, (0.5,))
    for n in range(10):
        assert law.pi((n,)) == pytest.approx(0.5 * 0.5**n)
    assert law.pi((0,)) == pytest.approx(0.5)


def test_stationary_pi_truncated_mass_is_geometric():
    law = stationary_pi(MM1, (0.5,))
    total = sum(law.pi((n,)) for n in range(41))
    assert abs(total - (1 - 0.5**41)) < 1e-9


def test_stationary_pi_no_traffic_concentrates_at_zero():
    law = stationary_pi(MM1, (0.0,))
    assert law.pi((0,)) == pytest.approx(1.0)
    assert law.pi((1,)) == 0.0


def test_stationary_pi_two_routes_shared():
    law = stationary_pi(SHARED, (0.25, 0.25))
    for n1, n2 in [(0, 0), (1, 0), (2, 1), (3, 3)]:
        want = 0.5 * math.comb(n1 + n2, n1) * 0.25 ** (n1 + n2)
        assert law.pi((n1, n2)) == pytest.approx(want)


def test_stationary_pi_rejects_overload():
    with pytest.raises(StabilityViolationError):
        stationary_pi(MM1, (1.0,))
    with pytest.raises(StabilityViolationError):
        stationary_pi(SHARED, (0.6, 0.5))


def test_expected_occupancy_forms():
    assert expected_occupancy(MM1, (0.5,))[0] == pytest.approx(1.0)
    for d in (1, 2, 4):
        spec = BandwidthNetworkSpec.unit(d, [tuple(range(d))])
        for a in (0.1, 0.5, 0.8):
            assert expected_occupancy(spec, (a,))[0] == pytest.approx(d * a / (1 - a))
    assert expected_occupancy(MM1, (0.0,))[0] == 0.0


def test_expected_flow_delay(chain_dag):
    route = make_route(chain_dag, "g", "r", route_id=0)
    profile = compute_loads([route], {(0, 1.0): 0.5})
    delays = expected_flow_delay(profile)
    assert delays[(0, 1.0)] == pytest.approx(4.0)

    light = compute_loads([route], {(0, 3.0): 1e-9})
    assert expected_flow_delay(light)[(0, 3.0)] == pytest.approx(3.0 * 2, rel=1e-6)

    # never exceeds the route-level bound x*d/(1-rho)
    for lam_ in (0.1, 0.5, 0.9):
        p = compute_loads([route], {(0, 1.0): lam_})
        val = expected_flow_delay(p)[(0, 1.0)]
        assert val <= 1.0 * 2 / (1 - p.rho[0]) + 1e-12


def test_expected_flow_delay_rejects_overload(chain_dag):
    route = make_route(chain_dag, "g", "r", route_id=0)
    profile = compute_loads([route], {(0, 1.0): 1.2})
    with pytest.raises(StabilityViolationError):
        expected_flow_delay(profile)


def test_spec_validation():
    with pytest.raises(ValueError):
        BandwidthNetworkSpec(capacities=(0,), route_resources=((0,),))
    with pytest.raises(ValueError):
        BandwidthNetworkSpec(capacities=(1,), route_resources=((),))
    with pytest.raises(ValueError):
        BandwidthNetworkSpec(capacities=(1,), route_resources=((0, 0),))
    with pytest.raises(ValueError):
        BandwidthNetworkSpec(capacities=(1,), route_resources=((1,),))
