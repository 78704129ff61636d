import math
from fractions import Fraction

import numpy as np
import pytest

from lossyaep.kernel_rate import build_kernel, rate_distortion
from lossyaep.measures import (Alphabet, Ball, DistortionFn, ValidationError, graph_key,
                               make_graph)
from lossyaep.oracle import (GuardError, allocation_law_exact, count_graphs, enumerate_graphs,
                             exact_match_probability, log_tclass_probability, rate_bruteforce,
                             tclass_probability)
from lossyaep.sampler import constraint_of, validate_constraint

A = Alphabet(("a",))
AB = Alphabet(("a", "b"))


def single_edge():
    return validate_constraint(2, [1.0], [[1.0]], A)


def cross_four():
    return validate_constraint(4, [0.5, 0.5], [[0, 0.5], [0.5, 0]], AB)


class TestEnumerate:
    def test_single_edge(self):
        law = enumerate_graphs(single_edge())
        assert law.atoms == {"a a|0-1": 1}

    def test_cross_four(self):
        law = enumerate_graphs(cross_four())
        assert len(law) == 36
        assert set(law.atoms.values()) == {Fraction(1, 36)}
        assert law.total() == 1
        assert all(constraint_of(g) == cross_four() for g in law.objects.values())

    def test_count_matches_enumeration(self):
        c = validate_constraint(5, [0.6, 0.4], [[0.4, 0.4], [0.4, 0.4]], AB)
        assert count_graphs(c) == len(enumerate_graphs(c))

    def test_capacity_violation(self):
        with pytest.raises(ValidationError):
            validate_constraint(2, [1.0], [[3.0]], A)

    def test_guard(self):
        c = validate_constraint(12, [0.5, 0.5], [[0, 1], [1, 0]], AB)
        with pytest.raises(GuardError) as err:
            enumerate_graphs(c, guard=1000)
        assert err.value.size == count_graphs(c) > 1000

    def test_csv(self):
        text = enumerate_graphs(single_edge()).to_csv()
        assert text == "key,numerator,denominator\na a|0-1,1,1\n"


class TestExactMatch:
    def test_large_d_is_one(self):
        x = make_graph("abab", [(0, 1), (2, 3)])
        assert exact_match_probability(x, DistortionFn(), 1.0, cross_four()) == 1

    def test_negative_d_is_zero(self):
        x = make_graph("abab", [(0, 1), (2, 3)])
        assert exact_match_probability(x, DistortionFn(), -0.1, cross_four()) == 0

    def test_hand_count(self):
        # x itself is one of 36 outcomes; distortion 0 exactly when Y has x's balls
        x = make_graph("abab", [(0, 1), (2, 3)])
        p = exact_match_probability(x, DistortionFn(), 0.0, cross_four())
        law = enumerate_graphs(cross_four())
        same = sum(1 for y in law.objects.values() if y.balls() == x.balls())
        assert p == Fraction(same, 36)

    def test_size_mismatch(self):
        with pytest.raises(ValidationError):
            exact_match_probability(make_graph("ab"), DistortionFn(), 0.5, cross_four())


class TestAllocation:
    def test_single_edge_hand_enumeration(self):
        law = allocation_law_exact(single_edge())
        assert law.atoms == {"a[0]*1 a[2]*1": Fraction(1, 2), "a[1]*2": Fraction(1, 2)}

    def test_no_edges(self):
        c = validate_constraint(3, [1 / 3, 2 / 3], [[0, 0], [0, 0]], AB)
        law = allocation_law_exact(c)
        assert list(law.atoms.values()) == [1]
        assert law.objects[next(iter(law.atoms))] == {Ball("a", (0, 0)): Fraction(1, 3),
                                                        Ball("b", (0, 0)): Fraction(2, 3)}

    def test_single_cross_edge_deterministic(self):
        c = validate_constraint(2, [0.5, 0.5], [[0, 0.5], [0.5, 0]], AB)
        law = allocation_law_exact(c)
        assert law.atoms == {"a[0,1]*1 b[1,0]*1": 1}

    def test_guard(self):
        c = validate_constraint(8, [0.5, 0.5], [[0, 1], [1, 0]], AB)
        with pytest.raises(GuardError):
            allocation_law_exact(c, guard=100)


TCLASS_CASES = [
    (2, [1.0], [[1.0]], "a"),
    (4, [0.5, 0.5], [[0.5, 0.5], [0.5, 0.5]], "ab"),
    (3, [2 / 3, 1 / 3], [[2 / 3, 1 / 3], [1 / 3, 0]], "ab"),
    (4, [1.0], [[1.5]], "a"),
]


@pytest.mark.parametrize("n, sigma, pi, alphabet", TCLASS_CASES)
def test_tclass_matches_allocation_law(n, sigma, pi, alphabet):
    c = validate_constraint(n, sigma, pi, alphabet)
    law = allocation_law_exact(c)
    assert law.total() == 1
    for key, nu in law.objects.items():
        assert tclass_probability(nu, c, exact=True) == law.atoms[key]
        assert abs(tclass_probability(nu, c) - float(law.atoms[key])) <= 1e-12
        assert log_tclass_probability(nu, c) == pytest.approx(math.log(law.atoms[key]), abs=1e-12)


def test_tclass_single_edge_value():
    c = single_edge()
    assert tclass_probability({Ball("a", (1,)): 1}, c, exact=True) == Fraction(1, 2)


def test_tclass_impossible():
    c = single_edge()
    assert tclass_probability({Ball("a", (0,)): 1}, c, exact=True) == 0
    assert log_tclass_probability({Ball("a", (0,)): 1}, c) == -math.inf
    with pytest.raises(ValidationError):
        tclass_probability({Ball("a", (1,)): 0.3, Ball("a", (0,)): 0.7}, c)


@pytest.fixture(scope="module")
def binary():
    return build_kernel([0.5, 0.5], [[0, 0], [0, 0]], AB)


class TestBruteforce:
    def test_agrees_with_dual(self, binary):
        rho = DistortionFn()
        grid = np.linspace(-3, 0, 3_000_001)
        brute = rate_bruteforce(binary, rho, 0.25, grid)
        assert brute == pytest.approx(rate_distortion(binary, rho, 0.25).R, abs=1e-6)

    def test_above_davg(self, binary):
        assert rate_bruteforce(binary, DistortionFn(), 0.6, [-1.0, 0.0]) == 0

    def test_refinement_monotone(self, binary):
        rho = DistortionFn()
        for d in (0.1, 0.3):
            coarse = rate_bruteforce(binary, rho, d, np.linspace(-4, 0, 2001))
            fine = rate_bruteforce(binary, rho, d, np.linspace(-4, 0, 4001))
            assert fine <= coarse + 1e-9

    def test_upper_bounds_dual(self):
        K = build_kernel([0.4, 0.6], [[0.3, 0.35], [0.35, 0.5]], AB, 1e-6)
        rho = DistortionFn("squared_degree_diff")
        for d in (0.6, 1.0):
            brute = rate_bruteforce(K, rho, d, np.linspace(-4, 0, 801))
            assert brute >= rate_distortion(K, rho, d).R - 1e-12


def test_graph_key_canonical():
    g = make_graph("ab", [(0, 1)])
    assert graph_key(g) == "a b|0-1"
