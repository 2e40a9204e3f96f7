"""Point-process containers: tensors, generating-functional evaluation,
exact differentials, scalar products, and the Poisson/Bernoulli builders.

The evaluation oracle used throughout is a literal transcription of the
defining sum G(psi) = sum_n (1/n!) sum_{tuples} p_n prod psi, looped over
itertools.product so it shares nothing with the vectorized path.
"""

import itertools
import json
import math

import numpy as np
import pytest

from mobayes import (
    FiniteSpace,
    MultiObjectDensity,
    PoissonSpec,
    bernoulli,
    differentiate,
    evaluate,
    janossy,
    moment,
    poisson,
    scalar_product,
    superpose,
)
from mobayes.finite_pp import is_symmetric, symmetrize, symmetrize_axes
from mobayes.instances import random_density, space


def eval_brute(P: MultiObjectDensity, psi: np.ndarray) -> float:
    d = P.space.size
    total = 0.0
    for n in range(P.n_max + 1):
        for tup in itertools.product(range(d), repeat=n):
            term = float(P.tensors[n][tup]) if n else float(P.tensors[0])
            for i in tup:
                term *= psi[i]
            total += term / math.factorial(n)
    return total


class TestFiniteSpace:
    def test_index_lookup_and_dirac(self):
        sp = FiniteSpace(("a", "b", "c"))
        assert sp.size == 3
        assert sp.index("b") == 1
        assert sp.index(2) == 2
        np.testing.assert_array_equal(sp.dirac("c"), [0.0, 0.0, 1.0])

    def test_distinct_labels_required(self):
        with pytest.raises(ValueError):
            FiniteSpace(("a", "a"))

    def test_unknown_label(self):
        sp = FiniteSpace(("a", "b"))
        with pytest.raises(KeyError):
            sp.index("z")


class TestSymmetrize:
    def test_matches_permutation_average(self):
        rng = np.random.default_rng(7)
        for n in (2, 3, 4):
            arr = rng.normal(size=(3,) * n)
            avg = np.zeros_like(arr)
            for perm in itertools.permutations(range(n)):
                avg += np.transpose(arr, perm)
            avg /= math.factorial(n)
            np.testing.assert_allclose(symmetrize(arr), avg, atol=1e-14)

    def test_fixed_point(self):
        rng = np.random.default_rng(8)
        s = symmetrize(rng.normal(size=(2, 2, 2)))
        assert is_symmetric(s)
        np.testing.assert_allclose(symmetrize(s), s, atol=1e-15)

    def test_group_restricted_symmetrization(self):
        """Averaging only over chosen axis groups leaves the rest alone."""
        rng = np.random.default_rng(9)
        arr = rng.normal(size=(2, 3, 3, 2))
        got = symmetrize_axes(arr, [(1, 2)])
        np.testing.assert_allclose(got, 0.5 * (arr + arr.transpose(0, 2, 1, 3)), atol=1e-14)
        # axis 0 and 3 have different lengths and stay untouched
        np.testing.assert_allclose(got.sum(), arr.sum(), atol=1e-12)


class TestMultiObjectDensity:
    def test_requires_symmetric_tensors(self):
        sp = space(2)
        bad = np.array([[0.0, 1.0], [0.0, 0.0]])
        with pytest.raises(ValueError):
            MultiObjectDensity(sp, [0.5, np.zeros(2), bad])
        fixed = MultiObjectDensity(sp, [0.5, np.zeros(2), bad], symmetrize_input=True)
        assert is_symmetric(fixed.tensors[2])

    def test_shape_validation(self):
        sp = space(2)
        with pytest.raises(ValueError):
            MultiObjectDensity(sp, [1.0, np.zeros(3)])

    def test_cardinality_distribution_and_mass(self):
        rng = np.random.default_rng(10)
        P = random_density(rng, space(3), 3)
        card = P.cardinality_distribution()
        np.testing.assert_allclose(card.sum(), 1.0, atol=1e-12)
        np.testing.assert_allclose(P.total_mass(), 1.0, atol=1e-12)
        assert P.is_normalized()

    def test_intensity_vector_is_first_factorial_moment(self):
        rng = np.random.default_rng(11)
        P = random_density(rng, space(3), 3)
        expected = np.array([moment(P, [x]) for x in P.space.labels])
        np.testing.assert_allclose(P.intensity_vector(), expected, atol=1e-12)

    def test_json_round_trip(self):
        rng = np.random.default_rng(12)
        P = random_density(rng, space(2), 2)
        Q = MultiObjectDensity.from_json(P.to_json())
        assert Q.space.labels == P.space.labels
        for a, b in zip(P.tensors, Q.tensors):
            np.testing.assert_array_equal(a, b)
        # serialization is canonical, so a second trip is byte-identical
        assert Q.to_json() == P.to_json()


class TestEvaluate:
    def test_normalized_at_ones(self):
        rng = np.random.default_rng(13)
        P = random_density(rng, space(3), 4)
        np.testing.assert_allclose(evaluate(P, np.ones(3)), 1.0, atol=1e-10)

    def test_at_zero_returns_p0(self):
        rng = np.random.default_rng(14)
        P = random_density(rng, space(2), 3)
        assert evaluate(P, np.zeros(2)) == pytest.approx(float(P.tensors[0]), abs=1e-15)

    def test_matches_brute_sum(self):
        rng = np.random.default_rng(15)
        P = random_density(rng, space(3), 3)
        for _ in range(5):
            psi = rng.uniform(-1.0, 1.0, 3)
            np.testing.assert_allclose(evaluate(P, psi), eval_brute(P, psi), atol=1e-12)

    def test_space_mismatch(self):
        rng = np.random.default_rng(16)
        P = random_density(rng, space(2), 2)
        with pytest.raises(ValueError):
            evaluate(P, np.ones(3))


class TestDifferentiate:
    def test_coefficient_shift(self):
        rng = np.random.default_rng(17)
        P = random_density(rng, space(3), 3)
        D = differentiate(P, "b")
        assert D.n_max == P.n_max - 1
        j = P.space.index("b")
        for n in range(D.n_max + 1):
            np.testing.assert_array_equal(D.tensors[n], P.tensors[n + 1][j])

    def test_variation_via_finite_difference_direction(self):
        """Evaluating the shifted functional equals the Gateaux derivative
        along a one-hot increment, which for a polynomial is exact."""
        rng = np.random.default_rng(18)
        P = random_density(rng, space(2), 3)
        psi = rng.uniform(0.0, 1.0, 2)
        e0 = np.array([1.0, 0.0])
        h = 0.5
        stencil = (evaluate(P, psi + h * e0) - evaluate(P, psi - h * e0)) / (2 * h)
        # central difference of a cubic has an h^2 error from the cubic term;
        # subtract it with one extra stencil evaluation (Richardson)
        stencil2 = (evaluate(P, psi + 2 * h * e0) - evaluate(P, psi - 2 * h * e0)) / (4 * h)
        richardson = (4 * stencil - stencil2) / 3
        np.testing.assert_allclose(evaluate(differentiate(P, 0), psi), richardson, atol=1e-12)

    def test_differentiation_order_commutes(self):
        rng = np.random.default_rng(19)
        P = random_density(rng, space(3), 3)
        one_way = differentiate(differentiate(P, "a"), "c")
        other = differentiate(differentiate(P, "c"), "a")
        for s, t in zip(one_way.tensors, other.tensors):
            np.testing.assert_array_equal(s, t)

    def test_second_derivative_at_zero_recovers_p2(self):
        rng = np.random.default_rng(20)
        P = random_density(rng, space(2), 3)
        D2 = differentiate(differentiate(P, "a"), "b")
        assert evaluate(D2, np.zeros(2)) == pytest.approx(
            float(P.tensors[2][0, 1]), abs=1e-15
        )

    def test_exhausted_functional_is_zero(self):
        P = MultiObjectDensity(space(2), [1.0])
        D = differentiate(P, "a")
        assert D.n_max == 0
        assert float(D.tensors[0]) == 0.0


class TestJanossyAndMoment:
    def test_janossy_reads_back_stored_tensors(self):
        rng = np.random.default_rng(21)
        P = random_density(rng, space(3), 3)
        for n in range(P.n_max + 1):
            for tup in itertools.product(P.space.labels, repeat=n):
                idx = P.space.indices(tup)
                stored = float(P.tensors[n][idx]) if n else float(P.tensors[0])
                assert janossy(P, tup) == pytest.approx(stored, abs=1e-12)

    def test_empty_tuple(self):
        rng = np.random.default_rng(22)
        P = random_density(rng, space(2), 2)
        assert janossy(P, ()) == pytest.approx(float(P.tensors[0]), abs=1e-15)
        assert moment(P, ()) == pytest.approx(1.0, abs=1e-12)

    def test_moment_against_brute_counting(self):
        """First factorial moment by literally counting point occurrences."""
        rng = np.random.default_rng(23)
        P = random_density(rng, space(2), 3)
        x = 1
        brute = 0.0
        for n in range(P.n_max + 1):
            for tup in itertools.product(range(2), repeat=n):
                brute += tup.count(x) * float(P.tensors[n][tup]) / math.factorial(n)
        assert moment(P, [x]) == pytest.approx(brute, abs=1e-12)

    def test_too_long_tuple_rejected(self):
        rng = np.random.default_rng(24)
        P = random_density(rng, space(2), 2)
        with pytest.raises(ValueError):
            janossy(P, ("a",) * 3)


class TestScalarProduct:
    def test_constant_functional_extracts_p0(self):
        rng = np.random.default_rng(25)
        P = random_density(rng, space(2), 3)
        unit = MultiObjectDensity(P.space, [1.0])
        assert scalar_product(P, unit) == pytest.approx(float(P.tensors[0]), abs=1e-15)

    def test_symmetry(self):
        rng = np.random.default_rng(26)
        P = random_density(rng, space(3), 2)
        Q = random_density(rng, space(3), 2)
        assert scalar_product(P, Q) == pytest.approx(scalar_product(Q, P), abs=1e-14)

    def test_all_ones_coefficients_give_total_mass(self):
        rng = np.random.default_rng(27)
        P = random_density(rng, space(2), 3)
        ones = MultiObjectDensity(
            P.space, [np.ones((2,) * n) for n in range(P.n_max + 1)]
        )
        assert scalar_product(P, ones) == pytest.approx(1.0, abs=1e-10)

    def test_bilinearity(self):
        rng = np.random.default_rng(28)
        sp = space(2)
        P1, P1b, P2 = (random_density(rng, sp, 2) for _ in range(3))
        a, b = 0.7, -0.3
        combo = MultiObjectDensity(
            sp,
            [a * s + b * t for s, t in zip(P1.tensors, P1b.tensors)],
        )
        lhs = scalar_product(combo, P2)
        rhs = a * scalar_product(P1, P2) + b * scalar_product(P1b, P2)
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)


class TestPoisson:
    def test_zero_intensity_is_certain_emptiness(self):
        P = poisson(PoissonSpec(np.zeros(2)), space(2), n_max=3)
        assert float(P.tensors[0]) == 1.0
        for t in P.tensors[1:]:
            np.testing.assert_array_equal(t, np.zeros_like(t))

    def test_tensors_are_scaled_outer_powers(self):
        mu = np.array([0.4, 0.25, 0.1])
        P = poisson(PoissonSpec(mu), space(3), n_max=3)
        lam = mu.sum()
        np.testing.assert_allclose(float(P.tensors[0]), math.exp(-lam), atol=1e-15)
        np.testing.assert_allclose(
            P.tensors[2], math.exp(-lam) * np.multiply.outer(mu, mu), atol=1e-15
        )

    def test_auto_truncation_controls_tail(self):
        mu = np.array([0.6, 0.4])  # lam = 1
        P = poisson(PoissonSpec(mu, tail_tol=1e-12), space(2))
        n = P.n_max
        tail = 1.0 - math.exp(-1.0) * sum(1.0 / math.factorial(k) for k in range(n + 1))
        assert tail < 1e-12
        assert P.truncation_mass == pytest.approx(tail, abs=1e-15)
        # one cardinality fewer would have violated the tolerance
        tail_short = 1.0 - math.exp(-1.0) * sum(1.0 / math.factorial(k) for k in range(n))
        assert tail_short >= 1e-12

    def test_generating_functional_is_truncated_exponential(self):
        rng = np.random.default_rng(29)
        mu = np.array([0.3, 0.5])
        P = poisson(PoissonSpec(mu, tail_tol=1e-12), space(2))
        for _ in range(5):
            psi = rng.uniform(-1.0, 1.0, 2)
            target = math.exp(float(mu @ (psi - 1.0)))
            assert evaluate(P, psi) == pytest.approx(target, abs=1e-11)

    def test_janossy_and_moment_closed_forms(self):
        mu = np.array([0.5, 0.2])
        P = poisson(PoissonSpec(mu, tail_tol=1e-14), space(2))
        lam = mu.sum()
        assert janossy(P, ("a", "b", "a")) == pytest.approx(
            math.exp(-lam) * mu[0] * mu[1] * mu[0], abs=1e-15
        )
        np.testing.assert_allclose(P.intensity_vector(), mu, atol=1e-12)

    def test_unreachable_tail_refused(self):
        with pytest.raises(ValueError):
            poisson(PoissonSpec(np.array([4.0, 4.0]), tail_tol=1e-14), space(2))

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            PoissonSpec(np.array([-0.1]))
        with pytest.raises(ValueError):
            PoissonSpec(np.array([0.1]), tail_tol=0.0)


class TestBernoulliAndSuperpose:
    def test_bernoulli_layout(self):
        f = np.array([0.25, 0.75])
        P = bernoulli(0.3, f, space(2))
        assert float(P.tensors[0]) == pytest.approx(0.7)
        np.testing.assert_allclose(P.tensors[1], 0.3 * f)
        assert P.is_normalized()

    def test_bernoulli_zero_is_empty_process(self):
        P = bernoulli(0.0, np.array([1.0, 0.0]), space(2))
        assert float(P.tensors[0]) == 1.0
        np.testing.assert_array_equal(P.tensors[1], np.zeros(2))

    def test_bernoulli_validation(self):
        with pytest.raises(ValueError):
            bernoulli(1.2, np.array([0.5, 0.5]), space(2))
        with pytest.raises(ValueError):
            bernoulli(0.5, np.array([0.6, 0.6]), space(2))

    def test_superpose_with_padded_unit_is_identity(self):
        rng = np.random.default_rng(30)
        P = random_density(rng, space(2), 3)
        unit = MultiObjectDensity(
            P.space,
            [1.0] + [np.zeros((2,) * n) for n in range(1, P.n_max + 1)],
        )
        S = superpose(P, unit)
        for s, t in zip(S.tensors, P.tensors):
            np.testing.assert_allclose(s, t, atol=1e-15)

    def test_superpose_of_poissons_adds_intensities(self):
        sp = space(2)
        mu1, mu2 = np.array([0.3, 0.1]), np.array([0.2, 0.4])
        cap = 6
        S = superpose(
            poisson(PoissonSpec(mu1), sp, n_max=cap),
            poisson(PoissonSpec(mu2), sp, n_max=cap),
        )
        target = poisson(PoissonSpec(mu1 + mu2), sp, n_max=cap)
        for s, t in zip(S.tensors, target.tensors):
            np.testing.assert_allclose(s, t, atol=1e-10)

    def test_superpose_multiplies_generating_functionals(self):
        rng = np.random.default_rng(31)
        P1 = random_density(rng, space(2), 2)
        P2 = random_density(rng, space(2), 2)
        S = superpose(P1, P2)
        for _ in range(5):
            psi = rng.uniform(-1.0, 1.0, 2)
            lhs = evaluate(S, psi)
            rhs = evaluate(P1, psi) * evaluate(P2, psi)
            assert abs(lhs - rhs) <= S.truncation_mass + 1e-10

    def test_superpose_records_dropped_mass(self):
        rng = np.random.default_rng(32)
        P1 = random_density(rng, space(2), 2)
        P2 = random_density(rng, space(2), 2)
        S = superpose(P1, P2)
        # both factors are normalized, so whatever is missing was truncated
        np.testing.assert_allclose(
            S.total_mass() + S.truncation_mass, 1.0, atol=1e-12
        )

    def test_superpose_space_mismatch(self):
        rng = np.random.default_rng(33)
        with pytest.raises(ValueError):
            superpose(
                random_density(rng, space(2), 1),
                random_density(rng, space(2, "z"), 1),
            )
