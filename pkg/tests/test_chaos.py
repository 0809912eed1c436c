import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qchaos.chaos import (
    ChaosProfile,
    DiscreteMeasure,
    chaos_profile_classical,
    chaos_profile_quantum,
    check_measure_guard,
    classical_marginal,
    is_symmetric_measure,
    measure_power,
    permute_measure,
    point_mass,
    product_measure,
    profile_csv,
    scaling_exponent,
    total_variation,
)
from qchaos.errors import MemoryGuardError
from qchaos.operators import kron_power, pure_state_projector

from conftest import random_density


def measure(weights, j_size=2, n=None, tol=1e-12):
    w = np.asarray(weights, dtype=float)
    if n is None:
        n = 1
        while j_size**n < w.size:
            n += 1
    return DiscreteMeasure(j_size, n, w, tol)


def ghz_density(n):
    dim = 2**n
    p0 = np.zeros((dim, dim), dtype=complex)
    p0[0, 0] = 1.0
    p1 = np.zeros((dim, dim), dtype=complex)
    p1[-1, -1] = 1.0
    return 0.5 * (p0 + p1)


class TestDiscreteMeasure:
    def test_validation(self):
        with pytest.raises(ValueError):
            measure([0.5, 0.6])
        with pytest.raises(ValueError):
            measure([1.2, -0.2])
        with pytest.raises(ValueError):
            DiscreteMeasure(2, 2, np.array([1.0, 0.0]))

    def test_dust_clamped(self):
        p = measure([1.0 + 5e-13, -5e-13])
        assert p.weights[1] == 0.0

    def test_guard(self):
        with pytest.raises(MemoryGuardError):
            check_measure_guard(2, 21)


class TestMarginal:
    def test_product_measure_marginal(self):
        p = measure([0.7, 0.3])
        p3 = measure_power(p, 3)
        assert np.allclose(classical_marginal(p3, 2).weights, measure_power(p, 2).weights)
        assert np.allclose(classical_marginal(p3, 1).weights, p.weights)

    def test_full_marginal_is_identity(self):
        p = measure([0.1, 0.2, 0.3, 0.4], n=2)
        assert np.array_equal(classical_marginal(p, 2).weights, p.weights)

    def test_correlated_pair(self):
        # weights (0.5, 0, 0, 0.5) on two bits: each coordinate is fair
        p = measure([0.5, 0.0, 0.0, 0.5], n=2)
        assert np.allclose(classical_marginal(p, 1).weights, [0.5, 0.5])

    def test_out_of_range(self):
        p = measure([0.5, 0.5])
        with pytest.raises(ValueError):
            classical_marginal(p, 2)

    def test_marginal_commutes_with_symmetrization(self):
        rng = np.random.default_rng(3)
        w = rng.random(8)
        p = measure(w / w.sum(), n=3)
        swapped = permute_measure(p, (2, 1, 3))
        sym = measure((p.weights + swapped.weights) / 2, n=3)
        lhs = classical_marginal(sym, 2).weights
        # symmetrizing after taking the 2-marginal of each summand
        rhs = (
            classical_marginal(p, 2).weights + classical_marginal(swapped, 2).weights
        ) / 2
        assert np.allclose(lhs, rhs)

    def test_marginal_of_symmetric_is_symmetric(self):
        p = measure([0.25, 0.25, 0.25, 0.25], n=2)
        mixed = measure([0.0, 0.5, 0.5, 0.0], n=2)
        for q in (p, mixed):
            assert is_symmetric_measure(q)
        p3 = measure_power(measure([0.6, 0.4]), 3)
        assert is_symmetric_measure(classical_marginal(p3, 2))


class TestSymmetry:
    def test_product_power_is_symmetric(self):
        assert is_symmetric_measure(measure_power(measure([0.7, 0.3]), 4))

    def test_point_mass_asymmetric(self):
        assert not is_symmetric_measure(measure([0.0, 1.0, 0.0, 0.0], n=2))

    def test_symmetrized_pair_of_point_masses(self):
        assert is_symmetric_measure(measure([0.0, 0.5, 0.5, 0.0], n=2))


class TestTotalVariation:
    def test_identical(self):
        p = measure([0.3, 0.7])
        assert total_variation(p, p) == 0.0

    def test_disjoint_point_masses(self):
        assert total_variation(point_mass(0, 2, 1), point_mass(1, 2, 1)) == 1.0

    def test_direct_sum(self):
        assert np.isclose(total_variation(measure([0.7, 0.3]), measure([0.5, 0.5])), 0.2)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            total_variation(measure([0.5, 0.5]), measure([0.25] * 4, n=2))

    @given(st.integers(0, 10_000))
    @settings(max_examples=50, deadline=None)
    def test_metric_axioms(self, seed):
        r = np.random.default_rng(seed)
        trio = []
        for _ in range(3):
            w = r.random(4)
            trio.append(measure(w / w.sum(), n=2))
        p, q, s = trio
        assert abs(total_variation(p, q) - total_variation(q, p)) < 1e-12
        assert total_variation(p, s) <= total_variation(p, q) + total_variation(q, s) + 1e-12
        assert 0.0 <= total_variation(p, q) <= 1.0


class TestQuantumProfile:
    def test_exact_product_family_is_zero(self, rng):
        rho = random_density(2, rng, rank=2)
        family = [(n, kron_power(rho, n, 2)) for n in (2, 3, 4, 5)]
        for k in (1, 2):
            profile = chaos_profile_quantum(family, rho, k, 2)
            assert max(profile.distances) < 1e-10

    def test_ghz_family_zero_k1_constant_k2(self):
        family = [(n, ghz_density(n)) for n in (2, 3, 4, 6, 8)]
        limit = np.eye(2) / 2
        k1 = chaos_profile_quantum(family, limit, 1, 2)
        assert max(k1.distances) < 1e-10
        k2 = chaos_profile_quantum(family, limit, 2, 2)
        # marginals are (P00 + P11)/2 against I/4: four eigenvalues of
        # modulus 1/4, so the trace-norm distance is exactly 1
        assert np.allclose(k2.distances, 1.0, atol=1e-10)

    def test_warns_on_asymmetric_member(self, rng):
        rho = np.kron(np.diag([1.0, 0.0]), np.diag([0.0, 1.0])).astype(complex)
        with pytest.warns(UserWarning):
            chaos_profile_quantum([(2, rho)], np.eye(2) / 2, 1, 2)

    def test_rejects_k_above_n(self, rng):
        rho = kron_power(random_density(2, rng), 2, 2)
        with pytest.raises(ValueError):
            chaos_profile_quantum([(2, rho)], random_density(2, rng), 3, 2)


class TestClassicalProfile:
    def test_product_family_is_zero(self):
        p = measure([0.7, 0.3])
        family = [(n, measure_power(p, n)) for n in (2, 3, 4)]
        for k in (1, 2):
            profile = chaos_profile_classical(family, p, k)
            assert max(profile.distances) < 1e-12

    def test_correlated_family_constant_k2(self):
        # classical twin of the GHZ family: half-half mix of constant tuples
        def corr(n):
            w = np.zeros(2**n)
            w[0] = w[-1] = 0.5
            return DiscreteMeasure(2, n, w)

        family = [(n, corr(n)) for n in (2, 3, 5, 8)]
        uniform = measure([0.5, 0.5])
        k1 = chaos_profile_classical(family, uniform, 1)
        assert max(k1.distances) < 1e-12
        k2 = chaos_profile_classical(family, uniform, 2)
        assert np.allclose(k2.distances, 0.5, atol=1e-12)


class TestScalingExponent:
    def test_exact_power_law(self):
        points = [(n, 3.0 / n) for n in (2, 4, 8, 16)]
        prof = ChaosProfile(k=1, norm="tv", points=points)
        assert abs(scaling_exponent(prof) + 1.0) < 1e-6

    def test_constant_profile(self):
        prof = ChaosProfile(k=1, norm="tv", points=[(2, 0.5), (4, 0.5), (8, 0.5)])
        assert abs(scaling_exponent(prof)) < 1e-12

    def test_flags(self):
        assert scaling_exponent(ChaosProfile(k=1, norm="tv", points=[(2, 0.1), (4, 0.05)])) is None
        zero = ChaosProfile(k=1, norm="tv", points=[(2, 0.1), (4, 0.0), (8, 0.1)])
        assert scaling_exponent(zero) is None


class TestProfileCsv:
    def test_header_and_rows(self):
        prof = ChaosProfile(k=2, norm="trace", points=[(2, 0.25), (4, 0.125)])
        text = profile_csv(prof, "spohn-convergence", "abc123")
        lines = text.strip().split("\n")
        assert lines[0] == "# scenario=spohn-convergence k=2 norm=trace config=abc123"
        assert lines[1] == "n,distance"
        assert lines[2] == "2,0.25"
        assert lines[3] == "4,0.125"

    def test_validation(self):
        with pytest.raises(ValueError):
            ChaosProfile(k=1, norm="l2", points=[])
        with pytest.raises(ValueError):
            ChaosProfile(k=1, norm="tv", points=[(4, 0.1), (2, 0.2)])


class TestProductMeasure:
    def test_kron_structure(self):
        p = measure([0.7, 0.3])
        q = measure([0.5, 0.5])
        pq = product_measure(p, q)
        assert np.allclose(pq.weights, [0.35, 0.35, 0.15, 0.15])
        assert pq.n == 2

    def test_permute_measure_roundtrip(self):
        rng = np.random.default_rng(5)
        w = rng.random(8)
        p = measure(w / w.sum(), n=3)
        images = (3, 1, 2)
        inverse = (2, 3, 1)
        back = permute_measure(permute_measure(p, images), inverse)
        assert np.allclose(back.weights, p.weights)
