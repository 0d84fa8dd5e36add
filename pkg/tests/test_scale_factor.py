import numpy as np
import pytest
from pytest import approx

from fluxtherm.core import ValidationError, thermal_probabilities
from fluxtherm.scale_factor import (
    KIND_FLAT,
    KIND_NONTRIVIAL,
    KIND_TRIVIAL,
    asymptotic_characteristic,
    energy_extraction_indicator,
    nv_field_sweep,
    nv_spin_energies,
    routh_hurwitz_variations,
    solve_eta_star,
    symmetric_qutrit_cubic,
    symmetric_qutrit_cubic_coefficients,
)
from fluxtherm.tpm import (
    EnergyChangeDistribution,
    characteristic_function,
    mean_energy_change,
    stationary_distribution,
)

from oracles import grid_sign_changes, random_probs, random_spectrum, refine_root


class TestSolveEtaStar:
    def test_thermal_qubit_recovers_beta(self):
        beta = 0.7
        energies = np.array([0.0, 1.0])
        dist = stationary_distribution(thermal_probabilities(energies, beta),
                                       [0.5, 0.5], energies)
        sol = solve_eta_star(dist)
        assert sol.kind == KIND_NONTRIVIAL
        assert sol.eta_star == approx(beta, abs=1e-9)
        assert sol.residual <= 1e-10

    def test_one_sided_jumps_have_only_the_trivial_zero(self):
        dist = EnergyChangeDistribution.from_pairs([0.0, -1.0, -2.0], [0.5, 0.3, 0.2])
        sol = solve_eta_star(dist)
        assert sol.kind == KIND_TRIVIAL
        assert sol.g_at_bounds is not None       # lets callers tell "no root"
        assert sol.eta_star is None              # from "root out of range"

    def test_matches_grid_scan_oracle(self):
        rng = np.random.default_rng(31)
        checked = 0
        while checked < 20:
            n = int(rng.integers(2, 5))
            dist = stationary_distribution(random_probs(rng, n), random_probs(rng, n),
                                           random_spectrum(rng, n))
            sol = solve_eta_star(dist)
            if sol.kind != KIND_NONTRIVIAL or abs(sol.eta_star) < 0.2:
                continue
            eta_max = 1e3 / dist.spread
            changes = grid_sign_changes(dist.deltas, dist.probs, -eta_max, eta_max, 10_000)
            nonzero = [c for c in changes if not (c[0] <= 0.0 <= c[1])]
            assert len(nonzero) == 1
            located = refine_root(dist.deltas, dist.probs, *nonzero[0])
            assert located == approx(sol.eta_star, abs=1e-3)
            checked += 1

    def test_flat_when_initial_equals_asymptotic(self):
        energies = np.array([0.0, 1.0, 2.0])
        p = np.array([0.2, 0.3, 0.5])
        sol = solve_eta_star(stationary_distribution(p, p, energies))
        assert sol.kind == KIND_FLAT

    def test_sign_opposite_to_slope(self):
        rng = np.random.default_rng(32)
        for _ in range(30):
            n = int(rng.integers(2, 5))
            dist = stationary_distribution(random_probs(rng, n), random_probs(rng, n),
                                           random_spectrum(rng, n))
            sol = solve_eta_star(dist)
            if sol.kind == KIND_NONTRIVIAL:
                assert sol.eta_star * sol.slope_at_zero < 0
                assert sol.residual <= 1e-10

    def test_warm_start_agrees_with_cold_start(self):
        energies = np.array([0.0, 0.8, 2.1])
        rng = np.random.default_rng(33)
        dist = stationary_distribution(random_probs(rng, 3), random_probs(rng, 3),
                                       energies)
        cold = solve_eta_star(dist)
        warm = solve_eta_star(dist, eta_guess=cold.eta_star * 1.7)
        assert warm.eta_star == approx(cold.eta_star, abs=1e-10)

    def test_rejects_bad_eta_max(self):
        dist = EnergyChangeDistribution.from_pairs([-1.0, 1.0], [0.5, 0.5])
        with pytest.raises(ValidationError):
            solve_eta_star(dist, eta_max=-1.0)


class TestAsymptoticCharacteristic:
    def test_unit_at_origin(self):
        assert asymptotic_characteristic([0.3, 0.7], [0.6, 0.4], [0.0, 1.0], 0.0) == approx(1.0)

    def test_same_point_mass_flat(self):
        for eta in (-2.0, 0.0, 3.0):
            assert asymptotic_characteristic([1.0, 0.0], [1.0, 0.0], [0.0, 1.0],
                                             eta) == approx(1.0)

    def test_product_form_matches_distribution(self):
        rng = np.random.default_rng(34)
        for _ in range(10):
            n = int(rng.integers(2, 5))
            p_init = random_probs(rng, n)
            p_inf = random_probs(rng, n)
            energies = random_spectrum(rng, n)
            dist = stationary_distribution(p_init, p_inf, energies)
            eta = rng.uniform(-3.0, 3.0)
            assert asymptotic_characteristic(p_init, p_inf, energies, eta) == approx(
                characteristic_function(dist, eta), abs=1e-12, rel=1e-12)


class TestRouthHurwitz:
    def test_all_positive_coefficients(self):
        # Routh column (1, 2, 1, 4) by hand: b1 = (2*3 - 1*4)/2 = 1
        count = routh_hurwitz_variations([1.0, 2.0, 3.0, 4.0])
        assert (count.permanences, count.variations) == (3, 0)
        assert not count.pivot_perturbed

    def test_zero_pivot_perturbation(self):
        # x^3 + x^2 - x - 1 = (x - 1)(x + 1)^2: one right-half-plane root
        count = routh_hurwitz_variations([1.0, 1.0, -1.0, -1.0])
        assert count.variations == 1
        assert count.permanences == 2
        assert count.pivot_perturbed

    def test_global_sign_flip_preserves_counts(self):
        rng = np.random.default_rng(35)
        for _ in range(20):
            c = rng.uniform(-2, 2, size=4)
            if abs(c[0]) < 1e-3:
                c[0] = 1.0
            a = routh_hurwitz_variations(c)
            b = routh_hurwitz_variations(-c)
            assert (a.permanences, a.variations) == (b.permanences, b.variations)

    def test_zero_leading_coefficient_rejected(self):
        with pytest.raises(ValidationError):
            routh_hurwitz_variations([0.0, 1.0, 1.0, 1.0])


class TestSymmetricQutritCubic:
    def test_equal_distributions_make_one_a_root_of_the_cubic(self):
        # with p_init = p_inf the trivial root x = 1 is shared by the cubic,
        # so the full quartic has a double root there
        rng = np.random.default_rng(36)
        p = random_probs(rng, 3)
        coeffs = symmetric_qutrit_cubic_coefficients(p, p)
        assert np.polyval(coeffs, 1.0) == approx(0.0, abs=1e-15)
        with pytest.raises(ValidationError):
            symmetric_qutrit_cubic(p, p, 1.0)

    def test_routh_certifies_single_positive_root(self):
        rng = np.random.default_rng(37)
        for _ in range(100):
            cert = symmetric_qutrit_cubic(random_probs(rng, 3), random_probs(rng, 3),
                                          rng.uniform(0.5, 2.0))
            assert cert.routh_variations == 1
            assert cert.routh_permanences == 2
            assert cert.selected_root.real > 0
            assert abs(cert.selected_root - 1.0) > 1e-9

    def test_cubic_agrees_with_numeric_solver(self):
        rng = np.random.default_rng(38)
        for _ in range(100):
            e_bar = rng.uniform(0.5, 2.0)
            p_init = random_probs(rng, 3)
            p_inf = random_probs(rng, 3)
            cert = symmetric_qutrit_cubic(p_init, p_inf, e_bar)
            energies = np.array([0.0, -e_bar, e_bar])
            sol = solve_eta_star(stationary_distribution(p_init, p_inf, energies))
            assert cert.eta_star == approx(sol.eta_star, abs=1e-9)

    def test_degenerate_inputs_rejected(self):
        with pytest.raises(ValidationError):
            symmetric_qutrit_cubic([1.0, 0.0, 0.0], [1.0, 0.0, 0.0], 1.0)
        with pytest.raises(ValidationError):
            symmetric_qutrit_cubic([0.2, 0.3, 0.5], [0.2, 0.3, 0.5], -1.0)


class TestExtractionIndicator:
    @staticmethod
    def _solution(eta_star, slope, residual=1e-12):
        from fluxtherm.scale_factor import EtaSolution
        return EtaSolution(kind=KIND_NONTRIVIAL, slope_at_zero=slope,
                           eta_star=eta_star, residual=residual, bracket=(0, 1))

    def test_negative_scale_factor_extracts(self):
        assert energy_extraction_indicator(self._solution(-0.5, 0.2), -0.2) == "extraction"

    def test_positive_scale_factor_injects(self):
        assert energy_extraction_indicator(self._solution(0.5, -0.2), 0.2) == "injection"

    def test_trivial_is_neutral(self):
        from fluxtherm.scale_factor import EtaSolution
        sol = EtaSolution(kind=KIND_TRIVIAL, slope_at_zero=0.3)
        assert energy_extraction_indicator(sol, 0.0) == "neutral"

    def test_sign_contradiction_rejected(self):
        with pytest.raises(ValidationError):
            energy_extraction_indicator(self._solution(0.5, -0.2), -0.3)

    def test_large_residual_rejected(self):
        with pytest.raises(ValidationError):
            energy_extraction_indicator(self._solution(0.5, -0.2, residual=1e-3), 0.3)


class TestFieldSweep:
    def test_low_field_only_trivial(self):
        for gb, sol in nv_field_sweep(1.0, 1.0, [0.1, 0.5, 0.9, 0.99]):
            assert sol.kind == KIND_TRIVIAL

    def test_high_field_plateau_near_twice_beta(self):
        for beta in (0.5, 1.0, 2.0):
            sol = nv_field_sweep(beta, 1.0, [1000.0])[0][1]
            assert sol.eta_star / (2 * beta) == approx(1.0, abs=1e-3)

    def test_divergence_approaching_the_crossing(self):
        sol = nv_field_sweep(1.0, 1.0, [1.001])[0][1]
        assert sol.kind == KIND_NONTRIVIAL
        assert sol.eta_star < 0
        assert abs(sol.eta_star) > 10.0
        # the root keeps growing toward the crossing (needs a wider range)
        closer = nv_field_sweep(1.0, 1.0, [1.0001], eta_max=1e5)[0][1]
        assert abs(closer.eta_star) > abs(sol.eta_star)

    def test_exact_crossing_rejected(self):
        with pytest.raises(ValidationError):
            nv_field_sweep(1.0, 1.0, [1.0])

    def test_log_domain_agrees_with_distribution_solver(self):
        beta, delta = 1.0, 1.0
        p_inf = np.array([1.0, 0.0, 0.0])
        for gb in (0.5, 1.2, 1.5, 2.0, 3.0):
            energies = nv_spin_energies(delta, gb)
            dist = stationary_distribution(thermal_probabilities(energies, beta),
                                           p_inf, energies)
            direct = solve_eta_star(dist, eta_max=1000.0)
            swept = nv_field_sweep(beta, delta, [gb])[0][1]
            assert swept.kind == direct.kind
            if direct.kind == KIND_NONTRIVIAL:
                assert swept.eta_star == approx(direct.eta_star, abs=1e-9)

    def test_warm_start_continuity_under_refinement(self):
        # On a smooth window the worst jump scales with the grid spacing;
        # the halving ratio approaches 1/2 from above (0.52 at this size).
        jumps = []
        for k in (24, 48, 96):
            grid = np.linspace(1.5, 3.0, k + 1)
            etas = np.array([s.eta_star for _, s in nv_field_sweep(1.0, 1.0, grid)])
            jumps.append(np.abs(np.diff(etas)).max())
        assert jumps[1] <= 0.55 * jumps[0]
        assert jumps[2] <= 0.55 * jumps[1]

    def test_rejects_bad_parameters(self):
        with pytest.raises(ValidationError):
            nv_field_sweep(0.0, 1.0, [2.0])
        with pytest.raises(ValidationError):
            nv_field_sweep(1.0, -1.0, [2.0])


def test_extraction_sign_property():
    rng = np.random.default_rng(39)
    for _ in range(50):
        n = int(rng.integers(2, 5))
        dist = stationary_distribution(random_probs(rng, n), random_probs(rng, n),
                                       random_spectrum(rng, n))
        sol = solve_eta_star(dist)
        if sol.kind != KIND_NONTRIVIAL:
            continue
        assert sol.eta_star * mean_energy_change(dist) >= -1e-9
