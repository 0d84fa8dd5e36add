"""Root finding for the nontrivial scale factor of the exchange relation.

g(eta) = <exp(-eta dE)> - 1 is analytic and convex with g(0) = 0, so it has
at most one further real zero eta*. The solver expands a geometric bracket
on the side where g must come back through zero (opposite to the slope at
the origin) and finishes with plain bisection, which convexity makes
unconditionally safe. The symmetric-qutrit case is also solved in closed
form through a cubic in x = exp(-eta* * E_bar), certified by a Routh table
sign count, and the spin-1 level-sweep helper reproduces the pumped-qutrit
phenomenology including the scale-factor divergence at the level crossing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import ValidationError, validate_probability_vector
from .tpm import (
    EnergyChangeDistribution,
    characteristic_function,
    mean_energy_change,
)

KIND_NONTRIVIAL = "nontrivial"
KIND_TRIVIAL = "trivial_only"
KIND_FLAT = "degenerate_flat"
KIND_DEGENERATE_SPECTRUM = "degenerate_spectrum"


@dataclass(frozen=True)
class EtaSolution:
    """Outcome of the scale-factor search.

    kind is one of "nontrivial" (unique nonzero root found), "trivial_only"
    (bracket expansion exhausted eta_max without a sign change; g at the two
    range ends is reported so "no root" can be told from "root out of
    range") or "degenerate_flat" (slope at the origin vanishes, so the two
    zeros merge and only eta = 0 remains).
    """

    kind: str
    slope_at_zero: float
    eta_star: float | None = None
    residual: float | None = None
    bracket: tuple[float, float] | None = None
    iterations: int = 0
    g_at_bounds: tuple[float, float] | None = None

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "slope_at_zero": self.slope_at_zero,
            "eta_star": self.eta_star,
            "residual": self.residual,
            "bracket": list(self.bracket) if self.bracket else None,
            "iterations": self.iterations,
            "g_at_bounds": list(self.g_at_bounds) if self.g_at_bounds else None,
        }


RESIDUAL_TARGET = 1e-10


def _root_search(g, slope: float, eta_max: float, tol: float,
                 eta_guess: float | None = None) -> EtaSolution:
    """Bracket-and-bisect core shared by the distribution and log-domain paths.

    `g` must be convex with g(0) = 0 and the supplied nonzero slope at the
    origin. The bracket grows geometrically (factor 2) from |eta| = tol, or
    from a warm-start guess, on the side where g initially decreases; no
    sign change up to eta_max means only the trivial zero is in range.
    Bisection refines to width `tol` and keeps halving (down to a few ulps)
    until the residual meets the reporting target, so steep roots are not
    reported with an inflated residual.
    """
    side = 1.0 if slope < 0 else -1.0
    evals = 0

    start = tol
    if eta_guess is not None and eta_guess * side > 0:
        start = min(max(tol, abs(eta_guess) / 16.0), eta_max / 4.0)

    lo = start
    g_lo = g(side * lo)
    evals += 1
    # Warm starts (or a root below tol) can land past the root already.
    while g_lo > 0.0 and lo > 1e-300:
        lo /= 2.0
        g_lo = g(side * lo)
        evals += 1
    if g_lo > 0.0:
        return EtaSolution(kind=KIND_FLAT, slope_at_zero=slope, iterations=evals)

    hi = lo
    g_hi = g_lo
    while g_hi <= 0.0:
        hi *= 2.0
        if hi > eta_max:
            g_neg = g(-eta_max)
            g_pos = g(eta_max)
            return EtaSolution(kind=KIND_TRIVIAL, slope_at_zero=slope,
                               iterations=evals + 2, g_at_bounds=(g_neg, g_pos))
        g_hi = g(side * hi)
        evals += 1
        if g_hi <= 0.0:
            lo, g_lo = hi, g_hi

    # Bisection on the magnitude; invariant g(side*lo) <= 0 < g(side*hi).
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        g_mid = g(side * mid)
        evals += 1
        if g_mid > 0.0:
            hi = mid
        else:
            lo = mid
    # Keep halving (down to a few ulps) until the reported residual is met,
    # so steep roots are not returned with an inflated residual.
    while True:
        mid = 0.5 * (lo + hi)
        g_mid = g(side * mid)
        evals += 1
        residual = abs(g_mid)
        if residual <= RESIDUAL_TARGET or hi - lo <= 8.0 * np.spacing(max(hi, 1e-300)):
            break
        if g_mid > 0.0:
            hi = mid
        else:
            lo = mid
    eta_star = side * mid
    bracket = (side * lo, side * hi) if side > 0 else (side * hi, side * lo)
    return EtaSolution(kind=KIND_NONTRIVIAL, slope_at_zero=slope, eta_star=eta_star,
                       residual=residual, bracket=bracket, iterations=evals)


def solve_eta_star(dist: EnergyChangeDistribution, eta_max: float | None = None,
                   tol: float = 1e-12, eta_guess: float | None = None) -> EtaSolution:
    """Locate the nonzero root of g(eta) = <exp(-eta dE)> - 1.

    The slope g'(0) = -<dE> picks the search side: convexity forces the
    second zero onto the side where g initially decreases. A vanishing slope
    (relative to the dE spread) means the two zeros coincide and the search
    reports the degenerate flat case instead.
    """
    if len(dist.deltas) == 0:
        raise ValidationError("empty distribution")
    span = dist.spread
    scale = span if span > 0 else max(float(np.max(np.abs(dist.deltas))), 1.0)
    if eta_max is None:
        eta_max = 1e3 / scale
    if eta_max <= 0:
        raise ValidationError("eta_max must be > 0")

    mean_de = mean_energy_change(dist)
    slope = -mean_de
    if abs(slope) <= 1e-12 * scale:
        return EtaSolution(kind=KIND_FLAT, slope_at_zero=slope)

    def g(eta: float) -> float:
        return characteristic_function(dist, eta) - 1.0

    return _root_search(g, slope, eta_max, tol, eta_guess)


def asymptotic_characteristic(p_init, p_inf, energies, eta: float) -> float:
    """Product form of the characteristic function at stationarity.

    When the final-level probabilities no longer depend on the initial
    level, the double sum factorizes:
    (sum_i P_i exp(eta E_i)) * (sum_f P_f(inf) exp(-eta E_f)).
    Computed with max-exponent shifts on each factor.
    """
    p_init = validate_probability_vector(p_init)
    p_inf = validate_probability_vector(p_inf)
    energies = np.asarray(energies, dtype=float)
    if not len(p_init) == len(p_inf) == len(energies):
        raise ValidationError("p_init, p_inf and energies must have equal length")

    def log_factor(p, x):
        # shift by the max exponent over the support only
        on = p > 0.0
        m = float(x[on].max())
        return m + math.log(float(np.exp(x[on] - m) @ p[on]))

    log_val = log_factor(p_init, eta * energies) + log_factor(p_inf, -eta * energies)
    return math.inf if log_val > 709.0 else float(math.exp(log_val))


@dataclass(frozen=True)
class CubicCertificate:
    """Closed-form symmetric-qutrit solution with a Routh sign-count proof.

    `coefficients` are the cubic's coefficients in descending degree after
    the trivial root x = 1 has been factored out of the quartic;
    the certified claim is that exactly one root lies in the right half
    plane, and that root (real, positive, != 1) carries the scale factor
    eta* = -ln(x)/E_bar.
    """

    coefficients: np.ndarray
    routh_permanences: int
    routh_variations: int
    selected_root: complex
    eta_star: float


class RouthCount(NamedTuple):
    permanences: int
    variations: int
    pivot_perturbed: bool


def routh_hurwitz_variations(coeffs) -> RouthCount:
    """Sign permanences/variations of the first Routh column of a cubic.

    For a3 x^3 + a2 x^2 + a1 x + a0 the first column is
    (a3, a2, (a2 a1 - a3 a0)/a2, a0). Each variation marks one root with
    positive real part. A zero pivot is replaced by +-1e-30 carrying the
    sign of the entry above it (flagged in the result).
    """
    c = np.asarray(coeffs, dtype=float)
    if c.shape != (4,):
        raise ValidationError(f"expected 4 cubic coefficients, got shape {c.shape}")
    a3, a2, a1, a0 = c
    if a3 == 0.0:
        raise ValidationError("leading coefficient must be nonzero")
    perturbed = False
    column = [a3, a2]
    if a2 == 0.0:
        perturbed = True
        a2 = math.copysign(1e-30, a3)
        column[1] = a2
    b1 = (a2 * a1 - a3 * a0) / a2
    if b1 == 0.0:
        perturbed = True
        b1 = math.copysign(1e-30, a2)
    column += [b1, a0]
    if a0 == 0.0:
        perturbed = True
        column[3] = math.copysign(1e-30, b1)

    permanences = 0
    variations = 0
    for prev, cur in zip(column, column[1:]):
        if prev * cur > 0:
            permanences += 1
        else:
            variations += 1
    return RouthCount(permanences, variations, perturbed)


def symmetric_qutrit_cubic_coefficients(p_init, p_inf) -> np.ndarray:
    """Cubic coefficients (descending degree) for levels (0, -E_bar, +E_bar).

    Index convention: entry 0 of the probability vectors belongs to the zero
    level, entry 1 to -E_bar, entry 2 to +E_bar. The full stationarity
    condition in x = exp(-eta E_bar) is a quartic with the trivial root
    x = 1 factored out; these are the remaining cubic's coefficients.
    """
    p1, p2, p3 = (float(v) for v in np.asarray(p_init, dtype=float))
    q1, q2, q3 = (float(v) for v in np.asarray(p_inf, dtype=float))
    return np.array([
        p2 * q3,
        p1 * q3 + p2 * q1 + p2 * q3,
        -(p1 * q2 + p3 * q1 + p3 * q2),
        -p3 * q2,
    ])


def symmetric_qutrit_cubic(p_init, p_inf, e_bar: float) -> CubicCertificate:
    """Closed-form scale factor for a qutrit with energies (0, -E_bar, +E_bar)."""
    if e_bar <= 0:
        raise ValidationError("e_bar must be > 0")
    p_init = validate_probability_vector(p_init)
    p_inf = validate_probability_vector(p_inf)
    if len(p_init) != 3 or len(p_inf) != 3:
        raise ValidationError("symmetric qutrit needs 3 levels")
    if p_init[1] == 0 and p_init[2] == 0 and p_inf[1] == 0 and p_inf[2] == 0:
        raise ValidationError("cubic degenerates: no weight on the +-E_bar levels")
    coeffs = symmetric_qutrit_cubic_coefficients(p_init, p_inf)
    if coeffs[0] == 0.0:
        raise ValidationError("cubic degenerates: leading coefficient is zero")
    count = routh_hurwitz_variations(coeffs)

    roots = np.roots(coeffs)
    positive = [r for r in roots if r.real > 0 and abs(r.imag) <= 1e-9 * max(1.0, abs(r.real))]
    if len(positive) != 1:
        raise ValidationError(
            f"expected exactly one real positive root, got {roots}")
    x = positive[0]
    if abs(x - 1.0) <= 1e-9:
        raise ValidationError("nontrivial root merged with x = 1 (p_init equals p_inf)")
    eta_star = -math.log(x.real) / e_bar
    return CubicCertificate(
        coefficients=coeffs,
        routh_permanences=count.permanences,
        routh_variations=count.variations,
        selected_root=complex(x),
        eta_star=eta_star,
    )


def energy_extraction_indicator(sol: EtaSolution, mean_de: float) -> str:
    """Sign rule: a negative scale factor certifies net energy extraction.

    Jensen's inequality applied to <exp(-eta* dE)> = 1 gives
    eta* <dE> >= 0, so the sign of eta* and the sign of the mean energy
    change must agree; a contradiction marks an inconsistent input.
    """
    if sol.kind != KIND_NONTRIVIAL:
        return "neutral"
    if sol.residual is not None and sol.residual > 1e-8:
        raise ValidationError(f"solution residual {sol.residual:.3e} too large to classify")
    if sol.eta_star * mean_de < -1e-9:
        raise ValidationError(
            f"inconsistent pair eta*={sol.eta_star!r}, <dE>={mean_de!r}: "
            "eta* * <dE> must be >= 0")
    return "extraction" if sol.eta_star < 0 else "injection"


def nv_spin_energies(delta: float, gamma_b: float) -> np.ndarray:
    """Level energies (E_0, E_+1, E_-1) = (0, delta + gb, delta - gb)."""
    return np.array([0.0, delta + gamma_b, delta - gamma_b])


def nv_field_sweep(beta: float, delta: float, b_grid,
                   eta_max: float | None = None, tol: float = 1e-12,
                   ) -> list[tuple[float, EtaSolution]]:
    """Scale factor along a magnetic-field sweep of the pumped spin-1 system.

    Per grid point the three levels sit at (0, delta + gb, delta - gb), the
    initial state is thermal at `beta`, and pumping empties everything into
    the zero level, so the asymptotic vector is (1, 0, 0). Each solution
    warm-starts the next grid point.

    The search range must cover both the high-field plateau (eta* -> 2 beta)
    and the divergence approaching the level crossing, neither of which the
    generic spectral-range default can see at strong fields, so the sweep
    uses eta_max = 1000 * beta unless told otherwise.
    """
    if delta <= 0:
        raise ValidationError("delta must be > 0")
    if beta <= 0:
        raise ValidationError("beta must be > 0")
    if eta_max is None:
        eta_max = 1e3 * beta
    results: list[tuple[float, EtaSolution]] = []
    guess: float | None = None
    for gb in b_grid:
        energies = nv_spin_energies(delta, float(gb))
        if abs(energies[2]) == 0.0:
            raise ValidationError(
                f"grid contains the exact level crossing gamma_e*B = delta = {delta!r}")
        sol = _solve_thermal_to_point_mass(energies, beta, eta_max=eta_max, tol=tol,
                                           eta_guess=guess)
        guess = sol.eta_star if sol.kind == KIND_NONTRIVIAL else None
        results.append((float(gb), sol))
    return results


def _logsumexp(x: np.ndarray) -> float:
    m = float(np.max(x))
    return m + math.log(float(np.sum(np.exp(x - m))))


def _solve_thermal_to_point_mass(energies, beta: float, eta_max: float,
                                 tol: float = 1e-12,
                                 eta_guess: float | None = None) -> EtaSolution:
    """Thermal initial state relaxing onto the zero-energy level, in log space.

    The stationarity condition sum_i P_i exp(eta E_i) = 1 (energies relative
    to the asymptotic level) involves Boltzmann weights like exp(-beta E)
    that underflow float64 long before the equation itself degenerates, e.g.
    on the strong-field plateau. Working with log G keeps every regime of
    the sweep representable; for moderate parameters the result is
    identical to solve_eta_star on the stationary distribution.
    """
    energies = np.asarray(energies, dtype=float)
    log_p = -beta * energies
    log_p -= _logsumexp(log_p)

    span = float(energies.max() - energies.min())
    slope = float(np.exp(log_p) @ energies)      # g'(0) = <E_in> - 0
    if abs(slope) <= 1e-12 * max(span, 1.0):
        return EtaSolution(kind=KIND_FLAT, slope_at_zero=slope)

    def g(eta: float) -> float:
        log_g1 = _logsumexp(log_p + eta * energies)
        if log_g1 > 709.0:
            return math.inf
        return math.expm1(log_g1)

    return _root_search(g, slope, eta_max, tol, eta_guess)
