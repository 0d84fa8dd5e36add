"""Named invariant checks behind the `verify` command.

Every check returns its worst observed deviation next to the tolerance it
was held to, so the JSON report doubles as a numerical health record. All
randomness is seeded (FLUXTHERM_SEED overrides) and the seed is recorded,
keeping reports byte-reproducible.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import core, channels, tpm, scale_factor, hypotheses, protocols

DEFAULT_SEED = 20260808

# Regression pins derived by running the pipelines at the recorded
# parameters; see the matching acceptance tests.
XDRIVE_PARAMS = dict(p_m=0.35, pump_q=0.5, omega_tau=1.0, n_steps=40)
XDRIVE_TRACE_DEV_BAND = (1e-4, 5e-3)       # observed 2.94e-3, must stay < 0.05
XDRIVE_DBC_DEV_BAND = (1.5e-3, 3.5e-3)     # observed 2.20e-3, violates tol 1e-3
SG_B_CONVERGED_STEPS = 25                  # uniform within 1e-3 from step 21
SG_C_CONTRAST_STEPS = 10                   # last step where I* still fails at 1e-2
CANONICAL_TAU_D = 3.11


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    deviation: float
    tolerance: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: deviation {self.deviation:.3e} (tol {self.tolerance:.1e}) {self.detail}"

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "deviation": float(self.deviation),
            "tolerance": float(self.tolerance),
            "detail": self.detail,
        }


def resolve_seed(explicit: int | None = None) -> int:
    if explicit is not None:
        return int(explicit)
    env = os.environ.get("FLUXTHERM_SEED")
    return int(env) if env else DEFAULT_SEED


def _random_spectrum(rng: np.random.Generator, n: int) -> np.ndarray:
    while True:
        e = np.sort(rng.uniform(0.0, 3.0, size=n))
        if np.min(np.diff(e)) > 0.2:
            return e


def _random_probs(rng: np.random.Generator, n: int, floor: float = 0.05) -> np.ndarray:
    p = floor + rng.random(n)
    return p / p.sum()


def _random_nontrivial(rng, n_min=2, n_max=4, eta_min=0.0):
    """Random stationary instance whose scale factor solves nontrivially."""
    while True:
        n = int(rng.integers(n_min, n_max + 1))
        energies = _random_spectrum(rng, n)
        p_init = _random_probs(rng, n)
        p_inf = _random_probs(rng, n)
        dist = tpm.stationary_distribution(p_init, p_inf, energies)
        sol = scale_factor.solve_eta_star(dist)
        if sol.kind == scale_factor.KIND_NONTRIVIAL and abs(sol.eta_star) >= eta_min:
            return energies, p_init, p_inf, dist, sol


def check_unital_thermal_limit(rng: np.random.Generator) -> CheckResult:
    """Thermal initial state with a completely mixed asymptote: eta* = beta."""
    worst = 0.0
    for beta in (0.3, 0.7, 1.5):
        for n in (2, 3, 4):
            for _ in range(3):
                energies = _random_spectrum(rng, n)
                p_init = core.thermal_probabilities(energies, beta)
                dist = tpm.stationary_distribution(p_init, np.full(n, 1.0 / n), energies)
                sol = scale_factor.solve_eta_star(dist)
                worst = max(worst, abs(sol.eta_star - beta))
    return CheckResult("unital_thermal_limit", worst <= 1e-9, worst, 1e-9)


def check_thermal_to_thermal(rng: np.random.Generator) -> CheckResult:
    """Thermal initial and thermal asymptotic state: eta* = beta - beta_inf."""
    worst = 0.0
    for _ in range(10):
        n = int(rng.integers(2, 5))
        energies = _random_spectrum(rng, n)
        beta = rng.uniform(0.2, 2.0)
        beta_inf = beta + rng.choice([-1.0, 1.0]) * rng.uniform(0.2, 1.0)
        p_init = core.thermal_probabilities(energies, beta)
        p_inf = core.thermal_probabilities(energies, beta_inf)
        dist = tpm.stationary_distribution(p_init, p_inf, energies)
        sol = scale_factor.solve_eta_star(dist)
        worst = max(worst, abs(sol.eta_star - (beta - beta_inf)))
    return CheckResult("thermal_to_thermal_limit", worst <= 1e-9, worst, 1e-9)


def _random_memory_profile(rng: np.random.Generator) -> np.ndarray:
    n_steps = int(rng.integers(8, 30))
    u = np.sort(rng.random(n_steps))
    if u[-1] <= 0.0:
        u[-1] = 1.0
    return np.concatenate([[0.0], u / u[-1]])


def check_factorized_reconstruction(rng: np.random.Generator,
                                 inject_dbc_violation: bool = False) -> CheckResult:
    """Factorized records keep the characteristic function at 1 at every step."""
    worst = 0.0
    for k in range(50):
        n = int(rng.integers(2, 5))
        energies = _random_spectrum(rng, n)
        p_inf = _random_probs(rng, n)
        p_init = _random_probs(rng, n)
        fbar = _random_memory_profile(rng)
        record = hypotheses.record_from_memory_profile(fbar, p_inf, energies)
        if inject_dbc_violation and k == 0:
            cond = record.cond_probs.copy()
            # Asymmetric mass shift inside one column: stays stochastic,
            # breaks the factorized structure.
            shift = min(0.05, 0.5 * float(cond[1:, 0, 0].min()))
            cond[1:, 1, 0] += shift
            cond[1:, 0, 0] -= shift
            record = tpm.TPMRecord(energies=record.energies, times=record.times,
                                   cond_probs=core.readonly(cond, dtype=float))
        record = record.with_initial_probs(p_init)
        dist = tpm.stationary_distribution(p_init, p_inf, energies)
        sol = scale_factor.solve_eta_star(dist)
        if sol.kind != scale_factor.KIND_NONTRIVIAL:
            continue
        trace = tpm.characteristic_trace(record, sol.eta_star)
        worst = max(worst, float(np.max(np.abs(trace - 1.0))))
    return CheckResult("factorized_reconstruction", worst <= 1e-9, worst, 1e-9)


def _grid_crossings(g_vals: np.ndarray) -> list[int]:
    idx = []
    for k in range(len(g_vals) - 1):
        a, b = g_vals[k], g_vals[k + 1]
        if a == 0.0 or ((a < 0.0) != (b < 0.0)):
            idx.append(k)
    return idx


def check_root_uniqueness(rng: np.random.Generator, n_instances: int = 200,
                           n_grid: int = 10_000) -> CheckResult:
    """Grid scan of g finds no zero besides 0 and the solver's root."""
    worst = 0.0
    for _ in range(n_instances):
        energies, p_init, p_inf, dist, sol = _random_nontrivial(rng, eta_min=0.2)
        eta_max = 1e3 / dist.spread
        spacing = 2 * eta_max / (n_grid - 1)
        if abs(sol.eta_star) < 3 * spacing:
            continue
        grid = np.linspace(-eta_max, eta_max, n_grid)
        with np.errstate(over="ignore"):
            g_vals = np.exp(-np.outer(grid, dist.deltas)) @ dist.probs - 1.0
        crossings = _grid_crossings(g_vals)
        if len(crossings) != 2:
            return CheckResult("root_uniqueness_scan", False, float(len(crossings)), 2.0,
                               detail=f"expected 2 sign changes, found {len(crossings)}")
        located = None
        for k in crossings:
            a, b = grid[k], grid[k + 1]
            if a <= 0.0 <= b:
                continue
            # 10-ary refinement of the bracket, independent of the solver.
            for _ in range(12):
                xs = np.linspace(a, b, 11)
                with np.errstate(over="ignore"):
                    vs = np.exp(-np.outer(xs, dist.deltas)) @ dist.probs - 1.0
                for j in range(10):
                    if vs[j] == 0.0 or vs[j] * vs[j + 1] < 0.0:
                        a, b = xs[j], xs[j + 1]
                        break
            located = 0.5 * (a + b)
        if located is None:
            return CheckResult("root_uniqueness_scan", False, float("nan"), 1e-3,
                               detail="no nonzero bracket located")
        worst = max(worst, abs(located - sol.eta_star))
    return CheckResult("root_uniqueness_scan", worst <= 1e-3, worst, 1e-3)


def check_slope_identity(rng: np.random.Generator) -> CheckResult:
    """Finite-difference slope of the characteristic function at the origin."""
    worst = 0.0
    h = 1e-6
    for _ in range(50):
        energies, p_init, p_inf, dist, _ = _random_nontrivial(rng)
        expected = -tpm.mean_energy_change(dist)
        if abs(expected) < 1e-3:
            continue
        fd = (tpm.characteristic_function(dist, h)
              - tpm.characteristic_function(dist, -h)) / (2 * h)
        worst = max(worst, abs(fd - expected) / abs(expected))
    return CheckResult("slope_at_origin", worst <= 1e-5, worst, 1e-5)


def check_cubic_cross(rng: np.random.Generator) -> CheckResult:
    """Closed-form cubic route agrees with the numeric solver; 1 Routh variation."""
    worst = 0.0
    for _ in range(100):
        e_bar = rng.uniform(0.5, 2.0)
        p_init = _random_probs(rng, 3)
        p_inf = _random_probs(rng, 3)
        cert = scale_factor.symmetric_qutrit_cubic(p_init, p_inf, e_bar)
        if cert.routh_variations != 1:
            return CheckResult("cubic_cross_check", False,
                               float(cert.routh_variations), 1.0,
                               detail="Routh variation count != 1")
        energies = np.array([0.0, -e_bar, e_bar])
        dist = tpm.stationary_distribution(p_init, p_inf, energies)
        sol = scale_factor.solve_eta_star(dist)
        worst = max(worst, abs(cert.eta_star - sol.eta_star))
    return CheckResult("cubic_cross_check", worst <= 1e-9, worst, 1e-9)


def check_extraction_sign_rule(rng: np.random.Generator) -> CheckResult:
    """Sign rule: eta* <dE> >= 0 and the indicator matches sign(eta*)."""
    worst = float("inf")
    for _ in range(200):
        _, _, _, dist, sol = _random_nontrivial(rng)
        mean_de = tpm.mean_energy_change(dist)
        worst = min(worst, sol.eta_star * mean_de)
        label = scale_factor.energy_extraction_indicator(sol, mean_de)
        expected = "extraction" if sol.eta_star < 0 else "injection"
        if label != expected:
            return CheckResult("extraction_sign_rule", False, worst, -1e-9,
                               detail=f"indicator {label} != {expected}")
    return CheckResult("extraction_sign_rule", worst >= -1e-9, worst, -1e-9,
                       detail="min of eta* * <dE>")


def check_hypothesis_implication(rng: np.random.Generator) -> CheckResult:
    """Complete memory loss implies the almost-complete variant."""
    antecedents = 0
    for _ in range(100):
        n = int(rng.integers(2, 5))
        steps = int(rng.integers(3, 12))
        tol = rng.uniform(1e-3, 0.5)
        q = _random_probs(rng, n)
        cond = np.zeros((steps + 1, n, n))
        cond[0] = np.eye(n)
        for t in range(1, steps + 1):
            noise = rng.uniform(0, 2 * tol)
            m = q[:, None] + noise * rng.random((n, n))
            cond[t] = m / m.sum(axis=0, keepdims=True)
        record = tpm.TPMRecord(energies=core.readonly(np.arange(n), dtype=float),
                               times=core.readonly(np.arange(steps + 1), dtype=int),
                               cond_probs=core.readonly(cond, dtype=float))
        v_star = hypotheses.check_hypothesis_I_star(record, tol)
        v_i = hypotheses.check_hypothesis_I(record, tol)
        if v_star.passes:
            antecedents += 1
            if not v_i.passes:
                return CheckResult("hypothesis_implication", False, 1.0, 0.0,
                                   detail="I* passed but I failed")
    return CheckResult("hypothesis_implication", True, 0.0, 0.0,
                       detail=f"{antecedents} records satisfied the antecedent")


def check_field_sweep_limits() -> CheckResult:
    """Trivial region below the crossing, 2*beta plateau, divergence above it."""
    beta, delta = 1.0, 1.0
    low = scale_factor.nv_field_sweep(beta, delta, [0.1, 0.3, 0.5, 0.7, 0.9, 0.99])
    for gb, sol in low:
        if sol.kind != scale_factor.KIND_TRIVIAL:
            return CheckResult("field_sweep_limits", False, 1.0, 0.0,
                               detail=f"gamma_e B={gb} below crossing not trivial")
    plateau = scale_factor.nv_field_sweep(beta, delta, [1000.0])[0][1]
    rel = abs(plateau.eta_star - 2 * beta) / (2 * beta)
    edge = scale_factor.nv_field_sweep(beta, delta, [delta * (1 + 1e-3)])[0][1]
    diverging = edge.kind == scale_factor.KIND_NONTRIVIAL and abs(edge.eta_star) > 10.0
    passed = rel <= 1e-3 and diverging
    return CheckResult("field_sweep_limits", passed, rel, 1e-3,
                       detail=f"edge eta* = {edge.eta_star}")


def check_sg_memory_loss() -> CheckResult:
    """Scrambled variant reaches the uniform point; dissipative variant keeps
    the almost-complete/complete memory loss contrast in its transient."""
    rec_b = protocols.run_protocol(protocols.build_stern_gerlach(
        "b", p_m=0.35, n_steps=SG_B_CONVERGED_STEPS))
    dev_b = float(np.max(np.abs(rec_b.cond_probs[-1] - 1.0 / 3.0)))

    rec_c = protocols.run_protocol(protocols.build_stern_gerlach(
        "c", p_m=0.35, pump_q=1.0, n_steps=SG_C_CONTRAST_STEPS))
    v_i = hypotheses.check_hypothesis_I(rec_c, 1e-2)
    v_star = hypotheses.check_hypothesis_I_star(rec_c, 1e-2)
    passed = dev_b <= 1e-3 and v_i.passes and not v_star.passes
    return CheckResult("sg_memory_loss", passed, dev_b, 1e-3,
                       detail=f"I passes={v_i.passes}, I* passes={v_star.passes} "
                              f"at {SG_C_CONTRAST_STEPS} steps")


def check_dbc_fit_pipeline() -> CheckResult:
    """Decay-time recovery on model data and the pulsed-drive trace deviation."""
    p_inf_model = np.array([0.5, 0.2, 0.3])
    energies = np.array([-1.0, 0.0, 1.0])
    synthetic = hypotheses.record_from_dbc_model(40, CANONICAL_TAU_D, p_inf_model, energies)
    fit = hypotheses.fit_exponential_dbc_model(synthetic, p_inf=p_inf_model)
    tau_rel = abs(fit.tau_d - CANONICAL_TAU_D) / CANONICAL_TAU_D
    if tau_rel > 0.01 or fit.rms_residual > 1e-10:
        return CheckResult("dbc_fit_pipeline", False, tau_rel, 0.01,
                           detail=f"tau_d={fit.tau_d}, rms={fit.rms_residual:.2e}")

    spec = protocols.build_nv_demon("x_drive", **XDRIVE_PARAMS)
    record = protocols.run_protocol(spec)
    rep = channels.asymptotic_state(spec.step_channel, spec.hamiltonian)
    p0 = core.thermal_probabilities(record.energies, 1.0)
    dist = tpm.stationary_distribution(p0, rep.diagonal, record.energies)
    sol = scale_factor.solve_eta_star(dist)

    fitted = hypotheses.record_from_dbc_model(
        record.n_steps,
        hypotheses.fit_exponential_dbc_model(record, p_inf=rep.diagonal).tau_d,
        rep.diagonal, record.energies).with_initial_probs(p0)
    fitted_dev = float(np.max(np.abs(tpm.characteristic_trace(fitted, sol.eta_star) - 1.0)))

    sim_dev = float(np.max(np.abs(
        tpm.characteristic_trace(record.with_initial_probs(p0), sol.eta_star) - 1.0)))
    dbc = hypotheses.check_dbc(record, rep.diagonal, tol=1e-3)

    lo, hi = XDRIVE_TRACE_DEV_BAND
    dlo, dhi = XDRIVE_DBC_DEV_BAND
    passed = (fitted_dev <= 1e-9 and lo <= sim_dev <= hi and sim_dev < 0.05
              and not dbc.passes and dlo <= dbc.max_deviation <= dhi)
    return CheckResult("dbc_fit_pipeline", passed, sim_dev, hi,
                       detail=f"fitted model dev {fitted_dev:.2e}, "
                              f"dbc deviation {dbc.max_deviation:.2e}")


def _random_density(rng: np.random.Generator, dim: int) -> np.ndarray:
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def _scenario_channels() -> list[tuple[str, channels.QuantumChannel, core.HermitianObservable]]:
    out = []
    for variant in ("a", "b", "c"):
        spec = protocols.build_stern_gerlach(variant, p_m=0.35, n_steps=5)
        out.append((spec.label, spec.step_channel, spec.hamiltonian))
    spec = protocols.build_nv_demon("x_drive", **XDRIVE_PARAMS)
    out.append((spec.label, spec.step_channel, spec.hamiltonian))
    spec = protocols.build_nv_demon("z_natural", p_m=0.35, pump_q=1.0,
                                    delta=1.0, gamma_b=2.0, n_steps=5)
    out.append((spec.label, spec.step_channel, spec.hamiltonian))
    return out


def check_channel_invariants(rng: np.random.Generator) -> CheckResult:
    """CPTP completeness, trace/positivity preservation, stochastic records,
    unit characteristic function at the origin, convexity on an eta grid."""
    worst = 0.0
    details = []
    for label, ch, obs in _scenario_channels():
        worst = max(worst, ch.completeness_defect())
        for _ in range(20):
            rho = _random_density(rng, ch.dim)
            out = ch(rho)
            worst = max(worst, abs(float(np.real(np.trace(out))) - 1.0))
            min_eig = float(np.min(np.linalg.eigvalsh(0.5 * (out + out.conj().T))))
            if min_eig < -1e-9:
                details.append(f"{label}: negative eigenvalue {min_eig:.2e}")
        record = tpm.conditional_probabilities(ch, obs, 12)
        col_defect = float(np.max(np.abs(record.cond_probs.sum(axis=1) - 1.0)))
        worst = max(worst, col_defect)

        p0 = core.thermal_probabilities(record.energies, 1.0)
        record = record.with_initial_probs(p0)
        dist = tpm.energy_change_distribution(record, record.n_steps)
        g0 = tpm.characteristic_function(dist, 0.0)
        if abs(g0 - 1.0) > 1e-12:
            details.append(f"{label}: G(0) off by {abs(g0 - 1.0):.2e}")
        span = max(float(np.max(np.abs(dist.deltas))), 1e-9)
        grid = np.linspace(-20.0 / span, 20.0 / span, 201)
        g_vals = np.array([tpm.characteristic_function(dist, x) for x in grid])
        second = g_vals[:-2] - 2 * g_vals[1:-1] + g_vals[2:]
        if float(second.min()) < -1e-8 * float(g_vals.max()):
            details.append(f"{label}: convexity defect {second.min():.2e}")
    passed = worst <= 1e-9 and not details
    return CheckResult("channel_state_invariants", passed, worst, 1e-9,
                       detail="; ".join(details))


def run_verification(seed: int | None = None,
                     inject_dbc_violation: bool = False) -> tuple[list[CheckResult], int]:
    seed = resolve_seed(seed)
    rng = np.random.default_rng(seed)
    results = [
        check_unital_thermal_limit(rng),
        check_thermal_to_thermal(rng),
        check_factorized_reconstruction(rng, inject_dbc_violation=inject_dbc_violation),
        check_root_uniqueness(rng),
        check_slope_identity(rng),
        check_cubic_cross(rng),
        check_extraction_sign_rule(rng),
        check_hypothesis_implication(rng),
        check_field_sweep_limits(),
        check_sg_memory_loss(),
        check_dbc_fit_pipeline(),
        check_channel_invariants(rng),
    ]
    return results, seed
