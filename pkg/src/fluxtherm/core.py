"""Hermitian observables, density operators, thermal states, spin-1 operators.

Small dense complex linear algebra for 2- to 4-level systems. Energies are
dimensionless (hbar = k_B = 1 throughout). Every container is frozen and its
arrays are marked read-only, so values can be shared across threads without
coordination.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Default structural tolerances. All of them can be overridden per call;
# they are defaults, not physics.
TOL_HERM = 1e-10
TOL_TRACE = 1e-10
TOL_EIG = 1e-9
TOL_PROJ = 1e-10
TOL_ENTRY = 1e-12
TOL_PROB_SUM = 1e-9


class ValidationError(ValueError):
    """An input failed a structural check (hermiticity, trace, positivity, ...)."""


def readonly(a, dtype=complex) -> np.ndarray:
    """Copy `a` into a read-only ndarray."""
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


def hermiticity_defect(m: np.ndarray) -> float:
    return float(np.max(np.abs(m - m.conj().T)))


def require_hermitian(m: np.ndarray, tol: float = TOL_HERM, what: str = "matrix") -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError(f"{what} must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m.view(float))):
        raise ValidationError(f"{what} has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(m))))
    defect = hermiticity_defect(m)
    if defect > tol * scale:
        raise ValidationError(f"{what} is not Hermitian: defect {defect:.3e} > {tol:.1e}")
    return m


@dataclass(frozen=True)
class EnergyLevel:
    """One (possibly degenerate) energy level: eigenvalue, projector, rank."""

    energy: float
    projector: np.ndarray
    multiplicity: int


@dataclass(frozen=True)
class HermitianObservable:
    """A Hermitian matrix together with its spectral decomposition.

    `levels` are sorted ascending by energy; eigenvalues closer than the
    degeneracy tolerance used at construction are merged into a single level
    with a higher-rank projector.
    """

    matrix: np.ndarray
    levels: tuple[EnergyLevel, ...]

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    @property
    def energies(self) -> np.ndarray:
        return np.array([lv.energy for lv in self.levels])

    @property
    def projectors(self) -> list[np.ndarray]:
        return [lv.projector for lv in self.levels]

    def level_probabilities(self, rho: np.ndarray) -> np.ndarray:
        """P_k = Tr[rho Pi_k] for every level, clipped of float dust."""
        p = np.array([float(np.real(np.trace(lv.projector @ rho))) for lv in self.levels])
        return np.clip(p, 0.0, 1.0)


def spectral_decompose(m: np.ndarray, degeneracy_tol: float | None = None,
                       herm_tol: float = TOL_HERM) -> HermitianObservable:
    """Diagonalize a Hermitian matrix into merged energy levels.

    Eigenvalues within `degeneracy_tol` of their neighbour (default
    1e-9 times the spectral range) collapse into one level whose projector
    spans the whole near-degenerate eigenspace. Needed so that level
    statistics stay well defined at exact crossings.
    """
    m = require_hermitian(m, tol=herm_tol)
    vals, vecs = np.linalg.eigh(m)
    spread = float(vals[-1] - vals[0])
    if degeneracy_tol is None:
        degeneracy_tol = 1e-9 * spread if spread > 0 else 1e-12
    elif degeneracy_tol <= 0:
        raise ValidationError("degeneracy_tol must be > 0")

    levels: list[EnergyLevel] = []
    start = 0
    for k in range(1, len(vals) + 1):
        if k == len(vals) or vals[k] - vals[k - 1] > degeneracy_tol:
            group = vecs[:, start:k]
            proj = group @ group.conj().T
            levels.append(EnergyLevel(
                energy=float(np.mean(vals[start:k])),
                projector=readonly(proj),
                multiplicity=k - start,
            ))
            start = k
    return HermitianObservable(matrix=readonly(m), levels=tuple(levels))


@dataclass(frozen=True)
class DensityValidation:
    """Structured report from validate_density; never raises by itself."""

    hermiticity: float
    trace_defect: float
    min_eigenvalue: float
    violations: tuple[str, ...]

    @property
    def passes(self) -> bool:
        return not self.violations


def validate_density(rho: np.ndarray, tol: float = TOL_HERM,
                     eig_tol: float | None = None) -> DensityValidation:
    """Check hermiticity, unit trace and positivity of a candidate state.

    `eig_tol` defaults to 10*tol (eigenvalues are the numerically softest
    of the three checks).
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValidationError(f"density operator must be square, got {rho.shape}")
    if eig_tol is None:
        eig_tol = 10.0 * tol
    herm = hermiticity_defect(rho)
    trace_defect = abs(float(np.real(np.trace(rho))) - 1.0)
    min_eig = float(np.min(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))))
    violations = []
    if herm > tol:
        violations.append(f"hermiticity defect {herm:.3e} > {tol:.1e}")
    if trace_defect > tol:
        violations.append(f"trace defect {trace_defect:.3e} > {tol:.1e}")
    if min_eig < -eig_tol:
        violations.append(f"negative eigenvalue {min_eig:.3e} < -{eig_tol:.1e}")
    return DensityValidation(herm, trace_defect, min_eig, tuple(violations))


@dataclass(frozen=True)
class DensityOperator:
    """A validated density matrix."""

    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_matrix(cls, rho, tol: float = TOL_HERM,
                    eig_tol: float | None = None) -> "DensityOperator":
        rho = np.asarray(rho, dtype=complex)
        report = validate_density(rho, tol=tol, eig_tol=eig_tol)
        if not report.passes:
            raise ValidationError("invalid density operator: " + "; ".join(report.violations))
        return cls(matrix=readonly(rho))


def maximally_mixed(dim: int) -> DensityOperator:
    return DensityOperator(matrix=readonly(np.eye(dim) / dim))


def level_state(level: EnergyLevel) -> DensityOperator:
    """Post-measurement state for an energy level: Pi / rank (Lueders rule)."""
    return DensityOperator(matrix=readonly(level.projector / level.multiplicity))


def thermal_state(obs: HermitianObservable, beta: float) -> DensityOperator:
    """Gibbs state exp(-beta H)/Z, diagonal in the eigenbasis of `obs`.

    Energies are shifted before exponentiation so that the largest Boltzmann
    weight is exactly 1, which keeps beta of either sign overflow-safe.
    """
    if not np.isfinite(beta):
        raise ValidationError("beta must be finite")
    energies = obs.energies
    shift = energies.min() if beta >= 0 else energies.max()
    weights = np.exp(-beta * (energies - shift))
    z = float(np.sum(weights * [lv.multiplicity for lv in obs.levels]))
    rho = sum((w / z) * lv.projector for w, lv in zip(weights, obs.levels))
    return DensityOperator(matrix=readonly(rho))


def thermal_probabilities(energies: np.ndarray, beta: float) -> np.ndarray:
    """Gibbs weights exp(-beta E_k)/Z over a plain energy list (unit ranks)."""
    energies = np.asarray(energies, dtype=float)
    shift = energies.min() if beta >= 0 else energies.max()
    w = np.exp(-beta * (energies - shift))
    return w / w.sum()


def spin1_operators() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Spin-1 operators (S_x, S_y, S_z) in the (|+1>, |0>, |-1>) basis."""
    s = 1.0 / np.sqrt(2.0)
    sx = np.array([[0, s, 0], [s, 0, s], [0, s, 0]], dtype=complex)
    sy = np.array([[0, -1j * s, 0], [1j * s, 0, -1j * s], [0, 1j * s, 0]], dtype=complex)
    sz = np.diag([1.0, 0.0, -1.0]).astype(complex)
    return readonly(sx), readonly(sy), readonly(sz)


def evolution_unitary(generator: np.ndarray, angle: float = 1.0) -> np.ndarray:
    """exp(-i * angle * G) for Hermitian G, via eigendecomposition."""
    g = require_hermitian(generator, what="generator")
    vals, vecs = np.linalg.eigh(g)
    return readonly(vecs @ np.diag(np.exp(-1j * angle * vals)) @ vecs.conj().T)


def validate_probability_vector(values, entry_tol: float = TOL_ENTRY,
                                sum_tol: float = TOL_PROB_SUM) -> np.ndarray:
    """Validate and return a read-only probability vector."""
    p = np.asarray(values, dtype=float)
    if p.ndim != 1:
        raise ValidationError(f"probability vector must be 1-d, got shape {p.shape}")
    if np.any(p < -entry_tol) or np.any(p > 1.0 + entry_tol):
        raise ValidationError(f"probabilities outside [0, 1]: {p}")
    total = float(p.sum())
    if abs(total - 1.0) > sum_tol:
        raise ValidationError(f"probabilities sum to {total!r}, not 1")
    return readonly(np.clip(p, 0.0, None), dtype=float)


def matrix_to_json(m: np.ndarray) -> list:
    """Row-major nested lists of [re, im] pairs."""
    m = np.asarray(m, dtype=complex)
    return [[[float(v.real), float(v.imag)] for v in row] for row in m]


def matrix_from_json(data) -> np.ndarray:
    rows = [[complex(re, im) for re, im in row] for row in data]
    return np.array(rows, dtype=complex)
