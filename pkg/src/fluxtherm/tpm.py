"""Two-point-measurement statistics over stroboscopic maps.

A record holds the conditional probabilities P(f|i, t) of finding level f at
step t after preparing level i at step 0 (Lueders rule on degenerate levels:
the post-measurement state is the normalized eigenprojector). From a record
plus initial level probabilities one obtains the energy-change distribution
and its real characteristic function  sum_k p_k exp(-eta * dE_k), which is
analytic and convex in eta.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .core import (
    DensityOperator,
    HermitianObservable,
    ValidationError,
    level_state,
    readonly,
    validate_probability_vector,
)
from .channels import QuantumChannel

COLUMN_SUM_TOL = 1e-9
T0_IDENTITY_TOL = 1e-12


@dataclass(frozen=True)
class TPMRecord:
    """Conditional level-transition probabilities on a step grid.

    cond_probs[t, f, i] = P(f | i) after t steps. Columns (fixed i) sum to 1.
    `initial_probs` stays None until an initial state is attached for
    analysis; the conditional data is state-independent.
    """

    energies: np.ndarray
    times: np.ndarray
    cond_probs: np.ndarray
    initial_probs: np.ndarray | None = None

    @property
    def n_levels(self) -> int:
        return len(self.energies)

    @property
    def n_steps(self) -> int:
        return int(self.times[-1])

    def matrix_at(self, t_index: int) -> np.ndarray:
        return self.cond_probs[t_index]

    def with_initial_probs(self, p) -> "TPMRecord":
        p = validate_probability_vector(p)
        if len(p) != self.n_levels:
            raise ValidationError(f"expected {self.n_levels} probabilities, got {len(p)}")
        return dataclasses.replace(self, initial_probs=p)


def validate_record(record: TPMRecord,
                    column_tol: float = COLUMN_SUM_TOL,
                    t0_tol: float = T0_IDENTITY_TOL) -> None:
    """Raise if the record violates its structural invariants."""
    c = record.cond_probs
    if c.ndim != 3 or c.shape[1] != c.shape[2] or c.shape[1] != record.n_levels:
        raise ValidationError(f"cond_probs shape {c.shape} inconsistent with record")
    if np.any(c < -1e-12) or np.any(c > 1.0 + 1e-12):
        raise ValidationError("conditional probabilities outside [0, 1]")
    col_defect = float(np.max(np.abs(c.sum(axis=1) - 1.0)))
    if col_defect > column_tol:
        raise ValidationError(f"columns not stochastic: defect {col_defect:.3e}")
    t0_defect = float(np.max(np.abs(c[0] - np.eye(record.n_levels))))
    if t0_defect > t0_tol:
        raise ValidationError(f"step-0 matrix is not the identity: defect {t0_defect:.3e}")


def initial_probabilities(rho0: DensityOperator, obs: HermitianObservable) -> np.ndarray:
    """P_i = Tr[rho_0 Pi_i] over the levels of `obs`."""
    if rho0.dim != obs.dim:
        raise ValidationError(f"state dim {rho0.dim} != observable dim {obs.dim}")
    return validate_probability_vector(obs.level_probabilities(rho0.matrix))


def conditional_probabilities(step_channel: QuantumChannel, obs: HermitianObservable,
                              n_steps: int) -> TPMRecord:
    """Run each level's post-measurement state through n_steps of the map.

    The per-initial-level trajectories are independent; entry (t, f, i) is
    Tr[Pi_f map^t(Pi_i / rank_i)].
    """
    if step_channel.dim != obs.dim:
        raise ValidationError(f"channel dim {step_channel.dim} != observable dim {obs.dim}")
    if n_steps < 0:
        raise ValidationError("n_steps must be >= 0")
    n = obs.n_levels
    cond = np.zeros((n_steps + 1, n, n))
    for i, lv in enumerate(obs.levels):
        rho = level_state(lv).matrix.copy()
        cond[0, :, i] = obs.level_probabilities(rho)
        for t in range(1, n_steps + 1):
            rho = step_channel(rho)
            cond[t, :, i] = obs.level_probabilities(rho)
    record = TPMRecord(
        energies=readonly(obs.energies, dtype=float),
        times=readonly(np.arange(n_steps + 1), dtype=int),
        cond_probs=readonly(cond, dtype=float),
    )
    validate_record(record)
    return record


@dataclass(frozen=True)
class EnergyChangeDistribution:
    """Discrete distribution of the energy jump dE = E_f - E_i."""

    deltas: np.ndarray
    probs: np.ndarray

    @property
    def spread(self) -> float:
        return float(self.deltas.max() - self.deltas.min()) if len(self.deltas) else 0.0

    @classmethod
    def from_pairs(cls, deltas, probs, merge_tol: float | None = None) -> "EnergyChangeDistribution":
        """Merge entries with (numerically) equal dE and drop zero weights."""
        deltas = np.asarray(deltas, dtype=float)
        probs = np.asarray(probs, dtype=float)
        if deltas.shape != probs.shape or deltas.ndim != 1:
            raise ValidationError("deltas and probs must be matching 1-d arrays")
        if np.any(probs < -1e-12):
            raise ValidationError("negative probability in distribution")
        total = float(probs.sum())
        if abs(total - 1.0) > 1e-9:
            raise ValidationError(f"distribution probabilities sum to {total!r}")
        keep = probs > 0.0
        deltas, probs = deltas[keep], probs[keep]
        order = np.argsort(deltas)
        deltas, probs = deltas[order], probs[order]
        span = float(deltas[-1] - deltas[0]) if len(deltas) else 0.0
        if merge_tol is None:
            merge_tol = 1e-12 * span
        out_d: list[float] = []
        out_p: list[float] = []
        start = 0
        for k in range(1, len(deltas) + 1):
            if k == len(deltas) or deltas[k] - deltas[k - 1] > merge_tol:
                grp_p = float(probs[start:k].sum())
                grp_d = float(np.average(deltas[start:k], weights=probs[start:k]))
                out_d.append(grp_d)
                out_p.append(grp_p)
                start = k
        return cls(deltas=readonly(np.array(out_d), dtype=float),
                   probs=readonly(np.array(out_p), dtype=float))


def energy_change_distribution(record: TPMRecord, t_index: int) -> EnergyChangeDistribution:
    """Joint TPM distribution of dE at one recorded step."""
    if record.initial_probs is None:
        raise ValidationError("record has no initial probabilities attached")
    if not 0 <= t_index < len(record.times):
        raise ValidationError(f"t_index {t_index} out of range")
    n = record.n_levels
    cond = record.cond_probs[t_index]
    deltas = (record.energies[:, None] - record.energies[None, :]).ravel()
    probs = (cond * record.initial_probs[None, :]).ravel()
    return EnergyChangeDistribution.from_pairs(deltas, probs)


def stationary_distribution(p_init, p_inf, energies) -> EnergyChangeDistribution:
    """dE distribution when the final probabilities no longer depend on i.

    This is the large-time limit P(f|i) = P_f(inf): the joint weight of the
    jump E_f - E_i is P_i * P_f(inf).
    """
    p_init = validate_probability_vector(p_init)
    p_inf = validate_probability_vector(p_inf)
    energies = np.asarray(energies, dtype=float)
    if not len(p_init) == len(p_inf) == len(energies):
        raise ValidationError("p_init, p_inf and energies must have equal length")
    deltas = (energies[:, None] - energies[None, :]).ravel()
    probs = (p_inf[:, None] * p_init[None, :]).ravel()
    return EnergyChangeDistribution.from_pairs(deltas, probs)


def characteristic_function(dist: EnergyChangeDistribution, eta: float) -> float:
    """sum_k p_k exp(-eta * dE_k), overflow-guarded via max-exponent shift."""
    if not np.isfinite(eta):
        raise ValidationError("eta must be finite")
    x = -eta * dist.deltas
    m = float(x.max())
    if m <= 700.0:
        return float(np.exp(x) @ dist.probs)
    s = float(np.exp(x - m) @ dist.probs)
    log_val = m + math.log(s)
    return math.inf if log_val > 709.0 else float(math.exp(log_val))


def mean_energy_change(dist: EnergyChangeDistribution) -> float:
    return float(dist.deltas @ dist.probs)


def characteristic_trace(record: TPMRecord, eta: float) -> np.ndarray:
    """Characteristic function value at each recorded step."""
    return np.array([
        characteristic_function(energy_change_distribution(record, t), eta)
        for t in range(len(record.times))
    ])
