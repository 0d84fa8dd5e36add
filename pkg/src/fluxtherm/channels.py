"""CPTP maps in Kraus form and their asymptotic fixed points.

Channels are built from a handful of primitives (unitary, dephasing,
probabilistic POVM, dissipative pump), composed per stroboscopic step, and
iterated to extract the asymptotic level populations. The asymptotic
diagonal is required to be independent of the initial seed; the off-diagonal
remainder is reported but never required to converge.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    DensityOperator,
    HermitianObservable,
    ValidationError,
    level_state,
    maximally_mixed,
    readonly,
    validate_density,
)

TOL_CPTP = 1e-10
# Kraus products whose entries are all below this are dropped in compose().
PRUNE_TOL = 1e-14


class NonConvergenceError(RuntimeError):
    """Power iteration did not settle within the iteration budget."""


class SeedDependenceError(NonConvergenceError):
    """The asymptotic diagonal differs across initial seeds."""


@dataclass(frozen=True)
class QuantumChannel:
    """A CPTP map given by Kraus operators: rho -> sum_k K rho K+."""

    dim: int
    kraus_ops: tuple[np.ndarray, ...]
    label: str = ""

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for k in self.kraus_ops:
            out += k @ rho @ k.conj().T
        return out

    def completeness_defect(self) -> float:
        acc = np.zeros((self.dim, self.dim), dtype=complex)
        for k in self.kraus_ops:
            acc += k.conj().T @ k
        return float(np.max(np.abs(acc - np.eye(self.dim))))

    def to_json(self) -> dict:
        from .core import matrix_to_json
        return {
            "dim": self.dim,
            "label": self.label,
            "kraus_ops": [matrix_to_json(k) for k in self.kraus_ops],
        }


def kraus_completeness_check(ops, dim: int, tol: float = TOL_CPTP) -> float:
    acc = np.zeros((dim, dim), dtype=complex)
    for k in ops:
        acc += np.asarray(k, dtype=complex).conj().T @ np.asarray(k, dtype=complex)
    defect = float(np.max(np.abs(acc - np.eye(dim))))
    if defect > tol:
        raise ValidationError(f"Kraus set not trace preserving: defect {defect:.3e}")
    return defect


def make_channel(ops, label: str = "", tol: float = TOL_CPTP) -> QuantumChannel:
    ops = [np.asarray(k, dtype=complex) for k in ops]
    if not ops:
        raise ValidationError("channel needs at least one Kraus operator")
    dim = ops[0].shape[0]
    for k in ops:
        if k.shape != (dim, dim):
            raise ValidationError(f"Kraus operators must all be {dim}x{dim}")
    kraus_completeness_check(ops, dim, tol=tol)
    return QuantumChannel(dim=dim, kraus_ops=tuple(readonly(k) for k in ops), label=label)


def identity_channel(dim: int) -> QuantumChannel:
    return make_channel([np.eye(dim)], label="identity")


def unitary_channel(u: np.ndarray, label: str = "unitary") -> QuantumChannel:
    u = np.asarray(u, dtype=complex)
    defect = float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))
    if defect > TOL_CPTP:
        raise ValidationError(f"matrix is not unitary: defect {defect:.3e}")
    return make_channel([u], label=label)


def dephasing_channel(obs: HermitianObservable, label: str = "dephasing") -> QuantumChannel:
    """Unread projective measurement of `obs`: rho -> sum_k Pi_k rho Pi_k."""
    return make_channel(obs.projectors, label=label)


def probabilistic_channel(p: float, inner: QuantumChannel, label: str = "") -> QuantumChannel:
    """Apply `inner` with probability p, do nothing with probability 1 - p."""
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"occurrence probability must be in [0, 1], got {p}")
    ops = [np.sqrt(1.0 - p) * np.eye(inner.dim)]
    ops += [np.sqrt(p) * k for k in inner.kraus_ops]
    return make_channel(ops, label=label or f"prob({p})[{inner.label}]")


def pump_channel(basis: HermitianObservable, target_level: int, efficiency: float,
                 label: str = "pump") -> QuantumChannel:
    """Collapse in `basis`, then move population into the target level.

    Each non-target level keeps its population with probability 1 - q and
    transfers it to the (rank-1) target with probability q. Degenerate source
    levels get one transfer operator per eigenspace direction so the map
    stays trace preserving.
    """
    if not 0.0 <= efficiency <= 1.0:
        raise ValidationError(f"pump efficiency must be in [0, 1], got {efficiency}")
    if not 0 <= target_level < basis.n_levels:
        raise ValidationError(f"target_level {target_level} out of range")
    target = basis.levels[target_level]
    if target.multiplicity != 1:
        raise ValidationError("pump target must be a rank-1 level")
    # Unit vector spanning the target eigenspace.
    vals, vecs = np.linalg.eigh(target.projector)
    t_vec = vecs[:, np.argmax(vals)]

    q = efficiency
    ops = [target.projector]
    for k, lv in enumerate(basis.levels):
        if k == target_level:
            continue
        ops.append(np.sqrt(1.0 - q) * lv.projector)
        if q > 0.0:
            lv_vals, lv_vecs = np.linalg.eigh(lv.projector)
            for col in np.where(lv_vals > 0.5)[0]:
                src = lv_vecs[:, col]
                ops.append(np.sqrt(q) * np.outer(t_vec, src.conj()))
    return make_channel(ops, label=label)


def compose(first: QuantumChannel, then: QuantumChannel, label: str = "") -> QuantumChannel:
    """Channel applying `first`, then `then` (Kraus products K2 K1)."""
    if first.dim != then.dim:
        raise ValidationError(f"dim mismatch: {first.dim} vs {then.dim}")
    ops = []
    for k2 in then.kraus_ops:
        for k1 in first.kraus_ops:
            prod = k2 @ k1
            if np.max(np.abs(prod)) > PRUNE_TOL:
                ops.append(prod)
    return make_channel(ops, label=label or f"{then.label}*{first.label}")


def apply(ch: QuantumChannel, rho: DensityOperator) -> DensityOperator:
    """Apply the channel and re-validate the output state."""
    if ch.dim != rho.dim:
        raise ValidationError(f"channel dim {ch.dim} != state dim {rho.dim}")
    out = ch(rho.matrix)
    report = validate_density(out)
    if not report.passes:
        raise ValidationError(
            f"channel '{ch.label}' produced an invalid state: " + "; ".join(report.violations))
    return DensityOperator(matrix=readonly(out))


@dataclass(frozen=True)
class AsymptoticReport:
    """Fixed-point diagnostics of an iterated channel.

    `diagonal` is the seed-independent level population vector; `seed_spread`
    is the largest pairwise diagonal deviation across seeds and must stay at
    the convergence tolerance for the report to be meaningful;
    `offdiag_residual` is the magnitude of the left-over coherent part, which
    may legitimately stay finite.
    """

    state: DensityOperator
    diagonal: np.ndarray
    offdiag_residual: float
    seed_spread: float
    iterations: int


def _dephased(rho: np.ndarray, basis: HermitianObservable) -> np.ndarray:
    out = np.zeros_like(rho)
    for lv in basis.levels:
        out += (np.real(np.trace(lv.projector @ rho)) / lv.multiplicity) * lv.projector
    return out


def asymptotic_state(ch: QuantumChannel, basis: HermitianObservable,
                     seeds: list[DensityOperator] | None = None,
                     tol: float = 1e-10, max_iter: int = 100_000) -> AsymptoticReport:
    """Iterate `ch` from several seeds until the level populations freeze.

    Convergence is declared on the diagonal (in the `basis` eigenbasis) only.
    Raises NonConvergenceError when the iteration budget runs out and
    SeedDependenceError when the converged diagonals disagree across seeds
    by more than 100*tol, i.e. when the premise of a seed-independent
    asymptotic diagonal is violated.
    """
    if basis.dim != ch.dim:
        raise ValidationError(f"basis dim {basis.dim} != channel dim {ch.dim}")
    if seeds is None:
        seeds = [maximally_mixed(ch.dim)] + [level_state(lv) for lv in basis.levels]
    if len(seeds) < 2:
        raise ValidationError("need at least 2 seeds to certify seed independence")

    finals = []
    diags = []
    iterations = 0
    for seed in seeds:
        rho = seed.matrix.copy()
        diag = basis.level_probabilities(rho)
        for it in range(1, max_iter + 1):
            rho = ch(rho)
            new_diag = basis.level_probabilities(rho)
            delta = float(np.max(np.abs(new_diag - diag)))
            diag = new_diag
            if delta < tol:
                iterations = max(iterations, it)
                break
        else:
            raise NonConvergenceError(
                f"channel '{ch.label}' diagonal still moving by {delta:.3e} "
                f"after {max_iter} iterations")
        finals.append(rho)
        diags.append(diag)

    spread = 0.0
    for a in range(len(diags)):
        for b in range(a + 1, len(diags)):
            spread = max(spread, float(np.max(np.abs(diags[a] - diags[b]))))
    if spread > 100.0 * tol:
        raise SeedDependenceError(
            f"diagonal not seed-independent: spread {spread:.3e} > {100 * tol:.1e}")

    rho_inf = finals[0]
    offdiag = float(np.max(np.abs(rho_inf - _dephased(rho_inf, basis))))
    return AsymptoticReport(
        state=DensityOperator(matrix=readonly(rho_inf)),
        diagonal=readonly(diags[0], dtype=float),
        offdiag_residual=offdiag,
        seed_spread=spread,
        iterations=iterations,
    )
