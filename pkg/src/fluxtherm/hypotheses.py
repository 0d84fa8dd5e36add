"""Quantitative checks of the memory-loss and detailed-balance premises.

The fluctuation relation holds at all recorded times (not only
asymptotically) when two conditions are met from some onset step t*:
the conditional probabilities no longer depend on the initial level for
i != f (almost complete memory loss), and detailed balance ties forward and
backward transitions through the asymptotic populations. The memory-loss
checks scan for that onset; the balance check reports a worst case over all
recorded times. Also here: the memory-profile extraction F(i,f,t) and the
single-decay-time fit used for pulsed-dissipation data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ValidationError, readonly, validate_probability_vector
from .channels import NonConvergenceError
from .tpm import TPMRecord, validate_record

DEFAULT_TOL_EXPERIMENT = 1e-3
DEFAULT_TOL_SYNTHETIC = 1e-9


@dataclass(frozen=True)
class HypothesisVerdict:
    """Pass/fail with the deviation actually measured.

    onset_step is the first recorded index from which the deviation stays
    within tolerance for every later recorded step; None when no such index
    exists. When the verdict passes, max_deviation is the worst deviation
    from the onset onwards; when it fails, it is the deviation at the last
    recorded step.
    """

    name: str
    passes: bool
    max_deviation: float
    onset_step: int | None
    note: str = ""

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "passes": bool(self.passes),
            "max_deviation": float(self.max_deviation),
            "onset_step": None if self.onset_step is None else int(self.onset_step),
            "note": self.note,
        }


def _onset_verdict(name: str, deviations: np.ndarray, tol: float, note: str = "") -> HypothesisVerdict:
    # Suffix maximum: onset = first index whose suffix stays within tol.
    suffix_max = np.maximum.accumulate(deviations[::-1])[::-1]
    ok = np.where(suffix_max <= tol)[0]
    if len(ok):
        onset = int(ok[0])
        return HypothesisVerdict(name, True, float(suffix_max[onset]), onset, note)
    return HypothesisVerdict(name, False, float(deviations[-1]), None, note)


def check_hypothesis_I_star(record: TPMRecord, tol: float = DEFAULT_TOL_EXPERIMENT) -> HypothesisVerdict:
    """Complete memory loss: P(f|i, t) independent of i, all i."""
    validate_record(record)
    c = record.cond_probs
    dev = (c.max(axis=2) - c.min(axis=2)).max(axis=1)
    return _onset_verdict("hypothesis_I_star", dev, tol)


def check_hypothesis_I(record: TPMRecord, tol: float = DEFAULT_TOL_EXPERIMENT) -> HypothesisVerdict:
    """Almost complete memory loss: P(f|i, t) independent of i for i != f.

    Vacuous for two-level systems (a single off-diagonal column per f);
    the verdict then passes trivially and says so in its note.
    """
    validate_record(record)
    n = record.n_levels
    if n < 3:
        return HypothesisVerdict("hypothesis_I", True, 0.0, 0,
                                 note="vacuous for n < 3 (one off-diagonal index per level)")
    c = record.cond_probs
    mask = ~np.eye(n, dtype=bool)
    dev = np.zeros(len(record.times))
    for t in range(len(record.times)):
        spread = 0.0
        for f in range(n):
            vals = c[t, f, mask[f]]
            spread = max(spread, float(vals.max() - vals.min()))
        dev[t] = spread
    return _onset_verdict("hypothesis_I", dev, tol)


def check_dbc(record: TPMRecord, p_inf, tol: float = DEFAULT_TOL_EXPERIMENT) -> HypothesisVerdict:
    """Detailed balance in cross-multiplied form.

    The deviation is max over pairs i != f and over ALL recorded times of
    |P(f|i, t) P_i(inf) - P(i|f, t) P_f(inf)|; unlike the memory-loss
    checks there is no onset scan, because balance is supposed to hold at
    every time (onset_step is still reported for information). The ratio
    form would divide by small probabilities and is numerically fragile.

    Pairs touching a level with zero asymptotic probability are vacuously
    balanced when no transition probability ever crosses that pair; if some
    does, the pair cannot be certified and is skipped with a note.
    """
    validate_record(record)
    p_inf = validate_probability_vector(p_inf)
    n = record.n_levels
    if len(p_inf) != n:
        raise ValidationError(f"p_inf has {len(p_inf)} entries, record has {n} levels")
    c = record.cond_probs
    cross = c * p_inf[None, None, :]          # [t, f, i] = P(f|i) P_i(inf)
    asym = np.abs(cross - np.swapaxes(cross, 1, 2))

    usable = p_inf > 0.0
    pair_ok = np.outer(usable, usable)
    skipped: list[tuple[int, int]] = []
    for i in range(n):
        for f in range(i + 1, n):
            if pair_ok[i, f]:
                continue
            traffic = max(float(c[:, f, i].max()), float(c[:, i, f].max()))
            if traffic <= 1e-12:
                pair_ok[i, f] = pair_ok[f, i] = True   # vacuously balanced
            else:
                skipped.append((i, f))
    np.fill_diagonal(pair_ok, False)

    note = ""
    if skipped:
        note = f"unverifiable pairs (zero asymptotic probability with traffic): {skipped}"
    if not pair_ok.any():
        return HypothesisVerdict("detailed_balance", True, 0.0, 0,
                                 note=(note + "; " if note else "") + "no checkable pair")
    dev = np.array([float(asym[t][pair_ok].max()) for t in range(len(record.times))])
    overall = float(dev.max())
    suffix_max = np.maximum.accumulate(dev[::-1])[::-1]
    ok = np.where(suffix_max <= tol)[0]
    onset = int(ok[0]) if len(ok) else None
    return HypothesisVerdict("detailed_balance", overall <= tol, overall, onset, note)


@dataclass(frozen=True)
class MemoryProfileTable:
    """F(i,f,t) = P(f|i,t)/P_f(inf) for i != f; implied factor on the diagonal.

    The diagonal entry is (1 - P(i|i,t))/(1 - P_i(inf)), the memory-loss
    factor implied by the survival probability; under the almost-complete
    memory loss premise plus detailed balance all entries collapse onto one
    curve. Entries whose denominator vanishes are NaN and listed in
    `undefined`.
    """

    times: np.ndarray
    values: np.ndarray            # [t, i, f]
    undefined: tuple[tuple[int, int], ...]

    def spread(self, t_index: int) -> float:
        vals = self.values[t_index]
        finite = vals[np.isfinite(vals)]
        return float(finite.max() - finite.min()) if len(finite) else 0.0


def extract_F(record: TPMRecord, p_inf) -> MemoryProfileTable:
    """Normalize the record by the asymptotic populations."""
    validate_record(record)
    p_inf = validate_probability_vector(p_inf)
    n = record.n_levels
    if len(p_inf) != n:
        raise ValidationError(f"p_inf has {len(p_inf)} entries, record has {n} levels")
    values = np.full((len(record.times), n, n), np.nan)
    undefined = []
    for i in range(n):
        for f in range(n):
            if i == f:
                denom = 1.0 - p_inf[i]
                if denom <= 0.0:
                    undefined.append((i, f))
                    continue
                values[:, i, f] = (1.0 - record.cond_probs[:, i, i]) / denom
            else:
                if p_inf[f] <= 0.0:
                    undefined.append((i, f))
                    continue
                values[:, i, f] = record.cond_probs[:, f, i] / p_inf[f]
    return MemoryProfileTable(times=record.times, values=readonly(values, dtype=float),
                              undefined=tuple(undefined))


def record_from_memory_profile(fbar, p_inf, energies) -> TPMRecord:
    """Synthesize a record obeying the factorized form exactly.

    P(f|i, t) = fbar(t) P_f(inf) off the diagonal, completed on the diagonal
    by column normalization. fbar must start at 0 (the step-0 matrix is the
    identity) and stay within [0, 1] so the diagonal stays a probability.
    """
    fbar = np.asarray(fbar, dtype=float)
    p_inf = validate_probability_vector(p_inf)
    energies = np.asarray(energies, dtype=float)
    if fbar.ndim != 1 or len(fbar) < 1:
        raise ValidationError("fbar must be a nonempty 1-d array")
    if fbar[0] != 0.0:
        raise ValidationError("fbar must start at 0")
    if np.any(fbar < 0.0) or np.any(fbar > 1.0):
        raise ValidationError("fbar values must lie in [0, 1]")
    if len(p_inf) != len(energies):
        raise ValidationError("p_inf and energies must have equal length")
    n = len(p_inf)
    cond = np.empty((len(fbar), n, n))
    for t, f_t in enumerate(fbar):
        m = np.tile((f_t * p_inf)[:, None], (1, n))
        for i in range(n):
            m[i, i] = 1.0 - f_t * (1.0 - p_inf[i])
        cond[t] = m
    record = TPMRecord(energies=readonly(energies, dtype=float),
                       times=readonly(np.arange(len(fbar)), dtype=int),
                       cond_probs=readonly(cond, dtype=float))
    validate_record(record)
    return record


def dbc_model_matrix(t: float, tau_d: float, p_inf: np.ndarray) -> np.ndarray:
    """Single-decay-time model P(f|i, t) = P_f(inf)(1 - e^(-t/tau)) + delta_if e^(-t/tau)."""
    decay = math.exp(-t / tau_d)
    n = len(p_inf)
    return np.tile((p_inf * (1.0 - decay))[:, None], (1, n)) + decay * np.eye(n)


def record_from_dbc_model(n_steps: int, tau_d: float, p_inf, energies) -> TPMRecord:
    """Synthetic record generated from the single-decay-time model."""
    p_inf = validate_probability_vector(p_inf)
    fbar = 1.0 - np.exp(-np.arange(n_steps + 1) / tau_d)
    return record_from_memory_profile(fbar, p_inf, energies)


@dataclass(frozen=True)
class DbcFit:
    """Least-squares fit of the single-decay-time model to a record."""

    p_inf: np.ndarray
    tau_d: float
    rms_residual: float


def _golden_section_min(f, lo: float, hi: float, rel_tol: float = 1e-12,
                        max_iter: int = 200) -> float:
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) <= rel_tol * (abs(a) + abs(b)):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def fit_exponential_dbc_model(record: TPMRecord, p_inf=None,
                              tau_bracket: tuple[float, float] = (1e-3, 1e3)) -> DbcFit:
    """Fit the scalar decay time of the single-decay-time model.

    p_inf defaults to the column mean of the record's final step (the record
    must be converged enough for that to estimate the asymptotic
    populations). The scalar least-squares problem is scanned on a log grid
    over `tau_bracket` and polished by golden-section search; a minimum
    sitting on the bracket edge means the model cannot represent the data.
    """
    validate_record(record)
    if len(record.times) < 5:
        raise ValidationError("need at least 5 time points to fit a decay time")
    if p_inf is None:
        last = record.cond_probs[-1]
        est = last.mean(axis=1)
        p_inf = est / est.sum()
    p_inf = validate_probability_vector(p_inf)
    times = np.asarray(record.times, dtype=float)

    def sse(log_tau: float) -> float:
        tau = math.exp(log_tau)
        total = 0.0
        for t_idx, t in enumerate(times):
            diff = record.cond_probs[t_idx] - dbc_model_matrix(t, tau, p_inf)
            total += float(np.sum(diff * diff))
        return total

    lo, hi = math.log(tau_bracket[0]), math.log(tau_bracket[1])
    grid = np.linspace(lo, hi, 121)
    values = [sse(u) for u in grid]
    best = int(np.argmin(values))
    if best in (0, len(grid) - 1):
        raise NonConvergenceError(
            f"decay-time bracket {tau_bracket} exhausted (best fit at the edge)")
    log_tau = _golden_section_min(sse, grid[best - 1], grid[best + 1])
    tau_d = math.exp(log_tau)
    count = record.cond_probs.size
    rms = math.sqrt(sse(log_tau) / count)
    return DbcFit(p_inf=p_inf, tau_d=tau_d, rms_residual=rms)
