"""Scenario builders: measurement-train qutrit protocols and pulsed spin maps.

Two families are assembled from the channel primitives:

* generalized measurement-train ("variant a/b/c") protocols on a spin-1
  system, where the transverse spin component is measured at the start and
  the end while intermediate longitudinal measurements fire with probability
  p_m, optionally preceded by a scrambling unitary (b) and followed by
  dissipative pumping into the m=0 level (c);
* the pulsed spin-1 map, one stroboscopic step being a Hamiltonian unitary
  followed by a probabilistic pulse that measures the longitudinal spin and
  pumps towards m=0, either with a transverse drive (x_drive) or with the
  natural longitudinal Hamiltonian (z_natural).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    HermitianObservable,
    ValidationError,
    evolution_unitary,
    spectral_decompose,
    spin1_operators,
)
from .channels import (
    QuantumChannel,
    compose,
    dephasing_channel,
    probabilistic_channel,
    pump_channel,
    unitary_channel,
)
from .tpm import TPMRecord, conditional_probabilities

COMMUTATOR_TOL = 1e-12


@dataclass(frozen=True)
class ProtocolSpec:
    """One stroboscopic experiment: TPM observable, step channel, horizon."""

    dim: int
    hamiltonian: HermitianObservable
    step_channel: QuantumChannel
    n_steps: int
    label: str
    params: dict = field(default_factory=dict)
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        if self.step_channel.dim != self.hamiltonian.dim:
            raise ValidationError("step channel and observable dims differ")
        if self.n_steps < 1:
            raise ValidationError("n_steps must be >= 1")


def _zero_level_index(obs: HermitianObservable) -> int:
    idx = int(np.argmin(np.abs(obs.energies)))
    if abs(obs.energies[idx]) > 1e-9:
        raise ValidationError("observable has no zero eigenvalue level")
    return idx


def _pulse_channel(sz_obs: HermitianObservable, p_m: float, pump_q: float) -> QuantumChannel:
    """POVM firing with probability p_m: collapse along S_z, pump towards m=0."""
    inner = compose(
        dephasing_channel(sz_obs, label="sz-collapse"),
        pump_channel(sz_obs, _zero_level_index(sz_obs), pump_q, label="pump-m0"),
        label="collapse+pump",
    )
    return probabilistic_channel(p_m, inner, label=f"pulse(p={p_m},q={pump_q})")


def build_stern_gerlach(variant: str, p_m: float = 0.35, unitary_angle: float = math.pi / 5,
                        pump_q: float = 1.0, n_steps: int = 25,
                        generator: np.ndarray | None = None) -> ProtocolSpec:
    """Measurement-train protocol on a spin-1 system.

    The TPM observable is S_x. One step is, depending on the variant:
      a: the intermediate S_z measurement alone, firing with probability p_m;
      b: a scrambling unitary exp(-i*angle*G), then the same POVM;
      c: as b, but a firing measurement also pumps into the m=0 level with
         efficiency pump_q.
    The default generator G = S_x does not commute with S_z. A generator
    whose unitary commutes with S_z adds nothing the intermediate collapse
    can see, so the step reduces to variant a; the builder performs that
    reduction and flags it.
    """
    if variant not in ("a", "b", "c"):
        raise ValidationError(f"variant must be one of a, b, c, got {variant!r}")
    sx, _, sz = spin1_operators()
    obs = spectral_decompose(sx)
    sz_obs = spectral_decompose(sz)

    if variant == "a":
        povm = probabilistic_channel(p_m, dephasing_channel(sz_obs), label=f"povm(p={p_m})")
    elif variant == "b":
        povm = probabilistic_channel(p_m, dephasing_channel(sz_obs), label=f"povm(p={p_m})")
    else:
        povm = _pulse_channel(sz_obs, p_m, pump_q)

    notes: list[str] = []
    step = povm
    if variant in ("b", "c"):
        gen = sx if generator is None else np.asarray(generator, dtype=complex)
        u = evolution_unitary(gen, unitary_angle)
        if float(np.max(np.abs(u @ sz - sz @ u))) <= COMMUTATOR_TOL:
            notes.append("reduces to variant (a): scrambling unitary commutes with the "
                         "intermediate observable and is omitted")
        else:
            step = compose(unitary_channel(u, label="scramble"), povm,
                           label=f"sg-{variant}-step")

    params = {"p_m": p_m, "n_steps": n_steps}
    if variant in ("b", "c"):
        params["unitary_angle"] = unitary_angle
    if variant == "c":
        params["pump_q"] = pump_q
    return ProtocolSpec(dim=3, hamiltonian=obs, step_channel=step, n_steps=n_steps,
                        label=f"stern_gerlach_{variant}", params=params, notes=tuple(notes))


def build_nv_demon(h_choice: str, p_m: float = 0.35, pump_q: float = 1.0,
                   omega_tau: float | None = None, n_steps: int = 25,
                   omega: float = 1.0, delta: float | None = None,
                   gamma_b: float | None = None, tau: float = 1.0) -> ProtocolSpec:
    """Pulsed spin-1 map: Hamiltonian unitary then a pump pulse per step.

    h_choice "x_drive" uses H = omega * S_x (omega_tau, the per-step
    rotation angle, is required configuration); "z_natural" uses
    H = delta * S_z^2 + gamma_b * S_z, which commutes with the pulse so the
    factorized-statistics premises hold by construction.
    """
    sx, _, sz = spin1_operators()
    sz_obs = spectral_decompose(sz)
    notes: list[str] = []

    if h_choice == "x_drive":
        if omega_tau is None:
            raise ValidationError("x_drive requires omega_tau (per-step rotation angle)")
        if omega_tau <= 0:
            raise ValidationError("omega_tau must be > 0")
        h = omega * sx
        u = evolution_unitary(sx, omega_tau)
        params = {"omega": omega, "omega_tau": omega_tau}
    elif h_choice == "z_natural":
        if delta is None or gamma_b is None:
            raise ValidationError("z_natural requires delta and gamma_b")
        h = delta * (sz @ sz) + gamma_b * sz
        u = evolution_unitary(h, tau)
        params = {"delta": delta, "gamma_b": gamma_b, "tau": tau}
        notes.append("H commutes with S_z: pulse and unitary share an eigenbasis")
    else:
        raise ValidationError(f"h_choice must be x_drive or z_natural, got {h_choice!r}")

    obs = spectral_decompose(h)
    pulse = _pulse_channel(sz_obs, p_m, pump_q)
    step = compose(unitary_channel(u, label="H-evolution"), pulse, label=f"nv-{h_choice}-step")
    params.update({"p_m": p_m, "pump_q": pump_q, "n_steps": n_steps})
    return ProtocolSpec(dim=3, hamiltonian=obs, step_channel=step, n_steps=n_steps,
                        label=f"nv_demon_{h_choice}", params=params, notes=tuple(notes))


def run_protocol(spec: ProtocolSpec) -> TPMRecord:
    """Conditional probabilities over steps 0..n_steps; initial probabilities
    stay unattached until an initial state is chosen at analysis time."""
    return conditional_probabilities(spec.step_channel, spec.hamiltonian, spec.n_steps)
