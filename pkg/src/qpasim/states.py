"""Hyperentangled resource state and the two noise channels used to degrade it."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    I2,
    PHI_PLUS,
    PSI_MINUS,
    PSI_PLUS,
    X,
    Y,
    Z,
    QuantumError,
    apply_unitary,
    bell_dm,
    partial_trace,
    ry,
    tensor,
)


def _check_probability(name: str, value: float) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0 or np.isnan(value):
        raise QuantumError(f"{name} must lie in [0, 1], got {value!r}")
    return value


@dataclass(frozen=True)
class NoiseParams:
    """Admixture weights for the two degrees of freedom.

    Attributes:
        p: psi- weight mixed into the polarisation phi+ state.
        q: total psi+/psi- weight (split evenly) mixed into the energy-time phi+.
        v_pol: optional isotropic intrinsic error on polarisation (calibration knob).
        v_et: same for energy-time.
    """

    p: float = 0.0
    q: float = 0.0
    v_pol: float = 0.0
    v_et: float = 0.0

    def __post_init__(self):
        for name in ("p", "q", "v_pol", "v_et"):
            object.__setattr__(self, name, _check_probability(name, getattr(self, name)))


@dataclass(frozen=True)
class HyperState:
    """Factorized two-DOF state; the 16-dim joint operator is built on demand."""

    pol: np.ndarray
    et: np.ndarray

    def joint(self) -> np.ndarray:
        """Return the 16x16 operator in (pol_A, pol_B, et_A, et_B) order."""
        return tensor(self.pol, self.et)

    def marginal(self, keep: str) -> np.ndarray:
        return partial_trace(self.joint(), keep)


def hyper_phi_plus() -> HyperState:
    """Noiseless phi+ (x) phi+ hyperentangled state."""
    return HyperState(pol=bell_dm(PHI_PLUS), et=bell_dm(PHI_PLUS))


def waveplate_noise_channel(rho: np.ndarray, theta: float) -> np.ndarray:
    """Average of ``Ry(+theta)`` and ``Ry(-theta)`` applied to photon A.

    This is the time-averaged wave-plate setting; on phi+ it yields
    ``cos^2(theta/2) phi+ + sin^2(theta/2) psi-``.
    """
    plus = tensor(ry(theta), I2)
    minus = tensor(ry(-theta), I2)
    return 0.5 * (apply_unitary(rho, plus) + apply_unitary(rho, minus))


def pol_mixture(p: float) -> np.ndarray:
    """``(1 - p) phi+ + p psi-``."""
    p = _check_probability("p", p)
    return (1 - p) * bell_dm(PHI_PLUS) + p * bell_dm(PSI_MINUS)


def et_mixture(q: float) -> np.ndarray:
    """``(1 - q) phi+ + q/2 psi+ + q/2 psi-``."""
    q = _check_probability("q", q)
    return (1 - q) * bell_dm(PHI_PLUS) + 0.5 * q * (bell_dm(PSI_PLUS) + bell_dm(PSI_MINUS))


def isotropic_error(rho: np.ndarray, v: float) -> np.ndarray:
    """Depolarize photon A: weight ``v`` spread evenly over X, Y and Z.

    On phi+ this moves weight ``v/3`` to each of the other three Bell states.
    ``v = 0`` returns the input unchanged.
    """
    v = _check_probability("v", v)
    if v == 0.0:
        return np.asarray(rho, dtype=complex)
    out = (1 - v) * np.asarray(rho, dtype=complex)
    for pauli in (X, Y, Z):
        out = out + (v / 3) * apply_unitary(rho, tensor(pauli, I2))
    return out


def assemble_noisy_hyper(params: NoiseParams) -> HyperState:
    """Build the factorized noisy input state for given admixture weights."""
    pol = isotropic_error(pol_mixture(params.p), params.v_pol)
    et = isotropic_error(et_mixture(params.q), params.v_et)
    return HyperState(pol=pol, et=et)
