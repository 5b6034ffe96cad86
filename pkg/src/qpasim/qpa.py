"""Single-copy privacy amplification: bilateral CNOT and postselection.

Each photon's polarisation acts as control and its energy-time path as target.
Afterwards the path pair is measured in the computational basis and the pair
is kept only when both paths agree (detector pairs A0/B0 or A1/B1). The
surviving polarisation state is the distilled resource.

Two routes are provided. ``bilateral_cnot`` + ``postselect`` act on the dense
16-dim operator and work for any input. ``qpa_bell_algebra`` propagates Bell
labels: with pol = (b1, f1) and et = (b2, f2) the CNOT gives
``b2' = b2 ^ b1`` and ``f1' = f1 ^ f2``, and a pair passes iff ``b2' == 0``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import (
    ATOL,
    BELL_LABELS,
    BellLabel,
    QuantumError,
    bell_dm,
    bell_weights_of,
    check_density,
    is_bell_diagonal,
    partial_trace,
)
from .states import HyperState

YIELD_FLOOR = 1e-12
"""Yields below this are treated as zero; the outcome state is undefined."""


@dataclass(frozen=True)
class QpaOutcome:
    """Result of one QPA step.

    Attributes:
        output_pol: Normalized polarisation state of the kept pairs, or ``None``
            when the yield vanishes.
        yield_: Probability that a pair passes postselection.
        branch_probabilities: Pass probabilities for the (A0, B0) and (A1, B1)
            detector patterns; they sum to ``yield_``.
    """

    output_pol: np.ndarray | None
    yield_: float
    branch_probabilities: tuple[float, float]

    @property
    def defined(self) -> bool:
        return self.output_pol is not None

    def output_weights(self) -> np.ndarray:
        """Bell weights of the output state; zeros when undefined."""
        if self.output_pol is None:
            return np.zeros(4)
        return bell_weights_of(self.output_pol)


@lru_cache(maxsize=None)
def _cnot_matrix() -> np.ndarray:
    # permutation |a b c d> -> |a b (c^a) (d^b)>
    u = np.zeros((16, 16), dtype=complex)
    for idx in range(16):
        a, b, c, d = (idx >> 3) & 1, (idx >> 2) & 1, (idx >> 1) & 1, idx & 1
        out = (a << 3) | (b << 2) | ((c ^ a) << 1) | (d ^ b)
        u[out, idx] = 1.0
    u.setflags(write=False)
    return u


def bilateral_cnot_matrix() -> np.ndarray:
    """16x16 unitary: CNOT(pol_A -> et_A) times CNOT(pol_B -> et_B)."""
    return _cnot_matrix()


def bilateral_cnot(state: HyperState | np.ndarray) -> np.ndarray:
    """Apply both local CNOTs to a hyperentangled state.

    Accepts a :class:`HyperState` (tensored on demand) or a 16x16 operator.
    """
    rho = state.joint() if isinstance(state, HyperState) else np.asarray(state, dtype=complex)
    if rho.shape != (16, 16):
        raise QuantumError(f"bilateral_cnot expects a 16x16 operator, got {rho.shape}")
    u = _cnot_matrix()
    # u is a real permutation, so u^dagger = u.T
    return u @ rho @ u.T


@lru_cache(maxsize=None)
def _branch_projectors() -> tuple[np.ndarray, np.ndarray]:
    projs = []
    for et_index in (0b00, 0b11):
        diag = np.zeros(16)
        for pol_index in range(4):
            diag[pol_index * 4 + et_index] = 1.0
        projs.append(np.diag(diag).astype(complex))
    return tuple(projs)


def postselect(rho16: np.ndarray) -> QpaOutcome:
    """Keep the pair when the path outcomes agree; return the pol marginal."""
    rho16 = np.asarray(rho16, dtype=complex)
    if rho16.shape != (16, 16):
        raise QuantumError(f"postselect expects a 16x16 operator, got {rho16.shape}")
    kept = np.zeros((16, 16), dtype=complex)
    branches = []
    for proj in _branch_projectors():
        part = proj @ rho16 @ proj
        branches.append(max(float(np.real(np.trace(part))), 0.0))
        kept += part
    y = branches[0] + branches[1]
    if y < YIELD_FLOOR:
        return QpaOutcome(None, 0.0, (0.0, 0.0))
    out = partial_trace(kept, "pol") / y
    return QpaOutcome(out, y, (branches[0], branches[1]))


def run_matrix_pipeline(state: HyperState | np.ndarray) -> QpaOutcome:
    return postselect(bilateral_cnot(state))


def _check_weights(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.shape != (4,) or np.any(w < -ATOL) or abs(w.sum() - 1.0) > ATOL:
        raise QuantumError(f"Bell weights must be a nonnegative 4-vector summing to 1, got {w}")
    return np.clip(w, 0.0, None)


def qpa_bell_algebra(pol_weights, et_weights) -> QpaOutcome:
    """Analytic QPA on Bell-diagonal inputs given as weight vectors.

    Weight vectors are ordered (phi+, psi+, phi-, psi-).
    """
    wp = _check_weights(pol_weights)
    we = _check_weights(et_weights)
    out = np.zeros(4)
    for b1, f1 in BELL_LABELS:
        w1 = wp[b1 + 2 * f1]
        for b2, f2 in BELL_LABELS:
            if b2 ^ b1:
                continue
            out[BellLabel(b1, f1 ^ f2).index] += w1 * we[b2 + 2 * f2]
    y = float(out.sum())
    if y < YIELD_FLOOR:
        return QpaOutcome(None, 0.0, (0.0, 0.0))
    out /= y
    rho = sum(w * bell_dm(lbl) for w, lbl in zip(out, BELL_LABELS))
    # passing et pairs are phi+/phi-, which split evenly between 00 and 11
    return QpaOutcome(rho, y, (y / 2, y / 2))


def run_qpa(state: HyperState, method: str = "algebra") -> QpaOutcome:
    """QPA on a factorized state via the Bell fast path or the dense pipeline."""
    if method == "matrix":
        return run_matrix_pipeline(state)
    if method == "algebra":
        pol, et = check_density(state.pol), check_density(state.et)
        if not (is_bell_diagonal(pol) and is_bell_diagonal(et)):
            raise QuantumError("the Bell fast path needs Bell-diagonal inputs; use method='matrix'")
        return qpa_bell_algebra(bell_weights_of(pol), bell_weights_of(et))
    raise ValueError(f"unknown QPA method {method!r}")
