"""Dense linear algebra and quantum primitives for 2-, 4- and 16-dim spaces.

Storage conventions:

* Matrices are dense ``complex128`` numpy arrays, row-major.
* The basis index of a multi-qubit ket is the binary expansion of the qubit
  labels, first qubit most significant. For the hyperentangled photon pair the
  qubit order is ``(pol_A, pol_B, et_A, et_B)`` so that
  ``index = pol_A*8 + pol_B*4 + et_A*2 + et_B``.
* ``|0>`` stands for ``|H>`` (polarisation) and ``|t_S>`` (energy-time path),
  ``|1>`` for ``|V>`` and ``|t_L>``.
"""

from __future__ import annotations

from functools import lru_cache
from typing import NamedTuple

import numpy as np

ATOL = 1e-12
"""Equality tolerance for traces, Hermiticity and entrywise comparisons."""
PSD_ATOL = 1e-10
"""Slack for positive semidefiniteness, unitarity and projector checks."""

SUPPORTED_DIMS = (2, 4, 16)


class QuantumError(ValueError):
    """Raised when an input violates a quantum-object contract."""


class BellLabel(NamedTuple):
    """Bell state label as a (bit-flip, phase-flip) pair."""

    bit: int
    phase: int

    @property
    def index(self) -> int:
        """Position in the canonical order (phi+, psi+, phi-, psi-)."""
        return self.bit + 2 * self.phase

    @property
    def name(self) -> str:
        return BELL_NAMES[self.index]


PHI_PLUS = BellLabel(0, 0)
PSI_PLUS = BellLabel(1, 0)
PHI_MINUS = BellLabel(0, 1)
PSI_MINUS = BellLabel(1, 1)

BELL_LABELS = (PHI_PLUS, PSI_PLUS, PHI_MINUS, PSI_MINUS)
BELL_NAMES = ("phi+", "psi+", "phi-", "psi-")


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


I2 = _frozen(np.eye(2, dtype=complex))
X = _frozen(np.array([[0, 1], [1, 0]], dtype=complex))
Y = _frozen(np.array([[0, -1j], [1j, 0]], dtype=complex))
Z = _frozen(np.array([[1, 0], [0, -1]], dtype=complex))
HADAMARD = _frozen(np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2))


def basis_ket(index: int, dim: int) -> np.ndarray:
    ket = np.zeros(dim, dtype=complex)
    ket[index] = 1.0
    return ket


def bell_state(label: BellLabel | tuple[int, int]) -> np.ndarray:
    """Return the Bell ket ``(|0 b> + (-1)^f |1, 1^b>) / sqrt(2)``.

    Args:
        label: ``(bit, phase)``; ``(0, 0)`` is phi+, ``(1, 1)`` is psi-.

    Returns:
        Normalized 4-dim state vector.
    """
    b, f = (int(v) for v in label)
    if b not in (0, 1) or f not in (0, 1):
        raise QuantumError(f"invalid Bell label {label!r}")
    ket = np.zeros(4, dtype=complex)
    ket[b] = 1.0
    ket[2 + (1 ^ b)] = (-1) ** f
    return ket / np.sqrt(2)


@lru_cache(maxsize=None)
def bell_basis() -> np.ndarray:
    """Unitary whose columns are the Bell kets in (phi+, psi+, phi-, psi-) order."""
    return _frozen(np.column_stack([bell_state(lbl) for lbl in BELL_LABELS]))


def ket_to_dm(ket: np.ndarray) -> np.ndarray:
    ket = np.asarray(ket, dtype=complex)
    return np.outer(ket, ket.conj())


def bell_dm(label: BellLabel | tuple[int, int]) -> np.ndarray:
    return _bell_dm(*(int(v) for v in label)).copy()


@lru_cache(maxsize=None)
def _bell_dm(bit: int, phase: int) -> np.ndarray:
    return _frozen(ket_to_dm(bell_state((bit, phase))))


def tensor(*ops: np.ndarray) -> np.ndarray:
    """Kronecker product of kets or matrices, first factor most significant.

    Raises:
        QuantumError: if the result would exceed a 16-dim space, or if kets and
            matrices are mixed.
    """
    if not ops:
        raise QuantumError("tensor needs at least one operand")
    arrays = [np.asarray(op, dtype=complex) for op in ops]
    ndims = {a.ndim for a in arrays}
    if len(ndims) != 1 or ndims.pop() not in (1, 2):
        raise QuantumError("tensor operands must all be kets or all be square matrices")
    dim = int(np.prod([a.shape[0] for a in arrays]))
    if dim > 16:
        raise QuantumError(f"product dimension {dim} exceeds the supported 16")
    out = arrays[0]
    for a in arrays[1:]:
        out = np.kron(out, a)
    return out


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.transpose(m))


def is_unitary(u: np.ndarray, atol: float = PSD_ATOL) -> bool:
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    return bool(np.allclose(dagger(u) @ u, np.eye(u.shape[0]), atol=atol, rtol=0))


def is_projector(p: np.ndarray, atol: float = PSD_ATOL) -> bool:
    p = np.asarray(p)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        return False
    return bool(
        np.allclose(p, dagger(p), atol=atol, rtol=0)
        and np.allclose(p @ p, p, atol=atol, rtol=0)
    )


def check_density(rho: np.ndarray) -> np.ndarray:
    """Validate a density operator and return it as a complex array.

    Checks shape (dim 2, 4 or 16), Hermiticity and unit trace to ``ATOL`` and
    the smallest eigenvalue against ``-PSD_ATOL``.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] not in SUPPORTED_DIMS:
        raise QuantumError(f"density operator must be square with dim in {SUPPORTED_DIMS}, got {rho.shape}")
    if not np.allclose(rho, dagger(rho), atol=ATOL, rtol=0):
        raise QuantumError("density operator is not Hermitian")
    tr = np.trace(rho)
    if abs(tr - 1.0) > ATOL:
        raise QuantumError(f"density operator trace is {tr.real:.15g}, expected 1")
    if np.linalg.eigvalsh(rho).min() < -PSD_ATOL:
        raise QuantumError("density operator is not positive semidefinite")
    return rho


def ry(theta: float) -> np.ndarray:
    """Rotation about the Bloch-sphere y axis, ``exp(-i theta Y / 2)``."""
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def apply_unitary(rho: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Return ``U rho U^dagger``.

    Raises:
        QuantumError: if ``u`` is not unitary or the dimensions differ.
    """
    rho = np.asarray(rho, dtype=complex)
    u = np.asarray(u, dtype=complex)
    if u.shape != rho.shape:
        raise QuantumError(f"unitary shape {u.shape} does not match state shape {rho.shape}")
    if not is_unitary(u):
        raise QuantumError("matrix is not unitary")
    return u @ rho @ dagger(u)


def born_probability(rho: np.ndarray, projector: np.ndarray) -> float:
    """Probability ``tr(P rho)`` of a projective outcome.

    Values within ``PSD_ATOL`` outside [0, 1] are clamped; rounding noise is the
    only way to get there from a valid state.
    """
    projector = np.asarray(projector, dtype=complex)
    if not is_projector(projector):
        raise QuantumError("measurement operator is not a Hermitian idempotent")
    if projector.shape != np.shape(rho):
        raise QuantumError("projector and state dimensions differ")
    return expectation(rho, projector)


def expectation(rho: np.ndarray, projector: np.ndarray) -> float:
    """Unchecked ``tr(P rho)`` with the same boundary clamping as ``born_probability``."""
    prob = float(np.real(np.einsum("ij,ji->", projector, rho)))
    if -PSD_ATOL <= prob < 0.0:
        return 0.0
    if 1.0 < prob <= 1.0 + PSD_ATOL:
        return 1.0
    return prob


# Subsystem selectors for the 16-dim hyperentangled state. Qubit positions
# refer to the (pol_A, pol_B, et_A, et_B) ordering.
SUBSYSTEMS = {"pol": (0, 1), "et": (2, 3)}


def partial_trace(rho: np.ndarray, keep: str) -> np.ndarray:
    """Reduce a 16-dim (pol_A, pol_B, et_A, et_B) state to one DOF pair.

    Args:
        rho: 16x16 density operator.
        keep: ``"pol"`` or ``"et"``.

    Returns:
        4x4 marginal of the kept pair, qubit A first.
    """
    if keep not in SUBSYSTEMS:
        raise QuantumError(f"unknown subsystem {keep!r}; expected one of {sorted(SUBSYSTEMS)}")
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (16, 16):
        raise QuantumError(f"partial_trace expects a 16x16 operator, got {rho.shape}")
    # axes: (polpair, etpair, polpair', etpair')
    t = rho.reshape(4, 4, 4, 4)
    if keep == "pol":
        return np.einsum("ikjk->ij", t)
    return np.einsum("kikj->ij", t)


def bell_weights_of(rho: np.ndarray) -> np.ndarray:
    """Diagonal of a two-qubit state in the Bell basis (phi+, psi+, phi-, psi-)."""
    b = bell_basis()
    return np.real(np.einsum("ia,ij,ja->a", b.conj(), np.asarray(rho, dtype=complex), b))


def to_bell_basis(rho: np.ndarray) -> np.ndarray:
    """Matrix of a two-qubit operator in the Bell basis."""
    b = bell_basis()
    return dagger(b) @ np.asarray(rho, dtype=complex) @ b


def is_bell_diagonal(rho: np.ndarray, atol: float = ATOL) -> bool:
    m = to_bell_basis(rho)
    return bool(np.all(np.abs(m - np.diag(np.diag(m))) < atol))
