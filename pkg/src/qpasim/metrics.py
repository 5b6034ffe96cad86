"""QBERs, Devetak-Winter key rates, QPA gain and noise-map regions.

Rates are secret bits per detected pair. Basis-sifting factors are left out of
both the pre- and post-QPA rates since they cancel in the gain.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

from .core import HADAMARD, basis_ket, expectation, ket_to_dm, tensor
from .qpa import QpaOutcome, run_qpa
from .states import HyperState, NoiseParams, assemble_noisy_hyper

RATE_ATOL = 1e-12
"""Rates and gains at or below this count as zero."""


class Basis(str, Enum):
    Z = "Z"
    X = "X"


class Region(str, Enum):
    NONE = "NONE"
    I = "I"  # noqa: E741
    II = "II"
    III = "III"
    IV = "IV"


@dataclass(frozen=True)
class QberPair:
    e_z: float
    e_x: float

    def __post_init__(self):
        for name in ("e_z", "e_x"):
            v = getattr(self, name)
            # NaN marks an undefined post-QPA state (zero yield)
            if not (0.0 <= v <= 1.0 or math.isnan(v)):
                raise ValueError(f"{name} must lie in [0, 1], got {v!r}")


@dataclass(frozen=True)
class KeyRateReport:
    """Pre/post-QPA figures of merit for one noise setting."""

    pol: QberPair
    et: QberPair
    post_pol: QberPair
    yield_: float
    k_pol: float
    k_et: float
    k_noisy: float
    k_qpa: float
    gain: float
    region: Region

    def to_dict(self) -> dict:
        d = asdict(self)
        d["region"] = self.region.value
        return d


@lru_cache(maxsize=None)
def error_projector(basis: Basis) -> np.ndarray:
    """Projector onto the anticorrelated outcomes 01 and 10 of ``basis``."""
    local = np.eye(2, dtype=complex) if basis is Basis.Z else HADAMARD
    rot = tensor(local, local)
    proj = sum(ket_to_dm(rot @ basis_ket(idx, 4)) for idx in (0b01, 0b10))
    proj.setflags(write=False)
    return proj


def qber(rho: np.ndarray, basis: Basis | str) -> float:
    """Probability of anticorrelated outcomes when both photons measure ``basis``."""
    return expectation(rho, error_projector(Basis(basis)))


def qber_pair(rho: np.ndarray) -> QberPair:
    return QberPair(qber(rho, Basis.Z), qber(rho, Basis.X))


def binary_entropy(x: float) -> float:
    """``h2(x)`` in bits, with ``0 log 0 = 0``."""
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"binary entropy argument must lie in [0, 1], got {x!r}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def raw_rate(e: QberPair) -> float:
    """Unclamped ``1 - h2(e_z) - h2(e_x)``; its sign tells if key is possible."""
    return 1.0 - binary_entropy(e.e_z) - binary_entropy(e.e_x)


def devetak_winter(e: QberPair) -> float:
    return max(0.0, raw_rate(e))


def key_rate_noisy(pol: QberPair, et: QberPair) -> float:
    # energy-time key loses half its pairs in the Franson interferometer
    return devetak_winter(pol) + devetak_winter(et) / 2


def key_rate_qpa(yield_: float, post: QberPair | None) -> float:
    """Post-QPA rate ``y * k(post) / 2``; zero when nothing passes."""
    if post is None or yield_ <= 0.0:
        return 0.0
    if not 0.0 <= yield_ <= 1.0:
        raise ValueError(f"yield must lie in [0, 1], got {yield_!r}")
    return yield_ * devetak_winter(post) / 2


def gain(k_qpa: float, k_noisy: float) -> float:
    return k_qpa - k_noisy


def bisect_root(f, lo: float, hi: float, tol: float = 1e-10) -> float:
    """Bisection for a sign change of ``f`` on ``[lo, hi]``."""
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise ValueError("no sign change on the bracket")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fmid = f(mid)
        if fmid == 0.0:
            return mid
        if (fmid > 0) == (flo > 0):
            lo, flo = mid, fmid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@lru_cache(maxsize=None)
def threshold_pol() -> float:
    """QBER at which ``1 - 2 h2(e)`` vanishes (symmetric pol noise)."""
    return bisect_root(lambda e: 1 - 2 * binary_entropy(e), 0.0, 0.5)


@lru_cache(maxsize=None)
def threshold_et() -> float:
    """z-QBER at which ``1 - h2(q) - h2(q/2)`` vanishes (e-t noise, e_x = q/2)."""
    return bisect_root(lambda q: 1 - binary_entropy(q) - binary_entropy(q / 2), 0.0, 0.5)


def classify_region(k_pol: float, k_et: float, gain_: float) -> Region:
    """Noise-map region of a point with positive gain.

    I: no key before QPA; II: only polarisation had key; III: only
    energy-time had key; IV: both had key. Ties resolve to zero rate.
    """
    if gain_ <= RATE_ATOL:
        return Region.NONE
    pol_ok = k_pol > RATE_ATOL
    et_ok = k_et > RATE_ATOL
    if pol_ok and et_ok:
        return Region.IV
    if pol_ok:
        return Region.II
    if et_ok:
        return Region.III
    return Region.I


def build_report(pol: QberPair, et: QberPair, outcome: QpaOutcome | None = None,
                 *, yield_: float | None = None, post: QberPair | None = None) -> KeyRateReport:
    """Assemble a report from QBERs and either a QPA outcome or (yield, post QBERs)."""
    if outcome is not None:
        yield_ = outcome.yield_
        post = qber_pair(outcome.output_pol) if outcome.defined else None
    if yield_ is None:
        raise ValueError("need a QPA outcome or an explicit yield")
    k_pol = devetak_winter(pol)
    k_et = devetak_winter(et)
    k_noisy = k_pol + k_et / 2
    k_qpa = key_rate_qpa(yield_, post)
    g = gain(k_qpa, k_noisy)
    if post is None:
        post = QberPair(math.nan, math.nan)
    return KeyRateReport(
        pol=pol, et=et, post_pol=post, yield_=yield_,
        k_pol=k_pol, k_et=k_et, k_noisy=k_noisy, k_qpa=k_qpa, gain=g,
        region=classify_region(k_pol, k_et, g),
    )


def evaluate_state(state: HyperState, method: str = "algebra") -> KeyRateReport:
    """Full analytic pipeline for a factorized two-DOF state."""
    outcome = run_qpa(state, method=method)
    return build_report(qber_pair(state.pol), qber_pair(state.et), outcome)


def evaluate_point(params: NoiseParams, method: str = "algebra") -> KeyRateReport:
    return evaluate_state(assemble_noisy_hyper(params), method=method)
