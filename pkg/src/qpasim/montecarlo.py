"""Finite-statistics sampling of coincidence counts.

Random streams follow a counter scheme: every independent sampling task gets
its own generator seeded by ``SeedSequence(seed, spawn_key=(*point_key, task))``
where ``point_key`` identifies the grid point and ``task`` is one of the
``TASK_*`` constants below. Results therefore do not depend on the order in
which tasks are run or on how they are spread over workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from statistics import NormalDist

import numpy as np

from .core import HADAMARD, basis_ket, ket_to_dm, tensor
from .metrics import Basis, KeyRateReport, QberPair, build_report
from .qpa import run_qpa
from .states import NoiseParams, assemble_noisy_hyper

OUTCOMES = ("00", "01", "10", "11")

TASK_POL_Z, TASK_POL_X, TASK_ET_Z, TASK_ET_X, TASK_QPA_Z, TASK_QPA_X = range(6)


@dataclass(frozen=True)
class McConfig:
    """Monte Carlo settings.

    ``n_pairs`` pairs go into every (DOF, basis) measurement and into each of
    the two post-QPA basis runs.
    """

    n_pairs: int = 100_000
    seed: int = 0
    apply_franson_loss: bool = False

    def __post_init__(self):
        if int(self.n_pairs) != self.n_pairs or self.n_pairs < 1:
            raise ValueError(f"n_pairs must be a positive integer, got {self.n_pairs!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must fit in 64 unsigned bits, got {self.seed!r}")


@dataclass(frozen=True)
class CountRecord:
    basis: Basis
    counts: tuple[int, int, int, int]

    @property
    def n_total(self) -> int:
        return int(sum(self.counts))

    @property
    def n_err(self) -> int:
        return int(self.counts[1] + self.counts[2])


@dataclass(frozen=True)
class Estimate:
    """Binomial proportion with a Wilson score interval."""

    value: float
    lower: float
    upper: float
    n: int

    def contains(self, x: float) -> bool:
        return self.lower <= x <= self.upper


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for task ``key`` under master ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))))


def outcome_probabilities(rho: np.ndarray, basis: Basis | str) -> np.ndarray:
    """Born probabilities for outcomes 00, 01, 10, 11 in the given basis."""
    basis = Basis(basis)
    local = np.eye(2, dtype=complex) if basis is Basis.Z else HADAMARD
    rot = tensor(local, local)
    probs = np.array([
        np.real(np.trace(ket_to_dm(rot @ basis_ket(i, 4)) @ rho)) for i in range(4)
    ])
    probs = np.clip(probs, 0.0, None)
    return probs / probs.sum()


def sample_counts(rho: np.ndarray, basis: Basis | str, n: int, rng: np.random.Generator) -> CountRecord:
    """Multinomial draw of ``n`` joint outcomes of a two-qubit state."""
    basis = Basis(basis)
    counts = rng.multinomial(int(n), outcome_probabilities(rho, basis))
    return CountRecord(basis, tuple(int(c) for c in counts))


def wilson_interval(successes: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    if n <= 0:
        raise ValueError("Wilson interval needs at least one trial")
    z = NormalDist().inv_cdf(0.5 + confidence / 2)
    phat = successes / n
    denom = 1 + z * z / n
    centre = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def estimate_proportion(successes: int, n: int, confidence: float = 0.95) -> Estimate:
    lo, hi = wilson_interval(successes, n, confidence)
    return Estimate(successes / n, lo, hi, n)


def estimate_qber(rec: CountRecord, confidence: float = 0.95) -> Estimate:
    """QBER ``N_err / N`` with a Wilson score interval."""
    if rec.n_total == 0:
        raise ValueError("cannot estimate a QBER from zero counts")
    return estimate_proportion(rec.n_err, rec.n_total, confidence)


@dataclass(frozen=True)
class McResult:
    """Sampled counterpart of :class:`KeyRateReport` with its raw material."""

    report: KeyRateReport
    intervals: dict[str, Estimate] = field(default_factory=dict)
    counts: dict[str, CountRecord] = field(default_factory=dict)
    c_pass: int = 0
    c_tot: int = 0


def _qber_or_blind(rec: CountRecord) -> Estimate:
    # nothing survived: no information, treat as a fully random QBER
    if rec.n_total == 0:
        return Estimate(0.5, 0.0, 1.0, 0)
    return estimate_qber(rec)


def simulate_experiment(params: NoiseParams, cfg: McConfig, point_key: tuple[int, ...] = ()) -> McResult:
    """Sample all counts for one noise setting and derive the key-rate report.

    The estimated QBERs and yield are plugged into the same rate formulas as the
    analytic path. With ``apply_franson_loss`` each energy-time and post-QPA pair
    survives with probability 1/2 before it is counted; only sample sizes change.
    """
    state = assemble_noisy_hyper(params)
    outcome = run_qpa(state)
    n = int(cfg.n_pairs)

    def survivors(rng):
        return int(rng.binomial(n, 0.5)) if cfg.apply_franson_loss else n

    counts: dict[str, CountRecord] = {}
    estimates: dict[str, Estimate] = {}
    for dof, rho, tasks, lossy in (
        ("pol", state.pol, (TASK_POL_Z, TASK_POL_X), False),
        ("et", state.et, (TASK_ET_Z, TASK_ET_X), True),
    ):
        for basis, task in zip((Basis.Z, Basis.X), tasks):
            rng = stream(cfg.seed, *point_key, task)
            m = survivors(rng) if lossy else n
            rec = sample_counts(rho, basis, m, rng)
            name = f"e_{basis.value.lower()}_{dof}"
            counts[name] = rec
            estimates[name] = _qber_or_blind(rec)

    c_pass = c_tot = 0
    post_est: dict[Basis, Estimate] = {}
    branch = np.array(outcome.branch_probabilities, dtype=float)
    fail = max(0.0, 1.0 - branch.sum())
    for basis, task in ((Basis.Z, TASK_QPA_Z), (Basis.X, TASK_QPA_X)):
        rng = stream(cfg.seed, *point_key, task)
        m = survivors(rng)
        pattern = rng.multinomial(m, np.append(branch, fail) / (branch.sum() + fail))
        passed = int(pattern[0] + pattern[1])
        c_pass += passed
        c_tot += m
        if outcome.defined and passed > 0:
            rec = sample_counts(outcome.output_pol, basis, passed, rng)
        else:
            rec = CountRecord(basis, (0, 0, 0, 0))
        name = f"e_{basis.value.lower()}_post"
        counts[name] = rec
        post_est[basis] = estimates[name] = _qber_or_blind(rec)

    if c_tot > 0:
        estimates["yield"] = estimate_proportion(c_pass, c_tot)
    yield_hat = c_pass / c_tot if c_tot else 0.0

    pol = QberPair(estimates["e_z_pol"].value, estimates["e_x_pol"].value)
    et = QberPair(estimates["e_z_et"].value, estimates["e_x_et"].value)
    post = None
    if c_pass > 0 and post_est[Basis.Z].n > 0 and post_est[Basis.X].n > 0:
        post = QberPair(post_est[Basis.Z].value, post_est[Basis.X].value)
    report = build_report(pol, et, yield_=yield_hat, post=post)
    return McResult(report=report, intervals=estimates, counts=counts, c_pass=c_pass, c_tot=c_tot)
