"""Optical loss, detector inefficiency, and dark counts in the heralding stage.

Closed-form true-positive fractions F for number-resolving and non-resolving
detectors, an amplitude optimizer, and an independent Fock-space oracle that
brute-forces the loss-channel outcome probabilities P_mnkl.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import fock
from .errors import DegenerateHerald, TruncationTooSmall
from .fock import FockConfig
from .herald import CoherentInput, ProtocolParams, heralding_probability

LOSS_TRUNCATION = 8
L_SUM_TERM_TOL = 1e-12
L_SUM_M_CAP = 60


@dataclass(frozen=True)
class DetectorParams:
    """Intensity transmission, dark-count probability per window, detector type.

    `alpha` optionally overrides the protocol's entangling-pulse amplitude
    (used by the optimizer); None keeps the protocol value.
    """

    eta: float
    dark_prob: float
    resolving: bool = True
    alpha: complex | None = None

    def __post_init__(self):
        if not 0.0 < self.eta <= 1.0:
            raise ValueError("eta must be in (0, 1]")
        if not 0.0 <= self.dark_prob < 1.0:
            raise ValueError("dark_prob must be in [0, 1)")


def dark_prob_from_rate(rate_hz: float, window_s: float) -> float:
    """Probability of a single dark count in one detection window."""
    return rate_hz * window_s


def _with_alpha(protocol: ProtocolParams, det: DetectorParams) -> ProtocolParams:
    if not isinstance(protocol.input, CoherentInput):
        raise ValueError("detector formulas require a coherent input")
    if det.alpha is None:
        return protocol
    return ProtocolParams(
        mu=protocol.mu,
        phi=protocol.phi,
        input=CoherentInput(det.alpha),
        configuration=protocol.configuration,
        nbar_1=protocol.nbar_1,
        nbar_2=protocol.nbar_2,
    )


def true_positive_fraction_resolving(det: DetectorParams, protocol: ProtocolParams) -> float:
    """F = [e^{(1-eta)|a|^2} + e^{-eta|a|^2} D / (eta P10 (1-D))]^-1."""
    protocol = _with_alpha(protocol, det)
    a2 = abs(protocol.input.alpha) ** 2
    p10 = heralding_probability(protocol)
    if p10 < 1e-300:
        raise DegenerateHerald("P10 vanishes; F undefined")
    inv = math.exp((1.0 - det.eta) * a2) + math.exp(-det.eta * a2) * det.dark_prob / (
        det.eta * p10 * (1.0 - det.dark_prob)
    )
    return 1.0 / inv


def click_sum(eta: float, a2: float, mu: float, phi: float, nbar_1: float, nbar_2: float) -> float:
    """L = sum_m sum_k C(2m,k) (eta|a|^2/4)^m / m! e^{-i(m-k)phi} lam^{(m-k)^2}.

    Truncated once a whole m-term falls below the tolerance; m is capped
    because the entangling pulse is weak.
    """
    lam = math.exp(-mu * mu * (1.0 + nbar_1 + nbar_2) / 2.0)
    base = eta * a2 / 4.0
    total = 0.0
    for m in range(1, L_SUM_M_CAP + 1):
        weight = base**m / math.factorial(m)
        term = sum(
            math.comb(2 * m, k) * (np.exp(-1j * (m - k) * phi) * lam ** ((m - k) ** 2)).real
            for k in range(2 * m + 1)
        )
        contrib = weight * term
        total += contrib
        if abs(contrib) < L_SUM_TERM_TOL:
            break
    return total


def true_positive_fraction_nonresolving(det: DetectorParams, protocol: ProtocolParams) -> float:
    """F = [e^{-eta|a|^2} (L + D) / (eta P10)]^-1 for non-resolving detectors."""
    protocol = _with_alpha(protocol, det)
    a2 = abs(protocol.input.alpha) ** 2
    p10 = heralding_probability(protocol)
    if p10 < 1e-300:
        raise DegenerateHerald("P10 vanishes; F undefined")
    lsum = click_sum(det.eta, a2, protocol.mu, protocol.phi, protocol.nbar_1, protocol.nbar_2)
    inv = math.exp(-det.eta * a2) * (lsum + det.dark_prob) / (det.eta * p10)
    return 1.0 / inv


def true_positive_fraction(det: DetectorParams, protocol: ProtocolParams) -> float:
    if det.resolving:
        return true_positive_fraction_resolving(det, protocol)
    return true_positive_fraction_nonresolving(det, protocol)


@dataclass(frozen=True)
class AlphaOptimum:
    alpha: float
    fraction: float
    flat_objective: bool


def optimize_alpha(
    det: DetectorParams,
    protocol: ProtocolParams,
    lo: float = 1e-4,
    hi: float = 4.0,
    tol: float = 1e-6,
) -> AlphaOptimum:
    """Golden-section maximum of F over real alpha in (0, hi]."""

    def f(alpha: float) -> float:
        return true_positive_fraction(DetectorParams(det.eta, det.dark_prob, det.resolving, alpha),
                                      protocol)

    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    probes = [f(lo), fc, fd, f(hi)]
    if max(probes) - min(probes) < 1e-12:
        return AlphaOptimum(alpha=hi, fraction=f(hi), flat_objective=True)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    alpha = 0.5 * (a + b)
    return AlphaOptimum(alpha=alpha, fraction=f(alpha), flat_objective=False)


# ---------------------------------------------------------------------------
# Fock-space loss oracle


@dataclass(frozen=True)
class LossOutcome:
    """m, n photons detected; k, l photons lost from the two arms."""

    m: int
    n: int
    k: int
    l: int  # noqa: E741 - conventional loss-index name

    @property
    def total(self) -> int:
        return self.m + self.n + self.k + self.l


@lru_cache(maxsize=8)
def _loss_matrices(mu: float, phi: float, config: FockConfig, max_power: int):
    beta = 1j * mu / math.sqrt(2.0)
    e1 = fock.displacement(1, beta, config).matrix
    e2 = fock.displacement(2, beta, config).matrix
    phase = np.exp(1j * phi)
    plus = e1 + phase * e2
    minus = e1 - phase * e2
    def powers(m):
        out = [np.eye(config.dim, dtype=complex)]
        for _ in range(max_power):
            out.append(out[-1] @ m)
        return out
    return powers(plus), powers(minus), powers(e1), powers(e2)


class LossOracle:
    """Brute-force P_mnkl evaluator with cached operator powers and state."""

    def __init__(
        self,
        det: DetectorParams,
        protocol: ProtocolParams,
        config: FockConfig,
        truncation: int = LOSS_TRUNCATION,
    ):
        self.det = det
        self.protocol = _with_alpha(protocol, det)
        self.config = config
        self.truncation = truncation
        plus_p, minus_p, e1_p, e2_p = _loss_matrices(
            self.protocol.mu, self.protocol.phi, config, truncation
        )
        self._plus, self._minus = plus_p, minus_p
        self._e1, self._e2 = e1_p, e2_p
        self._pops = np.kron(
            fock.thermal_populations(self.protocol.nbar_1, config.cutoff_1),
            fock.thermal_populations(self.protocol.nbar_2, config.cutoff_2),
        )
        self._mn_cache: dict[tuple[int, int], np.ndarray] = {}
        self._kl_cache: dict[tuple[int, int], np.ndarray] = {}

    def probability(self, outcome: LossOutcome) -> float:
        """P_mnkl = tr(Y_mnkl rho Y_mnkl^dag)."""
        if outcome.total > self.truncation:
            raise TruncationTooSmall(
                f"outcome {outcome} beyond truncation {self.truncation}"
            )
        m, n, k, l = outcome.m, outcome.n, outcome.k, outcome.l
        alpha = self.protocol.input.alpha
        eta = self.det.eta
        pref = (
            math.exp(-abs(alpha) ** 2 / 2.0)
            * (math.sqrt(eta) * abs(alpha) / 2.0) ** (m + n)
            * (math.sqrt((1.0 - eta) / 2.0) * abs(alpha)) ** (k + l)
            / math.sqrt(
                math.factorial(m) * math.factorial(n) * math.factorial(k) * math.factorial(l)
            )
        )
        if (m, n) not in self._mn_cache:
            self._mn_cache[(m, n)] = self._plus[m] @ self._minus[n]
        if (k, l) not in self._kl_cache:
            self._kl_cache[(k, l)] = self._e1[k] @ self._e2[l]
        op = self._mn_cache[(m, n)] @ self._kl_cache[(k, l)]
        # rho is diagonal: the trace is a population-weighted column norm
        col_norms = np.einsum("ij,ij->j", op.conj(), op).real
        return float(pref * pref * (col_norms @ self._pops))


def loss_outcome_probability(
    det: DetectorParams,
    protocol: ProtocolParams,
    outcome: LossOutcome,
    config: FockConfig,
    truncation: int = LOSS_TRUNCATION,
) -> float:
    return LossOracle(det, protocol, config, truncation).probability(outcome)


@dataclass(frozen=True)
class OracleFractions:
    resolving: float
    nonresolving: float
    probability_covered: float


def fractions_from_oracle(
    det: DetectorParams,
    protocol: ProtocolParams,
    config: FockConfig,
    truncation: int = LOSS_TRUNCATION,
) -> OracleFractions:
    """Assemble both F values from brute-force P_mnkl sums (n = 0 clicks)."""
    oracle = LossOracle(det, protocol, config, truncation)
    dark = det.dark_prob
    p = {}
    for m in range(truncation + 1):
        for k in range(truncation + 1 - m):
            for l in range(truncation + 1 - m - k):
                p[(m, k, l)] = oracle.probability(LossOutcome(m, 0, k, l))
    p1000 = p[(1, 0, 0)]
    sum_10kl = sum(v for (m, k, l), v in p.items() if m == 1)
    sum_00kl = sum(v for (m, k, l), v in p.items() if m == 0)
    sum_m0kl = sum(v for (m, k, l), v in p.items() if m >= 1)
    res = (1.0 - dark) * p1000 / ((1.0 - dark) * sum_10kl + dark * sum_00kl)
    nonres = p1000 / (sum_m0kl + dark * sum_00kl)
    covered = total_probability_covered(det, protocol, config, truncation, oracle)
    return OracleFractions(res, nonres, covered)


def total_probability_covered(
    det: DetectorParams,
    protocol: ProtocolParams,
    config: FockConfig,
    truncation: int = LOSS_TRUNCATION,
    oracle: LossOracle | None = None,
) -> float:
    """sum over all {m,n,k,l} with total <= truncation; approaches 1."""
    if oracle is None:
        oracle = LossOracle(det, protocol, config, truncation)
    total = 0.0
    for m in range(truncation + 1):
        for n in range(truncation + 1 - m):
            for k in range(truncation + 1 - m - n):
                for l in range(truncation + 1 - m - n - k):
                    total += oracle.probability(LossOutcome(m, n, k, l))
    return total
