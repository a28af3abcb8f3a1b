"""Heralded generation of two-mode mechanical cat states.

A click event {m, n} after the interferometer applies a measurement operator
built from pulsed-interaction phase factors e^{i mu X}; the {1, 0} event
heralds the two-mode cat state. Two independent computation paths are
provided: a truncated-Fock path and a closed-form moment path (the heralded
state is a superposition of displaced Gaussians, so every canonical moment
follows from a quadratic generating function).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import fock
from .algebra import Key, MomentTable, keys_up_to_order
from .errors import HeraldImpossible, ZeroOperator
from .fock import FockConfig, ModeOperator, TwoModeState


@dataclass(frozen=True)
class CoherentInput:
    """Weak coherent entangling pulse |alpha> in the bright port."""

    alpha: complex = 1.0


@dataclass(frozen=True)
class SinglePhotonInput:
    """Single-photon entangling pulse."""


PARALLEL = "parallel"
SERIES = "series"


@dataclass(frozen=True)
class ProtocolParams:
    """Entanglement-stage parameters: coupling, interferometer phase, input."""

    mu: float
    phi: float
    input: CoherentInput | SinglePhotonInput = CoherentInput(1.0)
    configuration: str = PARALLEL
    nbar_1: float = 0.0
    nbar_2: float = 0.0

    def __post_init__(self):
        if self.mu < 0:
            raise ValueError("mu must be >= 0")
        if self.nbar_1 < 0 or self.nbar_2 < 0:
            raise ValueError("nbar must be >= 0")
        if self.configuration not in (PARALLEL, SERIES):
            raise ValueError(f"unknown configuration {self.configuration!r}")


@dataclass(frozen=True)
class ClickOutcome:
    m: int
    n: int

    def __post_init__(self):
        if self.m < 0 or self.n < 0:
            raise ValueError("photon counts must be >= 0")


def coherence_factor(params: ProtocolParams) -> float:
    """lambda = exp(-mu^2 (1 + nbar_1 + nbar_2) / 2), the interference contrast."""
    return math.exp(-params.mu**2 * (1.0 + params.nbar_1 + params.nbar_2) / 2.0)


def prefactor_probability(params: ProtocolParams, outcome: ClickOutcome) -> float:
    """Probability-level prefactor of the click distribution.

    For the coherent input this is 2 |N_mn|^2 with the amplitude prefactor
    N_mn = e^{-|a|^2/2} (a/2)^{m+n} / sqrt(m! n!); the factor 2 makes the
    closed form match tr(Y rho Y^dag) exactly (checked against the Fock
    path and against the detector working point where the interferometer is
    transparent and the count statistics are Poissonian).
    """
    if outcome.m + outcome.n != 1:
        raise ValueError("closed-form prefactor implemented for {1,0}/{0,1} only")
    if isinstance(params.input, SinglePhotonInput):
        return 0.5
    a2 = abs(params.input.alpha) ** 2
    return math.exp(-a2) * a2 / 2.0


def heralding_probability(params: ProtocolParams, outcome: ClickOutcome = ClickOutcome(1, 0)) -> float:
    """Closed-form P_10 (or P_01 via phi -> phi + pi)."""
    lam = coherence_factor(params)
    pref = prefactor_probability(params, outcome)
    sign = 1.0 if outcome.m == 1 else -1.0
    return pref * (1.0 + sign * lam * math.cos(params.phi))


def amplitude_prefactor(params: ProtocolParams, outcome: ClickOutcome) -> complex:
    """N_mn of the measurement operator."""
    m, n = outcome.m, outcome.n
    if isinstance(params.input, SinglePhotonInput):
        if m + n != 1:
            raise ZeroOperator("single-photon input only produces {1,0} or {0,1}")
        return 0.5
    alpha = params.input.alpha
    return (
        math.exp(-abs(alpha) ** 2 / 2.0)
        * (alpha / 2.0) ** (m + n)
        / math.sqrt(math.factorial(m) * math.factorial(n))
    )


def measurement_operator(
    params: ProtocolParams, outcome: ClickOutcome, config: FockConfig
) -> ModeOperator:
    """Fock-space matrix of the click operator Y_mn."""
    m, n = outcome.m, outcome.n
    pref = amplitude_prefactor(params, outcome)  # raises ZeroOperator if needed
    beta = 1j * params.mu / math.sqrt(2.0)
    phase = np.exp(1j * params.phi)
    if params.configuration == PARALLEL:
        e1 = fock.displacement(1, beta, config).matrix
        e2 = fock.displacement(2, beta, config).matrix
        plus = e1 + phase * e2
        minus = e1 - phase * e2
    else:
        e12 = fock.displacement(1, beta, config).matrix @ fock.displacement(2, beta, config).matrix
        eye = np.eye(config.dim, dtype=complex)
        plus = e12 + phase * eye
        minus = e12 - phase * eye
    mat = pref * (
        np.linalg.matrix_power(plus, m) @ np.linalg.matrix_power(minus, n)
    )
    return ModeOperator(config, mat, f"Y_{m}{n}")


def herald(
    state_in: TwoModeState, params: ProtocolParams, outcome: ClickOutcome = ClickOutcome(1, 0)
) -> tuple[TwoModeState, float]:
    """Post-measurement state and probability for a click event."""
    op = measurement_operator(params, outcome, state_in.config)
    state, p = fock.apply_operator(op, state_in)
    if p < 1e-15:
        raise HeraldImpossible(f"click probability {p:.3g} for outcome {outcome}")
    return state.validate(), p


def heralded_state(params: ProtocolParams, config: FockConfig | None = None,
                   outcome: ClickOutcome = ClickOutcome(1, 0)) -> tuple[TwoModeState, float]:
    """Thermal input + herald, with the default cutoff heuristic."""
    if config is None:
        config = fock.default_config(params.nbar_1, params.nbar_2, params.mu)
    rho_in = fock.thermal_state(params.nbar_1, params.nbar_2, config)
    return herald(rho_in, params, outcome)


def pure_cat_state(mu: float, phi: float, configuration: str, config: FockConfig) -> TwoModeState:
    """Ground-state-limit cat state, built from analytic coherent amplitudes."""
    beta = 1j * mu / math.sqrt(2.0)
    c1 = fock.coherent_vector(beta, config.cutoff_1)
    c2 = fock.coherent_vector(beta, config.cutoff_2)
    v1 = np.zeros(config.cutoff_1, dtype=complex)
    v1[0] = 1.0
    v2 = np.zeros(config.cutoff_2, dtype=complex)
    v2[0] = 1.0
    if configuration == PARALLEL:
        psi = np.kron(c1, v2) + np.exp(1j * phi) * np.kron(v1, c2)
    elif configuration == SERIES:
        psi = np.kron(c1, c2) + np.exp(1j * phi) * np.kron(v1, v2)
    else:
        raise ValueError(f"unknown configuration {configuration!r}")
    norm_sq = 2.0 * (1.0 + math.exp(-mu**2 / 2.0) * math.cos(phi))
    if norm_sq < 1e-15:
        raise HeraldImpossible("cat state norm vanishes (dark fringe at mu -> 0)")
    truncation_loss = abs(np.vdot(psi, psi) - norm_sq)
    if truncation_loss > 1e-9 * norm_sq:
        raise fock.CutoffTooSmall(f"cat-state truncation loss {truncation_loss:.3g}")
    return fock.state_from_vector(psi / math.sqrt(norm_sq), config, check=False)


# ---------------------------------------------------------------------------
# closed-form moment path
#
# The heralded (unnormalized) state is sum_t g_t e^{i u_t . R} rho_th h.c.
# with real 4-vectors u_t over R = (X1, P1, X2, P2). Sandwich expectations
# <e^{-i u_j . R} X1^p P1^q X2^r P2^s e^{i u_k . R}> on a thermal state come
# from a generating function exp(const + beta.y + y^T H y / 2), so each
# canonical moment obeys the Gaussian moment recursion with complex mean and
# covariance.

_J = np.zeros((4, 4), dtype=complex)
_J[0, 1], _J[1, 0] = 1j, -1j  # [X1, P1] = i
_J[2, 3], _J[3, 2] = 1j, -1j
_K = np.zeros((4, 4), dtype=complex)
_K[0, 1] = _K[1, 0] = _K[2, 3] = _K[3, 2] = 1.0


class _SandwichMoments:
    """Moments of one sandwich term (u_j, u_k) on a product thermal state."""

    def __init__(self, u_j: np.ndarray, u_k: np.ndarray, v1: float, v2: float):
        sigma_s = np.diag([v1, v1, v2, v2]).astype(complex)
        du = u_k - u_j
        self.const = complex(-0.5 * du @ sigma_s @ du + 0.5 * u_j @ _J @ u_k)
        self.beta = -sigma_s @ du - 0.5 * _J @ (u_j + u_k)
        self.h = -sigma_s - 0.5j * _K
        self.scale = np.exp(self.const)
        self._memo: dict[tuple[int, ...], complex] = {(): 1.0 + 0.0j}

    def _raw(self, idx: tuple[int, ...]) -> complex:
        if idx in self._memo:
            return self._memo[idx]
        i, rest = idx[0], idx[1:]
        val = self.beta[i] * self._raw(rest)
        for j in range(len(rest)):
            val += self.h[i, rest[j]] * self._raw(rest[:j] + rest[j + 1 :])
        self._memo[idx] = val
        return val

    def moment(self, key: Key) -> complex:
        idx = sum(((i,) * e for i, e in enumerate(key)), ())
        return (-1j) ** len(idx) * self.scale * self._raw(idx)


def _exponent_vectors(params: ProtocolParams, outcome: ClickOutcome):
    """(gamma_t, u_t) terms of the {1,0}/{0,1} measurement operator."""
    if outcome.m + outcome.n != 1:
        raise ValueError("closed-form moments implemented for {1,0}/{0,1} only")
    sign = 1.0 if outcome.m == 1 else -1.0
    mu = params.mu
    phase = sign * np.exp(1j * params.phi)
    if params.configuration == PARALLEL:
        return [
            (1.0 + 0.0j, np.array([mu, 0.0, 0.0, 0.0])),
            (phase, np.array([0.0, 0.0, mu, 0.0])),
        ]
    return [
        (1.0 + 0.0j, np.array([mu, 0.0, mu, 0.0])),
        (phase, np.array([0.0, 0.0, 0.0, 0.0])),
    ]


def heralded_moment_table(
    params: ProtocolParams,
    order_max: int,
    outcome: ClickOutcome = ClickOutcome(1, 0),
) -> MomentTable:
    """Exact canonical moments of the heralded state, valid for any nbar.

    Independent of the input-light choice: the measurement operator shape
    cancels in the normalized state.
    """
    v1 = params.nbar_1 + 0.5
    v2 = params.nbar_2 + 0.5
    terms = _exponent_vectors(params, outcome)
    sandwiches = []
    for g_j, u_j in terms:
        for g_k, u_k in terms:
            sandwiches.append((np.conj(g_j) * g_k, _SandwichMoments(u_j, u_k, v1, v2)))
    norm = complex(sum(w * s.scale for w, s in sandwiches))
    if abs(norm) < 1e-15:
        raise HeraldImpossible("heralded-state normalization vanishes")
    entries: dict[Key, complex] = {}
    for key in keys_up_to_order(order_max):
        entries[key] = complex(sum(w * s.moment(key) for w, s in sandwiches)) / norm
    return MomentTable(entries, order_max)


@lru_cache(maxsize=None)
def _cached_table(mu, phi, nbar_1, nbar_2, configuration, order_max, m, n):
    params = ProtocolParams(mu=mu, phi=phi, configuration=configuration,
                            nbar_1=nbar_1, nbar_2=nbar_2)
    return heralded_moment_table(params, order_max, ClickOutcome(m, n))


def heralded_moment_table_cached(params: ProtocolParams, order_max: int,
                                 outcome: ClickOutcome = ClickOutcome(1, 0)) -> MomentTable:
    return _cached_table(params.mu, params.phi, params.nbar_1, params.nbar_2,
                         params.configuration, order_max, outcome.m, outcome.n)


def thermal_moment_table(nbar_1: float, nbar_2: float, order_max: int) -> MomentTable:
    """Moments of the bare product thermal state (mu = 0 limit)."""
    s = _SandwichMoments(np.zeros(4), np.zeros(4), nbar_1 + 0.5, nbar_2 + 0.5)
    entries = {key: s.moment(key) for key in keys_up_to_order(order_max)}
    return MomentTable(entries, order_max)
