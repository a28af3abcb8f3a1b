"""Pulsed homodyne verification pipeline: port statistics, finite-sample
datasets, and iterative order-by-order recovery of mechanical moments.

A pathway sends verification pulses into up to four slots (mode 1 or 2,
read-out time 0 or the damped quarter period), so the slots carry the
letters X1, P1, X2, P2. Each beam-splitter port measures a linear form over
the slot signals with phase coefficients e^{i zeta}; unused slots still
inject vacuum noise, so every port carries one unit of input noise. Sample
moments <P^d> are synthesized semi-analytically with the exact estimator
covariance, and the recovery solves weighted least-squares systems for the
symmetrized sums of each order, unlocking individual moments through the
canonical commutation relations.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import sqrtm

from .algebra import (
    Key,
    MomentTable,
    canonicalize,
    keys_up_to_order,
    symmetrized_expand,
)
from .errors import IllConditioned, MissingMoment, RankDeficient
from . import fock
from .fock import TwoModeState

SLOTS = ("m1_t0", "m1_tp", "m2_t0", "m2_tp")
SLOT_LETTER = {"m1_t0": "X1", "m1_tp": "P1", "m2_t0": "X2", "m2_tp": "P2"}
PORTS = ("A", "B", "C", "D")

COND_LIMIT = 1e8
RANK_RESIDUAL = 0.25


@dataclass(frozen=True)
class PhaseSet:
    """Controllable phases zeta_1..zeta_4 of one verification run."""

    zeta_1: float = 0.0
    zeta_2: float = 0.0
    zeta_3: float = 0.0
    zeta_4: float = 0.0


@dataclass(frozen=True)
class Pathway:
    """Which slots carry pulses, the phase set, the heralding phase, and chi."""

    pulses: frozenset[str] = frozenset(SLOTS)
    phases: PhaseSet = PhaseSet()
    chi: float = 1.0
    phi: float = math.pi

    def __post_init__(self):
        if not self.pulses:
            raise ValueError("pathway needs at least one pulse")
        for s in self.pulses:
            if s not in SLOTS:
                raise ValueError(f"unknown slot {s!r}")
        if self.chi <= 0:
            raise ValueError("chi must be positive")


def port_base_coefficients(phases: PhaseSet, phi: float, port: str) -> np.ndarray:
    """Transfer coefficients of the four slots into one output port."""
    z1, z2, z3, z4 = phases.zeta_1, phases.zeta_2, phases.zeta_3, phases.zeta_4
    e = lambda x: np.exp(1j * x)  # noqa: E731
    if port == "A":
        c = [e(z3), e(z3 + z1), e(phi), e(phi + z2)]
    elif port == "B":
        c = [e(z3), e(z3 + z1), -e(phi), -e(phi + z2)]
    elif port == "C":
        c = [1.0, -e(z1), -e(phi + z4), -e(phi + z4 + z2)]
    elif port == "D":
        c = [1.0, -e(z1), e(phi + z4), -e(phi + z4 + z2)]
    else:
        raise ValueError(f"unknown port {port!r}")
    return 0.5 * np.asarray(c, dtype=complex)


@dataclass(frozen=True)
class PortForm:
    """Signal coefficients per slot letter and the input-noise linear form."""

    signal: dict[str, complex]  # letter -> coefficient (chi included)
    noise_coeffs: np.ndarray  # per slot, vacuum variance 1/2 each

    @property
    def noise_variance(self) -> complex:
        """Formal second moment of the noise form (complex for complex zetas)."""
        return complex(np.sum(self.noise_coeffs**2) / 2.0)


def port_observable(pathway: Pathway, port: str) -> PortForm:
    base = port_base_coefficients(pathway.phases, pathway.phi, port)
    signal = {
        SLOT_LETTER[s]: pathway.chi * base[i]
        for i, s in enumerate(SLOTS)
        if s in pathway.pulses
    }
    return PortForm(signal=signal, noise_coeffs=base)


def _double_factorial(m: int) -> int:
    return math.prod(range(m, 0, -2)) if m > 0 else 1


def _noise_moment(variance: complex, m: int) -> complex:
    if m % 2 == 1:
        return 0.0
    return _double_factorial(m - 1) * variance ** (m // 2)


class _SumCache:
    """Symmetrized sums of a moment table (cache lives on the table)."""

    def __init__(self, table: MomentTable):
        self.table = table

    def __call__(self, key: Key) -> complex:
        return self.table.symmetrized_sum(*key)


def _mech_coefficient(signal: dict[str, complex], key: Key, order: int) -> complex:
    """Coefficient of S(key) in <(sum_s kappa_s L_s)^order>."""
    p, q, r, s = key
    c = math.comb(order, p + q)
    for letter, e in zip(("X1", "P1", "X2", "P2"), key):
        if e:
            if letter not in signal:
                return 0.0
            c = c * signal[letter] ** e
    return c


def _mech_moment(signal: dict[str, complex], sums: _SumCache, order: int) -> complex:
    if order == 0:
        return 1.0
    total = 0.0 + 0.0j
    for key in keys_up_to_order(order):
        if sum(key) != order:
            continue
        c = _mech_coefficient(signal, key, order)
        if c != 0.0:
            total += c * sums(key)
    return total


def _port_moments_from_sums(form: PortForm, sums: _SumCache, d_max: int) -> np.ndarray:
    nu = form.noise_variance
    out = np.empty(d_max, dtype=complex)
    for d in range(1, d_max + 1):
        out[d - 1] = sum(
            math.comb(d, j) * _mech_moment(form.signal, sums, j) * _noise_moment(nu, d - j)
            for j in range(d + 1)
        )
    return out


def exact_port_moments(
    pathway: Pathway, port: str, table: MomentTable, d_max: int
) -> np.ndarray:
    """<P_port^d> for d = 1..d_max from the mechanical moment table."""
    if table.order_max < d_max:
        raise MissingMoment(f"table order {table.order_max} < requested {d_max}")
    return _port_moments_from_sums(port_observable(pathway, port), _SumCache(table), d_max)


# ---------------------------------------------------------------------------
# dataset synthesis


@dataclass
class HomodyneDataset:
    """Sample moments <P^d> (d = 1..d_max) of one pathway/port, with errors."""

    pathway: Pathway
    port: str
    n_samples: int | None
    sample_moments: np.ndarray
    standard_errors: np.ndarray
    seed: int | tuple | None = None

    @property
    def d_max(self) -> int:
        return len(self.sample_moments)

    def to_json(self) -> str:
        ps = self.pathway.phases
        payload = {
            "pathway": {
                "pulses": sorted(self.pathway.pulses),
                "phases": [ps.zeta_1, ps.zeta_2, ps.zeta_3, ps.zeta_4],
                "chi": self.pathway.chi,
                "phi": self.pathway.phi,
            },
            "port": self.port,
            "n_samples": self.n_samples,
            "seed": list(self.seed) if isinstance(self.seed, tuple) else self.seed,
            "sample_moments": [[m.real, m.imag] for m in self.sample_moments],
            "standard_errors": list(map(float, self.standard_errors)),
        }
        return json.dumps(payload, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "HomodyneDataset":
        payload = json.loads(text)
        p = payload["pathway"]
        pathway = Pathway(
            pulses=frozenset(p["pulses"]),
            phases=PhaseSet(*p["phases"]),
            chi=p["chi"],
            phi=p["phi"],
        )
        seed = payload.get("seed")
        return cls(
            pathway,
            payload["port"],
            payload["n_samples"],
            np.array([complex(re, im) for re, im in payload["sample_moments"]]),
            np.array(payload["standard_errors"]),
            tuple(seed) if isinstance(seed, list) else seed,
        )


def _factor_complex_symmetric(c: np.ndarray) -> np.ndarray:
    """B with B B^T = C for complex symmetric C (principal square root)."""
    scale = np.max(np.abs(c))
    if scale == 0.0:
        return np.zeros_like(c)
    b = sqrtm(c)
    if np.max(np.abs(b @ b - c)) > 1e-8 * scale:
        # regularize a near-singular matrix and retry
        n = c.shape[0]
        b = sqrtm(c + 1e-12 * scale * np.eye(n))
    return np.asarray(b, dtype=complex)


def synthesize_dataset(
    pathway: Pathway,
    port: str,
    table: MomentTable,
    n_samples: int | None,
    seed: int | None = None,
    d_max: int = 4,
) -> HomodyneDataset:
    """Semi-analytic dataset: exact moments plus correlated estimation noise.

    The perturbation covariance is the exact sampling covariance
    Cov(P^d, P^e) = (<P^{d+e}> - <P^d><P^e>) / N, so the synthesized
    estimates carry the statistics the direct-sum estimator would produce.
    n_samples=None yields the noiseless (infinite-N) dataset.
    """
    if table.order_max < 2 * d_max:
        raise MissingMoment(
            f"need moments to order {2 * d_max} for sampling covariance, "
            f"table has {table.order_max}"
        )
    exact = exact_port_moments(pathway, port, table, 2 * d_max)
    moments = exact[:d_max].copy()
    cov = np.empty((d_max, d_max), dtype=complex)
    for d in range(1, d_max + 1):
        for e_ in range(1, d_max + 1):
            cov[d - 1, e_ - 1] = exact[d + e_ - 1] - exact[d - 1] * exact[e_ - 1]
    if n_samples is None:
        return HomodyneDataset(pathway, port, None, moments, np.zeros(d_max), seed)
    cov = cov / n_samples
    ses = np.sqrt(np.abs(np.diag(cov)))
    rng = np.random.default_rng(seed)
    b = _factor_complex_symmetric(cov)
    moments = moments + b @ rng.standard_normal(d_max)
    return HomodyneDataset(pathway, port, n_samples, moments, ses, seed)


def sample_port_shots(
    pathway: Pathway,
    port: str,
    state: TwoModeState,
    n_samples: int,
    seed: int | None = None,
) -> np.ndarray:
    """Per-shot homodyne record for real-coefficient pathways (closed system).

    The port observable is Hermitian only when every phase coefficient is
    real (zetas and phi multiples of pi); samples are drawn from its exact
    spectral measure plus the Gaussian input noise of the port.
    """
    form = port_observable(pathway, port)
    coeffs = list(form.signal.values()) + list(form.noise_coeffs)
    if max(abs(np.imag(c)) for c in coeffs) > 1e-12:
        raise ValueError("per-shot sampling requires a real-coefficient pathway")
    cfg = state.config
    mats = {
        "X1": fock.x_operator(1, cfg).matrix,
        "P1": fock.p_operator(1, cfg).matrix,
        "X2": fock.x_operator(2, cfg).matrix,
        "P2": fock.p_operator(2, cfg).matrix,
    }
    y = sum(np.real(c) * mats[letter] for letter, c in form.signal.items())
    w, v = np.linalg.eigh(y)
    probs = np.real(np.einsum("ij,jk,ki->i", v.conj().T, state.rho, v))
    probs = np.clip(probs, 0.0, None)
    probs = probs / probs.sum()
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(w), size=n_samples, p=probs)
    noise_sigma = math.sqrt(max(float(np.real(form.noise_variance)), 0.0))
    return w[idx] + rng.normal(0.0, noise_sigma, size=n_samples)


# ---------------------------------------------------------------------------
# phase-set selection and recovery


def _order_keys(order: int) -> list[Key]:
    return [k for k in keys_up_to_order(order) if sum(k) == order]


def _coefficient_row(pathway: Pathway, port: str, keys: list[Key], order: int) -> np.ndarray:
    form = port_observable(pathway, port)
    return np.array([_mech_coefficient(form.signal, k, order) for k in keys], dtype=complex)


def default_phase_sets(
    target_order: int,
    phi: float = math.pi,
    chi: float = 1.0,
    margin: int = 3,
) -> list[PhaseSet]:
    """Deterministic spanning family of phase sets for the full pathway.

    Candidates run over a pi/4 grid (the pi/2 grid cannot separate, e.g.,
    the X1^4 and P1^4 sums: their coefficients coincide on every port for
    all fourth-root phases). Greedy selection keeps a set if one of its
    port rows adds a sufficiently independent direction at any order that
    is still rank-deficient, then a few extra sets are kept to
    overdetermine the system.
    """
    grid = [k * math.pi / 4.0 for k in range(8)]
    candidates = [
        PhaseSet(z1, z2, z3, 0.0) for z3 in grid for z1 in grid for z2 in grid
    ]
    keys_per_order = {d: _order_keys(d) for d in range(1, target_order + 1)}
    bases: dict[int, list[np.ndarray]] = {d: [] for d in keys_per_order}
    selected: list[PhaseSet] = []
    extra = 0
    for cand in candidates:
        pathway = Pathway(phases=cand, chi=chi, phi=phi)
        useful = False
        complete_before = all(
            len(bases[d]) >= len(keys_per_order[d]) for d in keys_per_order
        )
        for d, keys in keys_per_order.items():
            n_unknowns = len(keys)
            for port in PORTS:
                if len(bases[d]) >= n_unknowns:
                    break
                vec = _coefficient_row(pathway, port, keys, d)
                norm0 = np.linalg.norm(vec)
                if norm0 < 1e-12:
                    continue
                for b in bases[d]:
                    vec = vec - (b.conj() @ vec) * b
                if np.linalg.norm(vec) > RANK_RESIDUAL * norm0:
                    bases[d].append(vec / np.linalg.norm(vec))
                    useful = True
        if useful:
            selected.append(cand)
        elif complete_before and extra < margin:
            selected.append(cand)
            extra += 1
        if (
            all(len(bases[d]) >= len(keys_per_order[d]) for d in keys_per_order)
            and extra >= margin
        ):
            break
    return selected


def _missing_directions(a_stacked: np.ndarray, keys: list[Key], tol: float) -> list[Key]:
    _, s, vt = np.linalg.svd(a_stacked, full_matrices=True)
    rank = int(np.sum(s > tol))
    null = vt[rank:]
    missing = []
    for row in null:
        missing.append(keys[int(np.argmax(np.abs(row)))])
    return sorted(set(missing))


def recover_moments(datasets: list[HomodyneDataset], target_order: int) -> MomentTable:
    """Iterative order-by-order least-squares recovery of canonical moments.

    Solved in complex arithmetic: for an evolved table the symmetrized
    sums carry small imaginary parts (the decoherence map does not preserve
    commutators), and the complex solve inverts the synthesis exactly.
    Uncertainties are propagated to first order, neglecting correlations
    between orders.
    """
    if not datasets:
        raise ValueError("no datasets supplied")
    entries: dict[Key, complex] = {(0, 0, 0, 0): 1.0 + 0.0j}
    errors: dict[Key, float] = {(0, 0, 0, 0): 0.0}
    sum_values: dict[Key, complex] = {}
    sum_errors: dict[Key, float] = {}

    def recovered_sum(key: Key) -> tuple[complex, float]:
        if key not in sum_values:
            val = 0.0 + 0.0j
            var = 0.0
            for w in symmetrized_expand(*key):
                for k2, c in canonicalize(w).items():
                    val += c * entries[k2]
                    var += abs(c) ** 2 * errors.get(k2, 0.0) ** 2
            sum_values[key] = val
            sum_errors[key] = math.sqrt(var)
        return sum_values[key], sum_errors[key]

    for order in range(1, target_order + 1):
        keys = _order_keys(order)
        rows, rhs, weights = [], [], []
        for ds in datasets:
            if ds.d_max < order:
                continue
            form = port_observable(ds.pathway, ds.port)
            nu = form.noise_variance
            known = 0.0 + 0.0j
            for j in range(order):
                if j == 0:
                    mech = 1.0 + 0.0j
                else:
                    mech = sum(
                        _mech_coefficient(form.signal, k, j) * recovered_sum(k)[0]
                        for k in _order_keys(j)
                    )
                known += math.comb(order, j) * mech * _noise_moment(nu, order - j)
            rows.append(_coefficient_row(ds.pathway, ds.port, keys, order))
            rhs.append(ds.sample_moments[order - 1] - known)
            se = ds.standard_errors[order - 1]
            weights.append(1.0 / se if se > 0 else None)
        if not rows:
            raise RankDeficient(f"no datasets cover order {order}", keys)
        a = np.array(rows)
        b = np.array(rhs)
        finite = [w for w in weights if w is not None]
        default_w = max(finite) * 10.0 if finite else 1.0
        w = np.array([default_w if wi is None else wi for wi in weights])
        a_w = a * w[:, None]
        b_w = b * w
        svals = np.linalg.svd(a_w, compute_uv=False)
        tol = svals[0] * max(a_w.shape) * np.finfo(float).eps
        rank = int(np.sum(svals > tol))
        if rank < len(keys):
            raise RankDeficient(
                f"order {order}: rank {rank} < {len(keys)} unknowns",
                _missing_directions(a_w, keys, tol),
            )
        cond = svals[0] / svals[-1]
        if cond > COND_LIMIT:
            raise IllConditioned(f"order {order}: condition number {cond:.3g}")
        sol, *_ = np.linalg.lstsq(a_w, b_w, rcond=None)
        gram_inv = np.linalg.inv(a_w.conj().T @ a_w)
        sol_var = np.clip(np.real(np.diag(gram_inv)), 0.0, None)
        for key, s_val, s_var in zip(keys, sol, sol_var):
            sum_values[key] = complex(s_val)
            sum_errors[key] = math.sqrt(s_var)
        # unlock individual canonical moments through the commutators
        for key in keys:
            words = symmetrized_expand(*key)
            n_words = len(words)
            lower = 0.0 + 0.0j
            lower_var = 0.0
            for wword in words:
                for k2, c in canonicalize(wword).items():
                    if sum(k2) < order:
                        lower += c * entries[k2]
                        lower_var += abs(c) ** 2 * errors.get(k2, 0.0) ** 2
            entries[key] = (sum_values[key] - lower) / n_words
            errors[key] = math.sqrt(sum_errors[key] ** 2 + lower_var) / n_words
    n_samples = min(
        (ds.n_samples for ds in datasets if ds.n_samples is not None), default=None
    )
    return MomentTable(
        entries,
        target_order,
        provenance="recovered",
        n_samples=n_samples,
        std_errors=errors,
        evolved=True,
    )


# ---------------------------------------------------------------------------


@dataclass
class VerificationRun:
    """Bundle of everything one simulated verification campaign produced."""

    exact_table: MomentTable
    recovered_table: MomentTable
    datasets: list[HomodyneDataset] = field(default_factory=list)

    def max_abs_deviation(self) -> float:
        return max(
            abs(self.recovered_table.entries[k] - self.exact_table.entries[k])
            for k in self.recovered_table.entries
            if sum(k) <= self.recovered_table.order_max
        )


class VerificationStudy:
    """Precomputed campaign over every (phase set, port) of the full pathway.

    Exact port moments and sampling-covariance factors are computed once;
    repeated Monte-Carlo draws then only add noise and re-run the recovery.
    """

    def __init__(
        self,
        table: MomentTable,
        phi: float,
        chi: float = 1.0,
        target_order: int = 4,
        phase_sets: list[PhaseSet] | None = None,
    ):
        if phase_sets is None:
            phase_sets = default_phase_sets(target_order, phi=phi, chi=chi)
        self.table = table
        self.target_order = target_order
        self.channels = []
        sums = _SumCache(table)
        for ps in phase_sets:
            pathway = Pathway(phases=ps, chi=chi, phi=phi)
            for port in PORTS:
                form = port_observable(pathway, port)
                exact = _port_moments_from_sums(form, sums, 2 * target_order)
                cov = np.empty((target_order, target_order), dtype=complex)
                for d in range(1, target_order + 1):
                    for e_ in range(1, target_order + 1):
                        cov[d - 1, e_ - 1] = exact[d + e_ - 1] - exact[d - 1] * exact[e_ - 1]
                factor = _factor_complex_symmetric(cov)
                self.channels.append((pathway, port, exact[:target_order], cov, factor))

    def run(self, n_samples: int | None = None, seed: int | None = None) -> VerificationRun:
        datasets = []
        for stream, (pathway, port, exact, cov, factor) in enumerate(self.channels):
            if n_samples is None:
                ds = HomodyneDataset(
                    pathway, port, None, exact.copy(), np.zeros(self.target_order), seed
                )
            else:
                ses = np.sqrt(np.abs(np.diag(cov)) / n_samples)
                rng = np.random.default_rng(None if seed is None else (seed, stream))
                noise = (factor / math.sqrt(n_samples)) @ rng.standard_normal(self.target_order)
                ds = HomodyneDataset(pathway, port, n_samples, exact + noise, ses, seed)
            datasets.append(ds)
        recovered = recover_moments(datasets, self.target_order)
        return VerificationRun(
            exact_table=self.table, recovered_table=recovered, datasets=datasets
        )


def run_verification(
    table: MomentTable,
    phi: float,
    chi: float = 1.0,
    n_samples: int | None = None,
    seed: int | None = None,
    target_order: int = 4,
    phase_sets: list[PhaseSet] | None = None,
) -> VerificationRun:
    """Synthesize datasets for every (phase set, port) and recover moments.

    `table` holds the evolved mechanical moments to order >= 2*target_order.
    """
    study = VerificationStudy(table, phi, chi, target_order, phase_sets)
    return study.run(n_samples, seed)
