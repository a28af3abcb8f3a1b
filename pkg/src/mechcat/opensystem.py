"""Damped, rethermalizing evolution of mechanical moment tables.

Quadratures follow the high-Q Langevin solution
    X(t) = e^{-gt/2} [ (cos wt + eps sin wt) X0 + sin(wt) P0 + DX(t) ],
with eps = g / (2w) and DX(t) the accumulated Brownian noise, whose force
correlator is <xi(t) xi(t')> = (2 nbar_B + 1) delta(t - t').

The verification pulses always read out the position quadrature, so a
"P measurement" is the X solution evaluated at the damped quarter period
tau' where the X0 coefficient vanishes. Moment words evolve by substituting
this solution letter by letter: X letters at t_x (default 0), P letters at
t_p (default tau'); noise letters are Gaussian, independent of the initial
operators, and independent between the two modes.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from itertools import product

from scipy.integrate import quad

from .algebra import MomentTable, canonicalize, keys_up_to_order
from .errors import OrderOverflow

Q_WARN = 10.0


@dataclass(frozen=True)
class EnvParams:
    """Mechanical frequency, quality factor, and bath occupation."""

    omega_m: float
    q_factor: float
    nbar_bath: float = 0.0

    def __post_init__(self):
        if self.omega_m <= 0 or self.q_factor <= 0:
            raise ValueError("omega_m and q_factor must be positive")
        if self.nbar_bath < 0:
            raise ValueError("nbar_bath must be >= 0")
        if self.q_factor < Q_WARN:
            warnings.warn(
                f"Q = {self.q_factor:.3g} is below the high-Q validity regime",
                stacklevel=2,
            )

    @property
    def gamma(self) -> float:
        return 0.0 if math.isinf(self.q_factor) else self.omega_m / self.q_factor

    @property
    def epsilon(self) -> float:
        return 0.0 if math.isinf(self.q_factor) else 1.0 / (2.0 * self.q_factor)

    @property
    def force_strength(self) -> float:
        """Coefficient of the delta correlator, 2 nbar_B + 1."""
        return 2.0 * self.nbar_bath + 1.0


def quarter_period(env: EnvParams) -> float:
    """Delay tau' mapping X onto P under damping; pi/(2w) as gamma -> 0."""
    eps = env.epsilon
    if eps >= 1.0:
        raise ValueError("quarter period undefined for epsilon >= 1")
    if eps == 0.0:
        return math.pi / (2.0 * env.omega_m)
    return (math.atan(-1.0 / eps) + math.pi) / env.omega_m


@dataclass(frozen=True)
class NoiseMoments:
    var_dx: float
    var_dp: float
    cov_dxdp: float


def _exp_trig_integrals(gamma: float, omega: float, t: float):
    """(I1, Ic2, Is2) = int_0^t e^{-g s} {1, cos 2ws, sin 2ws} ds."""
    if gamma == 0.0:
        return t, math.sin(2 * omega * t) / (2 * omega), (1 - math.cos(2 * omega * t)) / (2 * omega)
    den = gamma * gamma + 4.0 * omega * omega
    e = math.exp(-gamma * t)
    i1 = (1.0 - e) / gamma
    ic2 = (gamma - e * (gamma * math.cos(2 * omega * t) - 2 * omega * math.sin(2 * omega * t))) / den
    is2 = (2 * omega - e * (gamma * math.sin(2 * omega * t) + 2 * omega * math.cos(2 * omega * t))) / den
    return i1, ic2, is2


def noise_covariances(env: EnvParams, t: float, damped: bool = True) -> NoiseMoments:
    """Second moments of the Brownian terms DX(t), DP(t) in closed form.

    With damped=True the e^{-gamma t} prefactor of the quadrature solution is
    included (this is what enters measured moments); damped=False returns the
    bare integrals.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    g, w, eps = env.gamma, env.omega_m, env.epsilon
    if g == 0.0 or t == 0.0:
        return NoiseMoments(0.0, 0.0, 0.0)
    s = env.force_strength
    i1, ic2, is2 = _exp_trig_integrals(g, w, t)
    var_dx = 2.0 * g * s * 0.5 * (i1 - ic2)
    var_dp = 2.0 * g * s * (0.5 * (i1 + ic2) - eps * is2 + eps * eps * 0.5 * (i1 - ic2))
    cov = 2.0 * g * s * (0.5 * is2 - eps * 0.5 * (i1 - ic2))
    if not damped:
        scale = math.exp(g * t)
        return NoiseMoments(var_dx * scale, var_dp * scale, cov * scale)
    return NoiseMoments(var_dx, var_dp, cov)


def noise_covariances_quad(env: EnvParams, t: float, damped: bool = True) -> NoiseMoments:
    """Adaptive-quadrature oracle for the same integrals."""
    g, w, eps = env.gamma, env.omega_m, env.epsilon
    if g == 0.0 or t == 0.0:
        return NoiseMoments(0.0, 0.0, 0.0)
    s = env.force_strength
    pref = math.exp(-g * t) if damped else 1.0

    def fx(tp):
        return math.exp(g * tp) * math.sin(w * (t - tp)) ** 2

    def fp(tp):
        c = math.cos(w * (t - tp)) - eps * math.sin(w * (t - tp))
        return math.exp(g * tp) * c * c

    def fxp(tp):
        return (
            math.exp(g * tp)
            * math.sin(w * (t - tp))
            * (math.cos(w * (t - tp)) - eps * math.sin(w * (t - tp)))
        )

    period = 2 * math.pi / w
    pts = min(int(t / period) * 4 + 50, 1000)
    kw = dict(limit=max(200, pts), epsabs=1e-13, epsrel=1e-11)
    vx = quad(fx, 0.0, t, **kw)[0]
    vp = quad(fp, 0.0, t, **kw)[0]
    cxp = quad(fxp, 0.0, t, **kw)[0]
    return NoiseMoments(2 * g * s * vx * pref, 2 * g * s * vp * pref, 2 * g * s * cxp * pref)


def noise_cross_cov(env: EnvParams, t1: float, t2: float) -> float:
    """<DX(t1) DX(t2)> including both decay prefactors (t1, t2 >= 0)."""
    g, w = env.gamma, env.omega_m
    if g == 0.0 or min(t1, t2) == 0.0:
        return 0.0
    s = env.force_strength
    tm = min(t1, t2)
    tt = t1 + t2
    # sin(w(t1-t'))sin(w(t2-t')) = [cos(w(t1-t2)) - cos(w tt - 2w t')]/2
    first = math.cos(w * (t1 - t2)) * (math.exp(g * tm) - 1.0) / g

    def anti(tp):
        arg = w * tt - 2.0 * w * tp
        return math.exp(g * tp) * (g * math.cos(arg) - 2.0 * w * math.sin(arg)) / (
            g * g + 4.0 * w * w
        )

    second = anti(tm) - anti(0.0)
    return math.exp(-g * tt / 2.0) * g * s * (first - second)


@dataclass(frozen=True)
class MeasurementSchedule:
    """Read-out times: X letters at t_x, P letters at t_p."""

    t_x: float = 0.0
    t_p: float = 0.0

    @classmethod
    def standard(cls, env: EnvParams) -> "MeasurementSchedule":
        return cls(t_x=0.0, t_p=quarter_period(env))


def _letter_substitution(env: EnvParams, t: float):
    """Coefficients (c_x on X0, c_p on P0, has_noise) of the measured X(t)."""
    g, w, eps = env.gamma, env.omega_m, env.epsilon
    decay = math.exp(-g * t / 2.0)
    c_x = decay * (math.cos(w * t) + eps * math.sin(w * t))
    c_p = decay * math.sin(w * t)
    return c_x, c_p, (g > 0.0 and t > 0.0)


def _isserlis(noise_letters, cov):
    """E[prod of zero-mean jointly Gaussian noise letters]."""
    n = len(noise_letters)
    if n == 0:
        return 1.0
    if n % 2 == 1:
        return 0.0
    first = noise_letters[0]
    total = 0.0
    for j in range(1, n):
        c = cov(first, noise_letters[j])
        if c != 0.0:
            total += c * _isserlis(noise_letters[1:j] + noise_letters[j + 1 :], cov)
    return total


def evolve_moments(
    table: MomentTable, env: EnvParams, schedule: MeasurementSchedule | None = None
) -> MomentTable:
    """Moment table as measured after the open-system delays."""
    if schedule is None:
        schedule = MeasurementSchedule.standard(env)
    if table.order_max > 8:
        raise OrderOverflow("evolution supported up to order 8")

    sub = {
        "X": (_letter_substitution(env, schedule.t_x), schedule.t_x),
        "P": (_letter_substitution(env, schedule.t_p), schedule.t_p),
    }

    def cov(a, b):
        (mode_a, ta), (mode_b, tb) = a, b
        if mode_a != mode_b:
            return 0.0
        if ta == tb:
            return noise_covariances(env, ta).var_dx
        return noise_cross_cov(env, ta, tb)

    entries = {}
    for key in keys_up_to_order(table.order_max):
        letters = (
            [("X", 1)] * key[0] + [("P", 1)] * key[1] + [("X", 2)] * key[2] + [("P", 2)] * key[3]
        )
        choices = []
        for quad_letter, mode in letters:
            (c_x, c_p, noisy), t = sub[quad_letter]
            opts = [(c_x, ("op", f"X{mode}")), (c_p, ("op", f"P{mode}"))]
            if noisy:
                # decay prefactor is folded into the damped noise covariances
                opts.append((1.0, ("noise", (mode, t))))
            choices.append([(c, tag) for c, tag in opts if c != 0.0])
        total = 0.0 + 0.0j
        for combo in product(*choices):
            coeff = 1.0 + 0.0j
            op_word = []
            noise_list = []
            for c, (kind, payload) in combo:
                coeff *= c
                if kind == "op":
                    op_word.append(payload)
                else:
                    noise_list.append(payload)
            noise_val = _isserlis(tuple(noise_list), cov)
            if noise_val == 0.0:
                continue
            total += coeff * noise_val * table.evaluate(canonicalize(tuple(op_word)))
        entries[key] = total
    return MomentTable(
        entries,
        table.order_max,
        provenance=table.provenance,
        n_samples=table.n_samples,
        evolved=True,
    )
