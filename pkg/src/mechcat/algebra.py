"""Canonical algebra of quadrature operator words over {X1, P1, X2, P2}.

Canonical words are X1^p P1^q X2^r P2^s, keyed by the exponent tuple
(p, q, r, s). Arbitrary words reduce to linear combinations of canonical
words through [X_i, P_j] = i delta_ij; ladder words expand through
b = (X + iP)/sqrt(2).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import CutoffTooSmall, MissingMoment, OrderOverflow
from .fock import TwoModeState, x_single, p_single

D_MAX = 8

QUAD_LETTERS = ("X1", "P1", "X2", "P2")
LADDER_LETTERS = ("b1", "b1d", "b2", "b2d")
_RANK = {"X1": 0, "P1": 1, "X2": 2, "P2": 3}

Key = tuple[int, int, int, int]
Combo = dict[Key, complex]


def word_key(word: tuple[str, ...]) -> Key | None:
    """Exponent tuple of a word if it is already canonical, else None."""
    ranks = [_RANK[c] for c in word]
    if any(a > b for a, b in zip(ranks, ranks[1:])):
        return None
    return (word.count("X1"), word.count("P1"), word.count("X2"), word.count("P2"))


def key_to_string(key: Key) -> str:
    return f"X1^{key[0]} P1^{key[1]} X2^{key[2]} P2^{key[3]}"


def string_to_key(s: str) -> Key:
    parts = s.split()
    if len(parts) != 4:
        raise ValueError(f"bad word string {s!r}")
    return tuple(int(p.split("^")[1]) for p in parts)  # type: ignore[return-value]


def _check_order(n: int, d_max: int):
    if n > d_max:
        raise OrderOverflow(f"word order {n} exceeds d_max={d_max}")


@lru_cache(maxsize=None)
def _canonicalize_cached(word: tuple[str, ...]) -> tuple[tuple[Key, complex], ...]:
    # Bubble the leftmost out-of-order adjacent pair; AB = BA + [A, B].
    for i in range(len(word) - 1):
        a, b = word[i], word[i + 1]
        if _RANK[a] <= _RANK[b]:
            continue
        swapped = word[:i] + (b, a) + word[i + 2 :]
        out = dict(_canonicalize_cached(swapped))
        if a[1] == b[1]:  # same mode, necessarily P before X: [P, X] = -i
            shorter = word[:i] + word[i + 2 :]
            for k, c in _canonicalize_cached(shorter):
                out[k] = out.get(k, 0.0) + (-1j) * c
        return tuple(out.items())
    return ((word_key(word), 1.0 + 0.0j),)  # already canonical


def canonicalize(word: tuple[str, ...], d_max: int = D_MAX) -> Combo:
    """Rewrite a quadrature word as {canonical key: coefficient}."""
    _check_order(len(word), d_max)
    for c in word:
        if c not in _RANK:
            raise ValueError(f"unknown letter {c!r}")
    return dict(_canonicalize_cached(tuple(word)))


@lru_cache(maxsize=None)
def _interleavings(p: int, q: int) -> tuple[tuple[str, ...], ...]:
    # distinct arrangements of p X's and q P's of one mode, as generic letters
    if p == 0:
        return (("P",) * q,)
    if q == 0:
        return (("X",) * p,)
    out = []
    for rest in _interleavings(p - 1, q):
        out.append(("X",) + rest)
    for rest in _interleavings(p, q - 1):
        out.append(("P",) + rest)
    return tuple(out)


def symmetrized_expand(p: int, q: int, r: int, s: int, d_max: int = D_MAX) -> list[tuple[str, ...]]:
    """Distinct orderings of p X1, q P1, r X2, s P2 (cross-mode letters commute).

    Words are returned with all mode-1 letters before mode-2 letters; the
    count is C(p+q, p) * C(r+s, r).
    """
    _check_order(p + q + r + s, d_max)
    m1 = [tuple(c + "1" for c in w) for w in _interleavings(p, q)]
    m2 = [tuple(c + "2" for c in w) for w in _interleavings(r, s)]
    return [w1 + w2 for w1 in m1 for w2 in m2]


_LADDER_EXPANSION = {
    "b1": (("X1", 1 / math.sqrt(2)), ("P1", 1j / math.sqrt(2))),
    "b1d": (("X1", 1 / math.sqrt(2)), ("P1", -1j / math.sqrt(2))),
    "b2": (("X2", 1 / math.sqrt(2)), ("P2", 1j / math.sqrt(2))),
    "b2d": (("X2", 1 / math.sqrt(2)), ("P2", -1j / math.sqrt(2))),
}


@lru_cache(maxsize=None)
def _ladder_to_quadrature_cached(word: tuple[str, ...]) -> tuple[tuple[Key, complex], ...]:
    out: Combo = {(0, 0, 0, 0): 1.0 + 0.0j} if not word else {}
    if not word:
        return tuple(out.items())
    head, rest = word[0], word[1:]
    tail = dict(_ladder_to_quadrature_cached(rest))
    # left-multiply the expanded head onto every canonical tail word
    for letter, coeff in _LADDER_EXPANSION[head]:
        for key, c in tail.items():
            quad_word = (letter,) + _key_to_word(key)
            for k2, c2 in _canonicalize_cached(quad_word):
                out[k2] = out.get(k2, 0.0) + coeff * c * c2
    return tuple(out.items())


def _key_to_word(key: Key) -> tuple[str, ...]:
    return ("X1",) * key[0] + ("P1",) * key[1] + ("X2",) * key[2] + ("P2",) * key[3]


def ladder_to_quadrature(word: tuple[str, ...], d_max: int = D_MAX) -> Combo:
    """Expand a ladder word into canonical quadrature words."""
    _check_order(len(word), d_max)
    for c in word:
        if c not in _LADDER_EXPANSION:
            raise ValueError(f"unknown ladder letter {c!r}")
    return dict(_ladder_to_quadrature_cached(tuple(word)))


def keys_up_to_order(order_max: int) -> list[Key]:
    out = []
    for p in range(order_max + 1):
        for q in range(order_max + 1 - p):
            for r in range(order_max + 1 - p - q):
                for s in range(order_max + 1 - p - q - r):
                    out.append((p, q, r, s))
    return sorted(out, key=lambda k: (sum(k), k))


# ---------------------------------------------------------------------------


@dataclass
class MomentTable:
    """Map from canonical operator words to expectation values.

    `provenance` is "exact" for tables computed from a state or in closed
    form, "recovered" for tables estimated by the verification pipeline
    (then `n_samples` and `std_errors` are populated).
    """

    entries: dict[Key, complex]
    order_max: int
    provenance: str = "exact"
    n_samples: int | None = None
    std_errors: dict[Key, float] = field(default_factory=dict)
    evolved: bool = False  # open-system map applied (commutators no longer exact)
    _sum_cache: dict[Key, complex] = field(
        default_factory=dict, init=False, repr=False, compare=False
    )

    def __post_init__(self):
        self.entries.setdefault((0, 0, 0, 0), 1.0 + 0.0j)

    def value(self, key: Key) -> complex:
        try:
            return self.entries[key]
        except KeyError:
            raise MissingMoment(f"moment {key_to_string(key)} not in table") from None

    def evaluate(self, combo: Combo) -> complex:
        """Value of a linear combination of canonical words."""
        return complex(sum(c * self.value(k) for k, c in combo.items()))

    def word_value(self, word: tuple[str, ...]) -> complex:
        return self.evaluate(canonicalize(word))

    def ladder_value(self, word: tuple[str, ...]) -> complex:
        return self.evaluate(ladder_to_quadrature(word))

    def symmetrized_sum(self, p: int, q: int, r: int, s: int) -> complex:
        # cached; entries must not be mutated after the first evaluation
        key = (p, q, r, s)
        if key not in self._sum_cache:
            self._sum_cache[key] = complex(
                sum(self.evaluate(canonicalize(w)) for w in symmetrized_expand(p, q, r, s))
            )
        return self._sum_cache[key]

    def check_hermitian_real(self, tol: float = 1e-9) -> None:
        """Hermitian-symmetric words (q and s paired as X^p P^q with the word
        equal to its own reversal) must have real expectation: spot-check the
        pure powers and the symmetrized sums."""
        for key in self.entries:
            p, q, r, s = key
            if q == 0 and s == 0 or p == 0 and r == 0:
                v = self.entries[key]
                if abs(v.imag) > tol * (1.0 + abs(v)):
                    raise ValueError(f"{key_to_string(key)} = {v} not real")

    def to_json(self) -> str:
        payload = {
            "order_max": self.order_max,
            "provenance": self.provenance,
            "n_samples": self.n_samples,
            "convention": {"hbar": 1, "var_vacuum": 0.5},
            "entries": {
                key_to_string(k): [v.real, v.imag] for k, v in sorted(self.entries.items())
            },
            "std_errors": {key_to_string(k): e for k, e in sorted(self.std_errors.items())},
        }
        return json.dumps(payload, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "MomentTable":
        payload = json.loads(text)
        entries = {
            string_to_key(k): complex(re, im)
            for k, (re, im) in payload["entries"].items()
        }
        errors = {string_to_key(k): e for k, e in payload.get("std_errors", {}).items()}
        return cls(
            entries,
            payload["order_max"],
            payload.get("provenance", "exact"),
            payload.get("n_samples"),
            errors,
        )


# ---------------------------------------------------------------------------


def _single_mode_word_matrices(cutoff: int, order_max: int) -> dict[tuple[int, int], np.ndarray]:
    """X^a P^b products for a + b <= order_max on one mode."""
    x = x_single(cutoff)
    p = p_single(cutoff)
    xp = {}
    for a in range(order_max + 1):
        xa = np.linalg.matrix_power(x, a) if a else np.eye(cutoff, dtype=complex)
        for b in range(order_max + 1 - a):
            pb = np.linalg.matrix_power(p, b) if b else np.eye(cutoff, dtype=complex)
            xp[(a, b)] = xa @ pb
    return xp


def moments_from_state(
    state: TwoModeState,
    order_max: int,
    d_max: int = D_MAX,
    check_convergence: bool = False,
) -> MomentTable:
    """All canonical moments <X1^p P1^q X2^r P2^s> of a Fock-space state."""
    _check_order(order_max, d_max)
    table = _moments_raw(state, order_max)
    if check_convergence:
        big = _moments_raw(_reembed(state), order_max)
        for key in table.entries:
            if sum(key) == order_max:
                drift = abs(table.entries[key] - big.entries[key])
                if drift > 1e-8:
                    raise CutoffTooSmall(
                        f"moment {key_to_string(key)} drifts {drift:.3g} under cutoff doubling"
                    )
    return table


def _moments_raw(state: TwoModeState, order_max: int) -> MomentTable:
    cfg = state.config
    m1 = _single_mode_word_matrices(cfg.cutoff_1, order_max)
    m2 = _single_mode_word_matrices(cfg.cutoff_2, order_max)
    entries: dict[Key, complex] = {}
    if state.vector is not None:
        psi = state.vector.reshape(cfg.cutoff_1, cfg.cutoff_2)
        for p, q, r, s in keys_up_to_order(order_max):
            phi = m1[(p, q)] @ psi @ m2[(r, s)].T
            entries[(p, q, r, s)] = complex(np.vdot(psi, phi))
    else:
        r4 = state.rho4()
        for p, q, r, s in keys_up_to_order(order_max):
            entries[(p, q, r, s)] = complex(
                np.einsum("ijkl,ki,lj->", r4, m1[(p, q)], m2[(r, s)], optimize=True)
            )
    return MomentTable(entries, order_max)


def _reembed(state: TwoModeState) -> TwoModeState:
    """Embed the state in a doubled-cutoff space (zero-padded)."""
    cfg = state.config
    big = cfg.doubled()
    if state.vector is not None:
        psi = np.zeros((big.cutoff_1, big.cutoff_2), dtype=complex)
        psi[: cfg.cutoff_1, : cfg.cutoff_2] = state.vector.reshape(cfg.cutoff_1, cfg.cutoff_2)
        return TwoModeState(big, np.outer(psi.ravel(), psi.ravel().conj()), vector=psi.ravel())
    r4 = np.zeros((big.cutoff_1, big.cutoff_2, big.cutoff_1, big.cutoff_2), dtype=complex)
    r4[: cfg.cutoff_1, : cfg.cutoff_2, : cfg.cutoff_1, : cfg.cutoff_2] = state.rho4()
    return TwoModeState(big, r4.reshape(big.dim, big.dim))
