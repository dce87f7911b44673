"""Named states of the carrier protocol: parity states, the GHZ octet, message encodings."""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass

import numpy as np

from carrier_sim.densekernel import REGISTER_CAP, CapacityError, PureState, apply_to_vector, X, Z


class RoundKind(str, enum.Enum):
    """Carrier type of a round.

    Rounds are numbered from 0 with the GHZ carrier; even rounds use the GHZ
    carrier with the product encoding, odd rounds the even-parity carrier with
    the parity encoding. The joint Hadamard step at the end of a round toggles it.
    """

    GHZ = "ghz"
    PARITY = "parity"

    @classmethod
    def for_round(cls, index: int) -> RoundKind:
        return cls.GHZ if index % 2 == 0 else cls.PARITY

    def toggled(self) -> RoundKind:
        return RoundKind.PARITY if self is RoundKind.GHZ else RoundKind.GHZ


def party_labels(n_receivers: int) -> tuple[str, ...]:
    """Carrier roles: the sender ``A`` followed by receivers ``B``, ``C``, ``D``..."""
    if n_receivers < 1:
        raise ValueError("need at least one receiver")
    return ("A",) + tuple(chr(ord("B") + k) for k in range(n_receivers))


def negate(q: int) -> int:
    _check_bit(q)
    return 1 - q


def _check_bit(q: int) -> None:
    if q not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {q!r}")


def _check_size(n: int, minimum: int = 2) -> None:
    if n < minimum:
        raise ValueError(f"need at least {minimum} qubits, got {n}")
    if n > REGISTER_CAP:
        raise CapacityError(f"{n} qubits exceeds register cap {REGISTER_CAP}")


def parity_state(n: int, q: int) -> PureState:
    """Uniform superposition of all ``n``-bit strings whose parity is ``q``.

    Built by the recursion ``|q_n> = |0>|q_{n-1}> + |1>|~q_{n-1}>`` starting from
    the two-qubit pair ``(|0q> + |1~q>)/sqrt2``.
    """
    _check_size(n)
    _check_bit(q)
    even = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)
    odd = np.array([0, 1, 1, 0], dtype=complex) / np.sqrt(2)
    for _ in range(n - 2):
        even, odd = (
            np.concatenate([even, odd]) / np.sqrt(2),
            np.concatenate([odd, even]) / np.sqrt(2),
        )
    return PureState(odd if q else even)


def ghz_state(n: int, sign: str = "+") -> PureState:
    _check_size(n)
    if sign not in ("+", "-"):
        raise ValueError(f"sign must be '+' or '-', got {sign!r}")
    a = np.zeros(1 << n, dtype=complex)
    a[0] = 1 / np.sqrt(2)
    a[-1] = (1 if sign == "+" else -1) / np.sqrt(2)
    return PureState(a)


@dataclass(frozen=True)
class GhzLabel:
    """One member of the GHZ basis: ``site`` is ``"0"`` or a party label, ``sign`` is +/-."""

    site: str = "0"
    sign: str = "+"

    def __post_init__(self) -> None:
        if self.sign not in ("+", "-"):
            raise ValueError(f"sign must be '+' or '-', got {self.sign!r}")

    @property
    def primed(self) -> bool:
        return self.sign == "-"


def ghz_labels(n_receivers: int = 2) -> list[GhzLabel]:
    sites = ("0",) + party_labels(n_receivers)
    return [GhzLabel(s, sign) for sign in ("+", "-") for s in sites]


def ghz_basis_state(label: GhzLabel, n_receivers: int = 2) -> PureState:
    """``X_site`` applied to the (+) or (-) GHZ state of the carrier parties.

    For three parties the eight outputs, with the site running over ``0, A, B, C``,
    are the full GHZ basis. With more parties only the single-site flips are
    produced here; see :func:`ghz_basis_from_mask` for the complete basis.
    """
    parties = party_labels(n_receivers)
    n = len(parties)
    base = ghz_state(n, label.sign).amplitudes
    if label.site == "0":
        return PureState(base)
    if label.site not in parties:
        raise ValueError(f"unknown site {label.site!r}; expected one of 0, {', '.join(parties)}")
    return PureState(apply_to_vector(base, X, [parties.index(label.site)], n))


def ghz_basis_from_mask(n: int, x_mask: int, primed: bool) -> PureState:
    """GHZ basis member ``X^{x_mask} Z_0^{primed} |GHZ_n>``; bit ``n-1-k`` of the mask is qubit ``k``."""
    _check_size(n)
    v = ghz_state(n, "+").amplitudes
    if primed:
        v = apply_to_vector(v, Z, [0], n)
    idx = np.arange(1 << n)
    return PureState(v[idx ^ x_mask])


def encode_product(psi: PureState, n: int) -> PureState:
    """``alpha|0...0> + beta|1...1>`` on ``n`` message slots."""
    _check_qubit(psi)
    _check_size(n, minimum=1)
    alpha, beta = psi.amplitudes
    a = np.zeros(1 << n, dtype=complex)
    a[0] = alpha
    a[-1] = beta
    return PureState(a)


def encode_parity(psi: PureState, n: int) -> PureState:
    """``alpha|even_n> + beta|odd_n>`` on ``n`` message slots."""
    _check_qubit(psi)
    _check_size(n)
    alpha, beta = psi.amplitudes
    return PureState(alpha * parity_state(n, 0).amplitudes + beta * parity_state(n, 1).amplitudes)


def _check_qubit(psi: PureState) -> None:
    if psi.n_qubits != 1:
        raise ValueError(f"message must be a single qubit, got {psi.n_qubits} qubits")


def bit_strings(n: int):
    return ("".join(bits) for bits in itertools.product("01", repeat=n))
