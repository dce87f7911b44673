"""Three-qubit repetition code over the bit-flip complete channel.

Each code qubit is sent through one use of a physical qubit channel, the exact
majority-vote recovery channel is applied, and the logical qubit is read back.
Channels are handled as superoperator tensors ``phi[c, d, a, b] = Phi(|a><b|)[c, d]``
so they can act on one qubit of an entangled code block.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from carrier_sim import densekernel as dk
from carrier_sim.densekernel import CNOT, X, DensityMatrix, PureState
from carrier_sim.protocol import (
    ChannelEstimate,
    RoundKind,
    choi_from_superop,
    decoded_round_map,
    omega,
    pauli_weights,
)

N_CODE = 3


@dataclass(frozen=True)
class LogicalChannelSpec:
    """Physical bit-flip probability ``q`` of one complete-channel use."""

    q: float

    def __post_init__(self) -> None:
        _check_q(self.q)

    @classmethod
    def from_channel(cls, channel: ChannelEstimate) -> LogicalChannelSpec:
        return cls(channel.p_X)

    @property
    def logical_rate(self) -> float:
        return logical_error_rate(self.q)


def _check_q(q: float) -> None:
    if not 0.0 <= q <= 1.0 or math.isnan(q):
        raise ValueError(f"bit-flip probability q={q!r} outside [0, 1]")


def logical_error_rate(q: float) -> float:
    """Majority vote fails iff two or three of the three code qubits flip."""
    _check_q(q)
    return 3.0 * q**2 - 2.0 * q**3


def bit_flip_superop(q: float) -> np.ndarray:
    _check_q(q)
    phi = np.zeros((2, 2, 2, 2), dtype=complex)
    for a in range(2):
        for b in range(2):
            e = np.zeros((2, 2), dtype=complex)
            e[a, b] = 1.0
            phi[:, :, a, b] = (1 - q) * e + q * X @ e @ X
    return phi


def apply_local_superop(m: np.ndarray, phi: np.ndarray, qubit: int, n: int) -> np.ndarray:
    """Apply a qubit superoperator to ``qubit`` of an ``n``-qubit operator ``m``."""
    t = m.reshape((2,) * (2 * n))
    t = np.moveaxis(t, (qubit, n + qubit), (0, 1))
    t = np.tensordot(phi, t, axes=([2, 3], [0, 1]))
    t = np.moveaxis(t, (0, 1), (qubit, n + qubit))
    return t.reshape(m.shape)


@functools.lru_cache(maxsize=1)
def _code_isometry() -> np.ndarray:
    v = np.zeros((1 << N_CODE, 2), dtype=complex)
    v[0, 0] = v[-1, 1] = 1.0
    return v


@functools.lru_cache(maxsize=1)
def _recovery_ops() -> tuple[tuple[np.ndarray, np.ndarray], ...]:
    """(projector, correction) per syndrome: no flip, or a flip on one code qubit."""
    ops = []
    for flipped in (None, 0, 1, 2):
        mask = 0 if flipped is None else 1 << (N_CODE - 1 - flipped)
        proj = np.zeros((8, 8), dtype=complex)
        for base in (0, 7):
            proj[base ^ mask, base ^ mask] = 1.0
        fix = np.eye(8, dtype=complex) if flipped is None else dk.embed(X, [flipped], N_CODE)
        ops.append((proj, fix))
    return tuple(ops)


def encode_repetition(psi: PureState) -> PureState:
    """``a|0> + b|1>`` to ``a|000> + b|111>``."""
    if psi.n_qubits != 1:
        raise ValueError("repetition encoding takes a single qubit")
    return PureState(_code_isometry() @ psi.amplitudes)


def recover(m: np.ndarray) -> np.ndarray:
    """Exact recovery channel: sum over syndrome projectors with conditional X corrections."""
    out = np.zeros_like(m, dtype=complex)
    for proj, fix in _recovery_ops():
        out += fix @ proj @ m @ proj @ fix.conj().T
    return out


def _logical_map(op: np.ndarray, physical: list[np.ndarray]) -> np.ndarray:
    v = _code_isometry()
    m = v @ op @ v.conj().T
    for k, phi in enumerate(physical):
        m = apply_local_superop(m, phi, k, N_CODE)
    # after recovery the block lies in the code space, so reading it back is V^dagger . V
    return v.conj().T @ recover(m) @ v


def _logical_superop(physical: list[np.ndarray]) -> np.ndarray:
    phi = np.zeros((2, 2, 2, 2), dtype=complex)
    for a in range(2):
        for b in range(2):
            e = np.zeros((2, 2), dtype=complex)
            e[a, b] = 1.0
            phi[:, :, a, b] = _logical_map(e, physical)
    return phi


def transmit_encoded(psi: PureState, q: float) -> DensityMatrix:
    """Encode, flip each code qubit independently with probability ``q``, recover, decode."""
    phi = bit_flip_superop(q)
    return DensityMatrix._trusted(_logical_map(psi.density().entries, [phi] * N_CODE))


def logical_channel(q: float) -> ChannelEstimate:
    """Pauli weights of the logical channel induced by :func:`transmit_encoded`."""
    weights, off = pauli_weights(choi_from_superop(_logical_superop([bit_flip_superop(q)] * N_CODE)))
    return ChannelEstimate(weights=weights, off_diagonal=off)


def end_to_end_channel(carrier: DensityMatrix, kind: RoundKind = RoundKind.PARITY) -> ChannelEstimate:
    """Logical channel when each code qubit takes one protocol round on its own carrier.

    The round is the full dense upload/download/decode map, applied to its code
    qubit while the other two stay entangled with it.
    """
    phi = decoded_round_map(carrier, kind)
    weights, off = pauli_weights(choi_from_superop(_logical_superop([phi] * N_CODE)))
    return ChannelEstimate(weights=weights, off_diagonal=off, kind=RoundKind(kind))


def transmit_through_rounds(psi: PureState, carrier: DensityMatrix, kind: RoundKind = RoundKind.PARITY) -> DensityMatrix:
    """Single-state form of :func:`end_to_end_channel`."""
    phi = decoded_round_map(carrier, kind)
    return DensityMatrix._trusted(_logical_map(psi.density().entries, [phi] * N_CODE))


# --- one carrier reused for all three code qubits ---------------------------------------

# register: carrier A B C, code c0 c1 c2, message slots s1 s2
_A, _C0, _S1, _S2 = 0, 3, 6, 7
_N_SHARED = 8


def _slot_encoder(code_qubit: int) -> list[tuple[int, int] | int]:
    # |q>|00> -> |0>|q_2>: H on s1, pair the slots, then move q into the slot parity
    return [_S1, (_S1, _S2), (code_qubit, _S2), (_S1, code_qubit), (_S2, code_qubit)]


def _apply_ops(m: np.ndarray, ops, reverse: bool = False) -> np.ndarray:
    for op in reversed(ops) if reverse else ops:
        if isinstance(op, tuple):
            m = dk.conjugate(m, CNOT, list(op), _N_SHARED)
        else:
            m = dk.conjugate(m, dk.H, [op], _N_SHARED)
    return m


def transmit_shared_carrier(psi: PureState, carrier: DensityMatrix) -> DensityMatrix:
    """Three consecutive parity rounds, one per code qubit, all on the same carrier.

    The carrier is kept as a quantum register between rounds. Its contamination
    is fixed once, so the three code qubits see perfectly correlated flips and
    the repetition code cannot correct them.
    """
    if carrier.n_qubits != 3:
        raise ValueError("shared-carrier transmission uses the three-party carrier")
    u = omega(RoundKind.PARITY)
    round_targets = [_A, 1, 2, _S1, _S2]
    slots0 = np.zeros((4, 4), dtype=complex)
    slots0[0, 0] = 1.0
    m = np.kron(np.kron(carrier.entries, encode_repetition(psi).density().entries), slots0)
    for k in range(N_CODE):
        enc = _slot_encoder(_C0 + k)
        m = _apply_ops(m, enc)
        m = dk.conjugate(m, u, round_targets, _N_SHARED)
        m = _apply_ops(m, enc, reverse=True)
        # slots return to |00> on every branch; reset them explicitly
        m = np.kron(dk.reduce(m, list(range(6)), _N_SHARED), slots0)
    code = dk.reduce(m, [_C0, _C0 + 1, _C0 + 2], _N_SHARED)
    v = _code_isometry()
    return DensityMatrix._trusted(v.conj().T @ recover(code) @ v)


def shared_carrier_logical_rate(carrier: DensityMatrix) -> float:
    """Logical flip probability of :func:`transmit_shared_carrier` for input ``|0>``."""
    out = transmit_shared_carrier(PureState.basis("0"), carrier)
    return float(out.entries[1, 1].real)
