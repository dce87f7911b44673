"""Round state machine of the reusable-carrier state-sharing protocol.

Register layout for ``n`` receivers: carrier qubits ``A, B, C, ...`` (sender
first) followed by message slots ``1..n``; slot ``k`` travels to receiver ``k``.

A round is: encode the message, sender's CNOTs (upload), receivers' CNOTs
(download), collaborative decoding. Between rounds every carrier holder applies
a Hadamard, which swaps the GHZ carrier and the even-parity carrier.
"""
from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from carrier_sim import densekernel as dk
from carrier_sim.densekernel import (
    ConsistencyError,
    DensityMatrix,
    PureState,
    RegisterLayout,
    fidelity_pure,
    partial_trace,
    tensor,
)
from carrier_sim.noise import NoiseSpec, noisy_carrier
from carrier_sim.pauliframe import Gate, circuit_matrix
from carrier_sim.states import (
    RoundKind,
    encode_parity,
    encode_product,
    ghz_basis_state,
    ghz_labels,
    ghz_state,
    parity_state,
    party_labels,
)

__all__ = [
    "RoundKind",
    "ProtocolConfig",
    "RoundRecord",
    "ChannelEstimate",
    "make_layout",
    "upload",
    "download",
    "hadamard_step",
    "collaborate_decode",
    "encode",
    "run_round",
    "run_protocol",
    "complete_channel",
    "decoded_round_map",
    "round_carrier",
    "conjugation_identities_check",
]


def make_layout(n_receivers: int = 2) -> RegisterLayout:
    return RegisterLayout(party_labels(n_receivers) + tuple(str(k + 1) for k in range(n_receivers)))


def _receivers_of(layout: RegisterLayout) -> int:
    slots = [s for s in layout.labels if s.isdigit()]
    if "A" not in layout or not slots:
        raise ValueError(f"layout {layout.labels} needs role A and message slots")
    return len(slots)


def _slot_positions(layout: RegisterLayout) -> list[int]:
    n = _receivers_of(layout)
    return layout.positions(str(k + 1) for k in range(n))


def _receiver_positions(layout: RegisterLayout) -> list[int]:
    n = _receivers_of(layout)
    return layout.positions(party_labels(n)[1:])


def _check_layout(joint: DensityMatrix, layout: RegisterLayout) -> None:
    if joint.n_qubits != layout.n_qubits:
        raise ValueError(f"state has {joint.n_qubits} qubits, layout has {layout.n_qubits}")
    if len(_receiver_positions(layout)) != len(_slot_positions(layout)):
        raise ValueError("layout needs one carrier qubit per message slot")


def upload_gates(kind: RoundKind, layout: RegisterLayout) -> list[Gate]:
    a = layout.index("A")
    slots = _slot_positions(layout)
    if RoundKind(kind) is RoundKind.GHZ:
        return [Gate.cnot(a, s) for s in slots]
    # only one CNOT: it adds the sender's bit to the parity of the whole message
    return [Gate.cnot(a, slots[0])]


def download_gates(layout: RegisterLayout) -> list[Gate]:
    return [Gate.cnot(r, s) for r, s in zip(_receiver_positions(layout), _slot_positions(layout))]


@functools.lru_cache(maxsize=64)
def _cnot_perm(n: int, gates: tuple[tuple[int, int], ...]) -> np.ndarray:
    return dk.compose_permutations([dk.cnot_permutation(n, c, t) for c, t in gates])


def _apply_cnots(m: np.ndarray, gates: Sequence[Gate], n: int) -> np.ndarray:
    if not gates:
        return m
    return dk.permute(m, _cnot_perm(n, tuple((g.a, g.b) for g in gates)))


def upload(joint: DensityMatrix, kind: RoundKind, layout: RegisterLayout) -> DensityMatrix:
    _check_layout(joint, layout)
    return DensityMatrix._trusted(_apply_cnots(joint.entries, upload_gates(kind, layout), layout.n_qubits))


def download(joint: DensityMatrix, kind: RoundKind, layout: RegisterLayout) -> DensityMatrix:
    _check_layout(joint, layout)
    return DensityMatrix._trusted(_apply_cnots(joint.entries, download_gates(layout), layout.n_qubits))


def round_word(kind: RoundKind, layout: RegisterLayout) -> list[Gate]:
    """Upload followed by download: the full CNOT sequence of one round."""
    return upload_gates(kind, layout) + download_gates(layout)


@functools.lru_cache(maxsize=16)
def _hadamard_all(n: int) -> np.ndarray:
    return functools.reduce(np.kron, [dk.H] * n)


def hadamard_step(carrier: DensityMatrix) -> DensityMatrix:
    """Every carrier holder applies H to their qubit."""
    h = _hadamard_all(carrier.n_qubits)
    return DensityMatrix._trusted(h @ carrier.entries @ h)


def _decode_gates(kind: RoundKind, n: int) -> tuple[list[Gate], int]:
    if RoundKind(kind) is RoundKind.GHZ:
        return [Gate.cnot(0, k) for k in range(1, n)], 0
    return [Gate.cnot(k, n - 1) for k in range(n - 1)], n - 1


def _decode_raw(m: np.ndarray, kind: RoundKind, n: int) -> np.ndarray:
    gates, keep = _decode_gates(kind, n)
    return dk.reduce(_apply_cnots(m, gates, n), [keep], n)


def collaborate_decode(message: DensityMatrix, kind: RoundKind) -> DensityMatrix:
    """Joint decoding by the receivers.

    GHZ rounds undo the product encoding with CNOTs from slot 1 and read slot 1;
    parity rounds fold the parity into the last slot and read it there. The other
    slots are left in a fixed state and discarded.
    """
    n = message.n_qubits
    if RoundKind(kind) is RoundKind.PARITY and n < 2:
        raise ValueError("parity decoding needs at least two slots")
    return DensityMatrix._trusted(_decode_raw(message.entries, kind, n))


def encode(psi: PureState, kind: RoundKind, n_slots: int) -> PureState:
    if RoundKind(kind) is RoundKind.GHZ:
        return encode_product(psi, n_slots)
    return encode_parity(psi, n_slots)


@functools.lru_cache(maxsize=16)
def _encoder(kind: RoundKind, n: int) -> np.ndarray:
    """Isometry ``2^n x 2`` mapping a qubit to its encoded message register."""
    cols = [encode(PureState.basis(b), kind, n).amplitudes for b in "01"]
    return np.stack(cols, axis=1)


@dataclass(frozen=True, eq=False)
class RoundRecord:
    index: int
    kind: RoundKind
    delivered: DensityMatrix
    fidelity_to_sent: float
    carrier_before: DensityMatrix
    carrier_after: DensityMatrix
    received: DensityMatrix  # message register after download, before decoding
    sent: PureState

    def __post_init__(self) -> None:
        if not 0.0 <= self.fidelity_to_sent <= 1.0:
            raise ValueError("fidelity outside [0, 1]")


def run_round(
    carrier: DensityMatrix,
    message: PureState,
    kind: RoundKind,
    index: int = 0,
    redundant: bool = False,
) -> tuple[DensityMatrix, DensityMatrix, RoundRecord]:
    """One upload/download round.

    Returns the carrier after download (before the Hadamard step), the decoded
    qubit, and the round record. With ``redundant=True`` (GHZ rounds only) the
    sender transmits a fixed ``|0>`` in place of ``message``.
    """
    kind = RoundKind(kind)
    n = carrier.n_qubits - 1
    if n < 1:
        raise ValueError("carrier needs the sender and at least one receiver")
    if message.n_qubits != 1:
        raise ValueError("message must be a single qubit")
    if redundant:
        if kind is not RoundKind.GHZ:
            raise ValueError("redundant bits are only sent in GHZ rounds")
        message = PureState.basis("0")
    layout = make_layout(n)
    joint = tensor(carrier, encode(message, kind, n).density())
    joint = download(upload(joint, kind, layout), kind, layout)
    carrier_pos = list(range(n + 1))
    slots = _slot_positions(layout)
    carrier_after = partial_trace(joint, carrier_pos)
    received = partial_trace(joint, slots)
    delivered = collaborate_decode(received, kind)
    record = RoundRecord(
        index=index,
        kind=kind,
        delivered=delivered,
        fidelity_to_sent=fidelity_pure(delivered, message),
        carrier_before=carrier,
        carrier_after=carrier_after,
        received=received,
        sent=message,
    )
    return carrier_after, delivered, record


@dataclass(frozen=True)
class ProtocolConfig:
    n_receivers: int = 2
    rounds: int = 4
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    messages: tuple[PureState, ...] | None = None
    seed: int = 0
    redundant_rounds: frozenset[int] = frozenset()

    def __post_init__(self) -> None:
        if self.n_receivers < 2:
            raise ValueError("need at least two receivers")
        if self.rounds < 0:
            raise ValueError("rounds must be nonnegative")
        dk._check_cap(2 * self.n_receivers + 1)
        if self.messages is not None:
            msgs = tuple(self.messages)
            if len(msgs) != self.rounds:
                raise ValueError(f"{len(msgs)} messages for {self.rounds} rounds")
            object.__setattr__(self, "messages", msgs)
        bad = [r for r in self.redundant_rounds if RoundKind.for_round(r) is not RoundKind.GHZ]
        if bad:
            raise ValueError(f"redundant rounds must be GHZ rounds, got {sorted(bad)}")

    def message_list(self) -> list[PureState]:
        if self.messages is not None:
            return list(self.messages)
        rng = np.random.default_rng(self.seed)
        return [dk.random_qubit(rng) for _ in range(self.rounds)]


def run_protocol(config: ProtocolConfig) -> list[RoundRecord]:
    """Run rounds ``0..rounds-1``: noise contaminates the GHZ carrier once before round 0,
    rounds alternate GHZ/parity, and the Hadamard step follows every round."""
    carrier = noisy_carrier(config.noise, config.n_receivers + 1)
    records = []
    for index, msg in enumerate(config.message_list()):
        kind = RoundKind.for_round(index)
        carrier_after, _, record = run_round(
            carrier, msg, kind, index=index, redundant=index in config.redundant_rounds
        )
        records.append(record)
        carrier = hadamard_step(carrier_after)
    return records


# --- complete channel -------------------------------------------------------------

_PAULI_ORDER = ("I", "X", "Y", "Z")


@dataclass(frozen=True)
class ChannelEstimate:
    """Effective single-qubit channel as Pauli weights ``(p_I, p_X, p_Y, p_Z)``.

    ``weights`` is the diagonal of the channel's Pauli process matrix; it is the
    whole channel when ``off_diagonal`` vanishes. ``block_error`` is the
    probability that the delivered message register is not the encoded input
    (for GHZ rounds: one or both slots flipped). ``slot_flip`` and ``patterns``
    (GHZ rounds only) give the per-slot marginal flip rates and the joint flip
    pattern weights on the delivered slots.
    """

    weights: tuple[float, float, float, float]
    block_error: float = 0.0
    slot_flip: tuple[float, ...] | None = None
    patterns: dict[str, float] | None = None
    off_diagonal: float = 0.0
    kind: RoundKind | None = None

    def __post_init__(self) -> None:
        w = tuple(float(v) for v in self.weights)
        if len(w) != 4:
            raise ValueError("need four Pauli weights")
        if min(w) < -1e-9 or abs(sum(w) - 1.0) > 1e-9:
            raise ConsistencyError(f"Pauli weights {w} are not a probability vector")
        object.__setattr__(self, "weights", w)

    @property
    def p_I(self) -> float:
        return self.weights[0]

    @property
    def p_X(self) -> float:
        return self.weights[1]

    @property
    def p_Y(self) -> float:
        return self.weights[2]

    @property
    def p_Z(self) -> float:
        return self.weights[3]

    @property
    def is_pauli(self) -> bool:
        return self.off_diagonal < 1e-9

    @property
    def average_fidelity(self) -> float:
        """Haar-averaged <psi|Phi(psi)|psi> of a qubit channel: ``(2 p_I + 1) / 3``."""
        return (2.0 * self.p_I + 1.0) / 3.0

    def apply(self, rho: DensityMatrix) -> DensityMatrix:
        out = sum(w * dk.PAULIS[s] @ rho.entries @ dk.PAULIS[s] for s, w in zip(_PAULI_ORDER, self.weights))
        return DensityMatrix._trusted(out)


def _round_map_raw(carrier: np.ndarray, op: np.ndarray, kind: RoundKind, n: int) -> np.ndarray:
    """Message register after upload+download for encoded input operator ``op`` (2x2)."""
    v = _encoder(kind, n)
    joint = np.kron(carrier, v @ op @ v.conj().T)
    layout = make_layout(n)
    joint = _apply_cnots(joint, round_word(kind, layout), 2 * n + 1)
    return dk.reduce(joint, list(range(n + 1, 2 * n + 1)), 2 * n + 1)


def decoded_round_map(carrier: DensityMatrix, kind: RoundKind) -> np.ndarray:
    """Superoperator of one round as ``phi[c, d, a, b] = Phi(|a><b|)[c, d]``.

    ``Phi`` runs encode, upload, download and collaborative decoding with the
    given carrier; it is linear, so it may be applied to any 2x2 operator.
    """
    kind = RoundKind(kind)
    n = carrier.n_qubits - 1
    phi = np.zeros((2, 2, 2, 2), dtype=complex)
    for i, j in itertools.product(range(2), repeat=2):
        e = np.zeros((2, 2), dtype=complex)
        e[i, j] = 1.0
        phi[:, :, i, j] = _decode_raw(_round_map_raw(carrier.entries, e, kind, n), kind, n)
    return phi


def choi_from_superop(phi: np.ndarray) -> np.ndarray:
    """Choi matrix ``sum_ij |i><j| (x) Phi(|i><j|)`` of a qubit superoperator tensor."""
    choi = np.zeros((4, 4), dtype=complex)
    for i, j in itertools.product(range(2), repeat=2):
        e = np.zeros((2, 2), dtype=complex)
        e[i, j] = 1.0
        choi += np.kron(e, phi[:, :, i, j])
    return choi


def channel_choi(carrier: DensityMatrix, kind: RoundKind) -> np.ndarray:
    """Choi matrix of the complete channel."""
    return choi_from_superop(decoded_round_map(carrier, kind))


def _pauli_chi(choi: np.ndarray) -> np.ndarray:
    """Process matrix in the Pauli basis: ``Phi(rho) = sum_ab chi_ab s_a rho s_b``."""
    # columns |s>> = sum_i |i> (x) s|i>, so that choi = sum_ab chi_ab |s_a>><<s_b|
    b = np.stack(
        [sum(np.kron(np.eye(2)[:, i], dk.PAULIS[s][:, i]) for i in range(2)) for s in _PAULI_ORDER],
        axis=1,
    )
    return b.conj().T @ choi @ b / 4.0


def _check_cptp(choi: np.ndarray, tol: float = 1e-9) -> None:
    if np.max(np.abs(choi - choi.conj().T)) > tol:
        raise ConsistencyError("complete channel is not Hermiticity preserving")
    tp = np.trace(choi.reshape(2, 2, 2, 2), axis1=1, axis2=3)
    if np.max(np.abs(tp - np.eye(2))) > tol:
        raise ConsistencyError("complete channel is not trace preserving")
    if np.linalg.eigvalsh(choi).min() < -tol:
        raise ConsistencyError("complete channel is not completely positive")


def pauli_weights(choi: np.ndarray) -> tuple[tuple[float, float, float, float], float]:
    """CPTP-checked Pauli weights ``(p_I, p_X, p_Y, p_Z)`` and the largest off-diagonal
    process-matrix entry of a qubit channel given by its Choi matrix."""
    _check_cptp(choi)
    chi = _pauli_chi(choi)
    weights = np.clip(np.real(np.diag(chi)), 0.0, None)
    off = float(np.max(np.abs(chi - np.diag(np.diag(chi)))))
    return tuple(float(w) for w in weights / weights.sum()), off


def complete_channel(carrier: DensityMatrix, kind: RoundKind) -> ChannelEstimate:
    """Effective channel from the sender's qubit to the collaboratively decoded qubit.

    The round map is evaluated on the operator basis ``|i><j|`` (the map is
    linear), assembled into a Choi matrix, checked for complete positivity and
    trace preservation, and expressed in the Pauli basis.
    """
    kind = RoundKind(kind)
    n = carrier.n_qubits - 1
    if n < 2:
        raise ValueError("carrier needs the sender and at least two receivers")
    weights, off = pauli_weights(channel_choi(carrier, kind))

    # register-level statistics on the basis inputs
    v = _encoder(kind, n)
    block = 0.0
    pattern_w = np.zeros(1 << n)
    for q in (0, 1):
        e = np.zeros((2, 2), dtype=complex)
        e[q, q] = 1.0
        reg = _round_map_raw(carrier.entries, e, kind, n)
        block += 0.5 * (1.0 - np.vdot(v[:, q], reg @ v[:, q]).real)
        if kind is RoundKind.GHZ:
            sent = (1 << n) - 1 if q else 0
            diag = np.real(np.diag(reg))
            for x in range(1 << n):
                pattern_w[x] += 0.5 * diag[sent ^ x]
    slot_flip = patterns = None
    if kind is RoundKind.GHZ:
        patterns = {format(x, f"0{n}b"): float(pattern_w[x]) for x in range(1 << n)}
        slot_flip = tuple(
            float(sum(w for x, w in enumerate(pattern_w) if x >> (n - 1 - k) & 1)) for k in range(n)
        )
    return ChannelEstimate(
        weights=weights,
        block_error=float(block),
        slot_flip=slot_flip,
        patterns=patterns,
        off_diagonal=off,
        kind=kind,
    )


# --- operator identities ----------------------------------------------------------


@dataclass(frozen=True)
class IdentityCheck:
    name: str
    residual: float
    passed: bool


def _pauli_op(letters: dict[int, str], n: int) -> np.ndarray:
    ops = [dk.PAULIS[letters.get(q, "I")] for q in range(n)]
    return functools.reduce(np.kron, ops)


def omega(kind: RoundKind, n_receivers: int = 2) -> np.ndarray:
    """Dense matrix of the round's CNOT word on the full register."""
    layout = make_layout(n_receivers)
    return circuit_matrix(round_word(kind, layout), layout.n_qubits).real


def check_identity(name: str, lhs: np.ndarray, rhs: np.ndarray, tol: float = 1e-12) -> IdentityCheck:
    r = float(np.max(np.abs(lhs - rhs)))
    return IdentityCheck(name, r, r <= tol)


def _ops(spec: str, layout: RegisterLayout) -> np.ndarray:
    """Product of Paulis like ``"X_A X_1"`` on the layout."""
    letters = {}
    for tok in spec.split():
        p, lab = tok.split("_")
        letters[layout.index(lab)] = p
    return _pauli_op(letters, layout.n_qubits)


def conjugation_identities_check(tol: float = 1e-12) -> list[IdentityCheck]:
    """Verify the round-word commutation relations as 32x32 matrix identities."""
    layout = make_layout(2)
    oe, oo = omega(RoundKind.GHZ), omega(RoundKind.PARITY)
    ops = functools.partial(_ops, layout=layout)
    checks = [
        check_identity("Oe X_A = X_A X_1 X_2 Oe", oe @ ops("X_A"), ops("X_A X_1 X_2") @ oe, tol),
        check_identity("Oe X_B = X_B X_1 Oe", oe @ ops("X_B"), ops("X_B X_1") @ oe, tol),
        check_identity("Oe X_C = X_C X_2 Oe", oe @ ops("X_C"), ops("X_C X_2") @ oe, tol),
    ]
    for site in "ABC":
        checks.append(check_identity(f"Oo Z_{site} = Z_{site} Oo", oo @ ops(f"Z_{site}"), ops(f"Z_{site}") @ oo, tol))
    checks.append(
        check_identity("Oo X_A X_B X_C = X_2 X_A X_B X_C Oo", oo @ ops("X_A X_B X_C"), ops("X_2 X_A X_B X_C") @ oo, tol)
    )
    # X^(i) table: Oe |G_i>|qq> = |G_i> X^(i)|qq>, also for the primed octet
    flipped_slots = {"0": (), "A": (0, 1), "B": (0,), "C": (1,)}
    for lab in ghz_labels():
        flip = _pauli_op({k: "X" for k in flipped_slots[lab.site]}, 2)
        g = ghz_basis_state(lab).amplitudes
        tag = "G'" if lab.primed else "G"
        for q in (0, 1):
            qq = PureState.basis(f"{q}{q}").amplitudes
            checks.append(
                check_identity(
                    f"Oe |{tag}_{lab.site}>|{q}{q}> = |{tag}_{lab.site}> X^({lab.site})|{q}{q}>",
                    oe @ np.kron(g, qq),
                    np.kron(g, flip @ qq),
                    tol,
                )
            )
    return checks


def carrier_reference(kind: RoundKind, n_receivers: int = 2) -> PureState:
    """Noiseless carrier of a round kind."""
    if RoundKind(kind) is RoundKind.GHZ:
        return ghz_state(n_receivers + 1)
    return parity_state(n_receivers + 1, 0)


def round_carrier(noise: NoiseSpec, kind: RoundKind, n_receivers: int = 2) -> DensityMatrix:
    """Carrier met by a round of ``kind`` when contamination happened before round 0.

    Rounds leave the carrier unchanged, so this is the noisy GHZ carrier for GHZ
    rounds and its Hadamard image for parity rounds.
    """
    rho = noisy_carrier(noise, n_receivers + 1)
    return rho if RoundKind(kind) is RoundKind.GHZ else hadamard_step(rho)
