"""Pauli-frame Monte Carlo engine.

A sampled carrier error is a Pauli word; the round circuit is Clifford, so the
word is pushed through it symbolically (``U w = w' U``) instead of evolving a
state. Only the message-slot part of ``w'`` matters for whether the delivered
qubit is flipped.

Words are stored as ``sign * prod_k X_k^{x_k} * prod_k Z_k^{z_k}`` with every X
factor written to the left of every Z factor. Qubit ``k`` of an ``n``-qubit
register is bit ``n - 1 - k`` of the masks, matching the dense basis order.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

from carrier_sim import _backend
from carrier_sim.densekernel import CNOT, H, X, Z, embed
from carrier_sim.states import RoundKind


class GateKind(enum.IntEnum):
    CNOT = 0
    H = 1
    X = 2
    Z = 3


@dataclass(frozen=True)
class Gate:
    kind: GateKind
    a: int
    b: int = -1

    @classmethod
    def cnot(cls, control: int, target: int) -> Gate:
        if control == target:
            raise ValueError("CNOT control and target must differ")
        return cls(GateKind.CNOT, control, target)

    @classmethod
    def h(cls, q: int) -> Gate:
        return cls(GateKind.H, q)

    @classmethod
    def x(cls, q: int) -> Gate:
        return cls(GateKind.X, q)

    @classmethod
    def z(cls, q: int) -> Gate:
        return cls(GateKind.Z, q)

    def qubits(self) -> tuple[int, ...]:
        return (self.a, self.b) if self.kind is GateKind.CNOT else (self.a,)


def _bit(n: int, q: int) -> int:
    return 1 << (n - 1 - q)


def _popcount(v: int) -> int:
    return bin(v).count("1")


@dataclass(frozen=True)
class PauliWord:
    n_qubits: int
    x_mask: int = 0
    z_mask: int = 0
    sign: int = 1

    def __post_init__(self) -> None:
        full = (1 << self.n_qubits) - 1
        if self.x_mask & ~full or self.z_mask & ~full:
            raise ValueError("mask has bits beyond the register")
        if self.sign not in (1, -1):
            raise ValueError(f"sign must be +1 or -1, got {self.sign!r}")

    @classmethod
    def identity(cls, n_qubits: int) -> PauliWord:
        return cls(n_qubits)

    @classmethod
    def from_label(cls, label: str, sign: int = 1) -> PauliWord:
        """Word from a string like ``"XIZ"``.

        Only I, X and Z are accepted: ``Y = iXZ`` needs an imaginary phase,
        which the real sign cannot carry.
        """
        n = len(label)
        x = z = 0
        for q, ch in enumerate(label.upper()):
            if ch == "X":
                x |= _bit(n, q)
            elif ch == "Z":
                z |= _bit(n, q)
            elif ch != "I":
                raise ValueError(f"unsupported Pauli letter {ch!r}")
        return cls(n, x, z, sign)

    @classmethod
    def on(cls, n_qubits: int, xs: Iterable[int] = (), zs: Iterable[int] = (), sign: int = 1) -> PauliWord:
        x = reduce(lambda acc, q: acc ^ _bit(n_qubits, q), xs, 0)
        z = reduce(lambda acc, q: acc ^ _bit(n_qubits, q), zs, 0)
        return cls(n_qubits, x, z, sign)

    def x_on(self, q: int) -> bool:
        return bool(self.x_mask & _bit(self.n_qubits, q))

    def z_on(self, q: int) -> bool:
        return bool(self.z_mask & _bit(self.n_qubits, q))

    def is_identity(self) -> bool:
        return self.x_mask == 0 and self.z_mask == 0

    def __mul__(self, other: PauliWord) -> PauliWord:
        if other.n_qubits != self.n_qubits:
            raise ValueError("register size mismatch")
        # Z^{z1} X^{x2} = (-1)^{|z1 & x2|} X^{x2} Z^{z1}
        swap = _popcount(self.z_mask & other.x_mask) & 1
        return PauliWord(
            self.n_qubits,
            self.x_mask ^ other.x_mask,
            self.z_mask ^ other.z_mask,
            self.sign * other.sign * (-1 if swap else 1),
        )

    def restrict(self, qubits: Sequence[int]) -> PauliWord:
        """Sub-word on ``qubits`` (sign kept), re-indexed in the given order."""
        m = len(qubits)
        x = z = 0
        for j, q in enumerate(qubits):
            if self.x_on(q):
                x |= _bit(m, j)
            if self.z_on(q):
                z |= _bit(m, j)
        return PauliWord(m, x, z, self.sign)

    def embed(self, n_qubits: int, positions: Sequence[int]) -> PauliWord:
        """Place this word on ``positions`` of a larger register."""
        if len(positions) != self.n_qubits:
            raise ValueError("need one position per qubit")
        xs = [positions[j] for j in range(self.n_qubits) if self.x_on(j)]
        zs = [positions[j] for j in range(self.n_qubits) if self.z_on(j)]
        return PauliWord.on(n_qubits, xs, zs, self.sign)

    def label(self) -> str:
        # a qubit carrying both factors is shown as "(XZ)"
        out = []
        for q in range(self.n_qubits):
            xq, zq = self.x_on(q), self.z_on(q)
            out.append("(XZ)" if xq and zq else "X" if xq else "Z" if zq else "I")
        return ("-" if self.sign < 0 else "") + "".join(out)

    def matrix(self) -> np.ndarray:
        xs = np.array([[1.0]], dtype=complex)
        zs = np.array([[1.0]], dtype=complex)
        for q in range(self.n_qubits):
            xs = np.kron(xs, X if self.x_on(q) else np.eye(2))
            zs = np.kron(zs, Z if self.z_on(q) else np.eye(2))
        return self.sign * (xs @ zs)

    def __repr__(self) -> str:
        return f"PauliWord({self.label()!r})"


def conjugate_through(word: PauliWord, circuit: Sequence[Gate]) -> PauliWord:
    """Return ``w'`` with ``U w = w' U`` where ``U`` applies ``circuit`` in order."""
    n = word.n_qubits
    x, z, s = word.x_mask, word.z_mask, word.sign
    for g in circuit:
        if not isinstance(g, Gate):
            raise ValueError(f"unsupported gate {g!r}")
        for q in g.qubits():
            if not 0 <= q < n:
                raise ValueError(f"gate {g} acts outside the {n}-qubit register")
        bc = _bit(n, g.a)
        if g.kind is GateKind.CNOT:
            bt = _bit(n, g.b)
            if x & bc:
                x ^= bt
            if z & bt:
                z ^= bc
        elif g.kind is GateKind.H:
            xb, zb = x & bc, z & bc
            if xb and zb:
                s = -s
            x = (x & ~bc) | zb
            z = (z & ~bc) | xb
        elif g.kind is GateKind.X:
            if z & bc:
                s = -s
        elif g.kind is GateKind.Z:
            if x & bc:
                s = -s
        else:
            raise ValueError(f"unsupported gate kind {g.kind!r}")
    return PauliWord(n, x, z, s)


def circuit_matrix(circuit: Sequence[Gate], n: int) -> np.ndarray:
    gates = {GateKind.H: H, GateKind.X: X, GateKind.Z: Z, GateKind.CNOT: CNOT}
    u = np.eye(1 << n, dtype=complex)
    for g in circuit:
        u = embed(gates[g.kind], list(g.qubits()), n) @ u
    return u


# --- round circuits -----------------------------------------------------------


def round_circuit(kind, n_receivers: int = 2) -> list[Gate]:
    """Upload then download CNOTs on the ``(n_receivers + 1) + n_receivers`` register."""
    kind = RoundKind(kind)
    m = n_receivers + 1
    slots = list(range(m, m + n_receivers))
    if kind is RoundKind.GHZ:
        upload = [Gate.cnot(0, s) for s in slots]
    else:
        upload = [Gate.cnot(0, slots[0])]
    download = [Gate.cnot(1 + k, slots[k]) for k in range(n_receivers)]
    return upload + download


def hadamard_circuit(n_parties: int) -> list[Gate]:
    return [Gate.h(q) for q in range(n_parties)]


# --- sampling -------------------------------------------------------------------


@dataclass(frozen=True)
class TrialOutcome:
    kind: RoundKind
    message_word: PauliWord
    carrier_word: PauliWord

    @property
    def block_flipped(self) -> bool:
        """Any bit flip on the delivered message register."""
        return self.message_word.x_mask != 0

    @property
    def logical_flipped(self) -> bool:
        """Bit flip on the collaboratively decoded qubit."""
        return _logical_flip(self.message_word.x_mask, self.kind, self.message_word.n_qubits)


def _logical_mask(kind, n_slots: int) -> int:
    # product code: decoded value is slot 1; parity code: decoded value is the slot parity
    if RoundKind(kind) is RoundKind.GHZ:
        return _bit(n_slots, 0)
    return (1 << n_slots) - 1


def _logical_flip(x_mask: int, kind, n_slots: int) -> bool:
    return bool(_popcount(x_mask & _logical_mask(kind, n_slots)) & 1)


class UnsupportedNoise(TypeError):
    """Noise that is not a Pauli mixture on the carrier; use the dense engine."""


def _frame_inputs(noise, kind, n_receivers: int):
    terms = getattr(noise, "terms", None)
    if terms is None:
        raise UnsupportedNoise(f"{type(noise).__name__} is not a Pauli mixture")
    m = n_receivers + 1
    n = m + n_receivers
    if any(w.n_qubits != m for w, _ in terms):
        raise ValueError(f"mixture words must act on the {m} carrier qubits")
    kind = RoundKind(kind)
    words = [w.embed(n, list(range(m))) for w, _ in terms]
    if kind is RoundKind.PARITY:
        # carrier words are defined on the GHZ reference; the parity carrier is its H image
        words = [conjugate_through(w, hadamard_circuit(m)) for w in words]
    probs = np.array([p for _, p in terms], dtype=float)
    cum = np.cumsum(probs)
    cum[-1] = max(cum[-1], 1.0)
    gates = np.array([[g.kind, g.a, g.b] for g in round_circuit(kind, n_receivers)], dtype=np.int64)
    return (
        np.ascontiguousarray(cum),
        np.array([w.x_mask for w in words], dtype=np.uint64),
        np.array([w.z_mask for w in words], dtype=np.uint64),
        np.array([w.sign for w in words], dtype=np.int8),
        gates,
        n,
    )


def sample_trial(noise, kind, rng_seed: int, trial_index: int = 0, n_receivers: int = 2) -> TrialOutcome:
    """One trial; ``(rng_seed, trial_index)`` fully determines the outcome."""
    cum, tx, tz, ts, gates, n = _frame_inputs(noise, kind, n_receivers)
    x, z, s = _backend.kernel.run_trials(int(rng_seed) & (2**64 - 1), trial_index, 1, cum, tx, tz, ts, gates, n)
    full = PauliWord(n, int(x[0]), int(z[0]), int(s[0]))
    m = n_receivers + 1
    return TrialOutcome(
        kind=RoundKind(kind),
        message_word=full.restrict(list(range(m, n))),
        carrier_word=full.restrict(list(range(m))),
    )


@dataclass(frozen=True)
class FlipEstimate:
    """Monte Carlo flip statistics for one (noise, kind) cell."""

    rate: float
    std_error: float
    logical_rate: float
    logical_std_error: float
    slot_rates: tuple[float, ...]
    trials: int
    backend: str
    phase_rate: float = 0.0

    @property
    def block_rate(self) -> float:
        return self.rate


def _binomial_se(rate: float, trials: int) -> float:
    return math.sqrt(rate * (1.0 - rate) / trials)


def estimate_flip_rates(
    noise,
    kind,
    trials: int,
    seed: int,
    n_receivers: int = 2,
    kernel=None,
    chunk: int = 1 << 20,
) -> FlipEstimate:
    """Estimate message flip rates from ``trials`` independent Pauli-frame trials.

    ``rate`` counts any flip on the delivered message register (for GHZ rounds
    this is the probability that the pair ``|qq>`` does not arrive intact);
    ``logical_rate`` counts flips of the collaboratively decoded qubit and
    ``phase_rate`` counts trials leaving any Z factor on the message register. Trial
    ``t`` draws from a stream keyed on ``(seed, t)``, so results do not depend
    on chunking or execution order.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    kern = kernel or _backend.kernel
    cum, tx, tz, ts, gates, n = _frame_inputs(noise, kind, n_receivers)
    msg_mask = (1 << n_receivers) - 1  # message slots are the low bits
    logical = _logical_mask(kind, n_receivers)
    block = 0
    phase = 0
    logical_count = 0
    slot_counts = [0] * n_receivers
    seed = int(seed) & (2**64 - 1)
    for start in range(0, trials, chunk):
        count = min(chunk, trials - start)
        x, z, _ = kern.run_trials(seed, start, count, cum, tx, tz, ts, gates, n)
        msg = x & np.uint64(msg_mask)
        block += int(np.count_nonzero(msg))
        phase += int(np.count_nonzero(z & np.uint64(msg_mask)))
        logical_count += kern.count_parity(np.ascontiguousarray(msg), logical)
        for k in range(n_receivers):
            slot_counts[k] += int(np.count_nonzero(msg & np.uint64(_bit(n_receivers, k))))
    rate = block / trials
    lrate = logical_count / trials
    return FlipEstimate(
        rate=rate,
        std_error=_binomial_se(rate, trials),
        logical_rate=lrate,
        logical_std_error=_binomial_se(lrate, trials),
        slot_rates=tuple(c / trials for c in slot_counts),
        trials=trials,
        backend="compiled" if kern is _backend.compiled_kernel and kern is not None else "python",
        phase_rate=phase / trials,
    )

