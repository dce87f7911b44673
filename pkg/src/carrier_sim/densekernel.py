"""Dense complex linear algebra over small multi-qubit registers.

Qubit position 0 is the leftmost tensor factor, i.e. the most significant bit of
the computational-basis index. All values are immutable; operations return new
objects.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

REGISTER_CAP = 14
STRUCT_TOL = 1e-10

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)
PAULIS = {"I": I2, "X": X, "Y": Y, "Z": Z}


class CapacityError(ValueError):
    """Register would exceed the configured qubit cap."""


class ValidationError(ValueError):
    """A state or operator fails a structural check (norm, trace, unitarity...)."""


class ConsistencyError(RuntimeError):
    """Internal cross-check failed, e.g. a reconstructed channel is not CPTP."""


def _n_qubits_for(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if dim < 1 or 1 << n != dim:
        raise ValidationError(f"dimension {dim} is not a power of two")
    return n


def _check_cap(n: int, cap: int = REGISTER_CAP) -> None:
    if n > cap:
        raise CapacityError(f"register of {n} qubits exceeds cap of {cap}")


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PureState:
    """Normalized amplitude vector of ``n_qubits`` qubits."""

    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        amps = _readonly(np.ravel(self.amplitudes))
        n = _n_qubits_for(amps.size)
        _check_cap(n)
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > STRUCT_TOL:
            raise ValidationError(f"state norm {norm!r} differs from 1")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_unnormalized(cls, amplitudes: Iterable[complex]) -> PureState:
        a = np.asarray(amplitudes, dtype=complex)
        return cls(a / np.linalg.norm(a))

    @classmethod
    def basis(cls, bits: str) -> PureState:
        """Computational basis state from a bit string such as ``"010"``."""
        a = np.zeros(1 << len(bits), dtype=complex)
        a[int(bits, 2)] = 1.0
        return cls(a)

    @property
    def n_qubits(self) -> int:
        return _n_qubits_for(self.amplitudes.size)

    def density(self) -> DensityMatrix:
        return DensityMatrix._trusted(np.outer(self.amplitudes, self.amplitudes.conj()))

    def inner(self, other: PureState) -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def __repr__(self) -> str:
        return f"PureState(n_qubits={self.n_qubits}, amplitudes={np.round(self.amplitudes, 6)})"


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Dense density matrix; Hermitian, unit trace and PSD up to ``STRUCT_TOL``."""

    entries: np.ndarray
    check_psd: bool = field(default=True, repr=False)

    def __post_init__(self) -> None:
        m = _readonly(self.entries)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValidationError(f"density matrix must be square, got shape {m.shape}")
        n = _n_qubits_for(m.shape[0])
        _check_cap(n)
        _validate_density(m, psd=self.check_psd)
        object.__setattr__(self, "entries", m)

    @classmethod
    def _trusted(cls, entries: np.ndarray) -> DensityMatrix:
        # Outputs of unitary conjugation / partial trace on valid inputs; skips the
        # eigen-decomposition but keeps the cheap Hermiticity and trace checks.
        return cls(entries, check_psd=False)

    @classmethod
    def maximally_mixed(cls, n_qubits: int) -> DensityMatrix:
        _check_cap(n_qubits)
        d = 1 << n_qubits
        return cls._trusted(np.eye(d, dtype=complex) / d)

    @property
    def n_qubits(self) -> int:
        return _n_qubits_for(self.entries.shape[0])

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)

    def validate(self) -> DensityMatrix:
        """Full check including positivity; returns ``self`` for chaining."""
        _validate_density(self.entries, psd=True)
        return self

    def allclose(self, other: DensityMatrix, atol: float = 1e-12) -> bool:
        return self.entries.shape == other.entries.shape and bool(
            np.allclose(self.entries, other.entries, atol=atol, rtol=0.0)
        )

    def __repr__(self) -> str:
        return f"DensityMatrix(n_qubits={self.n_qubits})"


def _validate_density(m: np.ndarray, psd: bool) -> None:
    herm_err = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
    if herm_err > STRUCT_TOL:
        raise ValidationError(f"matrix is not Hermitian (max deviation {herm_err:.3g})")
    tr = np.trace(m)
    if abs(tr - 1.0) > STRUCT_TOL:
        raise ValidationError(f"trace {tr!r} differs from 1")
    if psd:
        lo = np.linalg.eigvalsh(m).min()
        if lo < -STRUCT_TOL:
            raise ValidationError(f"matrix has negative eigenvalue {lo:.3g}")


@dataclass(frozen=True)
class RegisterLayout:
    """Role labels in tensor order, e.g. ``("A", "B", "C", "1", "2")``."""

    labels: tuple[str, ...]

    def __post_init__(self) -> None:
        labels = tuple(str(s) for s in self.labels)
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate labels in layout {labels}")
        object.__setattr__(self, "labels", labels)

    @property
    def n_qubits(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(str(label))
        except ValueError:
            raise ValueError(f"label {label!r} not in layout {self.labels}") from None

    def positions(self, labels: Iterable[str]) -> list[int]:
        return [self.index(s) for s in labels]

    def __contains__(self, label: object) -> bool:
        return str(label) in self.labels


# --- raw-array kernels ------------------------------------------------------
# These act on any 2^n x 2^n operator, not only density matrices, so that channels
# can be probed on the non-Hermitian operator basis |i><j|.


def conjugate(m: np.ndarray, u: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
    """Return ``U m U^dagger`` with ``u`` acting on ``targets`` of an ``n``-qubit register."""
    k = len(targets)
    t = m.reshape((2,) * (2 * n))
    ut = u.reshape((2,) * (2 * k))
    row_axes = list(targets)
    # rows: contract u's input legs with the targeted row legs, then restore order
    t = np.tensordot(ut, t, axes=(list(range(k, 2 * k)), row_axes))
    rest = [a for a in range(2 * n) if a not in row_axes]
    order = np.empty(2 * n, dtype=int)
    order[row_axes] = np.arange(k)
    order[rest] = np.arange(k, 2 * n)
    t = t.transpose(order)
    col_axes = [n + q for q in targets]
    t = np.tensordot(t, ut.conj(), axes=(col_axes, list(range(k, 2 * k))))
    rest = [a for a in range(2 * n) if a not in col_axes]
    order = np.empty(2 * n, dtype=int)
    order[rest] = np.arange(2 * n - k)
    order[col_axes] = np.arange(2 * n - k, 2 * n)
    return t.transpose(order).reshape(m.shape)


def apply_to_vector(v: np.ndarray, u: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
    k = len(targets)
    t = v.reshape((2,) * n)
    t = np.tensordot(u.reshape((2,) * (2 * k)), t, axes=(list(range(k, 2 * k)), list(targets)))
    rest = [a for a in range(n) if a not in targets]
    order = np.empty(n, dtype=int)
    order[list(targets)] = np.arange(k)
    order[rest] = np.arange(k, n)
    return t.transpose(order).reshape(v.shape)


def cnot_permutation(n: int, control: int, target: int) -> np.ndarray:
    """Index map ``perm`` with ``(C v)[i] = v[perm[i]]`` for a CNOT on ``n`` qubits."""
    idx = np.arange(1 << n)
    cbit = 1 << (n - 1 - control)
    tbit = 1 << (n - 1 - target)
    return np.where(idx & cbit, idx ^ tbit, idx)


def compose_permutations(perms: Sequence[np.ndarray]) -> np.ndarray:
    """Permutation of the circuit that applies ``perms[0]`` first."""
    total = np.arange(perms[0].size)
    for p in perms:
        # (P_k ... P_1 v)[i] = v[p_1[p_2[...p_k[i]]]]
        total = total[p]
    return total


def permute(m: np.ndarray, perm: np.ndarray) -> np.ndarray:
    return m[np.ix_(perm, perm)]


def reduce(m: np.ndarray, keep: Sequence[int], n: int) -> np.ndarray:
    keep = sorted(keep)
    drop = [q for q in range(n) if q not in keep]
    dk, dd = 1 << len(keep), 1 << len(drop)
    t = m.reshape((2,) * (2 * n))
    t = t.transpose(keep + drop + [n + q for q in keep] + [n + q for q in drop])
    t = t.reshape(dk, dd, dk, dd)
    return np.trace(t, axis1=1, axis2=3)


def embed(u: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
    """Full ``2^n``-dimensional matrix of ``u`` acting on ``targets``."""
    d = 1 << n
    cols = np.eye(d, dtype=complex)
    return np.stack([apply_to_vector(cols[:, j], u, targets, n) for j in range(d)], axis=1)


# --- public operations -------------------------------------------------------


def tensor(a: DensityMatrix, b: DensityMatrix, cap: int = REGISTER_CAP) -> DensityMatrix:
    """Kronecker product with ``a`` as the left (most significant) factor."""
    _check_cap(a.n_qubits + b.n_qubits, cap)
    return DensityMatrix._trusted(np.kron(a.entries, b.entries))


def _check_targets(targets: Sequence[int], n: int) -> list[int]:
    targets = [int(t) for t in targets]
    if len(set(targets)) != len(targets):
        raise ValueError(f"duplicate target qubits {targets}")
    for t in targets:
        if not 0 <= t < n:
            raise ValueError(f"target {t} out of range for {n}-qubit register")
    return targets


def apply_unitary(rho: DensityMatrix, u: np.ndarray, targets: Sequence[int]) -> DensityMatrix:
    u = np.asarray(u, dtype=complex)
    n = rho.n_qubits
    targets = _check_targets(targets, n)
    k = len(targets)
    if u.shape != (1 << k, 1 << k):
        raise ValidationError(f"gate shape {u.shape} does not match {k} targets")
    if not np.allclose(u.conj().T @ u, np.eye(1 << k), atol=STRUCT_TOL, rtol=0.0):
        raise ValidationError("gate is not unitary")
    return DensityMatrix._trusted(conjugate(rho.entries, u, targets, n))


def partial_trace(rho: DensityMatrix, keep: Iterable[int]) -> DensityMatrix:
    keep = sorted(set(int(q) for q in keep))
    if not keep:
        raise ValueError("partial_trace needs at least one kept qubit")
    n = rho.n_qubits
    _check_targets(keep, n)
    return DensityMatrix._trusted(reduce(rho.entries, keep, n))


def fidelity_pure(rho: DensityMatrix, psi: PureState) -> float:
    """Overlap <psi|rho|psi>."""
    if rho.dim != psi.amplitudes.size:
        raise ValueError(f"dimension mismatch: {rho.dim} vs {psi.amplitudes.size}")
    v = psi.amplitudes
    f = np.vdot(v, rho.entries @ v)
    if abs(f.imag) > 1e-12:
        raise ValidationError(f"fidelity has imaginary residue {f.imag:.3g}")
    return float(min(1.0, max(0.0, f.real)))


def trace_distance(a: DensityMatrix, b: DensityMatrix) -> float:
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    return float(0.5 * np.abs(np.linalg.eigvalsh(a.entries - b.entries)).sum())


def qubit(alpha: complex, beta: complex) -> PureState:
    return PureState(np.array([alpha, beta], dtype=complex))


def random_qubit(rng: np.random.Generator) -> PureState:
    """Haar-random single-qubit state."""
    v = rng.normal(size=2) + 1j * rng.normal(size=2)
    return PureState(v / np.linalg.norm(v))


def random_density(n_qubits: int, rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    d = 1 << n_qubits
    rank = rank or d
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    m = g @ g.conj().T
    return DensityMatrix(m / np.trace(m).real)
