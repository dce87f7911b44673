"""Noisy carriers: de-phasing (random phase kicks) and global depolarizing noise.

Both families leave the GHZ carrier diagonal in the GHZ basis, so each is also
available as a mixture of Pauli words acting on the ideal carrier; that form
seeds the Pauli-frame engine.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from carrier_sim.densekernel import DensityMatrix, PureState
from carrier_sim.pauliframe import PauliWord
from carrier_sim.states import ghz_state

NOISE_KINDS = ("none", "dephasing", "depolarizing", "kicks")


class KickAsymmetryWarning(UserWarning):
    """Kick samples look odd in their angles; the sine part of the integral is not negligible."""


@dataclass(frozen=True, eq=False)
class KickSamples:
    """Weighted sample set of phase-kick angle tuples (radians), one column per carrier qubit."""

    angles: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self) -> None:
        a = np.atleast_2d(np.asarray(self.angles, dtype=float))
        if a.ndim != 2 or a.shape[0] == 0:
            raise ValueError("angles must be a nonempty (samples, qubits) array")
        object.__setattr__(self, "angles", a)
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float).ravel()
            if w.shape[0] != a.shape[0]:
                raise ValueError("one weight per sample required")
            if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
                raise ValueError("weights must be nonnegative and sum to 1")
            object.__setattr__(self, "weights", w)

    @classmethod
    def point_mass(cls, *angles: float) -> KickSamples:
        return cls(np.array([angles], dtype=float), np.array([1.0]))

    @classmethod
    def from_sampler(
        cls, sampler: Callable[[np.random.Generator, int], np.ndarray], n_samples: int, seed: int
    ) -> KickSamples:
        return cls(sampler(np.random.default_rng(seed), n_samples))

    @classmethod
    def gaussian(cls, sigma: float, n_samples: int, seed: int, n_qubits: int = 3) -> KickSamples:
        """Independent zero-mean normal kicks with standard deviation ``sigma`` on each qubit."""
        rng = np.random.default_rng(seed)
        return cls(rng.normal(0.0, sigma, size=(n_samples, n_qubits)))

    @classmethod
    def from_csv(cls, path) -> KickSamples:
        """Rows ``theta_1,...,theta_k[,weight]``; a header line is allowed.

        A final ``weight`` column is recognized only through the header.
        """
        with open(path, encoding="utf-8") as fh:
            first = fh.readline()
        has_header = any(c.isalpha() for c in first)
        data = np.loadtxt(path, delimiter=",", skiprows=1 if has_header else 0, ndmin=2)
        if has_header and first.strip().split(",")[-1].strip().lower() == "weight":
            return cls(data[:, :-1], data[:, -1])
        return cls(data)

    def mirrored(self) -> KickSamples:
        return KickSamples(-self.angles, self.weights)

    @property
    def n_samples(self) -> int:
        return self.angles.shape[0]


@dataclass(frozen=True)
class KickEstimate:
    p: float
    std_error: float
    imag: float
    imag_std_error: float


def _weighted_mean_se(values: np.ndarray, weights: np.ndarray | None) -> tuple[float, float]:
    n = values.shape[0]
    if weights is None:
        mean = float(values.mean())
        se = float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        return mean, se
    mean = float(np.dot(weights, values))
    se = float(math.sqrt(np.dot(weights**2, (values - mean) ** 2)))
    return mean, se


def p_from_kicks(kicks: KickSamples) -> KickEstimate:
    """De-phasing strength produced by random ``exp(i theta_k Z_k)`` kicks on the GHZ carrier.

    ``p = (1 - E[exp(2i sum theta)]) / 2``. For kick distributions that are even in
    their arguments the imaginary part vanishes; it is estimated and reported, and a
    :class:`KickAsymmetryWarning` is raised when it exceeds three standard errors.
    """
    total = 2.0 * kicks.angles.sum(axis=1)
    c_mean, c_se = _weighted_mean_se(np.cos(total), kicks.weights)
    s_mean, s_se = _weighted_mean_se(np.sin(total), kicks.weights)
    if abs(s_mean) > 3 * s_se + 1e-12:
        warnings.warn(
            f"kick distribution is not symmetric: imaginary part {s_mean:.3g} "
            f"(standard error {s_se:.3g}) dropped from p",
            KickAsymmetryWarning,
            stacklevel=2,
        )
    p = 0.5 * (1.0 - c_mean)
    return KickEstimate(p=min(1.0, max(0.0, p)), std_error=0.5 * c_se, imag=s_mean, imag_std_error=s_se)


@dataclass(frozen=True)
class NoiseSpec:
    """Carrier contamination applied once, before round 0."""

    kind: str = "none"
    p: float = 0.0
    kicks: KickSamples | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"noise kind must be one of {NOISE_KINDS}, got {self.kind!r}")
        if self.kind in ("dephasing", "depolarizing"):
            _check_p(self.p, 1.0)
        if self.kind == "kicks" and self.kicks is None:
            raise ValueError("kick noise needs a kick sample set")

    def resolved(self) -> NoiseSpec:
        """Kick noise converted to the equivalent de-phasing strength; other kinds unchanged."""
        if self.kind != "kicks":
            return self
        return NoiseSpec("dephasing", p_from_kicks(self.kicks).p)


def _check_p(p: float, upper: float) -> None:
    if not (0.0 <= p <= upper) or math.isnan(p):
        raise ValueError(f"noise strength p={p!r} outside [0, {upper}]")


def _proj(psi: PureState) -> np.ndarray:
    return np.outer(psi.amplitudes, psi.amplitudes.conj())


def dephased_carrier(p: float, n_parties: int = 3) -> DensityMatrix:
    """``(1-p)|GHZ><GHZ| + p|GHZ'><GHZ'|`` for ``0 <= p <= 1``."""
    _check_p(p, 1.0)
    return DensityMatrix(
        (1 - p) * _proj(ghz_state(n_parties, "+")) + p * _proj(ghz_state(n_parties, "-"))
    )


def dephased_carrier_kick_form(p: float, n_parties: int = 3) -> DensityMatrix:
    """``(1-2p)|GHZ><GHZ| + p|0..0><0..0| + p|1..1><1..1|``, a state only for ``p <= 1/2``."""
    _check_p(p, 0.5)
    d = 1 << n_parties
    m = (1 - 2 * p) * _proj(ghz_state(n_parties, "+"))
    m[0, 0] += p
    m[d - 1, d - 1] += p
    return DensityMatrix(m)


def depolarized_carrier(p: float, n_parties: int = 3) -> DensityMatrix:
    """``(1-p)|GHZ><GHZ| + p I/2^n``."""
    _check_p(p, 1.0)
    d = 1 << n_parties
    return DensityMatrix((1 - p) * _proj(ghz_state(n_parties, "+")) + p * np.eye(d) / d)


def noisy_carrier(spec: NoiseSpec, n_parties: int = 3) -> DensityMatrix:
    spec = spec.resolved()
    if spec.kind == "none":
        return DensityMatrix(_proj(ghz_state(n_parties, "+")))
    if spec.kind == "dephasing":
        return dephased_carrier(spec.p, n_parties)
    return depolarized_carrier(spec.p, n_parties)


@dataclass(frozen=True)
class PauliMixture:
    """Probability-weighted Pauli words acting on the ideal GHZ carrier."""

    terms: tuple[tuple[PauliWord, float], ...]

    def __post_init__(self) -> None:
        terms = tuple((w, float(p)) for w, p in self.terms)
        if not terms:
            raise ValueError("mixture needs at least one term")
        probs = np.array([p for _, p in terms])
        if np.any(probs < -1e-15) or abs(probs.sum() - 1.0) > 1e-9:
            raise ValueError("mixture probabilities must be nonnegative and sum to 1")
        object.__setattr__(self, "terms", terms)

    @property
    def n_qubits(self) -> int:
        return self.terms[0][0].n_qubits

    def apply_to(self, state: PureState) -> DensityMatrix:
        """Dense ``sum_w p_w w|s><s|w^dagger``."""
        rho = _proj(state)
        out = np.zeros_like(rho)
        for w, p in self.terms:
            m = w.matrix()
            out += p * m @ rho @ m.conj().T
        return DensityMatrix(out)


def _ghz_class_representatives(n: int) -> list[int]:
    """One X-mask per pair ``{S, complement(S)}``, preferring the smaller support
    and, on ties, the one without qubit 0."""
    full = (1 << n) - 1
    top = 1 << (n - 1)
    reps = []
    for s in range(1 << n):
        c = full ^ s
        ks, kc = bin(s).count("1"), bin(c).count("1")
        if ks < kc or (ks == kc and not s & top):
            reps.append(s)
    # identity first, then by support size, then by leftmost qubit
    return sorted(reps, key=lambda s: (bin(s).count("1"), -s))


def as_pauli_mixture(spec: NoiseSpec, n_parties: int = 3) -> PauliMixture:
    """Pauli-word form of a noisy GHZ carrier.

    De-phasing is ``Z_A`` with probability ``p``. Depolarizing puts weight
    ``p/2^n`` on each GHZ-basis projector, realized by ``X`` on the labeled sites
    for the (+) members and additionally ``Z_A`` for the (-) members; the identity
    word carries ``1 - p + p/2^n``.
    """
    if spec.kind == "kicks":
        raise NotImplementedError("convert kick noise with p_from_kicks / NoiseSpec.resolved() first")
    ident = PauliWord.identity(n_parties)
    if spec.kind == "none":
        return PauliMixture(((ident, 1.0),))
    p = spec.p
    if spec.kind == "dephasing":
        return PauliMixture(((ident, 1.0 - p), (PauliWord.on(n_parties, zs=[0]), p)))
    d = 1 << n_parties
    terms = []
    for primed in (False, True):
        for mask in _ghz_class_representatives(n_parties):
            w = PauliWord(n_parties, mask, 1 << (n_parties - 1) if primed else 0)
            weight = p / d
            if mask == 0 and not primed:
                weight += 1.0 - p
            terms.append((w, weight))
    return PauliMixture(tuple(terms))


def mixture_from_words(words: Sequence[tuple[str, float]]) -> PauliMixture:
    return PauliMixture(tuple((PauliWord.from_label(s), p) for s, p in words))
