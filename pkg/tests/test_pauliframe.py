import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carrier_sim import _backend
from carrier_sim.densekernel import X, Z
from carrier_sim.noise import NoiseSpec, as_pauli_mixture, dephased_carrier, depolarized_carrier, mixture_from_words
from carrier_sim.pauliframe import (
    Gate,
    GateKind,
    PauliWord,
    UnsupportedNoise,
    circuit_matrix,
    conjugate_through,
    estimate_flip_rates,
    hadamard_circuit,
    round_circuit,
    sample_trial,
)
from carrier_sim.protocol import RoundKind, complete_channel, hadamard_step, omega

GHZ, PAR = RoundKind.GHZ, RoundKind.PARITY
N = 5


def word(label, sign=1):
    return PauliWord.from_label(label, sign)


def mixture(kind, p):
    return as_pauli_mixture(NoiseSpec(kind, p))


def carrier_for(kind, noise, p):
    rho = dephased_carrier(p) if noise == "dephasing" else depolarized_carrier(p)
    return rho if kind is GHZ else hadamard_step(rho)


# --- words -------------------------------------------------------------------


def test_word_basics():
    w = word("XIZ")
    assert w.x_on(0) and w.z_on(2) and not w.x_on(1)
    assert w.label() == "XIZ"
    assert (w * w).is_identity()
    assert PauliWord.on(3, xs=[0], zs=[0]).label() == "(XZ)II"
    assert word("X", -1).label() == "-X"
    with pytest.raises(ValueError):
        word("XYZ")
    with pytest.raises(ValueError):
        PauliWord(2, x_mask=0b100)
    with pytest.raises(ValueError):
        PauliWord(2, sign=2)


def test_word_product_sign():
    # Z X = -X Z
    assert (word("Z") * word("X")).sign == -1
    assert (word("X") * word("Z")).sign == 1
    assert np.allclose((word("Z") * word("X")).matrix(), Z @ X)


def test_restrict_and_embed_roundtrip():
    w = word("XZIZX")
    assert w.restrict([3, 4]).label() == "ZX"
    assert w.restrict([3, 4]).embed(5, [3, 4]) == word("IIIZX")
    with pytest.raises(ValueError):
        w.embed(5, [0])


words5 = st.builds(
    PauliWord,
    st.just(N),
    st.integers(0, 2**N - 1),
    st.integers(0, 2**N - 1),
    st.sampled_from([1, -1]),
)


@given(words5, words5, words5)
def test_word_product_associative(a, b, c):
    assert (a * b) * c == a * (b * c)


@given(words5, words5)
def test_word_product_matches_matrices(a, b):
    assert np.allclose((a * b).matrix(), a.matrix() @ b.matrix())


@given(words5)
def test_word_squares_to_plus_minus_identity(w):
    sq = w * w
    assert sq.is_identity()
    assert np.allclose(w.matrix() @ w.matrix(), sq.sign * np.eye(2**N))


# --- conjugation ----------------------------------------------------------------


def test_conjugate_examples():
    ghz_round = round_circuit(GHZ)
    assert conjugate_through(word("XIIII"), ghz_round) == word("XIIXX")
    # Z on a carrier qubit only ever sits on CNOT controls
    for q in (0, 1, 2):
        zq = PauliWord.on(N, zs=[q])
        assert conjugate_through(zq, round_circuit(PAR)) == zq
    assert conjugate_through(word("X"), [Gate.h(0)]) == word("Z")
    assert conjugate_through(word("Z"), [Gate.h(0)]) == word("X")
    assert conjugate_through(PauliWord.on(1, [0], [0]), [Gate.h(0)]).sign == -1


def test_conjugate_rules_single_gates():
    assert conjugate_through(word("XI"), [Gate.cnot(0, 1)]) == word("XX")
    assert conjugate_through(word("IZ"), [Gate.cnot(0, 1)]) == word("ZZ")
    assert conjugate_through(word("IX"), [Gate.cnot(0, 1)]) == word("IX")
    assert conjugate_through(word("Z"), [Gate.x(0)]) == word("Z", -1)
    assert conjugate_through(word("X"), [Gate.z(0)]) == word("X", -1)


def test_conjugate_errors():
    with pytest.raises(ValueError):
        conjugate_through(word("XII"), [Gate.cnot(0, 3)])
    with pytest.raises(ValueError):
        conjugate_through(word("XII"), ["CNOT"])
    with pytest.raises(ValueError):
        Gate.cnot(1, 1)


def test_round_circuits_match_dense_omega():
    for kind in (GHZ, PAR):
        assert np.allclose(circuit_matrix(round_circuit(kind), N), omega(kind), atol=1e-12)


gates5 = st.one_of(
    st.tuples(st.integers(0, N - 1), st.integers(0, N - 1))
    .filter(lambda t: t[0] != t[1])
    .map(lambda t: Gate.cnot(*t)),
    st.builds(Gate.h, st.integers(0, N - 1)),
    st.builds(Gate.x, st.integers(0, N - 1)),
    st.builds(Gate.z, st.integers(0, N - 1)),
)


@settings(max_examples=60, deadline=None)
@given(words5, st.lists(gates5, max_size=8))
def test_conjugate_is_exact_operator_identity(w, circuit):
    u = circuit_matrix(circuit, N)
    out = conjugate_through(w, circuit)
    assert np.allclose(u @ w.matrix(), out.matrix() @ u, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(words5, words5, st.sampled_from([GHZ, PAR]))
def test_conjugate_is_homomorphism(a, b, kind):
    circuit = hadamard_circuit(3) + round_circuit(kind)
    lhs = conjugate_through(a * b, circuit)
    rhs = conjugate_through(a, circuit) * conjugate_through(b, circuit)
    assert lhs == rhs
    u = circuit_matrix(circuit, N)
    assert np.allclose(u @ (a * b).matrix() @ u.conj().T, lhs.matrix(), atol=1e-12)


def test_gate_kind_codes_are_stable():
    # the compiled kernel hard-codes these integers
    assert [int(k) for k in GateKind] == [0, 1, 2, 3]


# --- sampling ---------------------------------------------------------------


def test_dephasing_ghz_never_flips():
    mix = mixture("dephasing", 0.4)
    for t in range(200):
        out = sample_trial(mix, GHZ, rng_seed=11, trial_index=t)
        assert not out.block_flipped and not out.logical_flipped
    est = estimate_flip_rates(mix, GHZ, trials=20_000, seed=3)
    assert est.rate == 0.0 and est.logical_rate == 0.0


def test_dephasing_parity_flips_with_z_word():
    mix = mixture("dephasing", 0.3)
    for t in range(200):
        out = sample_trial(mix, PAR, rng_seed=5, trial_index=t)
        # on the parity carrier the sampled Z_A becomes X_A, which lands on slot 1 only
        assert out.logical_flipped == (out.message_word.x_mask != 0)
    est = estimate_flip_rates(mix, PAR, trials=100_000, seed=5)
    assert abs(est.logical_rate - 0.3) < 3 * est.logical_std_error


def test_identity_word_never_flips():
    mix = mixture_from_words([("III", 1.0)])
    out = sample_trial(mix, PAR, rng_seed=1)
    assert out.message_word.is_identity() and out.carrier_word.is_identity()


def test_carrier_residual_stabilizes_carrier_family():
    # the residual carrier word maps the round-start reference to a member of the same basis
    for kind in (GHZ, PAR):
        mix = mixture("depolarizing", 0.9)
        seen = set()
        for t in range(300):
            out = sample_trial(mix, kind, rng_seed=2, trial_index=t)
            base = out.carrier_word
            if kind is PAR:
                base = conjugate_through(base, hadamard_circuit(3))
            seen.add(base.x_mask)
            # after undoing H the word is X on a GHZ class times optional Z_A
            assert base.z_mask in (0, 0b100)
        assert len(seen) > 1


def test_sample_trial_deterministic():
    mix = mixture("depolarizing", 0.5)
    a = [sample_trial(mix, GHZ, rng_seed=99, trial_index=t) for t in range(50)]
    b = [sample_trial(mix, GHZ, rng_seed=99, trial_index=t) for t in range(50)]
    assert a == b


def test_unsupported_noise():
    with pytest.raises(UnsupportedNoise):
        estimate_flip_rates(dephased_carrier(0.1), GHZ, trials=10, seed=0)
    with pytest.raises(ValueError):
        estimate_flip_rates(mixture("dephasing", 0.1), GHZ, trials=0, seed=0)
    with pytest.raises(ValueError):
        estimate_flip_rates(mixture_from_words([("II", 1.0)]), GHZ, trials=10, seed=0)


def test_zero_noise_rate_exactly_zero():
    for kind in (GHZ, PAR):
        for noise in ("dephasing", "depolarizing"):
            est = estimate_flip_rates(mixture(noise, 0.0), kind, trials=5_000, seed=8)
            assert est.rate == 0.0 and est.std_error == 0.0


@pytest.mark.parametrize("kind", [GHZ, PAR])
def test_no_phase_errors_reach_the_message(kind):
    # carrier qubits only ever control the round CNOTs, so Z never lands on a slot
    est = estimate_flip_rates(mixture("depolarizing", 0.8), kind, trials=20_000, seed=12)
    assert est.phase_rate == 0.0


def test_std_error_formula():
    est = estimate_flip_rates(mixture("depolarizing", 0.2), PAR, trials=10_000, seed=4)
    assert est.std_error == pytest.approx(np.sqrt(est.rate * (1 - est.rate) / 10_000), rel=1e-15)


@pytest.mark.parametrize("kind,expected", [(PAR, 0.1), (GHZ, 0.15)])
def test_depolarizing_examples(kind, expected):
    est = estimate_flip_rates(mixture("depolarizing", 0.2), kind, trials=100_000, seed=2024)
    assert abs(est.rate - expected) < 3 * est.std_error


def test_chunking_does_not_change_result():
    mix = mixture("depolarizing", 0.3)
    a = estimate_flip_rates(mix, GHZ, trials=10_007, seed=6)
    b = estimate_flip_rates(mix, GHZ, trials=10_007, seed=6, chunk=999)
    assert a == b


@pytest.mark.skipif(_backend.compiled_kernel is None, reason="compiled kernel not built")
@pytest.mark.parametrize("kind", [GHZ, PAR])
def test_backends_bit_identical(kind):
    mix = mixture("depolarizing", 0.4)
    fast = estimate_flip_rates(mix, kind, trials=50_000, seed=77, kernel=_backend.compiled_kernel)
    slow = estimate_flip_rates(mix, kind, trials=50_000, seed=77, kernel=_backend.python_kernel)
    assert fast.rate == slow.rate and fast.logical_rate == slow.logical_rate
    assert fast.slot_rates == slow.slot_rates
    assert fast.backend == "compiled" and slow.backend == "python"


@pytest.mark.skipif(_backend.compiled_kernel is None, reason="compiled kernel not built")
def test_backend_raw_words_identical():
    from carrier_sim.pauliframe import _frame_inputs

    cum, tx, tz, ts, gates, n = _frame_inputs(mixture("depolarizing", 0.7), PAR, 2)
    a = _backend.compiled_kernel.run_trials(3, 10, 4000, cum, tx, tz, ts, gates, n)
    b = _backend.python_kernel.run_trials(3, 10, 4000, cum, tx, tz, ts, gates, n)
    for u, v in zip(a, b):
        assert np.array_equal(u, v)


@pytest.mark.slow
@pytest.mark.parametrize("p", [0.1, 0.2, 0.4])
@pytest.mark.parametrize("noise", ["dephasing", "depolarizing"])
@pytest.mark.parametrize("kind", [GHZ, PAR])
def test_oracle_equivalence_with_dense(p, noise, kind):
    dense = complete_channel(carrier_for(kind, noise, p), kind)
    est = estimate_flip_rates(mixture(noise, p), kind, trials=100_000, seed=31)
    # decoded qubit flips agree with the dense p_X, register flips with the block error
    assert abs(est.logical_rate - dense.p_X) <= 3 * est.logical_std_error + 1e-15
    assert abs(est.rate - dense.block_error) <= 3 * est.std_error + 1e-15
    if dense.slot_flip is not None:
        for mc, exact in zip(est.slot_rates, dense.slot_flip):
            assert abs(mc - exact) <= 3 * np.sqrt(exact * (1 - exact) / est.trials) + 1e-15


@pytest.mark.parametrize("n_receivers", [3, 4])
def test_n_receiver_round_circuits(n_receivers):
    n = 2 * n_receivers + 1
    circuit = round_circuit(GHZ, n_receivers)
    out = conjugate_through(PauliWord.on(n, xs=[0]), circuit)
    assert out == PauliWord.on(n, xs=[0] + list(range(n_receivers + 1, n)))
    mix = as_pauli_mixture(NoiseSpec("dephasing", 0.2), n_parties=n_receivers + 1)
    est = estimate_flip_rates(mix, PAR, trials=20_000, seed=1, n_receivers=n_receivers)
    assert abs(est.logical_rate - 0.2) < 4 * est.logical_std_error


def test_backend_env_override():
    env = dict(os.environ, CARRIER_SIM_BACKEND="python")
    out = subprocess.run(
        [sys.executable, "-c", "from carrier_sim import _backend; print(_backend.BACKEND)"],
        env=env,
        capture_output=True,
        text=True,
        check=True,
    )
    assert out.stdout.strip() == "python"
