"""Per-trial cost of the Pauli-frame engine (compiled and numpy kernels) against
dense state-vector evolution of the same sampled trials.

    python benchmarks/bench_pauliframe.py --trials 1000000 --dense-trials 5000
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from carrier_sim import _backend
from carrier_sim import densekernel as dk
from carrier_sim.noise import NoiseSpec, as_pauli_mixture
from carrier_sim.pauliframe import estimate_flip_rates
from carrier_sim.protocol import RoundKind, carrier_reference, omega
from carrier_sim.states import parity_state


def dense_trials(mixture, kind: RoundKind, trials: int, seed: int) -> float:
    """Sample a carrier word per trial, evolve the 5-qubit state, read the block flip."""
    rng = np.random.default_rng(seed)
    words = [w.matrix() for w, _ in mixture.terms]
    probs = np.array([p for _, p in mixture.terms])
    u = omega(kind)
    base = carrier_reference(RoundKind.GHZ).amplitudes
    h3 = np.kron(np.kron(dk.H, dk.H), dk.H)
    msg = parity_state(2, 0).amplitudes if kind is RoundKind.PARITY else dk.PureState.basis("00").amplitudes
    flips = 0
    for idx in rng.choice(len(words), size=trials, p=probs):
        c = words[idx] @ base
        if kind is RoundKind.PARITY:
            c = h3 @ c
        slots = (np.abs((u @ np.kron(c, msg)).reshape(8, 4)) ** 2).sum(axis=0)
        flipped = slots[1] + slots[2] if kind is RoundKind.PARITY else 1.0 - slots[0]
        flips += rng.random() < flipped
    return flips / trials


def _time(fn, repeat: int) -> tuple[float, object]:
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=1_000_000)
    ap.add_argument("--dense-trials", type=int, default=5_000)
    ap.add_argument("--p", type=float, default=0.2)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    mix = as_pauli_mixture(NoiseSpec("depolarizing", args.p))
    print(f"depolarizing p={args.p}; block flip rate per round kind")
    print(f"{'kind':8s} {'engine':10s} {'trials':>9s} {'rate':>9s} {'ns/trial':>10s} {'vs dense':>9s}")
    for kind in (RoundKind.GHZ, RoundKind.PARITY):
        secs, rate = _time(lambda: dense_trials(mix, kind, args.dense_trials, args.seed), 1)
        dense_ns = 1e9 * secs / args.dense_trials
        print(f"{kind.value:8s} {'dense':10s} {args.dense_trials:9d} {rate:9.5f} {dense_ns:10.1f} {1.0:8.1f}x")
        kernels = [("numpy", _backend.python_kernel)]
        if _backend.compiled_kernel is not None:
            kernels.insert(0, ("compiled", _backend.compiled_kernel))
        for name, kern in kernels:
            secs, est = _time(
                lambda: estimate_flip_rates(mix, kind, args.trials, args.seed, kernel=kern), args.repeat
            )
            ns = 1e9 * secs / args.trials
            print(f"{kind.value:8s} {name:10s} {args.trials:9d} {est.rate:9.5f} {ns:10.1f} {dense_ns / ns:8.1f}x")
    if _backend.compiled_kernel is None:
        print("compiled kernel not built; install without CARRIER_SIM_PURE=1 to compare")


if __name__ == "__main__":
    main()
