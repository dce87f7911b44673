"""Numpy implementation of the Pauli-frame trial loop (fallback for ``_frame_core``)."""
import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def mix64(z):
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def uniforms(seed: int, start: int, trials: int) -> np.ndarray:
    base = mix64(np.uint64(seed))
    idx = np.arange(start + 1, start + trials + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        r = mix64(base + idx * GOLDEN)
    return (r >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


def run_trials(seed, start, trials, cum, term_x, term_z, term_sign, gates, n_qubits):
    u = uniforms(seed, start, trials)
    # first index with u < cum[i]; the last term absorbs rounding slack
    pick = np.minimum(np.searchsorted(cum, u, side="right"), len(cum) - 1)
    x = term_x[pick].copy()
    z = term_z[pick].copy()
    s = term_sign[pick].astype(np.int8)
    one = np.uint64(1)
    zero = np.uint64(0)
    for kind, a, b in gates:
        bc = one << np.uint64(n_qubits - 1 - a)
        if kind == 0:
            bt = one << np.uint64(n_qubits - 1 - b)
            x ^= np.where(x & bc, bt, zero)
            z ^= np.where(z & bt, bc, zero)
        elif kind == 1:
            xb = x & bc
            zb = z & bc
            s = np.where((xb != 0) & (zb != 0), -s, s).astype(np.int8)
            keep = ~bc
            x, z = (x & keep) | zb, (z & keep) | xb
        elif kind == 2:
            s = np.where(z & bc, -s, s).astype(np.int8)
        elif kind == 3:
            s = np.where(x & bc, -s, s).astype(np.int8)
    return x, z, s


def count_parity(words, mask) -> int:
    v = np.asarray(words, dtype=np.uint64) & np.uint64(mask)
    for shift in (32, 16, 8, 4, 2, 1):
        v = v ^ (v >> np.uint64(shift))
    return int((v & np.uint64(1)).sum())
