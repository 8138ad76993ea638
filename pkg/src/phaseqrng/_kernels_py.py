"""Numpy implementations of the hot loops, used when the extension is absent."""

import numpy as np

_ROW_CHUNK_WORDS = 1 << 22


def toeplitz_parity(seed_words, x_words, m):
    """Row parities ``y[i] = popcount(window_i(seed) & x) mod 2``.

    ``window_i`` is the run of seed bits starting at bit ``i``; both inputs
    are LSB-first packed ``uint64`` words.
    """
    seed_words = np.asarray(seed_words, dtype=np.uint64)
    x_words = np.asarray(x_words, dtype=np.uint64)
    nw = x_words.shape[0]
    if seed_words.shape[0] < ((m - 1) >> 6) + nw + 1:
        raise ValueError("seed_words too short for m rows")
    y = np.empty(m, dtype=np.uint8)
    chunk = max(1, _ROW_CHUNK_WORDS // max(nw, 1))
    for s in range(64):
        rows = np.arange(s, m, 64)
        if rows.size == 0:
            break
        if s == 0:
            shifted = seed_words
        else:
            shifted = (seed_words[:-1] >> np.uint64(s)) | (seed_words[1:] << np.uint64(64 - s))
        windows = np.lib.stride_tricks.sliding_window_view(shifted, nw)
        for a0 in range(0, rows.size, chunk):
            a1 = min(a0 + chunk, rows.size)
            acc = np.bitwise_xor.reduce(windows[a0:a1] & x_words, axis=1)
            y[rows[a0:a1]] = np.bitwise_count(acc) & 1
    return y


def superpose(phase, delay, order, amplitude, theta):
    """``|exp(i phi[t]) - sum_k a^k exp(i(phi[t - k delay] - k theta))|^2``."""
    phase = np.asarray(phase, dtype=np.float64)
    warm = order * delay
    n_out = phase.shape[0] - warm
    if delay < 1 or order < 1 or n_out < 1:
        raise ValueError("phase path too short for delay * order")
    field = np.exp(1j * phase)
    delayed = np.zeros(n_out, dtype=np.complex128)
    for k in range(1, order + 1):
        start = warm - k * delay
        delayed += amplitude**k * np.exp(-1j * k * theta) * field[start:start + n_out]
    diff = field[warm:] - delayed
    return diff.real**2 + diff.imag**2
