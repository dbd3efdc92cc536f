"""Pure-numpy implementations of the hot kernels.

Same call signatures as the compiled extension `_kernels`; `kernels.py`
picks whichever is importable. Everything here operates on C-contiguous
float64 arrays and packed little-endian bit rows.
"""

import numpy as np

# Cap on the transient dense slab used when expanding packed bits (bytes).
_CHUNK_BYTES = 64 * 1024 * 1024


def fwht_inplace(a):
    """Unnormalized natural-order Walsh-Hadamard transform of each row.

    a: (batch, n) float64, C-contiguous, n a power of two. In place.
    """
    batch, n = a.shape
    h = 1
    buf = a
    while h < n:
        v = buf.reshape(batch, n // (2 * h), 2, h)
        x = v[:, :, 0, :] + v[:, :, 1, :]
        y = v[:, :, 0, :] - v[:, :, 1, :]
        # stack the butterfly halves back into the row layout
        buf = np.stack((x, y), axis=2).reshape(batch, n)
        h *= 2
    a[:] = buf
    return a


def _row_chunk(nbits):
    per_row = 8 * nbits
    return max(1, _CHUNK_BYTES // max(1, per_row))


def packed_matvec(packed, x, nbits, out):
    """out[r] = sum of x[c] over the set bits c of packed row r."""
    rows = packed.shape[0]
    step = _row_chunk(nbits)
    for start in range(0, rows, step):
        stop = min(rows, start + step)
        bits = np.unpackbits(packed[start:stop], axis=1, count=nbits,
                             bitorder="little")
        out[start:stop] = bits.astype(np.float64) @ x
    return out


def packed_rmatvec(packed, y, nbits, out):
    """out[c] = sum of y[r] over rows r whose bit c is set."""
    rows = packed.shape[0]
    out[:] = 0.0
    step = _row_chunk(nbits)
    for start in range(0, rows, step):
        stop = min(rows, start + step)
        bits = np.unpackbits(packed[start:stop], axis=1, count=nbits,
                             bitorder="little")
        out += bits.astype(np.float64).T @ y[start:stop]
    return out
