"""Compiled hot loop for stream recording.

The harness simulates cardinalities up to 10^7 per run, so insertion is
the one place where per-element Python costs matter. The kernel below is
the tracked insertion loop compiled with numba; it is verified
element-for-element against the pure-Python
:class:`~hllkit.core_sketch.TrackedSketch` in the test suite.
"""

import numba
import numpy as np


@numba.njit(cache=True)
def tracked_insert_many(regs, state, hashes, p, q):
    """Insert a batch of 64-bit hashes, maintaining multiplicity counts.

    ``state[0]`` is the minimum register value, ``state[1 + k]`` the
    number of registers holding value ``k``. Hashes whose rank cannot
    exceed the current minimum are rejected with a single comparison.
    """
    min_value = state[0]
    for i in range(hashes.size):
        h = hashes[i]
        idx = np.int64(h >> np.uint64(64 - p))
        bits = (h >> np.uint64(64 - p - q)) & np.uint64(
            (np.uint64(1) << np.uint64(q)) - np.uint64(1)
        )
        if bits == np.uint64(0):
            k = q + 1
        else:
            k = 1
            while (bits >> np.uint64(q - k)) & np.uint64(1) == np.uint64(0):
                k += 1
        if k <= min_value:
            continue
        old = np.int64(regs[idx])
        if k > old:
            state[1 + old] -= 1
            state[1 + k] += 1
            if old == min_value:
                while state[1 + min_value] == 0:
                    min_value += 1
            regs[idx] = np.uint8(k)
    state[0] = min_value
