"""Pure numpy scan kernels; reference semantics for the compiled ``_scan``.

Distances are accumulated in float32 over sub-quantizers in the fixed
order ``m = 0 .. M-1`` so every backend produces bitwise-identical sums.
"""

import numpy as np

INVALID_ID = np.uint64(0xFFFFFFFFFFFFFFFF)
ID_BITS = 48
ID_MASK = np.uint64((1 << ID_BITS) - 1)


def _accumulate(lut, codes):
    acc = np.zeros(codes.shape[0], dtype=np.float32)
    for m in range(codes.shape[1]):
        acc += lut[m, codes[:, m]]
    return acc


def scan_codes(lut, codes, ids):
    """Approximate distances for every non-padding slot.

    Returns ``(distances, stored_ids)`` for the valid slots in slot order.
    """
    valid = ids != INVALID_ID
    if not valid.all():
        codes = codes[valid]
        ids = ids[valid]
    return _accumulate(lut, codes), ids.copy()


def scan_misc(lut, codes, ids, visited):
    """Scan misc slots, then drop items whose embedded other list is visited.

    ``visited`` is a uint8 mask over list ids. Returns
    ``(distances, vector_ids, n_scanned)``; ``n_scanned`` counts every slot
    whose distance was computed, including dropped ones.
    """
    dist = _accumulate(lut, codes)
    other = (ids >> np.uint64(ID_BITS)).astype(np.int64) - 1
    keep = visited[other] == 0
    return dist[keep], ids[keep] & ID_MASK, codes.shape[0]
