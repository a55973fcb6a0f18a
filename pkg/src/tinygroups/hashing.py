"""Random-oracle stand-ins: SHA-256 truncated to 64-bit ring fractions."""

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1


def oracle(tag, data):
    """64-bit fraction ``H_tag(data)``; ``tag`` gives domain separation."""
    h = hashlib.sha256(tag + b"\x00" + data).digest()
    return int.from_bytes(h[:8], "big")


def int_bytes(x, width=8):
    return int(x).to_bytes(width, "big")


def slot_points(tag, leaders, slots):
    """Hash points ``h_tag(w, i)`` for every leader ``w`` and ``i = 1..slots``.

    Returns a ``(len(leaders), slots)`` uint64 array.
    """
    out = np.empty((len(leaders), slots), dtype=np.uint64)
    prefix = tag + b"\x00"
    sha = hashlib.sha256
    for r, w in enumerate(leaders):
        wb = int(w).to_bytes(8, "big")
        out[r] = [int.from_bytes(sha(prefix + wb + i.to_bytes(4, "big")).digest()[:8], "big")
                  for i in range(1, slots + 1)]
    return out


def slot_point(tag, w, i):
    return oracle(tag, int_bytes(w) + int(i).to_bytes(4, "big"))
