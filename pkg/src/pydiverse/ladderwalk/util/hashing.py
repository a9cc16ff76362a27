from __future__ import annotations

import base64
import hashlib


def _digest(*args) -> bytes:
    combined_hash = hashlib.sha256(b"LADDERWALK")
    for arg in args:
        arg_bytes = str(arg).encode("utf8")
        combined_hash.update(len(arg_bytes).to_bytes(length=8, byteorder="big"))
        combined_hash.update(arg_bytes)
    return combined_hash.digest()


def stable_hash(*args) -> str:
    """Compute a short, platform independent hash over the string forms of `args`

    :return: The first 20 characters of the lower case base32 sha256 digest.
    """
    return base64.b32encode(_digest(*args)).decode("ascii").lower()[:20]


def stable_int(*args, bits: int = 64) -> int:
    """Like :py:func:`stable_hash`, but returns an unsigned integer of `bits` bits.

    Used to derive random stream ids from human readable labels such as
    ``("trajectory", lam, replica)``. Length prefixing keeps ``("ab", "c")`` and
    ``("a", "bc")`` apart.
    """
    if not 0 < bits <= 256:
        raise ValueError(f"bits must be in (0, 256], got {bits}")
    return int.from_bytes(_digest(*args), byteorder="big") >> (256 - bits)
