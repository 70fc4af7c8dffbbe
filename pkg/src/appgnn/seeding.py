import hashlib


def derive_seed(seed: int, *labels) -> int:
    """Stable 32-bit sub-seed for a labelled stage, independent of other stages."""
    key = ":".join([str(int(seed))] + [str(x) for x in labels])
    return int.from_bytes(hashlib.sha256(key.encode()).digest()[:4], "little")
