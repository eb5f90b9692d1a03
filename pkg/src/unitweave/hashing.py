"""64-bit FNV-1a, used for file checksums and stable string keys."""

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a_64(data: bytes, h: int = _FNV_OFFSET) -> int:
    """Hash `data`, optionally continuing from a previous digest `h`."""
    for b in data:
        h ^= b
        h = (h * _FNV_PRIME) & _MASK64
    return h


class Fnv1a64:
    """Incremental FNV-1a digest for streaming writers/readers."""

    def __init__(self):
        self._h = _FNV_OFFSET

    def update(self, data: bytes) -> None:
        self._h = fnv1a_64(data, self._h)

    def digest(self) -> int:
        return self._h
