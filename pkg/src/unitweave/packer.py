"""First-fit-decreasing packing of training samples into fixed-capacity bins,
plus the packed-corpus binary format.

Documents are concatenated with no separator (templates already carry their
own bos/eos); doc_offsets record where each document starts so consumers can
rebuild per-document attention masks. Samples longer than the capacity are
rejected outright: splitting an interleaved sequence would break the
special-token grammar.

Corpus file layout (all integers little-endian):

    magic "USDM" | u32 version=1 | u64 layout hash | u32 capacity | u32 n_bins
    per bin: u32 n_tokens | u32 n_docs | u32 doc_offsets[n_docs]
             | u32 ids[n_tokens] | ceil(n_tokens/8) mask bytes (LSB-first)
    trailing u64 FNV-1a checksum of all preceding bytes
"""

import struct
from dataclasses import dataclass, field

from .errors import ChecksumError, DataError, LayoutHashError, PackError
from .hashing import Fnv1a64
from .vocab import VocabLayout, layout_hash

DEFAULT_CAPACITY = 8192

_MAGIC = b"USDM"
_VERSION = 1


@dataclass
class PackedBin:
    capacity: int
    ids: list = field(default_factory=list)
    loss_mask: list = field(default_factory=list)
    doc_offsets: list = field(default_factory=list)

    def fits(self, n: int) -> bool:
        return len(self.ids) + n <= self.capacity

    def add(self, ids, mask) -> None:
        self.doc_offsets.append(len(self.ids))
        self.ids.extend(ids)
        self.loss_mask.extend(mask)


def _as_doc(sample, index):
    ids = getattr(sample, "ids", None)
    if ids is None:
        raise DataError(f"sample {index} has no ids")
    mask = getattr(sample, "loss_mask", None)
    if mask is None:
        mask = [True] * len(ids)
    if len(mask) != len(ids):
        raise DataError(f"sample {index}: mask length {len(mask)} != ids length {len(ids)}")
    return ids, mask, getattr(sample, "id", str(index))


def pack_ffd(samples, capacity: int = DEFAULT_CAPACITY):
    """First-fit-decreasing: sort by length descending (stable), place each
    document into the first bin with room, else open a new bin."""
    docs = [_as_doc(s, i) for i, s in enumerate(samples)]
    overlong = [(sid, len(ids)) for ids, _, sid in docs if len(ids) > capacity]
    if overlong:
        raise PackError(
            f"{len(overlong)} sample(s) exceed capacity {capacity}: "
            + ", ".join(f"{sid} ({n} tokens)" for sid, n in overlong[:10]),
            sample_ids=[sid for sid, _ in overlong])
    order = sorted(range(len(docs)), key=lambda i: len(docs[i][0]), reverse=True)
    bins = []
    for i in order:
        ids, mask, _ = docs[i]
        for b in bins:
            if b.fits(len(ids)):
                b.add(ids, mask)
                break
        else:
            b = PackedBin(capacity=capacity)
            b.add(ids, mask)
            bins.append(b)
    return bins


def _pack_mask(mask) -> bytes:
    out = bytearray((len(mask) + 7) // 8)
    for i, m in enumerate(mask):
        if m:
            out[i >> 3] |= 1 << (i & 7)
    return bytes(out)


def _unpack_mask(data: bytes, n: int):
    return [bool((data[i >> 3] >> (i & 7)) & 1) for i in range(n)]


def write_corpus(bins, layout: VocabLayout, path) -> int:
    """Serialize bins; returns the trailing checksum."""
    if not bins:
        raise DataError("refusing to write an empty corpus")
    capacity = bins[0].capacity
    if any(b.capacity != capacity for b in bins):
        raise DataError("bins disagree on capacity")
    buf = bytearray()
    buf += _MAGIC
    buf += struct.pack("<IQII", _VERSION, layout_hash(layout), capacity, len(bins))
    for b in bins:
        buf += struct.pack("<II", len(b.ids), len(b.doc_offsets))
        buf += struct.pack(f"<{len(b.doc_offsets)}I", *b.doc_offsets)
        buf += struct.pack(f"<{len(b.ids)}I", *b.ids)
        buf += _pack_mask(b.loss_mask)
    digest = Fnv1a64()
    digest.update(bytes(buf))
    checksum = digest.digest()
    buf += struct.pack("<Q", checksum)
    with open(path, "wb") as f:
        f.write(bytes(buf))
    return checksum


@dataclass
class CorpusFile:
    version: int
    layout_hash: int
    capacity: int
    bins: list
    checksum: int


def read_corpus(path, layout: VocabLayout = None) -> CorpusFile:
    """Parse and verify a packed corpus; checks the checksum always and the
    layout hash when a layout is supplied."""
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < 24 + 8:
        raise ChecksumError(f"{path}: file too short to be a packed corpus")
    if raw[:4] != _MAGIC:
        raise DataError(f"{path}: bad magic {raw[:4]!r}")
    stored = struct.unpack("<Q", raw[-8:])[0]
    digest = Fnv1a64()
    digest.update(raw[:-8])
    if digest.digest() != stored:
        raise ChecksumError(f"{path}: checksum mismatch "
                            f"(stored {stored:016x}, computed {digest.digest():016x})")
    version, lhash, capacity, n_bins = struct.unpack("<IQII", raw[4:24])
    if version != _VERSION:
        raise DataError(f"{path}: unsupported corpus version {version}")
    if layout is not None and lhash != layout_hash(layout):
        raise LayoutHashError(
            f"{path}: corpus layout hash {lhash:016x} != expected {layout_hash(layout):016x}")
    off = 24
    bins = []
    for _ in range(n_bins):
        n_tokens, n_docs = struct.unpack_from("<II", raw, off)
        off += 8
        doc_offsets = list(struct.unpack_from(f"<{n_docs}I", raw, off))
        off += 4 * n_docs
        ids = list(struct.unpack_from(f"<{n_tokens}I", raw, off))
        off += 4 * n_tokens
        n_mask_bytes = (n_tokens + 7) // 8
        mask = _unpack_mask(raw[off:off + n_mask_bytes], n_tokens)
        off += n_mask_bytes
        bins.append(PackedBin(capacity=capacity, ids=ids, loss_mask=mask,
                              doc_offsets=doc_offsets))
    if off != len(raw) - 8:
        raise ChecksumError(f"{path}: {len(raw) - 8 - off} trailing bytes after last bin")
    return CorpusFile(version=version, layout_hash=lhash, capacity=capacity,
                      bins=bins, checksum=stored)


def iter_documents(bins):
    """Yield (ids, mask) per packed document."""
    for b in bins:
        offsets = list(b.doc_offsets) + [len(b.ids)]
        for lo, hi in zip(offsets, offsets[1:]):
            yield b.ids[lo:hi], b.loss_mask[lo:hi]
