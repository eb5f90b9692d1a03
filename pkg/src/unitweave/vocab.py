"""Unified token-id space for text, unit, and special tokens.

The id line is split into three contiguous regions:

    text     [0, T)            incl. four reserved control ids (bos/eos/sep_a/sep_b)
    special  [T, T+2)          correspond, continue
    unit     [T+2, T+2+K)

Control tokens default to ids 0-3 inside the text region; an imported
tokenizer vocabulary may remap them as long as they stay below T and are
pairwise distinct.
"""

from dataclasses import dataclass

from .errors import ConfigError, DomainError
from .hashing import fnv1a_64

TEXT = "text"
UNIT = "unit"
SPECIAL = "special"

# integer tags used in serialized sequences ({"tags": [0|1|2]})
TAG_TEXT = 0
TAG_UNIT = 1
TAG_SPECIAL = 2

TAG_OF_MODALITY = {TEXT: TAG_TEXT, UNIT: TAG_UNIT, SPECIAL: TAG_SPECIAL}
MODALITY_OF_TAG = {v: k for k, v in TAG_OF_MODALITY.items()}

DEFAULT_UNIT_COUNT = 10_000


@dataclass(frozen=True)
class VocabLayout:
    text_size: int
    unit_count: int = DEFAULT_UNIT_COUNT
    bos_id: int = 0
    eos_id: int = 1
    sep_a_id: int = 2
    sep_b_id: int = 3

    @property
    def correspond_id(self) -> int:
        return self.text_size

    @property
    def continue_id(self) -> int:
        return self.text_size + 1

    @property
    def unit_base(self) -> int:
        return self.text_size + 2

    @property
    def total_size(self) -> int:
        return self.text_size + 2 + self.unit_count

    @property
    def control_ids(self) -> tuple:
        return (self.bos_id, self.eos_id, self.sep_a_id, self.sep_b_id)


def build_layout(text_size: int, unit_count: int = DEFAULT_UNIT_COUNT,
                 control_ids=(0, 1, 2, 3)) -> VocabLayout:
    """Construct a layout; raises ConfigError when sizes cannot host the regions."""
    if text_size < 8:
        raise ConfigError(f"text_size={text_size} too small; need >= 8 to host control ids")
    if unit_count < 1:
        raise ConfigError(f"unit_count={unit_count} must be positive")
    if len(control_ids) != 4 or len(set(control_ids)) != 4:
        raise ConfigError(f"control ids must be 4 distinct ids, got {control_ids!r}")
    if any(not (0 <= c < text_size) for c in control_ids):
        raise ConfigError(f"control ids {control_ids!r} must lie in the text region [0, {text_size})")
    bos, eos, sep_a, sep_b = control_ids
    return VocabLayout(text_size=text_size, unit_count=unit_count,
                       bos_id=bos, eos_id=eos, sep_a_id=sep_a, sep_b_id=sep_b)


def modality_of(layout: VocabLayout, token_id: int) -> str:
    if not 0 <= token_id < layout.total_size:
        raise DomainError(f"token id {token_id} outside [0, {layout.total_size})")
    if token_id < layout.text_size:
        return TEXT
    if token_id < layout.unit_base:
        return SPECIAL
    return UNIT


def unit_to_id(layout: VocabLayout, unit: int) -> int:
    if not 0 <= unit < layout.unit_count:
        raise DomainError(f"unit index {unit} outside [0, {layout.unit_count})")
    return layout.unit_base + unit


def id_to_token(layout: VocabLayout, token_id: int):
    """Classify an id into a (modality, value) pair.

    text ids map to themselves (word-id resolution is the tokenizer's job),
    unit ids map back to the unit index, special ids map to their names.
    """
    mod = modality_of(layout, token_id)
    if mod == TEXT:
        return (TEXT, token_id)
    if mod == SPECIAL:
        name = "correspond" if token_id == layout.correspond_id else "continue"
        return (SPECIAL, name)
    return (UNIT, token_id - layout.unit_base)


def canonical_bytes(layout: VocabLayout) -> bytes:
    """Canonical serialization; the layout hash is FNV-1a over these bytes."""
    text = (
        f"text_size={layout.text_size}\n"
        f"unit_count={layout.unit_count}\n"
        f"bos={layout.bos_id}\n"
        f"eos={layout.eos_id}\n"
        f"sep_a={layout.sep_a_id}\n"
        f"sep_b={layout.sep_b_id}\n"
    )
    return text.encode("ascii")


def layout_hash(layout: VocabLayout) -> int:
    return fnv1a_64(canonical_bytes(layout))


def save_layout(layout: VocabLayout, path) -> None:
    with open(path, "wb") as f:
        f.write(canonical_bytes(layout))
        f.write(f"hash={layout_hash(layout):016x}\n".encode("ascii"))


def load_layout(path) -> VocabLayout:
    from .errors import ParseError

    fields = {}
    with open(path, "rb") as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.decode("ascii").strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, val = line.split("=", 1)
            fields[key] = val
    try:
        layout = build_layout(
            text_size=int(fields["text_size"]),
            unit_count=int(fields["unit_count"]),
            control_ids=(int(fields["bos"]), int(fields["eos"]),
                         int(fields["sep_a"]), int(fields["sep_b"])),
        )
        stored = int(fields["hash"], 16)
    except KeyError as e:
        raise ParseError(f"{path}: missing layout field {e}")
    except ValueError as e:
        raise ParseError(f"{path}: malformed layout field: {e}")
    if stored != layout_hash(layout):
        raise ParseError(f"{path}: layout hash mismatch (stored {stored:016x}, "
                         f"recomputed {layout_hash(layout):016x})")
    return layout
