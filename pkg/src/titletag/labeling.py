"""BIOES label scheme, chunk recovery, gazetteer auto-tagging and CoNLL IO.

Thirteen labels: O plus the four positional prefixes (B/I/E/S) for each of
RES, FUN and LOC. Canonical label order puts O at index 0 so deterministic
argmax tie-breaking favors the empty label.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import NamedTuple, Sequence

from .corpus import Title
from .errors import FormatError
from .gazetteer import CoarseTag, Gazetteer


class Prefix(str, Enum):
    B = "B"
    I = "I"
    E = "E"
    S = "S"
    NONE = ""


@dataclass(frozen=True)
class BioesLabel:
    """A positional prefix plus a coarse tag; the outside label is prefix-free."""

    prefix: Prefix
    tag: CoarseTag

    def __post_init__(self) -> None:
        if (self.tag is CoarseTag.O) != (self.prefix is Prefix.NONE):
            raise ValueError(f"invalid label: prefix {self.prefix!r} with tag {self.tag!r}")

    def render(self) -> str:
        if self.tag is CoarseTag.O:
            return "O"
        return f"{self.prefix.value}-{self.tag.value}"

    def __str__(self) -> str:
        return self.render()

    @property
    def is_outside(self) -> bool:
        return self.tag is CoarseTag.O

    @classmethod
    def parse(cls, text: str) -> "BioesLabel":
        if text == "O":
            return OUTSIDE
        if len(text) > 2 and text[1] == "-":
            try:
                return cls(Prefix(text[0]), CoarseTag(text[2:]))
            except ValueError:
                pass
        raise ValueError(f"not a BIOES label: {text!r}")


OUTSIDE = BioesLabel(Prefix.NONE, CoarseTag.O)

ENTITY_TAGS = (CoarseTag.RES, CoarseTag.FUN, CoarseTag.LOC)

ALL_LABELS: tuple[BioesLabel, ...] = (OUTSIDE,) + tuple(
    BioesLabel(prefix, tag)
    for tag in ENTITY_TAGS
    for prefix in (Prefix.B, Prefix.I, Prefix.E, Prefix.S)
)
LABEL_STRINGS: tuple[str, ...] = tuple(label.render() for label in ALL_LABELS)
LABEL_INDEX: dict[str, int] = {s: i for i, s in enumerate(LABEL_STRINGS)}
N_LABELS = len(ALL_LABELS)


@dataclass(frozen=True)
class LabeledSequence:
    """Tokens with one BIOES label each."""

    tokens: tuple[str, ...]
    labels: tuple[BioesLabel, ...]

    def __post_init__(self) -> None:
        if len(self.tokens) != len(self.labels):
            raise ValueError(
                f"length mismatch: {len(self.tokens)} tokens vs {len(self.labels)} labels"
            )

    @property
    def label_strings(self) -> tuple[str, ...]:
        return tuple(label.render() for label in self.labels)

    def label_ids(self) -> list[int]:
        return [LABEL_INDEX[label.render()] for label in self.labels]


class Chunk(NamedTuple):
    tag: CoarseTag
    start: int
    end: int  # inclusive


class IllegalTransitionError(ValueError):
    """A label sequence violates the BIOES grammar under STRICT decoding."""

    def __init__(self, message: str, position: int):
        self.position = position
        super().__init__(f"position {position}: {message}")


def encode_bioes(coarse: Sequence[CoarseTag]) -> tuple[BioesLabel, ...]:
    """Encode coarse per-token tags as BIOES labels over maximal same-tag runs."""
    if not coarse:
        raise ValueError("cannot encode an empty tag sequence")
    out: list[BioesLabel] = []
    i, n = 0, len(coarse)
    while i < n:
        tag = coarse[i]
        j = i
        while j + 1 < n and coarse[j + 1] == tag:
            j += 1
        if tag is CoarseTag.O:
            out.extend([OUTSIDE] * (j - i + 1))
        elif j == i:
            out.append(BioesLabel(Prefix.S, tag))
        else:
            out.append(BioesLabel(Prefix.B, tag))
            out.extend(BioesLabel(Prefix.I, tag) for _ in range(i + 1, j))
            out.append(BioesLabel(Prefix.E, tag))
        i = j + 1
    return tuple(out)


def _decode_strict(labels: Sequence[BioesLabel]) -> list[Chunk]:
    chunks: list[Chunk] = []
    open_tag: CoarseTag | None = None
    open_start = -1
    for i, label in enumerate(labels):
        if label.prefix in (Prefix.NONE, Prefix.B, Prefix.S) and open_tag is not None:
            raise IllegalTransitionError(
                f"{label.render()} while a {open_tag.value} chunk is open", i
            )
        if label.prefix in (Prefix.I, Prefix.E):
            if open_tag is None:
                raise IllegalTransitionError(f"{label.render()} without an open chunk", i)
            if open_tag != label.tag:
                raise IllegalTransitionError(
                    f"{label.render()} inside an open {open_tag.value} chunk", i
                )
        if label.prefix is Prefix.B:
            open_tag, open_start = label.tag, i
        elif label.prefix is Prefix.S:
            chunks.append(Chunk(label.tag, i, i))
        elif label.prefix is Prefix.E:
            chunks.append(Chunk(open_tag, open_start, i))
            open_tag = None
    if open_tag is not None:
        raise IllegalTransitionError(f"{open_tag.value} chunk is never closed", len(labels) - 1)
    return chunks


def _decode_repair(labels: Sequence[BioesLabel]) -> list[Chunk]:
    # Orphan I/E open or close chunks in place; conflicting labels close the
    # open chunk at the previous position before acting. Deterministic by
    # construction: a single left-to-right pass.
    chunks: list[Chunk] = []
    open_tag: CoarseTag | None = None
    open_start = -1

    def close(end: int) -> None:
        nonlocal open_tag
        if open_tag is not None:
            chunks.append(Chunk(open_tag, open_start, end))
            open_tag = None

    for i, label in enumerate(labels):
        if label.prefix is Prefix.NONE:
            close(i - 1)
        elif label.prefix is Prefix.B:
            close(i - 1)
            open_tag, open_start = label.tag, i
        elif label.prefix is Prefix.S:
            close(i - 1)
            chunks.append(Chunk(label.tag, i, i))
        elif label.prefix is Prefix.I:
            if open_tag is None:
                open_tag, open_start = label.tag, i
            elif open_tag != label.tag:
                close(i - 1)
                open_tag, open_start = label.tag, i
        else:  # E
            if open_tag is None:
                chunks.append(Chunk(label.tag, i, i))
            elif open_tag == label.tag:
                chunks.append(Chunk(open_tag, open_start, i))
                open_tag = None
            else:
                close(i - 1)
                chunks.append(Chunk(label.tag, i, i))
    close(len(labels) - 1)
    return chunks


def decode_bioes(labels: Sequence[BioesLabel], policy: str = "strict") -> list[Chunk]:
    """Recover entity chunks from a BIOES label sequence.

    STRICT raises IllegalTransitionError (naming the first offending
    position) on any grammar violation; REPAIR recovers chunks from
    arbitrary label sequences. Use STRICT for gold data, REPAIR for model
    predictions.
    """
    if policy == "strict":
        return _decode_strict(labels)
    if policy == "repair":
        return _decode_repair(labels)
    raise ValueError(f"unknown decode policy: {policy!r}")


def auto_tag(title: Title, gazetteer: Gazetteer) -> LabeledSequence:
    """Label a title by gazetteer lookup and BIOES-encode the result."""
    if title.is_empty:
        raise ValueError("cannot tag an empty title")
    coarse = [gazetteer.lookup(token) for token in title.tokens]
    return LabeledSequence(tokens=title.tokens, labels=encode_bioes(coarse))


def dumps_conll(sequences: Sequence[LabeledSequence]) -> str:
    """Serialize sequences as token<TAB>label lines, blank line between titles."""
    blocks = []
    for seq in sequences:
        blocks.append("".join(f"{tok}\t{label.render()}\n" for tok, label in zip(seq.tokens, seq.labels)))
    return "\n".join(blocks)


def write_conll(sequences: Sequence[LabeledSequence], path: str | Path) -> None:
    Path(path).write_text(dumps_conll(sequences), encoding="utf-8")


def parse_conll(text: str, source: str = "<string>") -> list[LabeledSequence]:
    sequences: list[LabeledSequence] = []
    tokens: list[str] = []
    labels: list[BioesLabel] = []

    def flush() -> None:
        if tokens:
            sequences.append(LabeledSequence(tokens=tuple(tokens), labels=tuple(labels)))
            tokens.clear()
            labels.clear()

    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            flush()
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise FormatError(
                f"expected token<TAB>label, got {len(parts)} columns", path=source, line=lineno
            )
        token, label_text = parts
        if not token:
            raise FormatError("empty token", path=source, line=lineno)
        try:
            labels.append(BioesLabel.parse(label_text))
        except ValueError:
            raise FormatError(f"unknown label {label_text!r}", path=source, line=lineno) from None
        tokens.append(token)
    flush()
    return sequences


def read_conll(path: str | Path) -> list[LabeledSequence]:
    path = Path(path)
    return parse_conll(path.read_text(encoding="utf-8"), source=str(path))
