"""
Bit strings exchanged over the noiseless links, and their flag framing.

Payloads are minimal binary representations of positive indices, so they
always start with 1. A lone "0" is the degenerate message. With unequal
epsilons the payload is preceded by a two-bit flag, "10" for the primed
scheme and "11" for the double-primed one.
"""
import enum
from dataclasses import dataclass
from typing import Tuple


class FramingError(ValueError):
    pass


@dataclass(frozen=True)
class BitString:
    bits: Tuple[int, ...]

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if any(b not in (0, 1) for b in bits):
            raise FramingError("bit strings hold only 0 and 1, got %r" % (self.bits,))
        object.__setattr__(self, 'bits', bits)

    @classmethod
    def from_str(cls, text: str) -> "BitString":
        if any(c not in "01" for c in text):
            raise FramingError("not a bit string: %r" % text)
        return cls(tuple(int(c) for c in text))

    def __len__(self):
        return len(self.bits)

    def __str__(self):
        return "".join(str(b) for b in self.bits)

    def __add__(self, other: "BitString") -> "BitString":
        return BitString(self.bits + other.bits)


DEGENERATE = BitString((0,))


def string_encode(m: int) -> BitString:
    """Shortest binary representation of m >= 1."""
    if int(m) != m or m < 1:
        raise ValueError("only positive integers have a bit-string index, got %r" % (m,))
    return BitString.from_str(format(int(m), "b"))


def string_decode(b: BitString) -> int:
    if len(b) == 0 or b.bits[0] != 1:
        raise FramingError("payload %r does not start with 1" % str(b))
    return int(str(b), 2)


class Frame(enum.Enum):
    DEGENERATE = "degenerate"
    PAYLOAD = "payload"
    PRIMED = "primed"
    DPRIMED = "dprimed"


FLAGS = {Frame.PRIMED: BitString((1, 0)), Frame.DPRIMED: BitString((1, 1))}


def frame_message(frame: Frame, payload: BitString = None) -> BitString:
    """Emit a message; a double-primed frame may carry no payload (a bare "11" flag)."""
    if frame is Frame.DEGENERATE:
        return DEGENERATE
    if frame is Frame.PAYLOAD:
        if payload is None:
            raise FramingError("a payload frame needs a payload")
        string_decode(payload)
        return payload
    if payload is None:
        if frame is Frame.PRIMED:
            raise FramingError("a primed frame needs a payload")
        return FLAGS[frame]
    string_decode(payload)
    return FLAGS[frame] + payload


def parse_message(b: BitString, flagged: bool) -> Tuple[Frame, BitString]:
    """Inverse of frame_message; ``flagged`` selects the unequal-epsilon framing."""
    text = str(b)
    if text == "0":
        return Frame.DEGENERATE, BitString(())
    if not text or text[0] != "1":
        raise FramingError("message %r starts with neither a payload nor a flag" % text)
    if not flagged:
        return Frame.PAYLOAD, b
    frame = Frame.PRIMED if text[:2] == "10" else Frame.DPRIMED if text[:2] == "11" else None
    rest = BitString(b.bits[2:])
    if frame is None or (frame is Frame.PRIMED and len(rest) == 0):
        raise FramingError("malformed flagged message %r" % text)
    if len(rest):
        string_decode(rest)
    return frame, rest
