"""Bit-exact wire format for the two-party classification protocol.

Frame layout (big-endian throughout)::

    +--------+---------+------------+----------------+
    | length | msg_type| session_id |    payload     |
    | u32    | u8      | u64        | length bytes   |
    +--------+---------+------------+----------------+

``length`` counts payload bytes only, so an empty-payload frame is 13
bytes.  Big integers travel as a u32 byte count followed by the
magnitude, most significant byte first, with no leading zero byte (the
value 0 is encoded as count 0).  Strings are u16 length + UTF-8.

Message types and payloads::

    0x01 HELLO                version u16, modulus bigint
    0x02 ACCEPT               version u16, bit_bound u16, kappa u16,
                              out_dims u16, n_pixels u32, gallery u32,
                              class_count u16, chunk_size u32,
                              class_count x string (label names in code order)
    0x10 ENC_IMAGE_CHUNK      start u32, count u32, count x bigint
    0x11 BLINDED_FEATURES     count u16, count x bigint
    0x12 SQUARE_SUM           bigint
    0x20 BLINDED_Z            round u32, bigint
    0x21 REDUCED_Z_AND_CARRY  round u32, reduced bigint, bits u16,
                              bits x bigint (encrypted bits, LSB first)
    0x24 CARRY_MASKED         round u32, count u16, count x bigint
    0x25 CARRY_BIT            round u32, bigint
    0x22 MUL_BLIND            round u32, bigint, bigint
    0x23 MUL_RESULT           round u32, bigint
    0x30 RESULT_LABEL         bigint
    0x7F ERROR                code u16, message string

All bigint fields are Paillier ciphertext residues except HELLO's
modulus.  Every interactive subprotocol maps to a fixed message pair;
the carry subprotocol inside the secure modular reduction adds the
0x24/0x25 pair.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

from .errors import TransportError

HEADER = struct.Struct(">IBQ")
HEADER_SIZE = HEADER.size  # 13

MAX_FRAME_BYTES = 16 * 1024 * 1024

MSG_HELLO = 0x01
MSG_ACCEPT = 0x02
MSG_ENC_IMAGE_CHUNK = 0x10
MSG_BLINDED_FEATURES = 0x11
MSG_SQUARE_SUM = 0x12
MSG_BLINDED_Z = 0x20
MSG_REDUCED_Z_AND_CARRY = 0x21
MSG_MUL_BLIND = 0x22
MSG_MUL_RESULT = 0x23
MSG_CARRY_MASKED = 0x24
MSG_CARRY_BIT = 0x25
MSG_RESULT_LABEL = 0x30
MSG_ERROR = 0x7F

# ERROR frame codes
ERR_PHASE = 1
ERR_PARAMS = 2
ERR_MALFORMED = 3
ERR_INTERNAL = 4


@dataclass(frozen=True)
class Frame:
    msg_type: int
    session_id: int
    payload: bytes


def encode_frame(frame: Frame) -> bytes:
    if len(frame.payload) > MAX_FRAME_BYTES:
        raise TransportError(f"payload of {len(frame.payload)} bytes exceeds frame limit")
    return HEADER.pack(len(frame.payload), frame.msg_type, frame.session_id) + frame.payload


def decode_frame(data: bytes) -> Frame:
    if len(data) < HEADER_SIZE:
        raise TransportError(f"truncated frame: {len(data)} bytes, header needs {HEADER_SIZE}")
    length, msg_type, session_id = HEADER.unpack_from(data)
    if length > MAX_FRAME_BYTES:
        raise TransportError(f"declared payload of {length} bytes exceeds frame limit")
    if len(data) != HEADER_SIZE + length:
        raise TransportError(
            f"frame length mismatch: declared {length}, got {len(data) - HEADER_SIZE}"
        )
    return Frame(msg_type=msg_type, session_id=session_id, payload=data[HEADER_SIZE:])


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, count: int) -> bytes:
        if self.pos + count > len(self.data):
            raise TransportError("truncated payload")
        out = self.data[self.pos : self.pos + count]
        self.pos += count
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return int.from_bytes(self.take(2), "big")

    def u32(self) -> int:
        return int.from_bytes(self.take(4), "big")

    def bigint(self) -> int:
        count = self.u32()
        if count > len(self.data) - self.pos:
            raise TransportError("truncated bigint")
        raw = self.take(count)
        if count > 0 and raw[0] == 0:
            raise TransportError("non-minimal bigint encoding")
        return int.from_bytes(raw, "big")

    def string(self) -> str:
        count = self.u16()
        try:
            return self.take(count).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise TransportError("invalid UTF-8 string") from exc

    def done(self) -> None:
        if self.pos != len(self.data):
            raise TransportError(f"{len(self.data) - self.pos} trailing payload bytes")


def _u16(v: int) -> bytes:
    return v.to_bytes(2, "big")


def _u32(v: int) -> bytes:
    return v.to_bytes(4, "big")


def encode_bigint(v: int) -> bytes:
    if v < 0:
        raise TransportError("wire big integers are magnitudes; negatives do not occur")
    if v == 0:
        return _u32(0)
    raw = v.to_bytes((v.bit_length() + 7) // 8, "big")
    return _u32(len(raw)) + raw


def _string(s: str) -> bytes:
    raw = s.encode("utf-8")
    return _u16(len(raw)) + raw


# --- message dataclasses -------------------------------------------------

@dataclass(frozen=True)
class Hello:
    version: int
    modulus: int


@dataclass(frozen=True)
class Accept:
    version: int
    bit_bound: int
    kappa: int
    out_dims: int
    n_pixels: int
    gallery_size: int
    chunk_size: int
    label_names: tuple[str, ...]


@dataclass(frozen=True)
class EncImageChunk:
    start: int
    values: tuple[int, ...]


@dataclass(frozen=True)
class BlindedFeatures:
    values: tuple[int, ...]


@dataclass(frozen=True)
class SquareSum:
    value: int


@dataclass(frozen=True)
class BlindedZ:
    round_id: int
    value: int


@dataclass(frozen=True)
class ReducedZAndCarry:
    round_id: int
    reduced: int
    bits: tuple[int, ...]


@dataclass(frozen=True)
class CarryMasked:
    round_id: int
    values: tuple[int, ...]


@dataclass(frozen=True)
class CarryBit:
    round_id: int
    value: int


@dataclass(frozen=True)
class MulBlind:
    round_id: int
    a: int
    b: int


@dataclass(frozen=True)
class MulResult:
    round_id: int
    value: int


@dataclass(frozen=True)
class ResultLabel:
    value: int


@dataclass(frozen=True)
class ErrorMessage:
    code: int
    message: str


Message = (
    Hello | Accept | EncImageChunk | BlindedFeatures | SquareSum | BlindedZ
    | ReducedZAndCarry | CarryMasked | CarryBit | MulBlind | MulResult
    | ResultLabel | ErrorMessage
)

_TYPE_OF_MESSAGE = {
    Hello: MSG_HELLO,
    Accept: MSG_ACCEPT,
    EncImageChunk: MSG_ENC_IMAGE_CHUNK,
    BlindedFeatures: MSG_BLINDED_FEATURES,
    SquareSum: MSG_SQUARE_SUM,
    BlindedZ: MSG_BLINDED_Z,
    ReducedZAndCarry: MSG_REDUCED_Z_AND_CARRY,
    CarryMasked: MSG_CARRY_MASKED,
    CarryBit: MSG_CARRY_BIT,
    MulBlind: MSG_MUL_BLIND,
    MulResult: MSG_MUL_RESULT,
    ResultLabel: MSG_RESULT_LABEL,
    ErrorMessage: MSG_ERROR,
}


def message_type(msg: Message) -> int:
    return _TYPE_OF_MESSAGE[type(msg)]


def encode_message(msg: Message) -> bytes:
    """Payload bytes for a message (frame header not included)."""
    if isinstance(msg, Hello):
        return _u16(msg.version) + encode_bigint(msg.modulus)
    if isinstance(msg, Accept):
        head = (
            _u16(msg.version) + _u16(msg.bit_bound) + _u16(msg.kappa)
            + _u16(msg.out_dims) + _u32(msg.n_pixels) + _u32(msg.gallery_size)
            + _u16(len(msg.label_names)) + _u32(msg.chunk_size)
        )
        return head + b"".join(_string(name) for name in msg.label_names)
    if isinstance(msg, EncImageChunk):
        return (
            _u32(msg.start) + _u32(len(msg.values))
            + b"".join(encode_bigint(v) for v in msg.values)
        )
    if isinstance(msg, BlindedFeatures):
        return _u16(len(msg.values)) + b"".join(encode_bigint(v) for v in msg.values)
    if isinstance(msg, SquareSum):
        return encode_bigint(msg.value)
    if isinstance(msg, BlindedZ):
        return _u32(msg.round_id) + encode_bigint(msg.value)
    if isinstance(msg, ReducedZAndCarry):
        return (
            _u32(msg.round_id) + encode_bigint(msg.reduced)
            + _u16(len(msg.bits)) + b"".join(encode_bigint(v) for v in msg.bits)
        )
    if isinstance(msg, CarryMasked):
        return (
            _u32(msg.round_id) + _u16(len(msg.values))
            + b"".join(encode_bigint(v) for v in msg.values)
        )
    if isinstance(msg, CarryBit):
        return _u32(msg.round_id) + encode_bigint(msg.value)
    if isinstance(msg, MulBlind):
        return _u32(msg.round_id) + encode_bigint(msg.a) + encode_bigint(msg.b)
    if isinstance(msg, MulResult):
        return _u32(msg.round_id) + encode_bigint(msg.value)
    if isinstance(msg, ResultLabel):
        return encode_bigint(msg.value)
    if isinstance(msg, ErrorMessage):
        return _u16(msg.code) + _string(msg.message)
    raise TransportError(f"cannot encode {type(msg).__name__}")


def decode_message(msg_type: int, payload: bytes) -> Message:
    r = _Reader(payload)
    if msg_type == MSG_HELLO:
        msg = Hello(version=r.u16(), modulus=r.bigint())
    elif msg_type == MSG_ACCEPT:
        version = r.u16()
        bit_bound = r.u16()
        kappa = r.u16()
        out_dims = r.u16()
        n_pixels = r.u32()
        gallery_size = r.u32()
        class_count = r.u16()
        chunk_size = r.u32()
        names = tuple(r.string() for _ in range(class_count))
        msg = Accept(version=version, bit_bound=bit_bound, kappa=kappa,
                     out_dims=out_dims, n_pixels=n_pixels,
                     gallery_size=gallery_size, chunk_size=chunk_size,
                     label_names=names)
    elif msg_type == MSG_ENC_IMAGE_CHUNK:
        start = r.u32()
        count = r.u32()
        msg = EncImageChunk(start=start, values=tuple(r.bigint() for _ in range(count)))
    elif msg_type == MSG_BLINDED_FEATURES:
        count = r.u16()
        msg = BlindedFeatures(values=tuple(r.bigint() for _ in range(count)))
    elif msg_type == MSG_SQUARE_SUM:
        msg = SquareSum(value=r.bigint())
    elif msg_type == MSG_BLINDED_Z:
        msg = BlindedZ(round_id=r.u32(), value=r.bigint())
    elif msg_type == MSG_REDUCED_Z_AND_CARRY:
        round_id = r.u32()
        reduced = r.bigint()
        count = r.u16()
        msg = ReducedZAndCarry(round_id=round_id, reduced=reduced,
                               bits=tuple(r.bigint() for _ in range(count)))
    elif msg_type == MSG_CARRY_MASKED:
        round_id = r.u32()
        count = r.u16()
        msg = CarryMasked(round_id=round_id,
                          values=tuple(r.bigint() for _ in range(count)))
    elif msg_type == MSG_CARRY_BIT:
        msg = CarryBit(round_id=r.u32(), value=r.bigint())
    elif msg_type == MSG_MUL_BLIND:
        msg = MulBlind(round_id=r.u32(), a=r.bigint(), b=r.bigint())
    elif msg_type == MSG_MUL_RESULT:
        msg = MulResult(round_id=r.u32(), value=r.bigint())
    elif msg_type == MSG_RESULT_LABEL:
        msg = ResultLabel(value=r.bigint())
    elif msg_type == MSG_ERROR:
        msg = ErrorMessage(code=r.u16(), message=r.string())
    else:
        raise TransportError(f"unknown message type 0x{msg_type:02x}")
    r.done()
    return msg


def encode(msg: Message, session_id: int) -> bytes:
    """Full frame bytes for a message."""
    return encode_frame(Frame(msg_type=message_type(msg),
                              session_id=session_id,
                              payload=encode_message(msg)))


def decode(data: bytes) -> tuple[Message, int]:
    """Inverse of ``encode``: (message, session_id)."""
    frame = decode_frame(data)
    return decode_message(frame.msg_type, frame.payload), frame.session_id
