"""Interactive two-party classification over encrypted features.

The client owns the keypair and the image; the server owns the
quantized model.  The server computes the encrypted feature projection
and encrypted squared distances homomorphically, then runs an encrypted
argmin tournament whose comparisons go through a blinded modular
reduction with a carry subprotocol, most-significant-bit extraction,
and blinded multiplication for the selections.  The client only ever
sees statistically blinded values; the server only ever sees
ciphertexts.

The outcome matches ``quantizer.classify_plain_quantized`` exactly,
including the lowest-gallery-index tie break: the fold keeps the
running minimum as the second operand of each comparison, which is the
operand a tied comparison selects.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from . import wire
from .errors import CryptoError, ProtocolError, TransportError
from .paillier import (
    Ciphertext,
    PrivateKey,
    PublicKey,
    decrypt,
    encrypt,
    encryption_of_zero,
    hom_add,
    hom_add_plain,
    hom_scale,
    hom_sub,
    key_fingerprint,
)
from .quantizer import QuantizedModel
from .transport import Endpoint

PROTOCOL_VERSION = 1
DEFAULT_KAPPA = 40
DEFAULT_CHUNK_SIZE = 1024

_SYSTEM_RNG = random.SystemRandom()


@dataclass(frozen=True)
class SessionParams:
    """Negotiated sizes; every blinded intermediate must fit the key."""

    bit_bound: int        # distances are < 2**bit_bound
    kappa: int            # statistical blinding security parameter, bits
    out_dims: int
    n_pixels: int
    gallery_size: int
    class_count: int
    key_bits: int

    def validate(self) -> None:
        if self.bit_bound < 1 or self.kappa < 8:
            raise ProtocolError(
                f"invalid sizes: bit_bound={self.bit_bound}, kappa={self.kappa}"
            )
        if min(self.out_dims, self.n_pixels, self.gallery_size, self.class_count) < 1:
            raise ProtocolError("all dimensions must be positive")
        # blinded comparison operand z + r must stay clear of the modulus
        if not self.bit_bound + self.kappa + 2 < self.key_bits:
            raise ProtocolError(
                f"key too small: need bit_bound + kappa + 2 < {self.key_bits}"
            )
        # blinded squares and blinded products need roughly twice kappa
        need = (
            self.bit_bound + 2 * self.kappa + 4
            + max(self.out_dims, 2).bit_length()
        )
        if need > self.key_bits - 3:
            raise ProtocolError(
                f"key too small for blinded squares: need {need} bits, "
                f"key allows {self.key_bits - 3}"
            )


def params_for_model(model: QuantizedModel, key_bits: int,
                     kappa: int = DEFAULT_KAPPA) -> SessionParams:
    return SessionParams(
        bit_bound=model.bit_bound,
        kappa=kappa,
        out_dims=model.out_dims,
        n_pixels=model.dimension,
        gallery_size=model.gallery_size,
        class_count=model.class_count,
        key_bits=key_bits,
    )


def _abort(endpoint: Endpoint, code: int, text: str) -> ProtocolError:
    """Best-effort ERROR frame, then a local typed error to raise."""
    try:
        if endpoint.session_id is not None:
            endpoint.send(wire.ErrorMessage(code=code, message=text))
    except (TransportError, ProtocolError):
        pass
    return ProtocolError(text)


class ServerSession:
    """Per-connection server state: model, client key, single-use blinds."""

    def __init__(self, model: QuantizedModel | None,
                 rng: random.Random | None = None,
                 kappa: int = DEFAULT_KAPPA, chunk_size: int = DEFAULT_CHUNK_SIZE):
        self.model = model
        self.rng = rng or _SYSTEM_RNG
        self.kappa = kappa
        self.chunk_size = chunk_size
        self.pk: PublicKey | None = None
        self.params: SessionParams | None = None
        self.phase = "expect_hello"
        self.round_counter = 0
        self._blinds: dict[str, object] = {}
        self.blinds_log: list[tuple[str, object]] = []
        self._enc_pixels: list[Ciphertext] = []

    @classmethod
    def for_subprotocols(cls, public_key: PublicKey, bit_bound: int,
                         rng: random.Random | None = None,
                         kappa: int = DEFAULT_KAPPA,
                         class_count: int = 2) -> "ServerSession":
        """A model-free session for driving individual interactive ops."""
        session = cls(model=None, rng=rng, kappa=kappa)
        session.pk = public_key
        session.params = SessionParams(
            bit_bound=bit_bound, kappa=kappa, out_dims=1, n_pixels=1,
            gallery_size=2, class_count=class_count,
            key_bits=public_key.bit_length,
        )
        session.params.validate()
        session.phase = "round_idle"
        return session

    # -- blind bookkeeping: every blind is drawn once and consumed once --

    def draw_blind(self, name: str, upper: int) -> int:
        value = self.rng.randrange(upper)
        self._record_blind(name, value)
        return value

    def _record_blind(self, name: str, value) -> None:
        if name in self._blinds:
            raise ProtocolError(f"blind {name!r} already outstanding")
        self._blinds[name] = value
        self.blinds_log.append((name, value))

    def log_single_use(self, name: str, value) -> None:
        """Audit-log randomness that is generated and consumed in place."""
        self.blinds_log.append((name, value))

    def consume_blind(self, name: str):
        if name not in self._blinds:
            raise ProtocolError(f"blind {name!r} missing or already consumed")
        return self._blinds.pop(name)

    def outstanding_blinds(self) -> list[str]:
        return sorted(self._blinds)

    def next_round(self) -> int:
        self.round_counter += 1
        return self.round_counter

    # -- handshake -----------------------------------------------------

    def on_hello(self, msg: wire.Hello) -> wire.Accept:
        if self.phase != "expect_hello":
            raise ProtocolError(f"HELLO in phase {self.phase}")
        if msg.version != PROTOCOL_VERSION:
            raise ProtocolError(f"unsupported protocol version {msg.version}")
        n = msg.modulus
        if n < 3 or n % 2 == 0:
            raise ProtocolError("client modulus must be odd and positive")
        self.pk = PublicKey(n=n, n_squared=n * n, g=n + 1,
                            bit_length=n.bit_length(),
                            key_id=key_fingerprint(n))
        self.params = params_for_model(self.model, n.bit_length(), self.kappa)
        self.params.validate()
        self._enc_pixels = []
        self.phase = "expect_image"
        return wire.Accept(
            version=PROTOCOL_VERSION,
            bit_bound=self.params.bit_bound,
            kappa=self.params.kappa,
            out_dims=self.params.out_dims,
            n_pixels=self.params.n_pixels,
            gallery_size=self.params.gallery_size,
            chunk_size=self.chunk_size,
            label_names=tuple(self.model.label_names),
        )

    def on_image_chunk(self, msg: wire.EncImageChunk) -> bool:
        """Accumulate ciphertext pixels; True once the image is complete."""
        if self.phase != "expect_image":
            raise ProtocolError(f"image chunk in phase {self.phase}")
        if msg.start != len(self._enc_pixels):
            raise ProtocolError(
                f"chunk starts at {msg.start}, expected {len(self._enc_pixels)}"
            )
        total = self.params.n_pixels
        if not msg.values or msg.start + len(msg.values) > total:
            raise ProtocolError("chunk overruns the declared image size")
        self._enc_pixels.extend(self._ciphertext(v) for v in msg.values)
        if len(self._enc_pixels) == total:
            self.phase = "projecting"
            return True
        return False

    def _ciphertext(self, value: int) -> Ciphertext:
        if not 0 < value < self.pk.n_squared:
            raise ProtocolError("residue outside the ciphertext space")
        return Ciphertext(value=value, key_id=self.pk.key_id)

    # -- encrypted projection and distances -----------------------------

    def project_encrypted(self) -> list[Ciphertext]:
        """Encrypted integer features of the received encrypted image."""
        model, pk = self.model, self.pk
        if len(self._enc_pixels) != model.dimension:
            raise ProtocolError("projection before the image is complete")
        centered = [
            hom_add(pk, ct, encrypt(pk, -m, self.rng))
            for ct, m in zip(self._enc_pixels, model.q_mean)
        ]
        features = []
        for row in model.q_projection:
            acc = encryption_of_zero(pk)
            for weight, ct in zip(row, centered):
                if weight != 0:
                    acc = hom_add(pk, acc, hom_scale(pk, ct, weight))
            features.append(acc)
        return features

    def blind_features(self, features: list[Ciphertext]) -> list[Ciphertext]:
        """Additively blind each feature before the client squares them."""
        pk, params = self.pk, self.params
        width = 1 << ((params.bit_bound + 1) // 2 + params.kappa)
        blinded = []
        for j, ct in enumerate(features):
            r = self.draw_blind(f"feature:{j}", width)
            blinded.append(hom_add(pk, ct, encrypt(pk, r, self.rng)))
        return blinded

    def recover_square_sum(self, enc_blind_sq_sum: Ciphertext,
                           features: list[Ciphertext]) -> Ciphertext:
        """Encryption of ``sum(features^2)`` from the blinded square sum."""
        pk = self.pk
        acc = enc_blind_sq_sum
        for j, ct in enumerate(features):
            r = self.consume_blind(f"feature:{j}")
            acc = hom_add(pk, acc, hom_scale(pk, ct, -2 * r))
            acc = hom_add_plain(pk, acc, -(r * r))
        return acc

    def assemble_distances(self, features: list[Ciphertext],
                           enc_sq_sum: Ciphertext) -> list[Ciphertext]:
        """Encrypted squared distance to every gallery entry."""
        pk = self.pk
        distances = []
        for entry in self.model.q_gallery:
            cross = encryption_of_zero(pk)
            for y, ct in zip(entry, features):
                if y != 0:
                    cross = hom_add(pk, cross, hom_scale(pk, ct, -2 * y))
            const = sum(y * y for y in entry)
            distances.append(hom_add_plain(pk, hom_add(pk, cross, enc_sq_sum), const))
        return distances


class ClientSession:
    """Client state machine: responds to server messages after the image is sent.

    ``observed`` records every plaintext the client decrypts mid-protocol
    (tag, value); the blinding tests assert these stay statistically
    masked.
    """

    def __init__(self, private_key: PrivateKey, image: list[int],
                 rng: random.Random | None = None):
        self.sk = private_key
        self.pk = private_key.public_key
        self.image = list(image)
        self.rng = rng or _SYSTEM_RNG
        self.phase = "expect_accept"
        self.bit_bound: int | None = None
        self.kappa: int | None = None
        self.out_dims: int | None = None
        self.label_names: tuple[str, ...] = ()
        self.observed: list[tuple[str, int]] = []
        self._carry_round: int | None = None

    @classmethod
    def for_subprotocols(cls, private_key: PrivateKey, bit_bound: int,
                         rng: random.Random | None = None) -> "ClientSession":
        """A session already past the handshake, for driving single ops."""
        session = cls(private_key, image=[], rng=rng)
        session.phase = "round_idle"
        session.bit_bound = bit_bound
        return session

    def on_accept(self, msg: wire.Accept, kappa_floor: int = 8) -> None:
        if self.phase != "expect_accept":
            raise ProtocolError(f"ACCEPT in phase {self.phase}")
        if msg.version != PROTOCOL_VERSION:
            raise ProtocolError(f"unsupported protocol version {msg.version}")
        if msg.n_pixels != len(self.image):
            raise ProtocolError(
                f"server expects {msg.n_pixels} pixels, image has {len(self.image)}"
            )
        if len(msg.label_names) < 1 or msg.chunk_size < 1:
            raise ProtocolError("malformed session parameters")
        params = SessionParams(
            bit_bound=msg.bit_bound,
            kappa=msg.kappa,
            out_dims=msg.out_dims,
            n_pixels=msg.n_pixels,
            gallery_size=msg.gallery_size,
            class_count=len(msg.label_names),
            key_bits=self.pk.bit_length,
        )
        params.validate()
        if msg.kappa < kappa_floor:
            raise ProtocolError(f"kappa {msg.kappa} below client floor {kappa_floor}")
        self.bit_bound = msg.bit_bound
        self.kappa = msg.kappa
        self.out_dims = msg.out_dims
        self.label_names = msg.label_names
        self.chunk_size = msg.chunk_size
        self.phase = "send_image"

    def image_chunks(self):
        if self.phase != "send_image":
            raise ProtocolError(f"image transmission in phase {self.phase}")
        ciphers = [encrypt(self.pk, v, self.rng).value for v in self.image]
        for start in range(0, len(ciphers), self.chunk_size):
            yield wire.EncImageChunk(
                start=start, values=tuple(ciphers[start : start + self.chunk_size])
            )
        self.phase = "expect_features"

    def handle(self, msg: wire.Message) -> wire.Message:
        """Reply to one server message; raises on out-of-order traffic."""
        if isinstance(msg, wire.BlindedFeatures):
            return self._on_blinded_features(msg)
        if isinstance(msg, wire.BlindedZ):
            return self._on_blinded_z(msg)
        if isinstance(msg, wire.CarryMasked):
            return self._on_carry_masked(msg)
        if isinstance(msg, wire.MulBlind):
            return self._on_mul_blind(msg)
        raise ProtocolError(f"unexpected {type(msg).__name__} in phase {self.phase}")

    def _decrypt(self, value: int, tag: str) -> int:
        plain = decrypt(self.sk, Ciphertext(value=value, key_id=self.pk.key_id))
        self.observed.append((tag, plain))
        return plain

    def _on_blinded_features(self, msg: wire.BlindedFeatures) -> wire.SquareSum:
        if self.phase != "expect_features":
            raise ProtocolError(f"BLINDED_FEATURES in phase {self.phase}")
        if len(msg.values) != self.out_dims:
            raise ProtocolError(
                f"{len(msg.values)} blinded features, expected {self.out_dims}"
            )
        total = 0
        for value in msg.values:
            plain = self._decrypt(value, "blinded_feature")
            total += plain * plain
        self.phase = "round_idle"
        return wire.SquareSum(value=encrypt(self.pk, total, self.rng).value)

    def _on_blinded_z(self, msg: wire.BlindedZ) -> wire.ReducedZAndCarry:
        if self.phase != "round_idle":
            raise ProtocolError(f"BLINDED_Z in phase {self.phase}")
        blinded = self._decrypt(msg.value, "blinded_z")
        reduced = blinded % (1 << self.bit_bound)
        bits = [
            encrypt(self.pk, (reduced >> t) & 1, self.rng).value
            for t in range(self.bit_bound)
        ]
        self.phase = "expect_carry_masked"
        self._carry_round = msg.round_id
        return wire.ReducedZAndCarry(
            round_id=msg.round_id,
            reduced=encrypt(self.pk, reduced, self.rng).value,
            bits=tuple(bits),
        )

    def _on_carry_masked(self, msg: wire.CarryMasked) -> wire.CarryBit:
        if self.phase != "expect_carry_masked":
            raise ProtocolError(f"CARRY_MASKED in phase {self.phase}")
        if msg.round_id != self._carry_round:
            raise ProtocolError(
                f"carry round {msg.round_id}, expected {self._carry_round}"
            )
        zero_seen = False
        for value in msg.values:
            if self._decrypt(value, "carry_masked") == 0:
                zero_seen = True
        self.phase = "round_idle"
        self._carry_round = None
        return wire.CarryBit(
            round_id=msg.round_id,
            value=encrypt(self.pk, 1 if zero_seen else 0, self.rng).value,
        )

    def _on_mul_blind(self, msg: wire.MulBlind) -> wire.MulResult:
        if self.phase != "round_idle":
            raise ProtocolError(f"MUL_BLIND in phase {self.phase}")
        a = self._decrypt(msg.a, "mul_operand_a")
        b = self._decrypt(msg.b, "mul_operand_b")
        return wire.MulResult(
            round_id=msg.round_id,
            value=encrypt(self.pk, a * b, self.rng).value,
        )

    def finish(self, msg: wire.ResultLabel) -> tuple[int, str]:
        if self.phase != "round_idle":
            raise ProtocolError(f"RESULT_LABEL in phase {self.phase}")
        code = decrypt(self.sk, Ciphertext(value=msg.value, key_id=self.pk.key_id))
        if not 0 <= code < len(self.label_names):
            raise ProtocolError(f"label code {code} outside the announced table")
        self.phase = "done"
        return code, self.label_names[code]


# --- server-driven interactive subprotocols ------------------------------

def _expect(session: ServerSession, endpoint: Endpoint, msg_type,
            round_id: int | None = None):
    msg = endpoint.recv()
    if isinstance(msg, wire.ErrorMessage):
        raise ProtocolError(f"peer abort {msg.code}: {msg.message}")
    if not isinstance(msg, msg_type):
        raise _abort(endpoint, wire.ERR_PHASE,
                     f"expected {msg_type.__name__}, got {type(msg).__name__}")
    if round_id is not None and msg.round_id != round_id:
        raise _abort(endpoint, wire.ERR_PHASE,
                     f"round {msg.round_id}, expected {round_id}")
    return msg


def secure_mod_reduce(session: ServerSession, endpoint: Endpoint,
                      enc_z: Ciphertext, bits: int,
                      with_carry: bool = True) -> Ciphertext:
    """Interactive computation of ``z mod 2**bits`` for 0 <= z < 2**(bits+1).

    The server blinds z additively, the client reduces the blinded value
    and returns it together with its encrypted bit decomposition; the
    carry subprotocol then yields the encrypted wrap indicator that the
    plain unblinding formula misses.  ``with_carry=False`` skips the
    correction and is wrong whenever the blinded low bits wrap; it
    exists as a regression guard.
    """
    pk = session.pk
    round_id = session.next_round()
    r = session.draw_blind(f"reduce:{round_id}", 1 << (bits + 1 + session.kappa))
    blinded = hom_add(pk, enc_z, encrypt(pk, r, session.rng))
    endpoint.send(wire.BlindedZ(round_id=round_id, value=blinded.value))
    reply = _expect(session, endpoint, wire.ReducedZAndCarry, round_id)
    if len(reply.bits) != bits:
        raise _abort(endpoint, wire.ERR_MALFORMED,
                     f"{len(reply.bits)} carry bits, expected {bits}")
    enc_reduced = session._ciphertext(reply.reduced)
    bit_cts = [session._ciphertext(v) for v in reply.bits]
    r_low = session.consume_blind(f"reduce:{round_id}") % (1 << bits)
    result = hom_add_plain(pk, enc_reduced, -r_low)
    if with_carry:
        enc_carry = _carry_subprotocol(session, endpoint, round_id, bit_cts, r_low)
        result = hom_add(pk, result, hom_scale(pk, enc_carry, 1 << bits))
    return result


def _carry_subprotocol(session: ServerSession, endpoint: Endpoint, round_id: int,
                       bit_cts: list[Ciphertext], r_low: int) -> Ciphertext:
    """Encrypted wrap bit [reduced < r_low] without revealing either side.

    Compares A = 2*reduced + 1 against B = 2*r_low bitwise (the doubling
    plus one removes the equality case), with the comparison direction
    flipped by a secret coin so the zero-presence bit the client reports
    is uniform.  Masked comparison values are re-randomized and shuffled
    before they leave the server.
    """
    pk = session.pk
    bits = len(bit_cts)
    total = bits + 1
    delta = session.draw_blind(f"carry_flip:{round_id}", 2)
    sign = 1 - 2 * delta
    b_bits = [0] + [(r_low >> t) & 1 for t in range(bits)]

    # xor of the operand bits at positions >= 1 (position 0 is the plain 1^0)
    xors = []
    for u in range(1, total):
        ct = bit_cts[u - 1]
        if b_bits[u]:
            xors.append(hom_add_plain(pk, hom_scale(pk, ct, -1), 1))
        else:
            xors.append(ct)

    masked = []
    suffix = encryption_of_zero(pk)  # sum of xors above the current position
    for t in range(total - 1, -1, -1):
        gap = hom_scale(pk, suffix, 3)
        if t == 0:
            diff = hom_add_plain(pk, gap, 1 + sign)
        else:
            diff = hom_add(pk, bit_cts[t - 1],
                           hom_add_plain(pk, gap, sign - b_bits[t]))
        while True:
            mask = session.rng.randrange(1, pk.n)
            if math.gcd(mask, pk.n) == 1:
                break
        session.log_single_use(f"carry_mask:{round_id}:{t}", mask)
        hidden = hom_add(pk, hom_scale(pk, diff, mask),
                         encrypt(pk, 0, session.rng))
        masked.append(hidden)
        if t >= 1:
            suffix = hom_add(pk, suffix, xors[t - 1])

    session.rng.shuffle(masked)
    endpoint.send(wire.CarryMasked(round_id=round_id,
                                   values=tuple(ct.value for ct in masked)))
    reply = _expect(session, endpoint, wire.CarryBit, round_id)
    enc_seen = session._ciphertext(reply.value)
    flip = session.consume_blind(f"carry_flip:{round_id}")
    if flip:
        return hom_add_plain(pk, hom_scale(pk, enc_seen, -1), 1)
    return enc_seen


def msb_extract(session: ServerSession, enc_z: Ciphertext,
                enc_z_mod: Ciphertext, bits: int) -> Ciphertext:
    """Encrypted bit ``bits`` of z, given z < 2**(bits+1) and z mod 2**bits.

    (z - (z mod 2**bits)) is a multiple of 2**bits, so multiplying by the
    modular inverse of 2**bits recovers the top bit exactly.
    """
    pk = session.pk
    shift_inverse = pow(1 << bits, -1, pk.n)
    return hom_scale(pk, hom_sub(pk, enc_z, enc_z_mod), shift_inverse)


def secure_multiply(session: ServerSession, endpoint: Endpoint,
                    enc_a: Ciphertext, enc_b: Ciphertext,
                    a_magnitude_bits: int, b_magnitude_bits: int) -> Ciphertext:
    """Interactive product of two ciphertexts via additive blinding."""
    pk = session.pk
    round_id = session.next_round()
    r_a = session.draw_blind(f"mul_a:{round_id}",
                             1 << (a_magnitude_bits + session.kappa))
    r_b = session.draw_blind(f"mul_b:{round_id}",
                             1 << (b_magnitude_bits + session.kappa))
    endpoint.send(wire.MulBlind(
        round_id=round_id,
        a=hom_add(pk, enc_a, encrypt(pk, r_a, session.rng)).value,
        b=hom_add(pk, enc_b, encrypt(pk, r_b, session.rng)).value,
    ))
    reply = _expect(session, endpoint, wire.MulResult, round_id)
    blind_product = session._ciphertext(reply.value)
    r_a = session.consume_blind(f"mul_a:{round_id}")
    r_b = session.consume_blind(f"mul_b:{round_id}")
    # (a + ra)(b + rb) - a rb - b ra - ra rb = ab
    result = hom_add(pk, blind_product, hom_scale(pk, enc_a, -r_b))
    result = hom_add(pk, result, hom_scale(pk, enc_b, -r_a))
    return hom_add_plain(pk, result, -(r_a * r_b))


def secure_min_pair(session: ServerSession, endpoint: Endpoint,
                    first: tuple[Ciphertext, Ciphertext],
                    second: tuple[Ciphertext, Ciphertext],
                    ) -> tuple[Ciphertext, Ciphertext]:
    """Encrypted (min distance, its label) of two (distance, label) pairs.

    The comparison bit is the top bit of 2**l + D1 - D2, which is 0
    exactly when D1 < D2; selection computes b*(X2 - X1) + X1.  A tie
    sets the bit and therefore selects the second operand, so a fold
    keeping its running minimum second breaks ties toward the earlier
    gallery index.
    """
    params = session.params
    bits = params.bit_bound
    pk = session.pk
    enc_d1, enc_e1 = first
    enc_d2, enc_e2 = second
    enc_z = hom_add_plain(pk, hom_sub(pk, enc_d1, enc_d2), 1 << bits)
    enc_z_mod = secure_mod_reduce(session, endpoint, enc_z, bits)
    enc_bit = msb_extract(session, enc_z, enc_z_mod, bits)

    label_bits = max(params.class_count, 2).bit_length() + 1
    d_diff = hom_sub(pk, enc_d2, enc_d1)
    e_diff = hom_sub(pk, enc_e2, enc_e1)
    d_term = secure_multiply(session, endpoint, enc_bit, d_diff, 1, bits + 1)
    e_term = secure_multiply(session, endpoint, enc_bit, e_diff, 1, label_bits)
    return hom_add(pk, d_term, enc_d1), hom_add(pk, e_term, enc_e1)


def argmin_fold(session: ServerSession, endpoint: Endpoint,
                entries: list[tuple[Ciphertext, Ciphertext]]) -> Ciphertext:
    """Encrypted label of the minimum-distance entry, lowest index on ties.

    Left fold in gallery order; each candidate is compared against the
    running minimum with the running minimum as the second operand, the
    one a tied comparison keeps.
    """
    if not entries:
        raise ProtocolError("argmin over an empty gallery")
    running = entries[0]
    for candidate in entries[1:]:
        running = secure_min_pair(session, endpoint, candidate, running)
    return running[1]


# --- full session drivers -------------------------------------------------

def run_server_session(endpoint: Endpoint, model: QuantizedModel,
                       rng: random.Random | None = None,
                       kappa: int = DEFAULT_KAPPA,
                       chunk_size: int = DEFAULT_CHUNK_SIZE) -> ServerSession:
    """Serve one classification over an established channel."""
    session = ServerSession(model, rng=rng, kappa=kappa, chunk_size=chunk_size)
    try:
        msg = endpoint.recv()
        if isinstance(msg, wire.ErrorMessage):
            raise ProtocolError(f"peer abort {msg.code}: {msg.message}")
        if not isinstance(msg, wire.Hello):
            raise _abort(endpoint, wire.ERR_PHASE,
                         f"expected HELLO, got {type(msg).__name__}")
        try:
            accept = session.on_hello(msg)
        except ProtocolError as exc:
            raise _abort(endpoint, wire.ERR_PARAMS, str(exc)) from exc
        endpoint.send(accept)

        while True:
            msg = endpoint.recv()
            if isinstance(msg, wire.ErrorMessage):
                raise ProtocolError(f"peer abort {msg.code}: {msg.message}")
            if not isinstance(msg, wire.EncImageChunk):
                raise _abort(endpoint, wire.ERR_PHASE,
                             f"expected image chunk, got {type(msg).__name__}")
            try:
                if session.on_image_chunk(msg):
                    break
            except ProtocolError as exc:
                raise _abort(endpoint, wire.ERR_MALFORMED, str(exc)) from exc

        features = session.project_encrypted()
        endpoint.send(wire.BlindedFeatures(
            values=tuple(ct.value for ct in session.blind_features(features))
        ))
        reply = _expect(session, endpoint, wire.SquareSum)
        square_sum = session.recover_square_sum(
            session._ciphertext(reply.value), features
        )
        distances = session.assemble_distances(features, square_sum)
        entries = [
            (dist, encrypt(session.pk, label, session.rng))
            for dist, label in zip(distances, session.model.gallery_labels)
        ]
        enc_label = argmin_fold(session, endpoint, entries)
        # fresh randomness before the result leaves the server
        enc_label = hom_add(session.pk, enc_label, encrypt(session.pk, 0, session.rng))
        endpoint.send(wire.ResultLabel(value=enc_label.value))
        return session
    except (TransportError, CryptoError) as exc:
        raise _abort(endpoint, wire.ERR_MALFORMED, str(exc)) from exc


@dataclass
class ClientResult:
    label_code: int
    label_name: str
    session: ClientSession


def run_client_session(endpoint: Endpoint, private_key: PrivateKey,
                       image: list[int], rng: random.Random | None = None,
                       kappa_floor: int = 8) -> ClientResult:
    """Classify ``image`` against the server's model; returns the label."""
    rng = rng or _SYSTEM_RNG
    session = ClientSession(private_key, image, rng=rng)
    endpoint.session_id = rng.getrandbits(64)
    try:
        endpoint.send(wire.Hello(version=PROTOCOL_VERSION,
                                 modulus=session.pk.n))
        msg = endpoint.recv()
        if isinstance(msg, wire.ErrorMessage):
            raise ProtocolError(f"peer abort {msg.code}: {msg.message}")
        if not isinstance(msg, wire.Accept):
            raise _abort(endpoint, wire.ERR_PHASE,
                         f"expected ACCEPT, got {type(msg).__name__}")
        try:
            session.on_accept(msg, kappa_floor=kappa_floor)
        except ProtocolError as exc:
            raise _abort(endpoint, wire.ERR_PARAMS, str(exc)) from exc
        for chunk in session.image_chunks():
            endpoint.send(chunk)
        while True:
            msg = endpoint.recv()
            if isinstance(msg, wire.ErrorMessage):
                raise ProtocolError(f"peer abort {msg.code}: {msg.message}")
            if isinstance(msg, wire.ResultLabel):
                code, name = session.finish(msg)
                return ClientResult(label_code=code, label_name=name,
                                    session=session)
            try:
                endpoint.send(session.handle(msg))
            except ProtocolError as exc:
                raise _abort(endpoint, wire.ERR_PHASE, str(exc)) from exc
    except (TransportError, CryptoError) as exc:
        raise _abort(endpoint, wire.ERR_MALFORMED, str(exc)) from exc
