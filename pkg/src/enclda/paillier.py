"""Paillier cryptosystem with signed-integer plaintexts.

Additively homomorphic: the product of two ciphertexts decrypts to the
sum of their plaintexts, and raising a ciphertext to a plain constant
decrypts to the scaled plaintext.  The generator is fixed to g = n + 1,
which turns g^m into the single multiplication 1 + m*n (mod n^2).

Plaintexts are signed integers in [-(n-1)/2, (n-1)/2], stored as
residues mod n with the upper half of the range representing negative
values.  All functions are pure; randomness always comes from an
explicit ``random.Random``-compatible source (defaults to SystemRandom).
"""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass

from .errors import CryptoError

_SYSTEM_RNG = random.SystemRandom()

# Miller-Rabin rounds; 40 random bases bound the error by 4^-40 = 2^-80.
_MR_ROUNDS = 40

_SMALL_PRIMES = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47]

# Candidates tried per prime before keygen gives up.
_PRIME_SEARCH_CAP = 100_000


@dataclass(frozen=True)
class PublicKey:
    n: int
    n_squared: int
    g: int
    bit_length: int
    key_id: str

    @property
    def max_plaintext(self) -> int:
        """Largest encodable magnitude: (n-1)//2."""
        return (self.n - 1) // 2


@dataclass(frozen=True)
class PrivateKey:
    p: int
    q: int
    lam: int
    mu: int
    public_key: PublicKey
    # CRT precomputation for decryption (factor-wise exponents).
    hp: int
    hq: int


@dataclass(frozen=True)
class Ciphertext:
    value: int
    key_id: str


def key_fingerprint(n: int) -> str:
    return hashlib.sha256(str(n).encode("ascii")).hexdigest()[:16]


def _is_probable_prime(x: int, rng: random.Random) -> bool:
    if x < 2:
        return False
    for sp in _SMALL_PRIMES:
        if x % sp == 0:
            return x == sp
    d = x - 1
    r = 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for _ in range(_MR_ROUNDS):
        a = rng.randrange(2, x - 1)
        y = pow(a, d, x)
        if y == 1 or y == x - 1:
            continue
        for _ in range(r - 1):
            y = (y * y) % x
            if y == x - 1:
                break
        else:
            return False
    return True


def _random_prime(bits: int, rng: random.Random) -> int:
    # Top two bits forced so the product of two such primes has exactly
    # the sum of the factor widths.
    for _ in range(_PRIME_SEARCH_CAP):
        cand = rng.getrandbits(bits) | (1 << (bits - 1)) | (1 << (bits - 2)) | 1
        if _is_probable_prime(cand, rng):
            return cand
    raise CryptoError(f"no {bits}-bit prime found within {_PRIME_SEARCH_CAP} candidates")


def keygen(bit_length: int = 2048, rng: random.Random | None = None) -> tuple[PublicKey, PrivateKey]:
    """Generate a keypair whose modulus n has exactly ``bit_length`` bits.

    ``bit_length`` may go down to 256 for fast tests; 2048 is the
    production default.
    """
    if bit_length < 256:
        raise CryptoError("bit_length below 256 is not supported")
    rng = rng or _SYSTEM_RNG
    p_bits = (bit_length + 1) // 2
    q_bits = bit_length - p_bits
    while True:
        p = _random_prime(p_bits, rng)
        q = _random_prime(q_bits, rng)
        if p == q:
            continue
        n = p * q
        lam = math.lcm(p - 1, q - 1)
        # gcd(lam, n) > 1 is possible (e.g. q = 2p + 1); retry.
        if n.bit_length() != bit_length or math.gcd(lam, n) != 1:
            continue
        break
    n_sq = n * n
    pk = PublicKey(n=n, n_squared=n_sq, g=n + 1, bit_length=bit_length,
                   key_id=key_fingerprint(n))
    # With g = n + 1: L(g^lam mod n^2) = lam, so mu = lam^-1 mod n.
    mu = pow(lam, -1, n)
    hp = pow(_l_function(pow(n + 1, p - 1, p * p), p), -1, p)
    hq = pow(_l_function(pow(n + 1, q - 1, q * q), q), -1, q)
    sk = PrivateKey(p=p, q=q, lam=lam, mu=mu, public_key=pk, hp=hp, hq=hq)
    return pk, sk


def _l_function(u: int, n: int) -> int:
    return (u - 1) // n


def encode_signed(pk: PublicKey, v: int) -> int:
    """Map a signed integer onto Z_n (negatives wrap to the upper half)."""
    if abs(v) > pk.max_plaintext:
        raise CryptoError(f"plaintext magnitude {abs(v)} exceeds signed range")
    return v % pk.n


def decode_signed(pk: PublicKey, residue: int) -> int:
    if not 0 <= residue < pk.n:
        raise CryptoError("residue outside Z_n")
    if residue <= pk.max_plaintext:
        return residue
    return residue - pk.n


def encrypt(pk: PublicKey, v: int, rng: random.Random | None = None) -> Ciphertext:
    """Probabilistic encryption of a signed integer."""
    rng = rng or _SYSTEM_RNG
    m = encode_signed(pk, v)
    while True:
        r = rng.randrange(1, pk.n)
        if math.gcd(r, pk.n) == 1:
            break
    value = (1 + m * pk.n) % pk.n_squared
    value = (value * pow(r, pk.n, pk.n_squared)) % pk.n_squared
    return Ciphertext(value=value, key_id=pk.key_id)


def decrypt(sk: PrivateKey, ct: Ciphertext) -> int:
    """Recover the signed plaintext (CRT form of the L-function decryption)."""
    pk = sk.public_key
    if ct.key_id != pk.key_id:
        raise CryptoError("ciphertext was produced under a different key")
    if not 0 < ct.value < pk.n_squared or math.gcd(ct.value, pk.n) != 1:
        raise CryptoError("malformed ciphertext residue")
    p, q = sk.p, sk.q
    mp = (_l_function(pow(ct.value, p - 1, p * p), p) * sk.hp) % p
    mq = (_l_function(pow(ct.value, q - 1, q * q), q) * sk.hq) % q
    # CRT combine to a residue mod n.
    q_inv = pow(q, -1, p)
    h = ((mp - mq) * q_inv) % p
    m = (mq + h * q) % pk.n
    return decode_signed(pk, m)


def _check_same_key(a: Ciphertext, b: Ciphertext) -> None:
    if a.key_id != b.key_id:
        raise CryptoError("ciphertexts bound to different keys")


def hom_add(pk: PublicKey, a: Ciphertext, b: Ciphertext) -> Ciphertext:
    """Ciphertext of a + b (modular product of the residues)."""
    _check_same_key(a, b)
    if a.key_id != pk.key_id:
        raise CryptoError("ciphertext does not match this public key")
    return Ciphertext(value=(a.value * b.value) % pk.n_squared, key_id=a.key_id)


def hom_scale(pk: PublicKey, a: Ciphertext, k: int) -> Ciphertext:
    """Ciphertext of k * a.

    Negative k goes through the modular inverse of the residue, which is
    far cheaper than exponentiation by k mod n when |k| is small.
    """
    if a.key_id != pk.key_id:
        raise CryptoError("ciphertext does not match this public key")
    if k < 0:
        base = pow(a.value, -1, pk.n_squared)
        exp = -k
    else:
        base = a.value
        exp = k
    return Ciphertext(value=pow(base, exp, pk.n_squared), key_id=a.key_id)


def hom_sub(pk: PublicKey, a: Ciphertext, b: Ciphertext) -> Ciphertext:
    """Ciphertext of a - b."""
    return hom_add(pk, a, hom_scale(pk, b, -1))


def hom_add_plain(pk: PublicKey, a: Ciphertext, k: int) -> Ciphertext:
    """Ciphertext of a + k for a plain constant k.

    With g = n + 1 this is a single multiplication by 1 + k*n; it adds no
    fresh randomness, so anything built from it must be re-randomized (or
    combined with a fresh encryption) before leaving the local party.
    """
    if a.key_id != pk.key_id:
        raise CryptoError("ciphertext does not match this public key")
    factor = (1 + encode_signed(pk, k) * pk.n) % pk.n_squared
    return Ciphertext(value=(a.value * factor) % pk.n_squared, key_id=a.key_id)


def encryption_of_zero(pk: PublicKey) -> Ciphertext:
    """The deterministic residue 1, a valid (unrandomized) encryption of 0."""
    return Ciphertext(value=1, key_id=pk.key_id)
