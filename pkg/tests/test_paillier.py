import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from enclda import paillier
from enclda.errors import CryptoError


@pytest.fixture(scope="module")
def keypair():
    return paillier.keygen(256, rng=random.Random(1234))


@pytest.fixture(scope="module")
def rng():
    return random.Random(99)


def test_keygen_bit_length():
    pk, sk = paillier.keygen(512, rng=random.Random(7))
    assert pk.n.bit_length() == 512
    assert pk.n % 2 == 1
    assert pk.g == pk.n + 1
    assert pk.n_squared == pk.n * pk.n
    assert sk.p * sk.q == pk.n
    assert sk.p != sk.q


def test_keygen_distinct_seeds_distinct_moduli():
    pk1, _ = paillier.keygen(256, rng=random.Random(1))
    pk2, _ = paillier.keygen(256, rng=random.Random(2))
    assert pk1.n != pk2.n


def test_roundtrip_basic(keypair, rng):
    pk, sk = keypair
    ct = paillier.encrypt(pk, 12345, rng)
    assert paillier.decrypt(sk, ct) == 12345


@pytest.mark.parametrize("v", [0, 7, -3, 1, -1])
def test_roundtrip_small_values(keypair, rng, v):
    pk, sk = keypair
    assert paillier.decrypt(sk, paillier.encrypt(pk, v, rng)) == v


def test_roundtrip_range_extremes(keypair, rng):
    pk, sk = keypair
    half = pk.max_plaintext
    for v in (half, -half):
        assert paillier.decrypt(sk, paillier.encrypt(pk, v, rng)) == v


def test_encrypt_rejects_overflow(keypair, rng):
    pk, _ = keypair
    with pytest.raises(CryptoError):
        paillier.encrypt(pk, pk.max_plaintext + 1, rng)


def test_probabilistic_encryption(keypair, rng):
    pk, _ = keypair
    a = paillier.encrypt(pk, 5, rng)
    b = paillier.encrypt(pk, 5, rng)
    assert a.value != b.value


class FixedN:
    """encode/decode only need .n and .max_plaintext; n=35 mirrors the contract examples."""

    n = 35
    max_plaintext = 17
    key_id = "test"


@pytest.mark.parametrize("v,expected", [(-4, 31), (0, 0), (17, 17)])
def test_encode_signed_examples(v, expected):
    assert paillier.encode_signed(FixedN, v) == expected


@pytest.mark.parametrize("residue,expected", [(31, -4), (17, 17)])
def test_decode_signed_examples(residue, expected):
    assert paillier.decode_signed(FixedN, residue) == expected


def test_encode_decode_identity_full_small_range():
    for v in range(-17, 18):
        assert paillier.decode_signed(FixedN, paillier.encode_signed(FixedN, v)) == v


@given(st.integers(min_value=-17, max_value=17))
def test_encode_decode_roundtrip_property(v):
    assert paillier.decode_signed(FixedN, paillier.encode_signed(FixedN, v)) == v


def test_hom_add_examples(keypair, rng):
    pk, sk = keypair
    enc = lambda v: paillier.encrypt(pk, v, rng)
    assert paillier.decrypt(sk, paillier.hom_add(pk, enc(2), enc(3))) == 5
    assert paillier.decrypt(sk, paillier.hom_add(pk, enc(3), enc(4))) == 7
    assert paillier.decrypt(sk, paillier.hom_add(pk, enc(41), enc(0))) == 41
    assert paillier.decrypt(sk, paillier.hom_add(pk, enc(5), enc(-5))) == 0


def test_hom_scale_examples(keypair, rng):
    pk, sk = keypair
    enc = lambda v: paillier.encrypt(pk, v, rng)
    assert paillier.decrypt(sk, paillier.hom_scale(pk, enc(5), 3)) == 15
    assert paillier.decrypt(sk, paillier.hom_scale(pk, enc(6), -1)) == -6
    assert paillier.decrypt(sk, paillier.hom_scale(pk, enc(6), 1)) == 6
    assert paillier.decrypt(sk, paillier.hom_scale(pk, enc(-2), 7)) == -14
    assert paillier.decrypt(sk, paillier.hom_scale(pk, enc(9), 0)) == 0


def test_hom_sub(keypair, rng):
    pk, sk = keypair
    enc = lambda v: paillier.encrypt(pk, v, rng)
    assert paillier.decrypt(sk, paillier.hom_sub(pk, enc(4), enc(9))) == -5


def test_hom_add_random_pairs(keypair, rng):
    pk, sk = keypair
    bound = 1 << 60
    for _ in range(200):
        a = rng.randrange(-bound, bound)
        b = rng.randrange(-bound, bound)
        ct = paillier.hom_add(pk, paillier.encrypt(pk, a, rng), paillier.encrypt(pk, b, rng))
        assert paillier.decrypt(sk, ct) == a + b


def test_hom_scale_random_pairs(keypair, rng):
    pk, sk = keypair
    for _ in range(200):
        a = rng.randrange(-(1 << 40), 1 << 40)
        k = rng.randrange(-(1 << 20), 1 << 20)
        ct = paillier.hom_scale(pk, paillier.encrypt(pk, a, rng), k)
        assert paillier.decrypt(sk, ct) == a * k


def test_ciphertext_residues_are_units(keypair, rng):
    pk, _ = keypair
    for v in (0, 1, -1, 123456):
        ct = paillier.encrypt(pk, v, rng)
        assert math.gcd(ct.value, pk.n) == 1
        assert 0 < ct.value < pk.n_squared


def test_key_mismatch_detected(rng):
    pk1, sk1 = paillier.keygen(256, rng=random.Random(11))
    pk2, _ = paillier.keygen(256, rng=random.Random(22))
    ct = paillier.encrypt(pk2, 5, rng)
    with pytest.raises(CryptoError):
        paillier.decrypt(sk1, ct)
    with pytest.raises(CryptoError):
        paillier.hom_add(pk1, paillier.encrypt(pk1, 1, rng), ct)


def test_malformed_residue_rejected(keypair):
    pk, sk = keypair
    bad = paillier.Ciphertext(value=pk.n, key_id=pk.key_id)  # shares a factor with n
    with pytest.raises(CryptoError):
        paillier.decrypt(sk, bad)


def test_keygen_rejects_tiny_keys():
    with pytest.raises(CryptoError):
        paillier.keygen(128)
