"""Group substrate: curve parameters, pairing, serialization, hashing."""

import hashlib
import random

import pytest

import oracles
from policycast import pairing as pr
from policycast.groups import (ConfigurationError, DecodeError, GroupContext,
                               GroupMismatchError, Scalar, group_setup)

# frozen first-build serializations; any engine change that moves these
# is a compatibility break, not a refactor
PINS = {
    "SYMMETRIC_512": {
        "g1": "025885b6063364b203d5d1600b75f18ce5ec35b7032369e98bd54ade60fcabda"
              "ffb5dace311ce1ce5af9d7a3e8f407a333b48664e1f192cba6180139d8609e50"
              "13",
        "g2": None,  # same group
        "t0": "047700183393eb9f33a1419ac68f85c2782fda3c0c511a0ab222fc26f83f4043"
              "f79ad2fc9790c853e2372574916cd876a2e0e899f98260e6e60bf1c2ec12b308"
              "424ccf4055ec621e04b8681fde9ef49924acd574ca27c631232cd3052df93fdf"
              "9bef5f78cb1900d7e368c84079604d0799f3cd3e7bc0c36ec8292a52ed425178"
              "38",
    },
    "ASYMMETRIC_159": {
        "g1": "0215fb97024654d52fd39b41cbbb056c2efc1a0180",
        "g2": "0a1be0e6c230532f6ca1f73e921a7128d1b5222ef0",
        "t0": "0401bf4e5f5412123a47aaa05a04c8e15ae1d9c72935b2a8b925ad88e1490d09"
              "e65e92babebc015bce",
    },
}


@pytest.fixture(scope="module", params=list(PINS))
def ctx(request):
    return GroupContext(request.param)


def test_profile_construction():
    assert group_setup("SYMMETRIC_512").symmetric
    assert not GroupContext("ASYMMETRIC_159").symmetric
    with pytest.raises(ConfigurationError):
        GroupContext("NO_SUCH_PROFILE")


def test_parameter_sanity(ctx):
    ps = ctx.params
    # q = 3 mod 4 with the supersingular point count q + 1 = r * c
    assert ps.q % 4 == 3
    assert ps.r * ps.c == ps.q + 1
    # Fermat sanity on the pinned primes (full primality was checked at
    # parameter generation time)
    assert pow(2, ps.q - 1, ps.q) == 1
    assert pow(2, ps.r - 1, ps.r) == 1
    assert pr.pt_is_on_curve(ps.g1, ps.q)
    assert pr.pt_mul(ps.g1, ps.r, ps.q) is None
    if ps.g2pre is not None:
        assert pr.pt_is_on_curve(ps.g2pre, ps.q)
        assert pr.pt_mul(ps.g2pre, ps.r, ps.q) is None


def test_generator_pins(ctx):
    pins = PINS[ctx.profile.value]
    assert ctx.g1.to_bytes().hex() == pins["g1"]
    expected_g2 = pins["g2"] or pins["g1"]
    assert ctx.g2.to_bytes().hex() == expected_g2
    assert ctx.pairing_of_generators().to_bytes().hex() == pins["t0"]


def test_scalar_field_matches_int_arithmetic(ctx):
    rng = random.Random(101)
    p = ctx.p
    for _ in range(300):
        a, b = rng.randrange(p), rng.randrange(p)
        sa, sb = ctx.scalar(a), ctx.scalar(b)
        assert (sa + sb).value == (a + b) % p
        assert (sa - sb).value == (a - b) % p
        assert (sa * sb).value == a * b % p
        assert (-sa).value == -a % p
    x = ctx.scalar(rng.randrange(1, p))
    assert (x * x.inverse()).value == 1
    with pytest.raises(ZeroDivisionError):
        ctx.scalar(0).inverse()
    with pytest.raises(GroupMismatchError):
        sa + Scalar(1, p + 2)


def test_fq2_matches_schoolbook(ctx):
    q = ctx.params.q
    rng = random.Random(7)
    for _ in range(100):
        x = (rng.randrange(q), rng.randrange(q))
        y = (rng.randrange(q), rng.randrange(q))
        assert pr.fq2_mul(x, y, q) == oracles.omul(x, y, q)
        assert pr.fq2_sqr(x, q) == oracles.omul(x, x, q)
        if x != (0, 0):
            assert pr.fq2_inv(x, q) == oracles.oinv(x, q)
        e = rng.randrange(1, 1 << 64)
        assert pr.fq2_exp(x, e, q) == oracles.oexp(x, e, q)


def test_point_arithmetic_matches_affine_oracle(ctx):
    ps = ctx.params
    rng = random.Random(13)
    for _ in range(20):
        k = rng.randrange(1, ps.r)
        assert pr.pt_mul(ps.g1, k, ps.q) == oracles.omul_pt(ps.g1, k, ps.q)
    P = pr.pt_mul(ps.g1, 12345, ps.q)
    Q = pr.pt_mul(ps.g1, 99999, ps.q)
    assert pr.pt_add(P, Q, ps.q) == oracles.oadd(P, Q, ps.q)
    assert pr.pt_add(P, P, ps.q) == oracles.oadd(P, P, ps.q)
    assert pr.pt_add(P, pr.pt_neg(P, ps.q), ps.q) is None
    assert pr.pt_mul(ps.g1, ps.r, ps.q) is None


def test_pairing_matches_naive_oracle(ctx):
    # the engine (Jacobian, denominator elimination, factored final
    # power) against the textbook affine loop with denominators
    ps = ctx.params
    rng = random.Random(17)
    base2 = ps.g2pre or ps.g1
    for _ in range(4):
        a = rng.randrange(1, ps.r)
        b = rng.randrange(1, ps.r)
        P = pr.pt_mul(ps.g1, a, ps.q)
        Q = pr.pt_mul(base2, b, ps.q)
        assert pr.tate_pairing(P, Q, ps) == oracles.naive_tate(P, Q, ps)


def test_bilinearity(ctx):
    rng = random.Random(19)
    t0 = ctx.pairing_of_generators()
    for _ in range(25):
        a = ctx.random_scalar(rng)
        b = ctx.random_scalar(rng)
        lhs = ctx.pair(ctx.g1 ** a, ctx.g2 ** b)
        assert lhs == t0 ** (a * b)
    assert ctx.pair(ctx.g1 ** 2, ctx.g2 ** 3) == t0 ** 6


def test_non_degenerate_order_p_target(ctx):
    t0 = ctx.pairing_of_generators()
    assert not t0.is_identity
    assert (t0 ** ctx.p).is_identity
    assert ctx.pair(ctx.identity("s1"), ctx.g2).is_identity


def test_pair_ratio_equals_quotient(ctx):
    rng = random.Random(23)
    for _ in range(10):
        a1 = ctx.g1 ** ctx.random_scalar(rng)
        a2 = ctx.g1 ** ctx.random_scalar(rng)
        b1 = ctx.g2 ** ctx.random_scalar(rng)
        b2 = ctx.g2 ** ctx.random_scalar(rng)
        want = ctx.pair(a1, b1) * ctx.pair(a2, b2).inverse()
        assert ctx.pair_ratio(a1, b1, a2, b2) == want


def test_serialization_round_trip(ctx):
    rng = random.Random(29)
    for _ in range(10):
        el = ctx.g1 ** ctx.random_scalar(rng)
        assert ctx.deserialize_element(el.to_bytes(), "s1") == el
        el2 = ctx.g2 ** ctx.random_scalar(rng)
        assert ctx.deserialize_element(el2.to_bytes(), ctx.key_group) == el2
        gt = ctx.pairing_of_generators() ** ctx.random_scalar(rng)
        assert ctx.deserialize_element(gt.to_bytes(), "gt") == gt


def test_symmetric_s2_redirect(ctx):
    data = ctx.g2.to_bytes()
    if ctx.symmetric:
        # s2 requests resolve to the single source group
        assert ctx.deserialize_element(data, "s2") == ctx.g1
    else:
        with pytest.raises(DecodeError):
            ctx.deserialize_element(data, "s1")  # wrong tag for s1


def test_decode_rejects_malformed(ctx):
    w = ctx.params.fq_bytes
    good = ctx.g1.to_bytes()
    with pytest.raises(DecodeError):
        ctx.deserialize_element(b"\x00" * (1 + w), "s1")  # bad tag
    with pytest.raises(DecodeError):
        ctx.deserialize_element(good[:-1], "s1")
    with pytest.raises(DecodeError):
        ctx.deserialize_element(good + b"\x00", "s1")
    with pytest.raises(DecodeError):
        ctx.deserialize_element("not bytes", "s1")
    with pytest.raises(ConfigurationError):
        ctx.deserialize_element(good, "g9")
    # x out of range
    big = bytes([good[0]]) + ctx.params.q.to_bytes(w, "big")
    with pytest.raises(DecodeError):
        ctx.deserialize_element(big, "s1")


def test_decode_rejects_off_curve_x(ctx):
    q = ctx.params.q
    w = ctx.params.fq_bytes
    found = 0
    for x in range(2, 200):
        rhs = (x * x * x + x) % q
        if pow(rhs, (q - 1) // 2, q) != 1:  # no square root -> not on curve
            data = bytes([0x02]) + x.to_bytes(w, "big")
            with pytest.raises(DecodeError):
                ctx.deserialize_element(data, "s1")
            found += 1
            if found == 3:
                return
    raise AssertionError("no off-curve x found in range")


def test_decode_rejects_out_of_subgroup_point(ctx):
    # a curve point whose order is not p: exists whenever the cofactor
    # exceeds 1, which holds for both profiles
    ps = ctx.params
    for x in range(2, 3000):
        pt = pr.pt_decompress(x, False, ps.q, ps.sqrt_exp)
        if pt is None or pr.pt_mul(pt, ps.r, ps.q) is None:
            continue
        data = bytes([0x03 if pt[1] & 1 else 0x02]) + x.to_bytes(ps.fq_bytes, "big")
        with pytest.raises(DecodeError):
            ctx.deserialize_element(data, "s1")
        return
    raise AssertionError("no out-of-subgroup x found in range")


def test_decode_rejects_bad_target_elements(ctx):
    w = ctx.params.fq_bytes
    one = b"\x04" + (1).to_bytes(w, "big") + (0).to_bytes(w, "big")
    with pytest.raises(DecodeError):
        ctx.deserialize_element(one, "gt")  # identity is unserializable
    two = b"\x04" + (2).to_bytes(w, "big") + (0).to_bytes(w, "big")
    with pytest.raises(DecodeError):
        ctx.deserialize_element(two, "gt")  # not in the order-p subgroup
    with pytest.raises(DecodeError):
        ctx.deserialize_element(b"\x04" + bytes(2 * w - 1), "gt")


def test_identity_not_serializable(ctx):
    with pytest.raises(ValueError):
        ctx.identity("s1").to_bytes()
    with pytest.raises(ValueError):
        ctx.identity("gt").to_bytes()


def test_group_mixing_rejected():
    asym = GroupContext("ASYMMETRIC_159")
    sym = GroupContext("SYMMETRIC_512")
    with pytest.raises(GroupMismatchError):
        asym.pair(asym.g2, asym.g1)  # argument order is s1 then s2
    with pytest.raises(GroupMismatchError):
        asym.g1 * asym.g2
    with pytest.raises(GroupMismatchError):
        asym.g1 ** sym.scalar(3)
    with pytest.raises(GroupMismatchError):
        sym.pair(asym.g1, asym.g2)
    with pytest.raises(GroupMismatchError):
        asym.g1 ** 1.5


def test_hash_kats(ctx):
    assert ctx.hash_to_bits(b"").hex() == (
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855")
    assert ctx.hash_to_bits(b"abc").hex() == (
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad")
    # scalar hash is exactly the digest reduced mod p
    for data in (b"", b"abc", b"attr:A"):
        want = int.from_bytes(hashlib.sha256(data).digest(), "big") % ctx.p
        assert ctx.hash_to_scalar(data).value == want
        assert ctx.hash_to_scalar(data).value == (
            int.from_bytes(ctx.hash_to_bits(data), "big") % ctx.p)


def test_context_determinism(ctx):
    again = GroupContext(ctx.profile.value)
    assert again.g1.to_bytes() == ctx.g1.to_bytes()
    assert again.pairing_of_generators() == ctx.pairing_of_generators()
    # elements from independently built contexts of one profile interoperate
    assert again.g1 * ctx.g1 == ctx.g1 ** 2
