"""Typed bilinear group contexts on top of the pairing engine.

A GroupContext bundles the two source groups, the target group, the
scalar field Z_p (p is the prime group order, not the field prime), the
pairing, and the two hash maps used by the scheme:

    hash_to_bits(data)   -> 32-byte digest (SHA-256)
    hash_to_scalar(data) -> big-endian digest value reduced mod p

Note the coupling: hash_to_scalar is exactly the reduction of
hash_to_bits.  Both profiles share this construction.

Elements carry their group tag ("s1", "s2", "gt"); mixing groups in a
group operation or feeding the pairing arguments in the wrong order
raises GroupMismatchError rather than silently computing garbage.  In
the symmetric profile the two source groups coincide and everything is
tagged "s1".

Serialized form (all big-endian, fixed width per profile):

    s1:  0x02/0x03 (y parity) || x
    s2:  0x0a/0x0b (y parity) || x of the distortion preimage
    gt:  0x04 || a || b        for a + b*i in F_q2

Decoding is strict: wrong tag for the requested group, off-curve x,
out-of-range coordinates, wrong length, or an element outside the
order-p subgroup are all rejected.  Identity elements never occur in
honest protocol data and are not serializable.
"""

import hashlib
import random
from enum import Enum

from . import pairing as _pr


class CurveProfile(str, Enum):
    SYMMETRIC_512 = "SYMMETRIC_512"
    ASYMMETRIC_159 = "ASYMMETRIC_159"


class ConfigurationError(ValueError):
    """Unknown profile or unusable group configuration."""


class DecodeError(ValueError):
    """Malformed or non-canonical serialized value."""


class GroupMismatchError(TypeError):
    """Operation mixing elements of different groups or contexts."""


_SYSTEM_RNG = random.SystemRandom()

_TAGS = {"s1": (0x02, 0x03), "s2": (0x0A, 0x0B)}
_GT_TAG = 0x04


class Scalar:
    """An element of Z_p, always reduced mod p."""

    __slots__ = ("value", "modulus")

    def __init__(self, value, modulus):
        self.value = value % modulus
        self.modulus = modulus

    def _check(self, other):
        if not isinstance(other, Scalar):
            raise GroupMismatchError(f"expected Scalar, got {type(other).__name__}")
        if other.modulus != self.modulus:
            raise GroupMismatchError("scalars from different fields")

    def __add__(self, other):
        self._check(other)
        return Scalar(self.value + other.value, self.modulus)

    def __sub__(self, other):
        self._check(other)
        return Scalar(self.value - other.value, self.modulus)

    def __mul__(self, other):
        self._check(other)
        return Scalar(self.value * other.value, self.modulus)

    def __neg__(self):
        return Scalar(-self.value, self.modulus)

    def inverse(self):
        if self.value == 0:
            raise ZeroDivisionError("inverse of zero scalar")
        return Scalar(pow(self.value, self.modulus - 2, self.modulus), self.modulus)

    def __eq__(self, other):
        return (isinstance(other, Scalar) and self.value == other.value
                and self.modulus == other.modulus)

    def __hash__(self):
        return hash((self.value, self.modulus))

    def __repr__(self):
        return f"Scalar({self.value:#x})"

    def to_bytes(self, width):
        return self.value.to_bytes(width, "big")


class GroupElement:
    """A tagged element of one of the three groups, multiplicative notation."""

    __slots__ = ("ctx", "group", "point")

    def __init__(self, ctx, group, point):
        self.ctx = ctx
        self.group = group
        self.point = point

    def _check(self, other):
        if not isinstance(other, GroupElement):
            raise GroupMismatchError(f"expected GroupElement, got {type(other).__name__}")
        if other.ctx.profile != self.ctx.profile or other.group != self.group:
            raise GroupMismatchError(
                f"cannot combine {self.group} and {other.group} elements")

    def __mul__(self, other):
        self._check(other)
        q = self.ctx.params.q
        if self.group == "gt":
            return GroupElement(self.ctx, "gt", _pr.fq2_mul(self.point, other.point, q))
        return GroupElement(self.ctx, self.group, _pr.pt_add(self.point, other.point, q))

    def __pow__(self, k):
        if isinstance(k, Scalar):
            if k.modulus != self.ctx.p:
                raise GroupMismatchError("scalar from a different field")
            k = k.value
        elif not isinstance(k, int):
            raise GroupMismatchError(f"exponent must be int or Scalar, got {type(k).__name__}")
        k %= self.ctx.p
        q = self.ctx.params.q
        if self.group == "gt":
            return GroupElement(self.ctx, "gt", _pr.fq2_exp(self.point, k, q))
        return GroupElement(self.ctx, self.group, _pr.pt_mul(self.point, k, q))

    def inverse(self):
        q = self.ctx.params.q
        if self.group == "gt":
            # order-p subgroup elements have norm 1, so conjugation inverts
            return GroupElement(self.ctx, "gt", _pr.fq2_conj(self.point, q))
        return GroupElement(self.ctx, self.group, _pr.pt_neg(self.point, q))

    @property
    def is_identity(self):
        if self.group == "gt":
            return self.point == _pr.FQ2_ONE
        return self.point is None

    def __eq__(self, other):
        return (isinstance(other, GroupElement) and self.group == other.group
                and self.ctx.profile == other.ctx.profile and self.point == other.point)

    def __hash__(self):
        return hash((self.ctx.profile, self.group, self.point))

    def __repr__(self):
        if self.is_identity:
            return f"<{self.group} identity>"
        return f"<{self.group} {self.to_bytes().hex()[:16]}...>"

    def to_bytes(self):
        return self.ctx.serialize_element(self)


class GroupContext:
    """Bilinear group setting for one curve profile."""

    def __init__(self, profile):
        if isinstance(profile, str) and not isinstance(profile, CurveProfile):
            try:
                profile = CurveProfile(profile)
            except ValueError:
                raise ConfigurationError(f"unsupported profile: {profile!r}") from None
        if profile == CurveProfile.SYMMETRIC_512:
            self.params = _pr.SYM512
        elif profile == CurveProfile.ASYMMETRIC_159:
            self.params = _pr.ASYM159
        else:
            raise ConfigurationError(f"unsupported profile: {profile!r}")
        self.profile = profile
        self.p = self.params.r
        self.symmetric = self.params.symmetric
        # group tag used for key-side ("second source") elements
        self.key_group = "s1" if self.symmetric else "s2"
        self.g1 = GroupElement(self, "s1", self.params.g1)
        if self.symmetric:
            self.g2 = self.g1
        else:
            self.g2 = GroupElement(self, "s2", self.params.g2pre)
        self._t0 = None

    # -- scalars ------------------------------------------------------------

    def scalar(self, value):
        return Scalar(value, self.p)

    def random_scalar(self, rng=None, nonzero=True):
        rng = rng or _SYSTEM_RNG
        lo = 1 if nonzero else 0
        return Scalar(rng.randrange(lo, self.p), self.p)

    # -- hashing ------------------------------------------------------------

    def hash_to_bits(self, data):
        """SHA-256 digest of data, 32 bytes."""
        return hashlib.sha256(data).digest()

    def hash_to_scalar(self, data):
        """SHA-256 digest interpreted big-endian, reduced mod p."""
        return Scalar(int.from_bytes(hashlib.sha256(data).digest(), "big"), self.p)

    # -- pairing ------------------------------------------------------------

    def pair(self, a, b):
        """e(a, b) into the target group; argument order is s1 then s2."""
        self._want(a, "s1")
        self._want(b, self.key_group)
        return GroupElement(self, "gt", _pr.tate_pairing(a.point, b.point, self.params))

    def pair_ratio(self, a1, b1, a2, b2):
        """e(a1, b1) / e(a2, b2) with one shared final exponentiation."""
        self._want(a1, "s1")
        self._want(a2, "s1")
        self._want(b1, self.key_group)
        self._want(b2, self.key_group)
        return GroupElement(self, "gt", _pr.tate_pairing_ratio(
            a1.point, b1.point, a2.point, b2.point, self.params))

    def pairing_of_generators(self):
        """e(g1, g2), cached."""
        if self._t0 is None:
            self._t0 = self.pair(self.g1, self.g2)
        return self._t0

    def _want(self, el, group):
        if not isinstance(el, GroupElement) or el.ctx.profile != self.profile:
            raise GroupMismatchError("element from a different context")
        if el.group != group:
            raise GroupMismatchError(f"expected {group} element, got {el.group}")

    # -- identities ---------------------------------------------------------

    def identity(self, group):
        if group == "gt":
            return GroupElement(self, "gt", _pr.FQ2_ONE)
        if group in ("s1", "s2"):
            return GroupElement(self, group, None)
        raise ConfigurationError(f"unknown group: {group!r}")

    # -- serialization ------------------------------------------------------

    def serialize_element(self, el):
        self._own(el)
        if el.is_identity:
            raise ValueError("identity elements are not serializable")
        w = self.params.fq_bytes
        if el.group == "gt":
            a, b = el.point
            return bytes([_GT_TAG]) + a.to_bytes(w, "big") + b.to_bytes(w, "big")
        even, odd = _TAGS[el.group]
        x, y = el.point
        return bytes([odd if y & 1 else even]) + x.to_bytes(w, "big")

    def deserialize_element(self, data, group):
        """Strict decode of one element of the requested group."""
        if group not in ("s1", "s2", "gt"):
            raise ConfigurationError(f"unknown group: {group!r}")
        if group == "s2" and self.symmetric:
            group = "s1"
        if not isinstance(data, (bytes, bytearray)):
            raise DecodeError("expected bytes")
        w = self.params.fq_bytes
        q = self.params.q
        if group == "gt":
            if len(data) != 1 + 2 * w or data[0] != _GT_TAG:
                raise DecodeError("bad target-group encoding")
            a = int.from_bytes(data[1:1 + w], "big")
            b = int.from_bytes(data[1 + w:], "big")
            if a >= q or b >= q:
                raise DecodeError("coordinate out of range")
            el = (a, b)
            if el == _pr.FQ2_ONE or _pr.fq2_exp(el, self.p, q) != _pr.FQ2_ONE:
                raise DecodeError("not in the target subgroup")
            return GroupElement(self, "gt", el)
        if len(data) != 1 + w:
            raise DecodeError("bad element length")
        even, odd = _TAGS[group]
        if data[0] not in (even, odd):
            raise DecodeError(f"tag {data[0]:#04x} is not a {group} encoding")
        x = int.from_bytes(data[1:], "big")
        if x >= q:
            raise DecodeError("coordinate out of range")
        pt = _pr.pt_decompress(x, data[0] == odd, q, self.params.sqrt_exp)
        if pt is None:
            raise DecodeError("x is not on the curve")
        if _pr.pt_mul(pt, self.p, q) is not None:
            raise DecodeError("point outside the order-p subgroup")
        return GroupElement(self, group, pt)

    def _own(self, el):
        if not isinstance(el, GroupElement) or el.ctx.profile != self.profile:
            raise GroupMismatchError("element from a different context")

    def __repr__(self):
        return f"GroupContext({self.profile.value})"


def group_setup(profile):
    """Instantiate the bilinear group setting for a profile."""
    return GroupContext(profile)
