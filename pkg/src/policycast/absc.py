"""Ciphertext-policy attribute-based signcryption.

One signcryption carries two layers: a random 256-bit content key
encrypts the message with AES-256-CBC, and the content key itself is
masked under the access policy, so only attribute sets satisfying the
tree can strip the mask.  The signature layer binds the message and the
session randomness to the sender's signing key.

Setup:    h = g1^beta, t = e(g1, g2)^alpha; master key (beta, g2^alpha).
KeyGen:   d_enc = g2^((alpha + r_enc)/beta), and per attribute j
          d_j = g2^(r_enc + H2(j) * r_j), d'_j = g2^(r_j).
          Signing pair: key_sign = g2^((alpha + r_sign)/beta),
          key_ver = g2^(r_sign).
SignCrypt: share s over the tree; C = h^s, per-leaf C_y = g1^(q_y(0)),
          C'_y = g1^(H2(attr) * q_y(0)); c_tilde = key_sym XOR
          H1(ser(t^s)); delta = e(C, g2)^zeta; pi = H1(msg) + H2(ser(delta));
          w = g1^s; psi = g2^zeta * key_sign^pi.
DeSignCrypt: recover A = e(g1,g2)^(r_enc * s) from the leaf components,
          unmask via e(C, d_enc)/A = t^s, decrypt, then check
          delta' = e(C, psi) / (e(w, key_ver) * t^s)^pi against pi.

All hash-derived scalars are SHA-256 digests reduced mod p; the mask on
the content key is the raw 32-byte digest.  Failure is a value: every
decryption/verification problem surfaces as None, never as a partially
recovered message.
"""

import json
from dataclasses import dataclass

from cryptography.hazmat.primitives import padding as _padding
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from .groups import DecodeError, GroupContext, Scalar, _SYSTEM_RNG
from .policy import (AccessTree, lagrange_coeff, normalize_attribute,
                     parse_policy, policy_to_text, satisfies, share_secret)

KEY_BYTES = 32
IV_BYTES = 16


def _rand_bytes(rng, n):
    return rng.getrandbits(8 * n).to_bytes(n, "big")


def _xor(a, b):
    return bytes(x ^ y for x, y in zip(a, b))


_HEX_CHARS = frozenset("0123456789abcdef")


def hex_bytes(text, width=None):
    """Decode canonical (lowercase, even-length) hex; DecodeError otherwise."""
    if (not isinstance(text, str) or len(text) % 2
            or not _HEX_CHARS.issuperset(text)):
        raise DecodeError("expected lowercase hex")
    if width is not None and len(text) != 2 * width:
        raise DecodeError(f"expected {width} hex-encoded bytes")
    return bytes.fromhex(text)


@dataclass(frozen=True)
class PublicParams:
    ctx: GroupContext
    h: object  # g1^beta
    t: object  # e(g1, g2)^alpha


@dataclass(frozen=True)
class MasterKey:
    beta: Scalar
    g2_alpha: object


@dataclass(frozen=True)
class AttributeKey:
    """Decryption key for one attribute set; comps maps attr -> (d_j, d'_j)."""
    d_enc: object
    attributes: frozenset
    comps: dict


@dataclass(frozen=True)
class SigningKey:
    key_sign: object


@dataclass(frozen=True)
class VerificationKey:
    key_ver: object


@dataclass(frozen=True)
class SignedCiphertext:
    tree: AccessTree
    c_tilde: bytes          # masked content key
    c: object               # h^s
    leaf_c: dict            # leaf arena index -> (C_y, C'_y)
    w: object               # g1^s
    pi: Scalar
    psi: object


@dataclass(frozen=True)
class MessageCiphertext:
    iv: bytes
    body: bytes


# ---------------------------------------------------------------------------
# symmetric layer

def sym_encrypt(key, msg, rng=None):
    """AES-256-CBC with PKCS#7 padding and a fresh random IV."""
    if len(key) != KEY_BYTES:
        raise ValueError("content key must be 32 bytes")
    rng = rng or _SYSTEM_RNG
    iv = _rand_bytes(rng, IV_BYTES)
    padder = _padding.PKCS7(128).padder()
    data = padder.update(msg) + padder.finalize()
    enc = Cipher(algorithms.AES(key), modes.CBC(iv)).encryptor()
    return MessageCiphertext(iv, enc.update(data) + enc.finalize())


def sym_decrypt(key, ct):
    """Inverse of sym_encrypt; None on any malformed input or bad padding."""
    if len(key) != KEY_BYTES or len(ct.iv) != IV_BYTES:
        return None
    if not ct.body or len(ct.body) % 16:
        return None
    dec = Cipher(algorithms.AES(key), modes.CBC(ct.iv)).decryptor()
    data = dec.update(ct.body) + dec.finalize()
    unpadder = _padding.PKCS7(128).unpadder()
    try:
        return unpadder.update(data) + unpadder.finalize()
    except ValueError:
        return None


# ---------------------------------------------------------------------------
# the four scheme algorithms

def setup(profile_or_ctx, rng=None):
    """Generate public parameters and the master key."""
    ctx = (profile_or_ctx if isinstance(profile_or_ctx, GroupContext)
           else GroupContext(profile_or_ctx))
    rng = rng or _SYSTEM_RNG
    alpha = ctx.random_scalar(rng)
    beta = ctx.random_scalar(rng)
    h = ctx.g1 ** beta
    t = ctx.pairing_of_generators() ** alpha
    return PublicParams(ctx, h, t), MasterKey(beta, ctx.g2 ** alpha)


def _attr_hash(ctx, attr):
    return ctx.hash_to_scalar(attr.encode("utf-8"))


def keygen(pp, mk, attributes, rng=None):
    """Issue a decryption key for a non-empty attribute set."""
    ctx = pp.ctx
    rng = rng or _SYSTEM_RNG
    attrs = frozenset(normalize_attribute(a) for a in attributes)
    if not attrs:
        raise ValueError("attribute set must be non-empty")
    r_enc = ctx.random_scalar(rng)
    beta_inv = mk.beta.inverse()
    d_enc = (mk.g2_alpha * ctx.g2 ** r_enc) ** beta_inv
    comps = {}
    g2_renc = ctx.g2 ** r_enc
    for attr in sorted(attrs):
        r_j = ctx.random_scalar(rng)
        d_j = g2_renc * ctx.g2 ** (_attr_hash(ctx, attr) * r_j)
        d_j_prime = ctx.g2 ** r_j
        comps[attr] = (d_j, d_j_prime)
    return AttributeKey(d_enc, attrs, comps)


def signing_keygen(pp, mk, rng=None):
    """Issue a signing/verification pair (no attributes involved)."""
    ctx = pp.ctx
    rng = rng or _SYSTEM_RNG
    r_sign = ctx.random_scalar(rng)
    beta_inv = mk.beta.inverse()
    key_sign = (mk.g2_alpha * ctx.g2 ** r_sign) ** beta_inv
    return SigningKey(key_sign), VerificationKey(ctx.g2 ** r_sign)


def signcrypt(pp, signing_key, msg, tree, rng=None, transcript=None):
    """Encrypt msg under the tree and sign; returns (SignedCiphertext, MessageCiphertext)."""
    ctx = pp.ctx
    rng = rng or _SYSTEM_RNG
    if not isinstance(msg, (bytes, bytearray)) or len(msg) == 0:
        raise ValueError("message must be non-empty bytes")
    msg = bytes(msg)
    if isinstance(tree, str):
        tree = parse_policy(tree)

    key_sym = _rand_bytes(rng, KEY_BYTES)
    ct_msg = sym_encrypt(key_sym, msg, rng)

    s = ctx.random_scalar(rng)
    shares = share_secret(tree, s, rng)
    t_s = pp.t ** s
    c_tilde = _xor(key_sym, ctx.hash_to_bits(t_s.to_bytes()))
    c = pp.h ** s
    leaf_c = {}
    for idx in tree.leaves():
        attr = tree.nodes[idx].attribute
        q0 = shares[idx]
        leaf_c[idx] = (ctx.g1 ** q0, ctx.g1 ** (_attr_hash(ctx, attr) * q0))
    w = ctx.g1 ** s

    zeta = ctx.random_scalar(rng)
    delta = ctx.pair(c, ctx.g2) ** zeta
    pi = ctx.hash_to_scalar(msg) + ctx.hash_to_scalar(delta.to_bytes())
    psi = (ctx.g2 ** zeta) * (signing_key.key_sign ** pi)

    st = SignedCiphertext(tree, c_tilde, c, leaf_c, w, pi, psi)
    if transcript is not None:
        transcript.update(s=s, zeta=zeta, delta=delta, t_s=t_s,
                          key_sym=key_sym, shares=shares)
    return st, ct_msg


def decrypt_node(pp, st, key, node=None):
    """Evaluate the decryption tree at a node.

    Returns e(g1, g2)^(r_enc * q_node(0)) when the key's attributes
    satisfy the subtree rooted there, else None.  Leaves pair the leaf
    components against the matching key components; interior nodes
    Lagrange-combine a deterministic choice of k satisfying children.
    """
    ctx = pp.ctx
    tree = st.tree
    node = tree.root if node is None else node
    sat = satisfies(tree, key.attributes, root=node)
    if not sat.satisfied:
        return None

    def value(idx):
        n = tree.nodes[idx]
        if n.is_leaf:
            c_y, c_y_prime = st.leaf_c[idx]
            d_j, d_j_prime = key.comps[n.attribute]
            return ctx.pair_ratio(c_y, d_j, c_y_prime, d_j_prime)
        positions = sat.chosen[idx]
        acc = ctx.identity("gt")
        for pos in positions:
            coeff = lagrange_coeff(pos, positions, 0, ctx.p)
            acc = acc * value(n.children[pos - 1]) ** coeff
        return acc

    return value(node)


def designcrypt(pp, st, ct_msg, key, verification_key, transcript=None):
    """Recover and verify the message; None on any failure."""
    ctx = pp.ctx
    a = decrypt_node(pp, st, key)
    if a is None:
        if transcript is not None:
            transcript["reason"] = "unsatisfied"
        return None
    t_s = ctx.pair(st.c, key.d_enc) * a.inverse()
    key_sym = _xor(st.c_tilde, ctx.hash_to_bits(t_s.to_bytes()))
    msg = sym_decrypt(key_sym, ct_msg)
    if transcript is not None:
        transcript.update(a=a, t_s=t_s, key_sym=key_sym)
    if msg is None:
        if transcript is not None:
            transcript["reason"] = "decrypt-failed"
        return None
    denom = (ctx.pair(st.w, verification_key.key_ver) * t_s) ** st.pi
    delta_prime = ctx.pair(st.c, st.psi) * denom.inverse()
    if transcript is not None:
        transcript["delta_prime"] = delta_prime
    check = ctx.hash_to_scalar(msg) + ctx.hash_to_scalar(delta_prime.to_bytes())
    if check != st.pi:
        if transcript is not None:
            transcript["reason"] = "verify-failed"
        return None
    return msg


# ---------------------------------------------------------------------------
# wire form

def st_to_json(st):
    ctx = st.c.ctx
    leaves = []
    for idx in st.tree.leaves():
        c_y, c_y_prime = st.leaf_c[idx]
        leaves.append({"attr": st.tree.nodes[idx].attribute,
                       "c_y": c_y.to_bytes().hex(),
                       "c_y_prime": c_y_prime.to_bytes().hex()})
    return {
        "policy": policy_to_text(st.tree),
        "c_tilde": st.c_tilde.hex(),
        "c": st.c.to_bytes().hex(),
        "leaves": leaves,
        "w": st.w.to_bytes().hex(),
        "pi": str(st.pi.value),
        "psi": st.psi.to_bytes().hex(),
    }


def st_from_json(ctx, obj):
    """Strict decode; raises DecodeError on any structural problem."""
    try:
        tree = parse_policy(obj["policy"])
        c_tilde = hex_bytes(obj["c_tilde"], KEY_BYTES)
        c = ctx.deserialize_element(hex_bytes(obj["c"]), "s1")
        w = ctx.deserialize_element(hex_bytes(obj["w"]), "s1")
        psi = ctx.deserialize_element(hex_bytes(obj["psi"]), "s2")
        pi_raw = obj["pi"]
        if not isinstance(pi_raw, str) or not pi_raw.isdigit():
            raise DecodeError("pi must be a decimal string")
        pi_val = int(pi_raw)
        if not 0 <= pi_val < ctx.p:
            raise DecodeError("pi out of range")
        leaf_idx = tree.leaves()
        raw_leaves = obj["leaves"]
        if not isinstance(raw_leaves, list) or len(raw_leaves) != len(leaf_idx):
            raise DecodeError("leaf component count does not match the tree")
        leaf_c = {}
        for idx, entry in zip(leaf_idx, raw_leaves):
            if entry["attr"] != tree.nodes[idx].attribute:
                raise DecodeError("leaf attribute mismatch")
            leaf_c[idx] = (
                ctx.deserialize_element(hex_bytes(entry["c_y"]), "s1"),
                ctx.deserialize_element(hex_bytes(entry["c_y_prime"]), "s1"),
            )
        return SignedCiphertext(tree, c_tilde, c, leaf_c, w,
                                Scalar(pi_val, ctx.p), psi)
    except DecodeError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise DecodeError(f"malformed signed ciphertext: {exc}") from None


def ct_to_json(ct_msg):
    return {"iv": ct_msg.iv.hex(), "body": ct_msg.body.hex()}


def ct_from_json(obj):
    try:
        iv = hex_bytes(obj["iv"], IV_BYTES)
        body = hex_bytes(obj["body"])
    except DecodeError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise DecodeError(f"malformed message ciphertext: {exc}") from None
    if not body or len(body) % 16:
        raise DecodeError("body must be a positive multiple of the block size")
    return MessageCiphertext(iv, body)


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def payload_bytes(st, ct_msg):
    """Canonical bytes of one signcrypted payload; input to the ledger digest."""
    return canonical_json({"st": st_to_json(st), "ct": ct_to_json(ct_msg)})


def payload_from_bytes(ctx, data):
    try:
        obj = json.loads(data.decode("utf-8"))
        return st_from_json(ctx, obj["st"]), ct_from_json(obj["ct"])
    except DecodeError:
        raise
    except (KeyError, TypeError, ValueError, UnicodeDecodeError) as exc:
        raise DecodeError(f"malformed payload: {exc}") from None


# ---------------------------------------------------------------------------
# key (de)serialization for handoff files

def attribute_key_to_json(key):
    return {
        "d_enc": key.d_enc.to_bytes().hex(),
        "comps": {a: [d.to_bytes().hex(), dp.to_bytes().hex()]
                  for a, (d, dp) in sorted(key.comps.items())},
    }


def attribute_key_from_json(ctx, obj):
    try:
        d_enc = ctx.deserialize_element(hex_bytes(obj["d_enc"]), "s2")
        comps = {}
        for attr, (d_hex, dp_hex) in obj["comps"].items():
            comps[attr] = (ctx.deserialize_element(hex_bytes(d_hex), "s2"),
                           ctx.deserialize_element(hex_bytes(dp_hex), "s2"))
        if not comps:
            raise DecodeError("empty attribute key")
        return AttributeKey(d_enc, frozenset(comps), comps)
    except DecodeError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise DecodeError(f"malformed attribute key: {exc}") from None


def public_params_to_json(pp):
    return {"profile": pp.ctx.profile.value,
            "h": pp.h.to_bytes().hex(),
            "t": pp.t.to_bytes().hex()}


def public_params_from_json(obj):
    try:
        ctx = GroupContext(obj["profile"])
        return PublicParams(ctx,
                            ctx.deserialize_element(hex_bytes(obj["h"]), "s1"),
                            ctx.deserialize_element(hex_bytes(obj["t"]), "gt"))
    except DecodeError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise DecodeError(f"malformed public parameters: {exc}") from None
