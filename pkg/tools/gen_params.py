"""Deterministic curve parameter generation for the two pairing profiles.

Both profiles use a supersingular curve  y^2 = x^3 + x  over F_q with
q = 3 (mod 4), which has exactly q + 1 points and embedding degree 2.
We pick the group order r first (a prime of the target size), then search
for a cofactor c with 4 | c such that q = r*c - 1 is prime.  q = 3 (mod 4)
follows from 4 | c, and sqrt in F_q is a single exponentiation.

Generators are derived from fixed seed tags by hash-to-x, completing to a
curve point and clearing the cofactor.  Everything here is deterministic;
rerunning the script reproduces the constants pinned in the package.

Run:  python tools/gen_params.py
"""

import hashlib
from sympy import isprime, nextprime


def hash_to_int(tag: bytes, ctr: int, nbytes: int) -> int:
    out = b""
    i = 0
    while len(out) < nbytes:
        out += hashlib.sha256(tag + ctr.to_bytes(4, "big") + bytes([i])).digest()
        i += 1
    return int.from_bytes(out[:nbytes], "big")


def pt_add(P, Q, q):
    if P is None:
        return Q
    if Q is None:
        return P
    x1, y1 = P
    x2, y2 = Q
    if x1 == x2:
        if (y1 + y2) % q == 0:
            return None
        lam = (3 * x1 * x1 + 1) * pow(2 * y1, q - 2, q) % q
    else:
        lam = (y2 - y1) * pow(x2 - x1, q - 2, q) % q
    x3 = (lam * lam - x1 - x2) % q
    y3 = (lam * (x1 - x3) - y1) % q
    return (x3, y3)


def pt_mul(k, P, q):
    R = None
    A = P
    while k:
        if k & 1:
            R = pt_add(R, A, q)
        A = pt_add(A, A, q)
        k >>= 1
    return R


def find_generator(tag: bytes, q: int, c: int, r: int):
    qbytes = (q.bit_length() + 7) // 8
    for ctr in range(10000):
        x = hash_to_int(tag, ctr, qbytes + 16) % q
        rhs = (x * x * x + x) % q
        y = pow(rhs, (q + 1) // 4, q)
        if y * y % q != rhs:
            continue
        G = pt_mul(c, (x, y), q)
        if G is None:
            continue
        # canonical form: even y
        gx, gy = G
        if gy & 1:
            gy = q - gy
        G = (gx, gy)
        assert pt_mul(r, G, q) is None
        return ctr, G
    raise RuntimeError("no generator found")


def gen_symmetric_512():
    # 160-bit group order, 512-bit field prime
    r = nextprime(1 << 159)
    c0 = (1 << 511) // r + 1  # smallest c with r*c - 1 >= 2^511
    c = (c0 + 3) // 4 * 4  # round up to a multiple of 4
    while True:
        q = r * c - 1
        if q.bit_length() == 512 and isprime(q):
            break
        c += 4
    assert q % 4 == 3 and (q + 1) % r == 0 and c % r != 0
    return q, r, c


def gen_asymmetric_159():
    # cofactor pinned to 4 so q = 4r - 1 is a 159-bit prime; final
    # exponentiation tail is tiny in this profile
    r = nextprime(1 << 156)
    while True:
        q = 4 * r - 1
        if q.bit_length() == 159 and isprime(q):
            break
        r = nextprime(r)
    assert q % 4 == 3 and (q + 1) % r == 0
    return q, r, 4


def emit(name, q, r, c, tags):
    print(f"# profile {name}")
    print(f"q = {hex(q)}  # {q.bit_length()} bits")
    print(f"r = {hex(r)}  # {r.bit_length()} bits")
    print(f"c = {hex(c)}")
    for label, tag in tags:
        ctr, (gx, gy) = find_generator(tag, q, c, r)
        print(f"{label} (tag={tag!r}, ctr={ctr}):")
        print(f"  x = {hex(gx)}")
        print(f"  y = {hex(gy)}")
    print()


if __name__ == "__main__":
    q, r, c = gen_symmetric_512()
    emit("SYMMETRIC_512", q, r, c, [("g1", b"pc/sym512/g1")])
    q, r, c = gen_asymmetric_159()
    emit("ASYMMETRIC_159", q, r, c,
         [("g1", b"pc/asym159/g1"), ("g2pre", b"pc/asym159/g2")])
