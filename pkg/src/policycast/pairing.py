"""Low-level pairing arithmetic over supersingular curves.

Both profiles use the curve  y^2 = x^3 + x  over a prime field F_q with
q = 3 (mod 4).  Such a curve is supersingular, has exactly q + 1 points,
and has embedding degree 2.  The quadratic extension is represented as
F_q2 = F_q[i] / (i^2 + 1).  The distortion map

    phi(x, y) = (-x, i*y)

sends E(F_q) into the trace-zero subgroup of E(F_q2), so the modified
Tate pairing  e(P, Q) = Tate_r(P, phi(Q))  is non-degenerate even when
both inputs come from the same order-r subgroup of E(F_q).

Conventions used throughout this module:

  * F_q elements are plain ints in [0, q).
  * F_q2 elements are (a, b) tuples meaning a + b*i.
  * Curve points are affine (x, y) tuples; None is the point at infinity.
  * The pairing takes both inputs as points of E(F_q); the second input
    is the phi-preimage of the actual second pairing argument, and the
    distortion map is applied inside the Miller loop.

The Miller loop uses Jacobian coordinates and denominator elimination:
with an even embedding degree every F_q-rational line factor (verticals,
and any F_q scaling of the tangent/chord lines) is annihilated by the
final exponentiation (q - 1)(q + 1)/r, so those factors are simply
dropped.  Parameters were produced by tools/gen_params.py and are pinned
here; rerunning that script reproduces them.
"""


class CurveParams:
    """Pinned constants for one curve profile."""

    __slots__ = ("name", "q", "r", "c", "g1", "g2pre", "symmetric",
                 "fq_bytes", "r_bytes", "sqrt_exp", "r_tail")

    def __init__(self, name, q, r, c, g1, g2pre, symmetric):
        self.name = name
        self.q = q
        self.r = r
        self.c = c
        self.g1 = g1
        self.g2pre = g2pre
        self.symmetric = symmetric
        self.fq_bytes = (q.bit_length() + 7) // 8
        self.r_bytes = (r.bit_length() + 7) // 8
        self.sqrt_exp = (q + 1) // 4  # sqrt(a) = a^((q+1)/4) when q = 3 mod 4
        self.r_tail = bin(r)[3:]  # bits of r after the leading one


# 512-bit field, 160-bit group order; source groups coincide.
SYM512 = CurveParams(
    name="SYMMETRIC_512",
    q=0x800000000000000000000000000000000000000000000000000000000000000000000000000000000000002c000000000000000000000000065f864c000066c7,
    r=0x800000000000000000000000000000000000012b,
    c=0xfffffffffffffffffffffffffffffffffffffdaa00000000000000000000000000000000000574e400000058,
    g1=(0x5885b6063364b203d5d1600b75f18ce5ec35b7032369e98bd54ade60fcabdaffb5dace311ce1ce5af9d7a3e8f407a333b48664e1f192cba6180139d8609e5013,
        0x626875d7f182c5952f23635eef3f48b49c300e14bbd786ad8732e768379911288611a6fcf55b863e9e91c58b9ef5a79dfc482bfd7bcb8e3c5094bcbd47dee258),
    g2pre=None,  # symmetric: second source group is the first
    symmetric=True,
)

# 159-bit field, 157-bit group order, cofactor 4; the second source group
# is the distorted image of an independently derived subgroup generator.
ASYM159 = CurveParams(
    name="ASYMMETRIC_159",
    q=0x4000000000000000000000000000000000000a3b,
    r=0x100000000000000000000000000000000000028f,
    c=0x4,
    g1=(0x15fb97024654d52fd39b41cbbb056c2efc1a0180,
        0x243a3b21bc0ee95c7ae5bbbb1ad6bb4a36e67c36),
    g2pre=(0x1be0e6c230532f6ca1f73e921a7128d1b5222ef0,
           0x3fcd4903e0e03560af496a9683731b2e12439a3e),
    symmetric=False,
)

FQ2_ONE = (1, 0)


# ---------------------------------------------------------------------------
# F_q2 arithmetic

def fq2_mul(x, y, q):
    a, b = x
    c, d = y
    ac = a * c
    bd = b * d
    return (ac - bd) % q, ((a + b) * (c + d) - ac - bd) % q


def fq2_sqr(x, q):
    a, b = x
    return (a + b) * (a - b) % q, 2 * a * b % q


def fq2_conj(x, q):
    a, b = x
    return a, -b % q


def fq2_inv(x, q):
    a, b = x
    n = pow(a * a + b * b, q - 2, q)
    return a * n % q, -b * n % q


def fq2_exp(x, e, q):
    if e < 0:
        x = fq2_inv(x, q)
        e = -e
    out = FQ2_ONE
    for bit in bin(e)[2:]:
        out = fq2_sqr(out, q)
        if bit == "1":
            out = fq2_mul(out, x, q)
    return out


# ---------------------------------------------------------------------------
# E(F_q) arithmetic, affine interface

def pt_is_on_curve(P, q):
    if P is None:
        return True
    x, y = P
    return 0 <= x < q and 0 <= y < q and (y * y - (x * x * x + x)) % q == 0


def pt_neg(P, q):
    if P is None:
        return None
    x, y = P
    return x, -y % q


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
        num = (3 * x1 * x1 + 1) % q
        den = pow(2 * y1, q - 2, q)
    else:
        num = (y2 - y1) % q
        den = pow(x2 - x1, q - 2, q)
    lam = num * den % q
    x3 = (lam * lam - x1 - x2) % q
    y3 = (lam * (x1 - x3) - y1) % q
    return x3, y3


def _jac_double(X, Y, Z, q):
    # Jacobian doubling for y^2 = x^3 + a*x with a = 1
    Zsq = Z * Z % q
    A = X * X % q
    B = Y * Y % q
    Cc = B * B % q
    D = 2 * ((X + B) * (X + B) - A - Cc) % q
    E = (3 * A + Zsq * Zsq) % q
    X2 = (E * E - 2 * D) % q
    Y2 = (E * (D - X2) - 8 * Cc) % q
    Z2 = 2 * Y * Z % q
    return X2, Y2, Z2


def pt_mul(P, k, q):
    """k*P via Jacobian double-and-add; returns an affine point."""
    if P is None or k == 0:
        return None
    if k < 0:
        return pt_mul(pt_neg(P, q), -k, q)
    xp, yp = P
    X, Y, Z = xp, yp, 1
    for bit in bin(k)[3:]:
        if Z:
            X, Y, Z = _jac_double(X, Y, Z, q)
        if bit == "1":
            if Z == 0:
                X, Y, Z = xp, yp, 1
                continue
            # mixed addition with the affine base point
            Zsq = Z * Z % q
            H = (xp * Zsq - X) % q
            R = (yp * Z % q * Zsq - Y) % q
            if H == 0:
                if R == 0:
                    X, Y, Z = _jac_double(X, Y, Z, q)  # T == P
                else:
                    X, Y, Z = 0, 1, 0  # T == -P
                continue
            H2 = H * H % q
            H3 = H * H2 % q
            X2 = (R * R - H3 - 2 * X * H2) % q
            Y2 = (R * (X * H2 - X2) - Y * H3) % q
            Z2 = Z * H % q
            X, Y, Z = X2, Y2, Z2
    if Z == 0:
        return None
    zinv = pow(Z, q - 2, q)
    z2 = zinv * zinv % q
    return X * z2 % q, Y * z2 % q * zinv % q


def pt_decompress(x, y_is_odd, q, sqrt_exp):
    """Recover (x, y) from x and the parity of y; None if x is not on the curve."""
    if not 0 <= x < q:
        return None
    rhs = (x * x * x + x) % q
    y = pow(rhs, sqrt_exp, q)
    if y * y % q != rhs:
        return None
    if y == 0:
        return None if y_is_odd else (x, 0)
    if (y & 1) != (1 if y_is_odd else 0):
        y = q - y
    return x, y


# ---------------------------------------------------------------------------
# Tate pairing

def tate_miller(P, Q, params):
    """Miller loop for the reduced Tate pairing of order-r points.

    P and Q are affine points of E(F_q); the lines are evaluated at
    phi(Q) = (-xq, i*yq).  Result is the unreduced f in F_q2; feed it to
    tate_final_exp.  Subfield line factors are dropped (k = 2 is even).
    """
    q = params.q
    xp, yp = P
    xq, yq = Q
    fa, fb = 1, 0
    X, Y, Z = xp, yp, 1
    for bit in params.r_tail:
        # --- doubling step with tangent line at T evaluated at phi(Q)
        Zsq = Z * Z % q
        B = Y * Y % q
        A = X * X % q
        Cc = B * B % q
        D = 2 * ((X + B) * (X + B) - A - Cc) % q
        E = (3 * A + Zsq * Zsq) % q
        X2 = (E * E - 2 * D) % q
        Z2 = 2 * Y * Z % q
        Y2 = (E * (D - X2) - 8 * Cc) % q
        # line: E*(X + xq*Zsq) - 2B  +  i * Z2*Zsq*yq
        lr = (E * (X + xq * Zsq) - 2 * B) % q
        li = Z2 * Zsq % q * yq % q
        # f <- f^2 * l
        t = (fa + fb) * (fa - fb) % q
        fb = 2 * fa * fb % q
        fa = t
        m1 = fa * lr
        m2 = fb * li
        fa, fb = (m1 - m2) % q, ((fa + fb) * (lr + li) - m1 - m2) % q
        X, Y, Z = X2, Y2, Z2
        if bit == "1":
            # --- addition step T + P with chord line evaluated at phi(Q)
            Zsq = Z * Z % q
            U2 = xp * Zsq % q
            S2 = yp * Z % q * Zsq % q
            H = (U2 - X) % q
            R = (S2 - Y) % q
            if H == 0 and R != 0:
                # vertical chord: T = -P, line is F_q-rational, drop it.
                # For k = r this happens only on the last iteration.
                X, Y, Z = 0, 1, 0
                break
            H2 = H * H % q
            H3 = H * H2 % q
            X2 = (R * R - H3 - 2 * X * H2) % q
            Y2 = (R * (X * H2 - X2) - Y * H3) % q
            Z2 = Z * H % q
            # line: Z2*yp - R*(xq + xp)  +  i * (-Z2*yq)
            lr = (Z2 * yp - R * (xq + xp)) % q
            li = -(Z2 * yq) % q
            m1 = fa * lr
            m2 = fb * li
            fa, fb = (m1 - m2) % q, ((fa + fb) * (lr + li) - m1 - m2) % q
            X, Y, Z = X2, Y2, Z2
    return fa, fb


def tate_final_exp(f, params):
    """f^((q^2 - 1)/r) computed as (conj(f)/f)^c with c = (q + 1)/r."""
    q = params.q
    a, b = f
    n = pow(a * a + b * b, q - 2, q)
    conj = (a, -b % q)
    finv = (a * n % q, -b * n % q)
    g = fq2_mul(conj, finv, q)
    return fq2_exp(g, params.c, q)


def tate_pairing(P, Q, params):
    """Reduced Tate pairing e(P, phi(Q)); inputs are E(F_q) points of order r."""
    if P is None or Q is None:
        return FQ2_ONE
    return tate_final_exp(tate_miller(P, Q, params), params)


def tate_pairing_ratio(P1, Q1, P2, Q2, params):
    """e(P1, phi(Q1)) / e(P2, phi(Q2)) with a single shared final exponentiation.

    Uses conj(m2) in place of m2^-1: the final exponentiation contains a
    factor q - 1, and conjugation is the q-power Frobenius of F_q2.
    """
    if P1 is None or Q1 is None:
        m1 = FQ2_ONE
    else:
        m1 = tate_miller(P1, Q1, params)
    if P2 is None or Q2 is None:
        m2 = FQ2_ONE
    else:
        m2 = tate_miller(P2, Q2, params)
    q = params.q
    return tate_final_exp(fq2_mul(m1, fq2_conj(m2, q), q), params)
