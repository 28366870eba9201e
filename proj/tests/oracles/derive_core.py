"""Independent reference values for the core numerics (mpmath, 40 digits).

h-functions are taken straight from the binomial series of
(1-u)^-(k+1/2) (1+ru)^-1/2, without recurrences.
"""
import mpmath as mp
from fractions import Fraction
import sympy as sp

mp.mp.dps = 40


def h(k, l, r):
    if l < k:
        return mp.mpf(0)
    n = l - k
    a = mp.mpf(k) + mp.mpf(1) / 2
    s = mp.mpf(0)
    for j in range(n + 1):
        # [u^j](1+ru)^-1/2 * [u^(n-j)](1-u)^-a
        s += mp.binomial(-0.5, j) * mp.power(r, j) * mp.rf(a, n - j) / mp.factorial(n - j)
    return s


def h_exact(k, l, r):
    u = sp.symbols('u')
    f = (1 - u) ** (-(sp.Integer(k) + sp.Rational(1, 2))) * (1 + r * u) ** sp.Rational(-1, 2)
    return sp.nsimplify(sp.series(f, u, 0, l - k + 1).removeO().coeff(u, l - k))


def kernel(r, k, m):
    return sum(h(1, m - p, r) * (h(-2, k + p - 1, r) + r * h(-2, k + p - 2, r)) for p in range(m))


def nu_pos(q, c):
    return {k: q.get(k + 2, 0) * mp.power(c, k) for k in range(-1, max(q) - 1)}


def equations(q, c, r):
    nu = nu_pos(q, c)
    R1 = sum(v * h(0, k + 1, r) for k, v in nu.items()) - h(0, 1, r)
    R2 = 2 / c**2 + sum(v * h(0, k + 2, r) for k, v in nu.items()) - h(0, 2, r)
    M = 1 - sum(v * h(1, k + 1, r) for k, v in nu.items() if k >= 0)
    return R1, R2, M


def complete(q, c, r, K):
    nu = nu_pos(q, c)
    return {k: sum(kernel(r, k, m) * nu[m] for m in nu if m >= 1) for k in range(1, K + 1)}


def main():
    print("h(2,5,1/2) =", h_exact(2, 5, sp.Rational(1, 2)), mp.nstr(h(2, 5, mp.mpf(1) / 2), 20))
    print("kernel_R(1/2,3,2) =", sp.nsimplify(sum(
        h_exact(1, 2 - p, sp.Rational(1, 2)) * (h_exact(-2, 3 + p - 1, sp.Rational(1, 2)) +
                                                sp.Rational(1, 2) * h_exact(-2, 3 + p - 2, sp.Rational(1, 2)))
        for p in range(2))))

    # subcritical quadrangulation weight
    q = {4: mp.mpf(1) / 20}
    c = mp.findroot(lambda c: equations(q, c, 1)[1], 2.2)
    print("q4=1/20: c_plus =", mp.nstr(c, 20), "margin =", mp.nstr(equations(q, c, 1)[2], 20))

    # triangulation
    r0 = 2 * mp.sqrt(3) - 3
    c0 = mp.sqrt(6 + 4 * mp.sqrt(3))
    qt = {3: 1 / mp.sqrt(12 * mp.sqrt(3))}
    neg = complete(qt, c0, r0, 3)
    print("triangulation nu(-1), nu(-2), nu(-3) =", [mp.nstr(neg[k], 20) for k in (1, 2, 3)])
    print("triangulation W^(1) =", mp.nstr(neg[3] * c0**3 / 2, 20))

    # tune {3:1,4:1}
    def F(c, r, lt):
        t = mp.exp(lt)
        return equations({3: t, 4: t}, c, r)
    sol = mp.findroot(F, (2.6, 0.7, mp.log(0.058)))
    print("tune {3:1,4:1}: t* =", mp.nstr(mp.exp(sol[2]), 20), "c =", mp.nstr(sol[0], 20), "r =", mp.nstr(sol[1], 20))

    # slope targets
    for name, c, r, L in [("triangulation", c0, r0, (1 + 1 / mp.sqrt(3)) / 2),
                          ("geometric3", 2 * 10 / (2**1.5 * mp.sqrt(6)), mp.mpf(3) / 5, mp.mpf(5))]:
        print(name, "slope target =", mp.nstr(mp.sqrt(16 / (3 * (1 + r) * c**2 * L)), 20))


if __name__ == "__main__":
    main()
