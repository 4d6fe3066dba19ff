"""Independent exact-arithmetic evaluations used as test oracles.

Everything here is written from the formulas directly in rational
arithmetic and shares no code with the package.
"""

from fractions import Fraction as Fr


def regime1_exact(lam, mu, L, c1, S0, beta, alpha=None, K1=None, xs2=0, ys2=0):
    lam, mu, L, c1, S0, beta = map(Fr, (lam, mu, L, c1, S0, beta))
    lp, mp = 1 - lam, 1 - mu
    L0 = L / lp
    C1 = lp * mp / (8 * L * L0 + 64 * L0 ** 2 + 4 + 14 * L ** 2)
    alpha = beta / C1 if alpha is None else Fr(alpha)
    g = beta / alpha
    C2 = (4 * alpha + 36 * L0 ** 2 * beta * (L ** 2 / lp + 4 / mp + 1)
          + 16 * c1 * beta * (2 * L0 ** 2 + 1) * (4 / (mp * g ** 2) + 1 + L0 ** 2))
    K1 = C2 if K1 is None else Fr(K1)
    G2 = 2 + 4 * (4 * L0 ** 2 + 2) * S0 + 8 * Fr(xs2) + 4 * Fr(ys2)
    C3 = 2 * S0 * K1 + 16 * c1 * G2 * beta / (mp * g ** 2) + 4 * c1 * G2 * beta * (1 + L0 ** 2)
    C4 = 2 * (L0 ** 2 + 1) * C3
    return dict(C1=C1, alpha=alpha, C2=C2, Gamma2=G2, C3=C3, C4=C4)


def regime2_root_exact(lam, mu, L, c1, beta, alpha):
    """The quantity whose 1/(1-a) power is D1."""
    lam, mu, L, c1, beta, alpha = map(Fr, (lam, mu, L, c1, beta, alpha))
    lp, mp = 1 - lam, 1 - mu
    L0 = L / lp
    return (16 * c1 * (2 * L0 ** 2 + 1) * (70 * L ** 2 / (lp * mp ** 2) + 4 / lp + 1 + L0 ** 2)
            + 4 * alpha / lp
            + (8 * L * L0 + 64 * L0 ** 2 + 5 + 82 * L ** 2) / (lp * mp) * beta / alpha
            + beta / alpha ** 2
            + 36 * L0 ** 2 * beta * (L ** 2 / lp + 4 / mp + 1))


def regime2_exact(lam, mu, L, c1, S0, beta, alpha, K2, xs2=0, ys2=0):
    lam, mu, L, c1, S0, beta, alpha, K2 = map(Fr, (lam, mu, L, c1, S0, beta, alpha, K2))
    lp, mp = 1 - lam, 1 - mu
    L0 = L / lp
    G3 = 2 + 12 * (4 * L0 ** 2 + 2) * S0 + 8 * Fr(xs2) + 4 * Fr(ys2)
    D2 = (4 * S0 * (K2 + 4 * alpha / lp)
          + (280 * L ** 2 / (lp * mp ** 2) + 16 / lp + 4 * (1 + L0 ** 2)) * c1 * G3 * alpha)
    return dict(Gamma3=G3, D2=D2, D3=2 * (L0 ** 2 + 1) * D2)


def aux_recursion_exact(epsilon, p, beta, K, k_max):
    """``s_k`` and the bound ``(2/p) eps_k / beta_k`` for ``q = 2`` in rationals."""
    epsilon, p, beta, K = map(Fr, (epsilon, p, beta, K))
    s = Fr(0)
    out = []
    for k in range(k_max + 1):
        bk = beta / (k + K)
        ek = epsilon / (k + K) ** 2
        out.append((s, 2 / p * ek / bk))
        s = (1 - p * bk) * s + ek
    return out
