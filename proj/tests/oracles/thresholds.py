"""High-precision reference values frozen into tests/golden/thresholds.json.

Each quantity is computed here by a route that does not share code or
formulas with the C++ solvers:
  * BM threshold: maximiser of the barrier coefficient C(b) = theta / (sqrt(b) V1'(b)),
    located by golden-section search on C then polished with mpmath.findroot
    on a numerical derivative.
  * Logistic threshold: root of x psi'' + psi'/2 with psi' and psi'' from
    mpmath.diff on hyp1f1, not from the series-derivative identities.
  * Generator supremum: direct numerical maximisation of (L - rho) Pi.
  * Kummer M: mpmath.hyp1f1 at 40 digits.

Run: python3 tests/oracles/thresholds.py > tests/golden/thresholds.json
"""

import json
import random

import mpmath as mp

mp.mp.dps = 40


def lambdas(mu, sigma, rho):
    s2 = mp.mpf(sigma) ** 2
    d = mp.sqrt(mu * mu + 2 * rho * s2)
    return (-mu + d) / s2, (-mu - d) / s2


def bm_case(theta, mu, sigma, rho, xs):
    l1, l2 = lambdas(mp.mpf(mu), sigma, mp.mpf(rho))
    E = lambda x: mp.exp(l1 * x) - mp.exp(l2 * x)
    dE = lambda x: l1 * mp.exp(l1 * x) - l2 * mp.exp(l2 * x)
    coef = lambda b: theta / (mp.sqrt(b) * dE(b))
    # Golden-section maximisation of the barrier coefficient on a bracket
    # that holds the interior maximum.
    lo, hi = mp.mpf("0.5"), mp.mpf(10)
    g = (mp.sqrt(5) - 1) / 2
    a, b = hi - g * (hi - lo), lo + g * (hi - lo)
    for _ in range(200):
        if coef(a) > coef(b):
            hi, b = b, a
            a = hi - g * (hi - lo)
        else:
            lo, a = a, b
            b = lo + g * (hi - lo)
    x = mp.findroot(lambda t: mp.diff(coef, t), (lo + hi) / 2)
    C = coef(x)
    A = C * E(x)
    value = lambda y: C * E(y) if y <= x else 2 * theta * (mp.sqrt(y) - mp.sqrt(x)) + A
    return {
        "theta": theta, "mu": mu, "sigma": sigma, "rho": rho,
        "x_star": float(x), "C": float(C), "A": float(A),
        "values": [{"x": y, "value": float(value(mp.mpf(y)))} for y in xs],
    }


def logistic_case(theta, mu, K, sigma, rho):
    mu, K, sigma, rho = map(mp.mpf, (mu, K, sigma, rho))
    s2 = sigma ** 2
    # x^e M(e, b, c x) solves the homogeneous equation when e solves
    # s2/2 e (e - 1) + mu e - rho = 0 (positive root).
    e = ((s2 / 2 - mu) + mp.sqrt((s2 / 2 - mu) ** 2 + 2 * s2 * rho)) / s2
    bb = 2 * e + 2 * mu / s2
    c = 2 * mu / (K * s2)
    psi = lambda x: x ** e * mp.hyp1f1(e, bb, c * x)
    f = lambda x: x * mp.diff(psi, x, 2) + mp.diff(psi, x, 1) / 2
    xs = None
    grid = [K * mp.mpf(10) ** (k / mp.mpf(50) - 4) for k in range(0, 221)]
    for u, v in zip(grid, grid[1:]):
        if mp.sign(f(u)) != mp.sign(f(v)):
            xs = bisect(f, u, v, iters=140)
            break
    v_star = theta * mp.sqrt(xs) * (mu * (1 - xs / K) - s2 / 4) / rho
    ode = lambda x: s2 / 2 * x * x * mp.diff(psi, x, 2) + mu * x * (1 - x / K) * mp.diff(psi, x) - rho * psi(x)
    return {
        "theta": theta, "mu": float(mu), "K": float(K), "sigma": float(sigma), "rho": float(rho),
        "psi_theta": float(e), "psi_b": float(bb), "psi_z_scale": float(c),
        "x_star": float(xs), "value_at_x_star": float(v_star),
        "ode_residual_at_1": float(abs(ode(mp.mpf(1)))),
    }


def bisect(f, lo, hi, iters=200):
    flo = f(lo)
    assert mp.sign(flo) != mp.sign(f(hi))
    for _ in range(iters):
        mid = (lo + hi) / 2
        fm = f(mid)
        if mp.sign(fm) == mp.sign(flo):
            lo, flo = mid, fm
        else:
            hi = mid
    return (lo + hi) / 2


def generator_sup(theta, mu, sigma, rho, K=None):
    mu, sigma, rho = map(mp.mpf, (mu, sigma, rho))
    if K is None:
        g = lambda x: theta * (mu / mp.sqrt(x) - sigma ** 2 / (4 * x * mp.sqrt(x)) - 2 * rho * mp.sqrt(x))
    else:
        g = lambda x: theta * mp.sqrt(x) * (mu * (1 - x / K) - sigma ** 2 / 4 - 2 * rho)
    x = bisect(lambda t: mp.diff(g, t), mp.mpf("0.01"), mp.mpf(20) if K is None else mp.mpf(K))
    return {"theta": theta, "mu": float(mu), "sigma": float(sigma), "rho": float(rho),
            "K": K, "x_tilde": float(x), "M": float(g(x))}


def kummer_samples(n=40, seed=20240611):
    rng = random.Random(seed)
    out = []
    for _ in range(n):
        a = round(rng.uniform(-3.0, 6.0), 6)
        b = round(rng.uniform(0.25, 8.0), 6)
        z = round(rng.uniform(-20.0, 20.0), 6)
        out.append({"a": a, "b": b, "z": z, "M": float(mp.hyp1f1(a, b, z))})
    return out


def main():
    golden = {
        "schema": 1,
        "bm": [bm_case(t, 1.0, 1.0, 0.1, [0.5, 1.0, 2.0, 3.0]) for t in (0.5, 1.0, 2.0)]
        + [bm_case(1.0, 0.8, 0.7, 0.05, [1.0])],
        "logistic": [logistic_case(1.0, 1.0, 1.0, 0.5, 0.1), logistic_case(2.0, 2.0, 3.0, 1.0, 0.2)],
        "generator_sup": [generator_sup(1.0, 1.0, 1.0, 0.1), generator_sup(1.0, 0.1, 1.0, 0.1),
                          generator_sup(1.0, 1.0, 0.5, 0.1, K=1.0)],
        "kummer": kummer_samples(),
    }
    print(json.dumps(golden, indent=2))


if __name__ == "__main__":
    main()
