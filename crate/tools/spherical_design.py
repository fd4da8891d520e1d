"""Compute numerical spherical t-designs and print them as Rust tables.

Points are parameterized by spherical angles; the residual vector is the
uniform-weight sum of every real spherical harmonic of degree 1..t, which
vanishes exactly for a t-design. Solved by Levenberg-Marquardt from
several Fibonacci-perturbed starts.

usage: python3 tools/spherical_design.py NPOINTS DEGREE [SEED]
"""
import sys

import numpy as np
from scipy.optimize import least_squares
from scipy.special import sph_harm_y


def real_sh_sums(theta, phi, t):
    rows = []
    for l in range(1, t + 1):
        for m in range(-l, l + 1):
            y = sph_harm_y(l, abs(m), theta, phi)
            if m < 0:
                v = np.sqrt(2) * (-1) ** m * y.imag
            elif m == 0:
                v = y.real
            else:
                v = np.sqrt(2) * (-1) ** m * y.real
            rows.append(v.sum())
    return np.array(rows)


def to_xyz(theta, phi):
    return np.stack(
        [np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)], axis=1
    )


def fibonacci(n):
    i = np.arange(n) + 0.5
    z = 1 - 2 * i / n
    phi = np.pi * (1 + 5**0.5) * i
    return np.arccos(z), np.mod(phi, 2 * np.pi)


def solve(n, t, seed):
    rng = np.random.default_rng(seed)
    best = None
    for attempt in range(200):
        th, ph = fibonacci(n)
        th = th + rng.normal(scale=0.05 if attempt else 0.0, size=n)
        ph = ph + rng.normal(scale=0.05 if attempt else 0.0, size=n)
        x0 = np.concatenate([th, ph])
        pad = max(0, 2 * n - ((t + 1) ** 2 - 1))
        # MINPACK needs at least as many residuals as unknowns
        f = lambda x: np.concatenate([real_sh_sums(x[:n], x[n:], t), np.zeros(pad)])
        res = least_squares(f, x0, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=20000)
        err = np.abs(res.fun).max()
        if best is None or err < best[0]:
            best = (err, res.x)
        print(f"# attempt {attempt} max residual {err:.3e}", file=sys.stderr)
        if err < 1e-13:
            break
    err, x = best
    return to_xyz(x[:n], x[n:]), err


def main():
    n, t = int(sys.argv[1]), int(sys.argv[2])
    seed = int(sys.argv[3]) if len(sys.argv) > 3 else 0
    pts, err = solve(n, t, seed)
    print(f"// {n}-point spherical {t}-design, max harmonic residual {err:.1e}")
    print(f"pub const DESIGN_{n}_{t}: [[f64; 3]; {n}] = [")
    for p in pts:
        p = p / np.linalg.norm(p)
        print(f"    [{p[0]:.17e}, {p[1]:.17e}, {p[2]:.17e}],")
    print("];")


if __name__ == "__main__":
    main()
