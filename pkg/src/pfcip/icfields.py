"""Initial-condition fields with value/gradient/Hessian closures.

The benchmark field is differentiated symbolically once (cached); the
grain-growth field is only piecewise smooth, so its derivatives come
from central finite differences, which is plenty for projecting or
interpolating initial data.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


class FieldError(Exception):
    pass


@dataclass(frozen=True)
class ScalarField:
    """Bundle of vectorized closures: value (n,2)->(n,), grad ->(n,2),
    hess ->(n,2,2)."""

    value: callable
    grad: callable
    hess: callable


def constant_field(c: float) -> ScalarField:
    return ScalarField(
        value=lambda p: np.full(len(np.atleast_2d(p)), float(c)),
        grad=lambda p: np.zeros((len(np.atleast_2d(p)), 2)),
        hess=lambda p: np.zeros((len(np.atleast_2d(p)), 2, 2)))


def sympy_field(expr_builder) -> ScalarField:
    """Build a field from a sympy expression in symbols (x, y)."""
    import sympy as sy

    x, y = sy.symbols("x y")
    expr = expr_builder(x, y)
    f = sy.lambdify((x, y), expr, "numpy")
    gx = sy.lambdify((x, y), sy.diff(expr, x), "numpy")
    gy = sy.lambdify((x, y), sy.diff(expr, y), "numpy")
    hxx = sy.lambdify((x, y), sy.diff(expr, x, 2), "numpy")
    hxy = sy.lambdify((x, y), sy.diff(expr, x, y), "numpy")
    hyy = sy.lambdify((x, y), sy.diff(expr, y, 2), "numpy")

    def _xy(p):
        p = np.atleast_2d(p)
        return p[:, 0], p[:, 1]

    def value(p):
        xv, yv = _xy(p)
        return np.broadcast_to(f(xv, yv), xv.shape).astype(float)

    def grad(p):
        xv, yv = _xy(p)
        out = np.empty((len(xv), 2))
        out[:, 0] = gx(xv, yv)
        out[:, 1] = gy(xv, yv)
        return out

    def hess(p):
        xv, yv = _xy(p)
        out = np.empty((len(xv), 2, 2))
        out[:, 0, 0] = hxx(xv, yv)
        out[:, 0, 1] = out[:, 1, 0] = hxy(xv, yv)
        out[:, 1, 1] = hyy(xv, yv)
        return out

    return ScalarField(value=value, grad=grad, hess=hess)


def fd_field(value, h: float = 1e-5) -> ScalarField:
    """Field with central finite-difference gradient and Hessian."""

    def grad(p):
        p = np.atleast_2d(p)
        out = np.empty((len(p), 2))
        for k in range(2):
            dp = np.zeros(2)
            dp[k] = h
            out[:, k] = (value(p + dp) - value(p - dp)) / (2 * h)
        return out

    def hess(p):
        p = np.atleast_2d(p)
        out = np.empty((len(p), 2, 2))
        v0 = value(p)
        for k in range(2):
            dp = np.zeros(2)
            dp[k] = h
            out[:, k, k] = (value(p + dp) - 2 * v0 + value(p - dp)) / h ** 2
        dxy = np.array([h, h])
        dyx = np.array([h, -h])
        mixed = (value(p + dxy) + value(p - dxy)
                 - value(p + dyx) - value(p - dyx)) / (4 * h ** 2)
        out[:, 0, 1] = out[:, 1, 0] = mixed
        return out

    return ScalarField(value=value, grad=grad, hess=hess)


@lru_cache(maxsize=1)
def ic_benchmark() -> ScalarField:
    """Smooth benchmark initial condition on (0,32)^2; its domain mean
    is exactly 0.0725."""
    import sympy as sy

    def build(x, y):
        pi = sy.pi
        return (sy.Rational(7, 100)
                - sy.Rational(2, 100) * sy.cos(2 * pi * (x - 12) / 32)
                * sy.sin(2 * pi * (y - 1) / 32)
                + sy.Rational(2, 100) * sy.cos(pi * (x + 10) / 32) ** 2
                * sy.cos(pi * (y + 3) / 32) ** 2
                - sy.Rational(1, 100) * sy.sin(4 * pi * x / 32) ** 2
                * sy.sin(4 * pi * (y - 6) / 32) ** 2)

    return sympy_field(build)


def ic_grain_growth(crystallites, background: float = 0.285,
                    amplitude: float = 0.446, wavenumber: float = 1.0,
                    ramp_width: float = 1.0) -> ScalarField:
    """Polycrystal seed field: inside each circular patch the one-mode
    hexagonal lattice approximation in patch-rotated coordinates,

        phi = bg + A [cos(q x') cos(q y'/sqrt(3)) - cos(2 q y'/sqrt(3))/2],

    blended to the constant background with a C1 cosine ramp of the given
    width at the patch rim. Crystallites are (center, radius, angle)
    triples and must be pairwise disjoint.
    """
    crystallites = [(np.asarray(c, dtype=float), float(r), float(a))
                    for c, r, a in crystallites]
    for i in range(len(crystallites)):
        for j in range(i + 1, len(crystallites)):
            ci, ri, _ = crystallites[i]
            cj, rj, _ = crystallites[j]
            if np.linalg.norm(ci - cj) < ri + rj:
                raise FieldError(f"crystallite patches {i} and {j} overlap")

    q = wavenumber
    s3 = np.sqrt(3.0)

    def value(p):
        p = np.atleast_2d(p)
        out = np.full(len(p), background)
        for center, radius, angle in crystallites:
            d = p - center
            r = np.linalg.norm(d, axis=1)
            inside = r < radius
            if not np.any(inside):
                continue
            ca, sa = np.cos(angle), np.sin(angle)
            xt = ca * d[inside, 0] + sa * d[inside, 1]
            yt = -sa * d[inside, 0] + ca * d[inside, 1]
            lattice = amplitude * (np.cos(q * xt) * np.cos(q * yt / s3)
                                   - 0.5 * np.cos(2 * q * yt / s3))
            ramp = np.ones(inside.sum())
            w = min(ramp_width, radius)
            rim = r[inside] > radius - w
            ramp[rim] = 0.5 * (1.0 + np.cos(
                np.pi * (r[inside][rim] - (radius - w)) / w))
            out[inside] += lattice * ramp
        return out

    return fd_field(value)
