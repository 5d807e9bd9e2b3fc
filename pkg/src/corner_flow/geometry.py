"""Perturbed right-angle corner and the maps that straighten it.

Coordinates: ``x`` is the physical plane, ``y = T1(x)`` straightens the wall
``x2 = W2(x1)`` onto ``{y2 = 0}``, and ``z = T2(y)`` additionally maps the wall
``x1 = W1(x2)`` onto ``{z1 = 0}``.  All functions accept scalars or arrays of
matching shape.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from math import comb, factorial

import numpy as np
from numpy.polynomial import Polynomial

from .errors import NonConvergence

NEWTON_TOL = 1e-12
NEWTON_MAXITER = 50

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(48)
_SMOOTHSTEP_N = 6
_SMOOTHSTEP_SCALE = factorial(2 * _SMOOTHSTEP_N + 1) / factorial(_SMOOTHSTEP_N) ** 2


def _smoothstep(t, order=0):
    """C^6 smoothstep (regularized incomplete beta I_t(7, 7)) and its derivatives."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    n = _SMOOTHSTEP_N
    deg = 2 * n + 1
    if order == 0:
        return sum(comb(deg, k) * t**k * (1 - t) ** (deg - k) for k in range(n + 1, deg + 1))
    # S' = scale * t^n (1 - t)^n; Leibniz for the rest
    q = order - 1
    out = np.zeros_like(t)
    for m in range(min(q, n) + 1):
        r = q - m
        if r > n:
            continue
        left = factorial(n) / factorial(n - m) * t ** (n - m)
        right = (-1) ** r * factorial(n) / factorial(n - r) * (1 - t) ** (n - r)
        out = out + comb(q, m) * left * right
    return _SMOOTHSTEP_SCALE * out


@dataclass(frozen=True)
class WallProfile:
    """Wall perturbation ``W(s) = s^4 p(s) chi(s)``.

    ``coeffs`` are the coefficients of ``p`` in ascending order.  ``chi`` is 1 on
    ``s <= cutoff_radius / 2`` and falls to 0 at ``cutoff_radius`` through a C^6
    smoothstep, so ``W(0) = W'(0) = W''(0) = W'''(0) = 0`` and ``W`` has compact
    support in ``s >= 0`` by construction.  For ``s < 0`` the cutoff stays 1.
    """

    coeffs: tuple = ()
    cutoff_radius: float = 1.0
    deriv_order_max: int = 6

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        if self.cutoff_radius <= 0:
            raise ValueError("cutoff_radius must be positive")
        if self.deriv_order_max < 6:
            raise ValueError("deriv_order_max must be at least 6")

    @classmethod
    def zero(cls, cutoff_radius=1.0):
        return cls((), cutoff_radius)

    @classmethod
    def from_epsilon(cls, epsilon, poly_coeffs=(1.0,), cutoff_radius=1.0):
        """Scale ``poly_coeffs`` so that ``max_k sup|W^(k)| = epsilon`` for k <= 6."""
        if epsilon == 0 or not any(poly_coeffs):
            return cls.zero(cutoff_radius)
        unit = cls(tuple(poly_coeffs), cutoff_radius)
        scale = epsilon / unit.w6_norm()
        return cls(tuple(c * scale for c in poly_coeffs), cutoff_radius)

    @property
    def is_flat(self):
        return not any(self.coeffs)

    @cached_property
    def _base(self):
        p = Polynomial(self.coeffs or (0.0,))
        base = Polynomial([0.0, 0.0, 0.0, 0.0, 1.0]) * p
        return [base.deriv(k) if k else base for k in range(self.deriv_order_max + 2)]

    @property
    def plateau(self):
        return 0.5 * self.cutoff_radius

    def __call__(self, s, order=0):
        return wall_eval(self, s, order)

    def w6_norm(self, samples=4001):
        s = np.linspace(0.0, self.cutoff_radius, samples)
        return max(float(np.max(np.abs(wall_eval(self, s, k)))) for k in range(7))

    @property
    def epsilon(self):
        return self.w6_norm()

    def to_dict(self):
        return {"poly_coeffs": list(self.coeffs), "cutoff_radius": self.cutoff_radius,
                "epsilon": self.epsilon}


def wall_eval(profile: WallProfile, s, order=0):
    """Exact ``W^(order)(s)`` (piecewise polynomial, no differencing)."""
    if not 0 <= order <= profile.deriv_order_max + 1:
        raise ValueError(f"derivative order {order} outside 0..{profile.deriv_order_max}")
    s = np.asarray(s, dtype=float)
    if profile.is_flat:
        return np.zeros_like(s)[()]
    a = profile.plateau
    width = profile.cutoff_radius - a
    base = profile._base
    inner = base[order](s)
    t = (s - a) / width
    trans = np.zeros_like(s)
    for j in range(order + 1):
        chi_j = 1.0 - _smoothstep(t) if j == 0 else -_smoothstep(t, j)
        trans = trans + comb(order, j) * base[order - j](s) * chi_j / width**j
    out = np.where(s <= a, inner, np.where(s < profile.cutoff_radius, trans, 0.0))
    return out[()]


def wall_slope_sq_integral(profile: WallProfile, u):
    """``int_0^u W'(tau)^2 dtau`` by Gauss-Legendre, exact on each polynomial piece."""
    u = np.asarray(u, dtype=float)
    if profile.is_flat:
        return np.zeros_like(u)[()]
    a, big_r = profile.plateau, profile.cutoff_radius

    def gl(lo, hi):
        lo, hi = np.broadcast_arrays(lo, hi)
        mid = 0.5 * (lo + hi)[..., None]
        half = 0.5 * (hi - lo)[..., None]
        nodes = mid + half * _GL_NODES
        vals = wall_eval(profile, nodes, 1) ** 2
        return (half[..., 0]) * np.sum(vals * _GL_WEIGHTS, axis=-1)

    first = gl(np.zeros_like(u), np.minimum(u, a))
    second = gl(np.full_like(u, a), np.clip(u, a, big_r))
    return (first + second)[()]


@dataclass(frozen=True)
class CornerDomain:
    """``wall1``: ``x1 = W1(x2)``; ``wall2``: ``x2 = W2(x1)``."""

    wall1: WallProfile = field(default_factory=WallProfile)
    wall2: WallProfile = field(default_factory=WallProfile)

    @classmethod
    def flat(cls):
        return cls(WallProfile.zero(), WallProfile.zero())

    @property
    def is_flat(self):
        return self.wall1.is_flat and self.wall2.is_flat

    def to_dict(self):
        return {"wall1": self.wall1.to_dict(), "wall2": self.wall2.to_dict()}


def t1_forward(dom: CornerDomain, x1, x2):
    """Straighten ``x2 = W2(x1)``: returns ``(y1, y2)``."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    w2 = dom.wall2
    y2 = x2 - wall_eval(w2, x1)
    y1 = -x1 - wall_slope_sq_integral(w2, x1) - y2 * wall_eval(w2, x1, 1)
    return y1[()], y2[()]


def _newton(residual, derivative, start, what):
    u = np.array(start, dtype=float, copy=True)
    for _ in range(NEWTON_MAXITER + 1):
        g = residual(u)
        if np.all(np.abs(g) <= NEWTON_TOL):
            return u
        u = u - g / derivative(u)
        if not np.all(np.isfinite(u)):
            break
    raise NonConvergence(
        f"Newton iteration for {what} failed after {NEWTON_MAXITER} steps; "
        "the wall perturbation is too large for the map to be invertible"
    )


def t1_inverse(dom: CornerDomain, y1, y2):
    """Invert ``T1``; returns ``(x1, x2, u)`` with ``u = x1``."""
    y1 = np.asarray(y1, dtype=float)
    y2 = np.asarray(y2, dtype=float)
    w2 = dom.wall2
    if w2.is_flat:
        u = -y1 + 0.0
        return u[()], (y2 + 0.0)[()], u[()]

    def g(u):
        return -u - wall_slope_sq_integral(w2, u) - y2 * wall_eval(w2, u, 1) - y1

    def dg(u):
        return -1.0 - wall_eval(w2, u, 1) ** 2 - y2 * wall_eval(w2, u, 2)

    u = _newton(g, dg, -y1, "T1 inverse")
    x2 = y2 + wall_eval(w2, u)
    return u[()], np.asarray(x2)[()], u[()]


def _wall_point(dom: CornerDomain, y2):
    """Point ``(W1(s), s)`` of the first wall whose image has ordinate ``y2``."""
    y2 = np.asarray(y2, dtype=float)
    w1, w2 = dom.wall1, dom.wall2
    if w1.is_flat:
        return (y2 + 0.0), np.zeros_like(y2)
    if w2.is_flat:
        return (y2 + 0.0), wall_eval(w1, y2)

    def h(s):
        return s - wall_eval(w2, wall_eval(w1, s)) - y2

    def dh(s):
        return 1.0 - wall_eval(w2, wall_eval(w1, s), 1) * wall_eval(w1, s, 1)

    s = _newton(h, dh, y2, "wall image")
    return s, wall_eval(w1, s)


def sigma(dom: CornerDomain, y2):
    """Abscissa ``y1 = sigma(y2)`` of the first wall in ``y``-coordinates."""
    s, x1 = _wall_point(dom, y2)
    y1, _ = t1_forward(dom, x1, s)
    return np.asarray(y1 + 0.0)[()]


def sigma_derivs(dom: CornerDomain, y2):
    """Closed-form ``(sigma', sigma'')`` at ``y2``."""
    y2 = np.asarray(y2, dtype=float)
    if dom.wall1.is_flat and dom.wall2.is_flat:
        z = np.zeros_like(y2)[()]
        return z, z
    s, x1 = _wall_point(dom, y2)
    w1, w2 = dom.wall1, dom.wall2
    d1w1, d2w1 = wall_eval(w1, s, 1), wall_eval(w1, s, 2)
    d1w2, d2w2, d3w2 = (wall_eval(w2, x1, k) for k in (1, 2, 3))
    p = -1.0 - y2 * d2w2
    num = p * d1w1 - d1w2
    den = 1.0 - d1w1 * d1w2
    # derivatives along the wall parameter s; dy2/ds == den
    dp = -den * d2w2 - y2 * d3w2 * d1w1
    dnum = dp * d1w1 + p * d2w1 - d2w2 * d1w1
    dden = -(d2w1 * d1w2 + d1w1 * d2w2 * d1w1)
    s1 = num / den
    s2 = (dnum * den - num * dden) / den**3
    return np.asarray(s1)[()], np.asarray(s2)[()]


def sigma_prime(dom: CornerDomain, y2):
    return sigma_derivs(dom, y2)[0]


def to_z(dom: CornerDomain, x1, x2):
    y1, y2 = t1_forward(dom, x1, x2)
    z1 = -y1 + sigma(dom, y2)
    return np.asarray(z1)[()], np.asarray(y2 + 0.0)[()]


def from_z(dom: CornerDomain, z1, z2):
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    y1 = sigma(dom, z2) - z1
    x1, x2, _ = t1_inverse(dom, y1, z2)
    return x1, x2


@dataclass(frozen=True)
class MapPoint:
    """Images of one point and the spatial Jacobian ``d(z1, z2)/d(x1, x2)``."""

    x: tuple
    y: tuple
    z: tuple
    jac: tuple

    @property
    def det(self):
        (a, b), (c, d) = self.jac
        return a * d - b * c


@dataclass(frozen=True)
class ZMetrics:
    """First and second derivatives of ``z(x)`` sampled at points given in ``z``.

    ``grad1``/``grad2`` are ``(d/dx1, d/dx2)`` of ``z1``/``z2``; ``hess1``/``hess2``
    hold ``(d11, d12, d22)``.  Wall values needed by boundary formulas ride along.
    """

    x1: np.ndarray
    x2: np.ndarray
    grad1: tuple
    grad2: tuple
    hess1: tuple
    hess2: tuple
    d1w1: np.ndarray
    d1w2: np.ndarray
    d2w2: np.ndarray
    sigma1: np.ndarray

    @property
    def det(self):
        return self.grad1[0] * self.grad2[1] - self.grad1[1] * self.grad2[0]


def z_metrics(dom: CornerDomain, z1, z2) -> ZMetrics:
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    z1, z2 = np.broadcast_arrays(z1, z2)
    x1, x2 = from_z(dom, z1, z2)
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    w1, w2 = dom.wall1, dom.wall2
    d1w2, d2w2, d3w2 = (np.asarray(wall_eval(w2, x1, k)) for k in (1, 2, 3))
    d1w1 = np.asarray(wall_eval(w1, x2, 1))
    sig1, sig2 = (np.asarray(v) for v in sigma_derivs(dom, z2))
    sig1 = np.broadcast_to(sig1, z2.shape)
    sig2 = np.broadcast_to(sig2, z2.shape)
    lift = x2 - np.asarray(wall_eval(w2, x1))  # == z2 up to round-off
    grad1 = (1.0 + lift * d2w2 - sig1 * d1w2, d1w2 + sig1)
    grad2 = (-d1w2, np.ones_like(x1))
    hess1 = (
        lift * d3w2 - d1w2 * d2w2 + sig2 * d1w2**2 - sig1 * d2w2,
        d2w2 - sig2 * d1w2,
        sig2 + 0.0 * x1,
    )
    hess2 = (-d2w2, np.zeros_like(x1), np.zeros_like(x1))
    return ZMetrics(x1, x2, grad1, grad2, hess1, hess2, d1w1, d1w2, d2w2, sig1)


def map_point(dom: CornerDomain, x1, x2) -> MapPoint:
    y = t1_forward(dom, x1, x2)
    z = to_z(dom, x1, x2)
    m = z_metrics(dom, *z)
    jac = ((float(m.grad1[0]), float(m.grad1[1])), (float(m.grad2[0]), float(m.grad2[1])))
    return MapPoint((float(x1), float(x2)), tuple(map(float, y)), tuple(map(float, z)), jac)


def bbar2_jet(dom: CornerDomain, z2):
    """``bbar2(0, z2)`` and its first two ``z2``-derivatives, in closed form."""
    z2 = np.asarray(z2, dtype=float)
    s, x1 = _wall_point(dom, z2)
    w1, w2 = dom.wall1, dom.wall2
    a1, a2, a3 = (wall_eval(w1, s, k) for k in (1, 2, 3))
    c1, c2, c3 = (wall_eval(w2, x1, k) for k in (1, 2, 3))
    f0 = a1 + c1
    f1 = a2 + c2 * a1
    f2 = a3 + c3 * a1**2 + c2 * a2
    g1 = 1.0 - c1 * a1
    g2 = -c2 * a1**2 - c1 * a2
    return (np.asarray(f0)[()], np.asarray(f1 / g1)[()],
            np.asarray((f2 * g1 - f1 * g2) / g1**3)[()])
