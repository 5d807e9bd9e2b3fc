"""Time jets of the potential at ``z0 = 0``, compatibility residuals and the Taylor lift."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import factorial

import numpy as np

from . import linear_solver as ls
from .coefficients import GasState, GridGeometry, alpha_dot

ORDER = 2


def ghost_derivatives(u, ratio, h):
    """``(D1, D2, D11, D12, D22)`` of a field with the boundary ghosts imposed."""
    U = ls.padded(u, ratio)
    return ls.d1(U, h), ls.d2(U, h), ls.d11(U, h), ls.d12(U, h), ls.d22(U, h)


def _apply(alpha, lower, derivs):
    """Purely spatial part ``a11 D11 + 2 a12 D12 + a22 D22 + a1 D1 + a2 D2``."""
    g1, g2, g11, g12, g22 = derivs
    return (alpha[..., 1, 1] * g11 + 2 * alpha[..., 1, 2] * g12 + alpha[..., 2, 2] * g22
            + lower[..., 1] * g1 + lower[..., 2] * g2)


@dataclass
class InitialJet:
    phi: list                    # phi_k(z1, z2), k = 0..3
    h: float
    given: tuple = (0, 1)
    derived: tuple = (2, 3)

    def __getitem__(self, k):
        return self.phi[k]


def build_jet(phi0, phi1, geom: GridGeometry, gas: GasState, h):
    """``phi_2`` and ``phi_3`` from the equation and its first time derivative at ``z0 = 0``."""
    phi0 = np.asarray(phi0, float)
    phi1 = np.asarray(phi1, float)
    ratio = geom.ratio
    d0 = ghost_derivatives(phi0, ratio, h)
    d1_ = ghost_derivatives(phi1, ratio, h)
    dphi = (phi1, d0[0], d0[1])
    alpha, lower = geom.alpha(gas, dphi)
    phi2 = -(2 * alpha[..., 0, 1] * d1_[0] + 2 * alpha[..., 0, 2] * d1_[1] + _apply(alpha, lower, d0))
    d2_ = ghost_derivatives(phi2, ratio, h)
    adot, ldot = alpha_dot(gas, geom.mg, dphi, (phi2, d1_[0], d1_[1]))
    phi3 = -(2 * adot[..., 0, 1] * d1_[0] + 2 * adot[..., 0, 2] * d1_[1] + _apply(adot, ldot, d0)
             + 2 * alpha[..., 0, 1] * d2_[0] + 2 * alpha[..., 0, 2] * d2_[1] + _apply(alpha, lower, d1_))
    return InitialJet([phi0, phi1, phi2, phi3], h)


def normal_derivative(u, h, axis):
    """Second-order one-sided derivative into the domain at index 0 of ``axis``."""
    u = np.moveaxis(np.asarray(u, float), axis, 0)
    return (-3 * u[0] + 4 * u[1] - u[2]) / (2 * h)


def tangential(v, h, k):
    for _ in range(k):
        v = np.gradient(v, h, edge_order=2)
    return v


@dataclass
class CompatibilityReport:
    gamma1: dict = field(default_factory=dict)     # (k0, k2) -> max residual
    gamma2: dict = field(default_factory=dict)     # (k0, k1) -> max residual
    order: int = ORDER

    @property
    def max_residual(self):
        vals = list(self.gamma1.values()) + list(self.gamma2.values())
        return max(vals) if vals else 0.0

    def passed(self, tol=0.0):
        return self.max_residual <= tol

    def to_dict(self):
        return {"order": self.order,
                "gamma1": {f"k0={a},k2={b}": v for (a, b), v in sorted(self.gamma1.items())},
                "gamma2": {f"k0={a},k1={b}": v for (a, b), v in sorted(self.gamma2.items())},
                "max_residual": self.max_residual}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def check_compatibility(jet: InitialJet, geom: GridGeometry, order=ORDER, window=None):
    """Boundary identities for the jet up to ``order``.

    On ``{z1 = 0}``: ``d_z2^k2 (bbar1 d1 phi_k0 + bbar2 d2 phi_k0)``; on ``{z2 = 0}``:
    ``d_z1^k1 d2 phi_k0``, for ``k0 + k <= order``.  Normal derivatives are
    one-sided, tangential ones centred.  ``window`` limits the boundary samples
    to ``z < window`` (defaults to the whole edge).
    """
    if order > ORDER:
        raise ValueError("compatibility is checked up to order 2")
    h = jet.h
    rep = CompatibilityReport(order=order)
    m1 = slice(None) if window is None else geom.z2 < window
    m2 = slice(None) if window is None else geom.z1 < window
    for k0 in range(order + 1):
        phi = jet[k0]
        n1 = normal_derivative(phi, h, 0)
        t1 = np.gradient(phi[0], h, edge_order=2)
        g = geom.bbar1 * n1 + geom.bbar2 * t1
        n2 = normal_derivative(phi, h, 1)
        for k in range(order - k0 + 1):
            rep.gamma1[(k0, k)] = float(np.max(np.abs(tangential(g, h, k)[m1])))
            rep.gamma2[(k0, k)] = float(np.max(np.abs(tangential(n2, h, k)[m2])))
    return rep


def taylor_psi(jet: InitialJet, times, deriv=0):
    """``sum_k phi_k z0^k / k!`` (or its ``deriv``-th time derivative) at the given times."""
    times = np.asarray(times, float)
    out = np.zeros(times.shape + np.shape(jet[0]))
    for k in range(deriv, len(jet.phi)):
        coef = times ** (k - deriv) / factorial(k - deriv)
        out = out + coef[(...,) + (None,) * np.ndim(jet[0])] * jet[k]
    return out
