"""Potential-flow coefficients in physical and straightened coordinates.

The equation for the potential is ``sum a_ij d_ij Phi = 0`` (indices 0..2, time
first).  Under ``z = z(x)`` (time untouched) it becomes
``sum alpha_kl d_kl Phi_hat + sum alpha_k d_k Phi_hat = 0`` with
``alpha = G a G^T`` and ``alpha_k = sum_ij a_ij d_ij z_k``.
"""
from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from . import geometry as geo
from .errors import PreconditionViolated, VacuumReached


@dataclass(frozen=True)
class GasState:
    gamma: float = 1.4
    b0: float = 0.0

    def __post_init__(self):
        if self.gamma <= 1:
            raise ValueError("gamma must exceed 1")
        if 1 + (self.gamma - 1) * self.b0 <= 0:
            raise VacuumReached("background state is a vacuum")

    @property
    def rho0(self):
        return (1 + (self.gamma - 1) * self.b0) ** (1 / (self.gamma - 1))

    @property
    def c0sq(self):
        return self.rho0 ** (self.gamma - 1)


def sound_speed_sq(dt_phi, grad_phi, gas: GasState):
    """``c^2 = rho^(gamma-1)``; raises VacuumReached where the density base is <= 0."""
    g1, g2 = grad_phi
    base = 1 + (gas.gamma - 1) * (gas.b0 - np.asarray(dt_phi) - 0.5 * (np.asarray(g1) ** 2 + np.asarray(g2) ** 2))
    if np.any(base <= 0):
        raise VacuumReached(f"density base reached {float(np.min(base)):.3e} <= 0")
    return base


def density(dt_phi, grad_phi, gas: GasState):
    return sound_speed_sq(dt_phi, grad_phi, gas) ** (1 / (gas.gamma - 1))


def a_matrix(dt_phi, grad_phi, gas: GasState):
    """Physical coefficient matrix, shape ``(..., 3, 3)``."""
    csq = sound_speed_sq(dt_phi, grad_phi, gas)
    g = np.stack(np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in grad_phi)), axis=-1)
    a = np.zeros(csq.shape + (3, 3))
    a[..., 0, 0] = 1.0
    a[..., 0, 1:] = g
    a[..., 1:, 0] = g
    a[..., 1:, 1:] = g[..., :, None] * g[..., None, :]
    a[..., 1, 1] -= csq
    a[..., 2, 2] -= csq
    return a


def a_dot(dt_phi, grad_phi, dtt_phi, grad_dt_phi, gas: GasState):
    """Time derivative of ``a_matrix`` along a solution."""
    sound_speed_sq(dt_phi, grad_phi, gas)
    g = np.stack(np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in grad_phi)), axis=-1)
    gt = np.stack(np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in grad_dt_phi)), axis=-1)
    g, gt = np.broadcast_arrays(g, gt)
    csq_dot = -(gas.gamma - 1) * (np.asarray(dtt_phi) + np.sum(g * gt, axis=-1))
    ad = np.zeros(csq_dot.shape + (3, 3))
    ad[..., 0, 1:] = gt
    ad[..., 1:, 0] = gt
    ad[..., 1:, 1:] = gt[..., :, None] * g[..., None, :] + g[..., :, None] * gt[..., None, :]
    ad[..., 1, 1] -= csq_dot
    ad[..., 2, 2] -= csq_dot
    return ad


@dataclass(frozen=True)
class MapGeometry:
    """Time-independent pieces of the change of variables, sampled once per grid."""

    ghat: np.ndarray    # (..., 3, 3): rows are grad of (z0, z1, z2) in (t, x1, x2)
    hess: np.ndarray    # (..., 2, 2, 2): hess[..., k, i, j] = d_ij z_{k+1}

    @classmethod
    def from_metrics(cls, m: geo.ZMetrics):
        shape = np.shape(m.x1)
        ghat = np.zeros(shape + (3, 3))
        ghat[..., 0, 0] = 1.0
        ghat[..., 1, 1], ghat[..., 1, 2] = m.grad1
        ghat[..., 2, 1], ghat[..., 2, 2] = m.grad2
        hess = np.zeros(shape + (2, 2, 2))
        for k, hk in enumerate((m.hess1, m.hess2)):
            d11, d12, d22 = (np.broadcast_to(v, shape) for v in hk)
            hess[..., k, 0, 0] = d11
            hess[..., k, 0, 1] = d12
            hess[..., k, 1, 0] = d12
            hess[..., k, 1, 1] = d22
        return cls(ghat, hess)

    @classmethod
    def at(cls, dom: geo.CornerDomain, z1, z2):
        return cls.from_metrics(geo.z_metrics(dom, z1, z2))

    def physical_gradient(self, dphi_hat):
        """``(d_t Phi, d_x1 Phi, d_x2 Phi)`` from ``(d_z0, d_z1, d_z2)`` of ``Phi_hat``."""
        d = np.stack(np.broadcast_arrays(*dphi_hat), axis=-1)
        g = np.einsum("...ki,...k->...i", self.ghat, d)
        return g[..., 0], (g[..., 1], g[..., 2])


def _transform(a, mg: MapGeometry):
    alpha = np.einsum("...ki,...ij,...lj->...kl", mg.ghat, a, mg.ghat)
    lower = np.zeros(alpha.shape[:-1])
    lower[..., 1:] = np.einsum("...ij,...kij->...k", a[..., 1:, 1:], mg.hess)
    return alpha, lower


def alpha_coeffs(dom: geo.CornerDomain, gas: GasState, z, dphi_hat, mg: MapGeometry | None = None):
    """Transformed coefficients ``(alpha (...,3,3), alpha_lower (...,3))``.

    ``dphi_hat`` is ``(d_z0, d_z1, d_z2)`` of the potential in ``z``-coordinates,
    supplied by the caller's own discrete derivatives.  ``alpha_lower[..., 0]`` is 0.
    """
    if mg is None:
        mg = MapGeometry.at(dom, *z)
    dt_phi, grad = mg.physical_gradient(dphi_hat)
    return _transform(a_matrix(dt_phi, grad, gas), mg)


def alpha_dot(gas: GasState, mg: MapGeometry, dphi_hat, dphi_hat_t):
    """Time derivative of ``alpha_coeffs``; ``dphi_hat_t`` holds ``d_z0`` of ``dphi_hat``."""
    dt_phi, grad = mg.physical_gradient(dphi_hat)
    dtt_phi, grad_t = mg.physical_gradient(dphi_hat_t)
    return _transform(a_dot(dt_phi, grad, dtt_phi, grad_t, gas), mg)


def boundary_coeffs(dom: geo.CornerDomain, z2):
    """``(bbar1, bbar2)`` of the slip condition on ``{z1 = 0}``."""
    z2 = np.asarray(z2, dtype=float)
    s, x1 = geo._wall_point(dom, z2)
    d1w1 = geo.wall_eval(dom.wall1, s, 1)
    d1w2 = geo.wall_eval(dom.wall2, x1, 1)
    d2w2 = geo.wall_eval(dom.wall2, x1, 2)
    sig1 = geo.sigma_prime(dom, z2)
    p = -1.0 - z2 * d2w2
    b1 = p + (d1w2 + d1w1) * sig1 + d1w1 * d1w2
    b2 = d1w1 + d1w2
    return np.asarray(b1 + 0.0)[()], np.asarray(b2 + 0.0)[()]


# ---------------------------------------------------------------- identity checks

def _fd4(fun, z, axis, step):
    """Fourth-order central first derivative of ``fun(z0, z1, z2)`` along ``axis``."""
    def shifted(k):
        zz = [np.asarray(c, dtype=float) for c in z]
        zz[axis] = zz[axis] + k * step
        return fun(*zz)
    return (8 * (shifted(1) - shifted(-1)) - (shifted(2) - shifted(-2))) / (12 * step)


def potential_gradient(fun, z, step=1e-3):
    return tuple(_fd4(fun, z, ax, step) for ax in range(3))


@dataclass
class Lemma21Report:
    gamma2_alpha02: float
    gamma2_alpha12: float
    gamma1_conormal: float
    gamma1_alpha01: float
    corner_bbar2: tuple
    slip_gamma1: float
    slip_gamma2: float
    tol: float = 1e-6

    @property
    def passed(self):
        worst = max(self.gamma2_alpha02, self.gamma2_alpha12, self.gamma1_conormal,
                    self.gamma1_alpha01, *map(abs, self.corner_bbar2))
        return bool(worst <= self.tol)

    def to_dict(self):
        d = asdict(self)
        d["corner_bbar2"] = [float(v) for v in self.corner_bbar2]
        d["passed"] = self.passed
        return d


def check_lemma21(dom, gas, candidate, samples=None, times=(0.0, 0.3), step=1e-3,
                  slip_tol=1e-6, tol=1e-6):
    """Residuals of the boundary identities for a slip-compliant potential.

    ``candidate(z0, z1, z2)`` is the potential in ``z``-coordinates (vectorized).
    Derivatives are fourth-order central differences with spacing ``step``.
    """
    if samples is None:
        samples = np.linspace(0.0, 0.9, 19)
    samples = np.asarray(samples, dtype=float)
    zero = np.zeros_like(samples)
    res = {}
    slip = {}
    for name, z1, z2 in (("gamma2", samples, zero), ("gamma1", zero, samples)):
        mg = MapGeometry.at(dom, z1, z2)
        a2, a1, a12, a02, a01, sl = [], [], [], [], [], []
        for t in times:
            z = (np.full_like(samples, t), z1, z2)
            d = potential_gradient(candidate, z, step)
            alpha, _ = alpha_coeffs(dom, gas, (z1, z2), d, mg)
            if name == "gamma2":
                sl.append(np.max(np.abs(d[2]), initial=0.0))
                a02.append(np.max(np.abs(alpha[..., 0, 2]), initial=0.0))
                a12.append(np.max(np.abs(alpha[..., 1, 2]), initial=0.0))
            else:
                b1, b2 = boundary_coeffs(dom, samples)
                sl.append(np.max(np.abs(b1 * d[1] + b2 * d[2]), initial=0.0))
                a2.append(np.max(np.abs(alpha[..., 1, 2] * b1 - alpha[..., 1, 1] * b2), initial=0.0))
                a01.append(np.max(np.abs(alpha[..., 0, 1]), initial=0.0))
        slip[name] = float(max(sl))
        if name == "gamma2":
            res["a02"], res["a12"] = float(max(a02)), float(max(a12))
        else:
            res["con"], res["a01"] = float(max(a2)), float(max(a01))
    for name, val in slip.items():
        if val > slip_tol:
            raise PreconditionViolated(
                f"candidate violates the slip condition on {name} (residual {val:.3e})", boundary=name)
    jet = tuple(float(v) for v in geo.bbar2_jet(dom, 0.0))
    return Lemma21Report(res["a02"], res["a12"], res["con"], res["a01"], jet,
                         slip["gamma1"], slip["gamma2"], tol)


@dataclass(frozen=True)
class SlipCandidate:
    """``amp cos(omega z0) [g(z1, z2) + z1 k(z2)]`` with ``g`` a Gaussian centred at 0.

    ``g`` is even in both variables, so the normal derivative vanishes on
    ``{z2 = 0}``; ``k = -(bbar2/bbar1) d2 g(0, .)`` restores the oblique slip
    condition on ``{z1 = 0}``.
    """

    dom: geo.CornerDomain
    amp: float = 1e-2
    omega: float = 2.0
    width: float = 0.5

    def g(self, z1, z2):
        return np.exp(-(z1**2 + z2**2) / self.width**2)

    def k(self, z2):
        b1, b2 = boundary_coeffs(self.dom, z2)
        d2g = -2 * z2 / self.width**2 * np.exp(-(z2**2) / self.width**2)
        return -(b2 / b1) * d2g

    def __call__(self, z0, z1, z2):
        return self.amp * np.cos(self.omega * z0) * (self.g(z1, z2) + z1 * self.k(z2))


def slip_candidate(dom, amp=1e-2, omega=2.0, width=0.5):
    return SlipCandidate(dom, amp, omega, width)


def static_candidate(value=0.0):
    return lambda z0, z1, z2: np.full(np.broadcast(z0, z1, z2).shape, float(value))


@dataclass(frozen=True)
class GridGeometry:
    """Map data sampled on a ``z``-grid: metrics, boundary coefficients and the corner jet."""

    dom: geo.CornerDomain
    z1: np.ndarray
    z2: np.ndarray
    mg: MapGeometry
    bbar1: np.ndarray
    bbar2: np.ndarray
    bbar2_jet: tuple

    @classmethod
    def build(cls, dom, z1, z2):
        z1 = np.asarray(z1, float)
        z2 = np.asarray(z2, float)
        Z1, Z2 = np.meshgrid(z1, z2, indexing="ij")
        if dom.is_flat:
            mg = _flat_geometry(Z1.shape)
        else:
            mg = MapGeometry.at(dom, Z1, Z2)
        b1, b2 = boundary_coeffs(dom, z2)
        jet = tuple(float(v) for v in geo.bbar2_jet(dom, 0.0))
        return cls(dom, z1, z2, mg, np.broadcast_to(b1, z2.shape).copy(),
                   np.broadcast_to(b2, z2.shape).copy(), jet)

    @property
    def ratio(self):
        return self.bbar2 / self.bbar1

    def alpha(self, gas, dphi_hat):
        return alpha_coeffs(self.dom, gas, None, dphi_hat, self.mg)


def _flat_geometry(shape):
    ghat = np.zeros(shape + (3, 3))
    ghat[..., 0, 0] = ghat[..., 1, 1] = ghat[..., 2, 2] = 1.0
    return MapGeometry(ghat, np.zeros(shape + (2, 2, 2)))
