"""Multiplier forms, weighted space-time norms and estimate monitors."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import NotHyperbolic, OrderUnavailable

# ------------------------------------------------------------------ multiplier


def multiplier_matrix(q, rbar11, rbar22):
    q0, q1, q2 = q
    return np.array([[q0, q1, q2], [q1, -rbar11 * q0, 0.0], [q2, 0.0, -rbar22 * q0]])


@dataclass(frozen=True)
class MultiplierQ:
    q0: float = 1.0
    q1: float = 0.0
    q2: float = 0.0
    rbar11: float = -1.0
    rbar22: float = -1.0

    def __post_init__(self):
        m = self.minors
        if not all(v > 0 for v in m):
            raise NotHyperbolic(f"multiplier matrix is not positive definite (minors {m})")

    @property
    def q(self):
        return np.array([self.q0, self.q1, self.q2])

    @property
    def matrix(self):
        return multiplier_matrix(self.q, self.rbar11, self.rbar22)

    @property
    def minors(self):
        q0, q1, q2, r11, r22 = self.q0, self.q1, self.q2, self.rbar11, self.rbar22
        return (q0, -q0**2 * r11 - q1**2,
                q0**3 * r11 * r22 + r22 * q0 * q1**2 + r11 * q0 * q2**2)

    @property
    def lambda_min(self):
        return float(np.linalg.eigvalsh(self.matrix)[0])

    def positivity_constant(self, delta):
        """Lower bound for ``H0 / |xi|^2`` when coefficients are within ``delta`` of background."""
        return self.lambda_min - (2 * np.sqrt(3) + 3) * delta * float(np.max(np.abs(self.q)))


def select_multiplier(rbar11, rbar22):
    if rbar11 >= 0 or rbar22 >= 0:
        raise NotHyperbolic(f"background coefficients ({rbar11}, {rbar22}) are not negative")
    return MultiplierQ(1.0, 0.0, 0.0, rbar11, rbar22)


def _as_q(Q):
    return Q.q if isinstance(Q, MultiplierQ) else np.asarray(Q, float)


def h0(Q, r, xi):
    """``2 (sum_i r_i0 xi_i)(Q . xi) - Q0 xi^T r xi``; ``r`` is ``(..., 3, 3)``."""
    q = _as_q(Q)
    r = np.asarray(r, float)
    xi = np.asarray(xi, float)
    return 2 * np.einsum("...i,...i->...", r[..., :, 0], xi) * (xi @ q) - q[0] * np.einsum("...i,...ij,...j->...", xi, r, xi)


def h1(Q, r, xi):
    """``2 (sum_i r_i1 xi_i)(Q . xi) - Q1 xi^T r xi``."""
    q = _as_q(Q)
    r = np.asarray(r, float)
    xi = np.asarray(xi, float)
    return 2 * np.einsum("...i,...i->...", r[..., :, 1], xi) * (xi @ q) - q[1] * np.einsum("...i,...ij,...j->...", xi, r, xi)


# ------------------------------------------------------------------ norms


def multi_indices(order):
    """Multi-indices ``(a0, a1, a2)`` with ``|a| == order``."""
    return [(a, b, order - a - b) for a in range(order, -1, -1) for b in range(order - a, -1, -1)]


def _derivatives(u, spacing, max_order):
    """Yield ``(alpha, D^alpha u)`` for all ``|alpha| <= max_order``.

    Depth-first over nondecreasing direction sequences, so each multi-index is
    produced once and at most ``max_order + 1`` arrays are alive at a time.
    """
    def walk(arr, alpha, start, depth):
        yield tuple(alpha), arr
        if depth == max_order:
            return
        for ax in range(start, 3):
            child = np.gradient(arr, spacing[ax], axis=ax, edge_order=2)
            alpha[ax] += 1
            yield from walk(child, alpha, ax, depth + 1)
            alpha[ax] -= 1
    yield from walk(np.asarray(u, float), [0, 0, 0], 0, 0)


def _weights(g, nt):
    from .linear_solver import trapezoid_weights
    wt = np.full(nt + 1, g.dt)
    wt[[0, -1]] *= 0.5
    return wt, trapezoid_weights(g)


def _check_order(shape, max_order):
    if max_order > 4:
        raise OrderUnavailable("orders above 4 are not monitored")
    if min(shape) < 2 * max_order + 1 or min(shape) < 3:
        raise OrderUnavailable(f"grid {shape} too coarse for order-{max_order} stencils")


def weighted_sq(u, g, eta, wt=None, ws=None):
    """``||e^{-eta z0} u||^2`` by the trapezoid rule."""
    if wt is None:
        wt, ws = _weights(g, u.shape[0] - 1)
    w = wt * np.exp(-2 * eta * g.times[: u.shape[0]])
    return float(np.einsum("t,txy,xy->", w, u * u, ws))


def spatial_sq(v, ws):
    return float(np.sum(ws * v * v))


def second_difference(u, step, axis):
    """Compact three-point second difference; second-order one-sided rows at the ends."""
    u = np.moveaxis(np.asarray(u, float), axis, 0)
    out = np.empty_like(u)
    out[1:-1] = ((u[2:] + u[:-2]) - 2 * u[1:-1]) / step**2
    out[0] = (2 * u[0] - 5 * u[1] + 4 * u[2] - u[3]) / step**2
    out[-1] = (2 * u[-1] - 5 * u[-2] + 4 * u[-3] - u[-4]) / step**2
    return np.moveaxis(out, 0, axis)


def apply_operator(p, g, u):
    """``sum r_ij d_ij u + sum r_i d_i u`` on a space-time array.

    Pure second derivatives use the solver's compact stencil, so a discrete
    solution is annihilated away from the edges; mixed and first derivatives are
    centred differences.
    """
    sp = (g.dt, g.h, g.h)
    first = [np.gradient(u, sp[a], axis=a, edge_order=2) for a in range(3)]
    out = second_difference(u, sp[0], 0)
    for key, c in (("01", 2), ("02", 2), ("11", 1), ("12", 2), ("22", 1)):
        coeff = np.asarray(p.r.get(key, 0.0), float)
        if not np.any(coeff):
            continue
        i, j = int(key[0]), int(key[1])
        d = second_difference(u, sp[i], i) if i == j else np.gradient(first[i], sp[j], axis=j, edge_order=2)
        out = out + c * coeff * d
    if p.r_lower:
        for k in ("0", "1", "2"):
            coeff = np.asarray(p.r_lower.get(k, 0.0), float)
            if np.any(coeff):
                out = out + coeff * first[int(k)]
    return out


def sobolev_sq(v, h, order, ws):
    """Spatial ``H^order`` norm squared of a 2-D field (sum of ``D^beta`` norms)."""
    if order < 0:
        return 0.0
    total = 0.0
    stack = [(np.asarray(v, float), 0, 0)]
    while stack:
        arr, start, depth = stack.pop()
        total += spatial_sq(arr, ws)
        if depth < order:
            for ax in range(start, 2):
                stack.append((np.gradient(arr, h, axis=ax, edge_order=2), ax, depth + 1))
    return total


@dataclass
class EnergyReport:
    eta: float
    lhs: list
    terminal: list
    rhs: list
    parts: list = field(default_factory=list)

    @property
    def ratios(self):
        out = []
        for lhs, rhs in zip(self.lhs, self.rhs):
            out.append(float("nan") if rhs == 0 else lhs / rhs)
        return out

    def to_dict(self):
        return {"eta": self.eta, "lhs": self.lhs, "terminal": self.terminal, "rhs": self.rhs,
                "ratios": self.ratios, "parts": self.parts}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["eta", "order", "lhs", "terminal", "rhs", "ratio"])
        for k, (a, b, c, d) in enumerate(zip(self.lhs, self.terminal, self.rhs, self.ratios)):
            w.writerow([repr(self.eta), k, repr(a), repr(b), repr(c), repr(d)])
        return buf.getvalue()


def _halo(p, g, u, layers):
    """Pad a solution by ``layers`` nodes on every side of the space-time box.

    Time levels are continued with the scheme itself; space is padded by even
    reflection, which is what the solver's ghost layer imposes on mirror edges.
    """
    from .linear_solver import extend_in_time
    if layers == 0:
        return u
    ue = extend_in_time(p, g, u, layers)
    return np.pad(ue, ((0, 0), (layers, layers), (layers, layers)), mode="reflect")


def _pad_coeffs(p, layers):
    def pad(c):
        c = np.asarray(c, float)
        if c.ndim == 0 or layers == 0:
            return c
        widths = ((layers, layers),) * 2
        if c.ndim == 3:
            c = np.pad(c, ((layers, layers), (0, 0), (0, 0)), mode="edge")
            widths = ((0, 0),) + widths
        return np.pad(c, widths, mode="reflect")
    from copy import copy
    q = copy(p)
    q.r = {k: pad(v) for k, v in p.r.items()}
    q.r_lower = None if not p.r_lower else {k: pad(v) for k, v in p.r_lower.items()}
    return q


def _profiles(u, p, g, max_order, halo):
    """Per-order time profiles ``int |D^a u|^2 dz1 dz2`` and the same for ``L(D^a u)``."""
    _, ws = _weights(g, u.shape[0] - 1)
    sp = (g.dt, g.h, g.h)
    layers = max_order + 2 if halo else 0
    ue = _halo(p, g, u, layers)
    pe = _pad_coeffs(p, layers)
    crop = tuple(slice(layers, n - layers) for n in ue.shape)
    prof = np.zeros((max_order + 1, u.shape[0]))
    lop = np.zeros((max_order + 1, u.shape[0]))
    for alpha, d in _derivatives(ue, sp, max_order):
        k = sum(alpha)
        dc = d[crop]
        prof[k] += np.einsum("txy,xy->t", dc * dc, ws)
        if k < max_order:
            lc = apply_operator(pe, g, d)[crop]
            lop[k + 1] += np.einsum("txy,xy->t", lc * lc, ws)
    return prof, lop


def weighted_norms(sol, p, g, max_order=4, eta=None, f=None, halo=True):
    """Per-order sums of the weighted estimate's left- and right-hand sides.

    ``lhs[k] = sum_{|a|<=k} eta ||e^{-eta z0} D^a phi||^2 + e^{-2 eta T} ||D^a phi(T)||^2``
    ``rhs[k] = (1/eta) sum_{|a|<=k-1} ||e^{-eta z0} L(D^a phi)||^2 + ||e^{-eta z0} f||^2_{H^{k-1}}
               + ||f(0)||^2_{H^{k-2}} + ||phi0||^2_{H^k} + ||phi1||^2_{H^{k-1}}``

    With ``halo`` the solution is padded (see ``_halo``) so that every
    derivative is a centred difference on the box; otherwise one-sided
    differences are used at the edges.  ``eta`` may be a list, in which case a
    list of reports is returned and the derivatives are computed once.
    """
    u = sol.u if hasattr(sol, "u") else np.asarray(sol, float)
    etas = [g.eta] if eta is None else list(np.atleast_1d(eta))
    _check_order(u.shape, max_order)
    wt, ws = _weights(g, u.shape[0] - 1)
    sp = (g.dt, g.h, g.h)
    prof, lop = _profiles(u, p, g, max_order, halo)
    f_arr = None
    if f is None and getattr(p, "f", None) is not None:
        f_arr = np.broadcast_to(np.asarray(p.f, float), u.shape)
    elif f is not None:
        f_arr = np.broadcast_to(np.asarray(f, float), u.shape)
    fprof = np.zeros((max_order + 1, u.shape[0]))
    f0_by = np.zeros(max_order + 1)
    if f_arr is not None and np.any(f_arr):
        for alpha, d in _derivatives(f_arr, sp, max_order - 1):
            fprof[sum(alpha) + 1] += np.einsum("txy,xy->t", d * d, ws)
        for k in range(2, max_order + 1):
            f0_by[k] = sobolev_sq(f_arr[0], g.h, k - 2, ws)
    data = [sobolev_sq(p.phi0, g.h, k, ws) + sobolev_sq(p.phi1, g.h, k - 1, ws) for k in range(max_order + 1)]
    times = g.times[: u.shape[0]]
    reports = []
    for e in etas:
        w = wt * np.exp(-2 * e * times)
        expw = np.exp(-2 * e * times[-1])
        lhs_by = e * (prof @ w) + expw * prof[:, -1]
        term_by = expw * prof[:, -1]
        lop_by = (lop @ w) / e
        f_by = fprof @ w
        lhs, term, rhs, parts = [], [], [], []
        for k in range(max_order + 1):
            lhs.append(float(np.sum(lhs_by[: k + 1])))
            term.append(float(np.sum(term_by[: k + 1])))
            pieces = {"operator": float(np.sum(lop_by[: k + 1])), "forcing": float(np.sum(f_by[: k + 1])),
                      "forcing_t0": float(f0_by[k]), "data": float(data[k])}
            parts.append(pieces)
            rhs.append(float(sum(pieces.values())))
        reports.append(EnergyReport(float(e), lhs, term, rhs, parts))
    return reports if eta is not None and np.ndim(eta) > 0 else reports[0]


@dataclass
class EstimateDiagnostic:
    etas: list
    constants: dict          # order -> list of C_hat(eta)
    stabilized: dict         # order -> bool
    vacuous: bool = False

    @property
    def passed(self):
        return self.vacuous or all(self.stabilized.values())

    def to_dict(self):
        return {"etas": self.etas, "constants": {str(k): v for k, v in self.constants.items()},
                "stabilized": {str(k): v for k, v in self.stabilized.items()},
                "vacuous": self.vacuous, "passed": self.passed}


def check_estimate(reports, window=None, factor=2.0):
    """Fitted constants ``C(eta) = lhs/rhs`` and whether they settle.

    ``window`` selects which sweep entries must agree within ``factor``; by
    default the upper half of the sweep.
    """
    reports = sorted(reports, key=lambda r: r.eta)
    etas = [r.eta for r in reports]
    orders = range(len(reports[0].lhs))
    if all(r.rhs[k] == 0 and r.lhs[k] == 0 for r in reports for k in orders):
        return EstimateDiagnostic(etas, {k: [float("nan")] * len(etas) for k in orders},
                                  {k: True for k in orders}, vacuous=True)
    if window is None:
        window = slice(len(reports) // 2, None)
    consts, stable = {}, {}
    for k in orders:
        c = [r.ratios[k] for r in reports]
        consts[k] = c
        sel = np.asarray(c[window], float)
        ok = bool(np.all(np.isfinite(sel)) and np.all(sel > 0) and sel.max() / sel.min() < factor)
        stable[k] = ok
    return EstimateDiagnostic(etas, consts, stable)


def norm_relation(v, g, eta, s):
    """Both sides of the weighted-norm relation for a field ``v`` on the space-time grid.

    Left: the Sobolev norm of ``e^{-eta z0} v`` of order ``s``; right: the sum
    of ``||e^{-eta z0} D^a v||^2`` over ``|a| <= s``.
    """
    v = np.asarray(v, float)
    wt, ws = _weights(g, v.shape[0] - 1)
    sp = (g.dt, g.h, g.h)
    weighted = v * np.exp(-eta * g.times[: v.shape[0]])[:, None, None]
    lhs = sum(weighted_sq(d, g, 0.0, wt, ws) for _, d in _derivatives(weighted, sp, s))
    rhs = sum(weighted_sq(d, g, eta, wt, ws) for _, d in _derivatives(v, sp, s))
    return lhs, rhs
