"""Picard iteration for the quasilinear corner problem.

Each iterate freezes the coefficients at ``Phi_m = phi_m + psi`` (``psi`` the
Taylor lift of the initial jet) and solves the zero-data linear problem for
the next correction ``phi_{m+1}``::

    L(Phi_m) phi_{m+1} = -L(Phi_m) psi - alpha_k(Phi_m) D_k Phi_m

with the oblique condition ``bbar1 D1 + bbar2 D2`` on ``{z1 = 0}`` and Neumann on
``{z2 = 0}``.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from . import energy
from . import linear_solver as ls
from .coefficients import GasState, GridGeometry
from .compatibility import build_jet, taylor_psi
from .errors import NoConvergence

SPEED_MARGIN = 1.1
R_INDEX = {"00": (0, 0), "01": (0, 1), "02": (0, 2), "11": (1, 1), "12": (1, 2), "22": (2, 2)}


def space_time_gradient(Phi, ratio, g: ls.Grid, before=None):
    """``(D0, D1, D2)`` of ``Phi`` on every level, spatial parts ghost-consistent.

    ``before`` is the level ``-1`` used by the centred time difference at
    ``z0 = 0``; the last level uses a second-order backward difference.
    """
    Phi = np.asarray(Phi, float)
    nt = Phi.shape[0] - 1
    D0 = np.empty_like(Phi)
    D0[1:-1] = (Phi[2:] - Phi[:-2]) / (2 * g.dt)
    D0[0] = (Phi[1] - before) / (2 * g.dt) if before is not None else \
        (-3 * Phi[0] + 4 * Phi[1] - Phi[2]) / (2 * g.dt)
    D0[nt] = (3 * Phi[nt] - 4 * Phi[nt - 1] + Phi[nt - 2]) / (2 * g.dt)
    D1 = np.empty_like(Phi)
    D2 = np.empty_like(Phi)
    for n in range(nt + 1):
        U = ls.padded(Phi[n], ratio)
        D1[n] = ls.d1(U, g.h)
        D2[n] = ls.d2(U, g.h)
    return D0, D1, D2


@dataclass
class FrozenProblem:
    problem: ls.LinearIBVP
    alpha: np.ndarray
    lower: np.ndarray


def _operator_on(p: ls.LinearIBVP, g: ls.Grid, v, before, after):
    """Discrete ``L_h`` (no lower-order terms) applied to ``v`` at every level.

    ``before``/``after`` supply levels ``-1`` and ``nt + 1``.
    """
    ratio = p.ratio
    ext = np.concatenate([before[None], v, after[None]])
    Upad = [ls.padded(w, ratio) for w in ext]
    out = np.empty_like(v)
    for n in range(v.shape[0]):
        k = n + 1
        dtt = (ext[k + 1] - 2 * ext[k] + ext[k - 1]) / g.dt**2
        mix = ls.mixed_time(p, n, Upad[k + 1] - Upad[k - 1], g.h) / g.dt
        out[n] = dtt + mix + ls.spatial_operator(p, n, Upad[k], g.h)
    return out


def assemble_frozen(geom: GridGeometry, gas: GasState, g: ls.Grid, phi, psi_ext):
    """Linear problem for ``phi_{m+1}`` with coefficients frozen at ``phi + psi``.

    ``psi_ext`` holds the lift on levels ``-1 .. nt + 1``.  ``phi`` has zero
    data, so its level ``-1`` is the mirror of level 1.
    """
    psi = psi_ext[1:-1]
    Phi = phi + psi
    ratio = geom.ratio
    before = phi[1] + psi_ext[0]
    dphi = space_time_gradient(Phi, ratio, g, before=before)
    alpha, lower = geom.alpha(gas, dphi)
    r = {k: alpha[..., i, j].copy() for k, (i, j) in R_INDEX.items()}
    r["00"] = 1.0
    bg = {"11": -gas.c0sq, "22": -gas.c0sq}
    dev = max(float(np.max(np.abs(np.asarray(r[k]) - bg.get(k, 0.0)))) for k in R_INDEX if k != "00")
    zero = np.zeros((g.nx, g.ny))
    p = ls.LinearIBVP(r, np.asarray(geom.bbar1, float), np.asarray(geom.bbar2, float), zero, zero.copy(),
                      None, None, bg, dev, 3, geom.bbar2_jet)
    Lpsi = _operator_on(p, g, psi, psi_ext[0], psi_ext[-1])
    p.f = -Lpsi - (lower[..., 1] * dphi[1] + lower[..., 2] * dphi[2])
    return FrozenProblem(p, alpha, lower)


def weighted_sobolev(v, g: ls.Grid, eta, order):
    """``sqrt(sum_{|a|<=order} ||e^{-eta z0} D^a v||^2)``."""
    v = np.asarray(v, float)
    wt, ws = energy._weights(g, v.shape[0] - 1)
    sp = (g.dt, g.h, g.h)
    total = sum(energy.weighted_sq(d, g, eta, wt, ws) for _, d in energy._derivatives(v, sp, order))
    return float(np.sqrt(total))


def h1_norm(v, g: ls.Grid, eta=None):
    return weighted_sobolev(v, g, g.eta if eta is None else eta, 1)


@dataclass
class IterationTrace:
    diff_h1: list = field(default_factory=list)      # ||phi_{m+1} - phi_m||
    high_norm: list = field(default_factory=list)    # weighted H^4 of Phi_{m+1}
    sweeps: list = field(default_factory=list)
    tol: float = 0.0

    @property
    def ratios(self):
        d = self.diff_h1
        return [d[m] / d[m - 1] if d[m - 1] > 0 else float("nan") for m in range(1, len(d))]

    @property
    def sigma_hat(self):
        """Geometric mean of the successive-difference ratios (nan with fewer than two iterates)."""
        r = [x for x in self.ratios if np.isfinite(x) and x > 0]
        return float(np.exp(np.mean(np.log(r)))) if r else float("nan")

    def to_dict(self):
        return {"diff_h1": self.diff_h1, "ratios": self.ratios, "high_norm": self.high_norm,
                "sweeps": self.sweeps, "sigma_hat": self.sigma_hat, "tol": self.tol,
                "iterations": len(self.diff_h1)}

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["m", "diff_h1", "ratio", "high_norm", "sweeps"])
        ratios = [float("nan")] + self.ratios
        for m, (d, r, hn, s) in enumerate(zip(self.diff_h1, ratios, self.high_norm, self.sweeps)):
            w.writerow([m, f"{d:.17g}", f"{r:.17g}", f"{hn:.17g}", s])
        return buf.getvalue()


@dataclass
class NonlinearResult:
    Phi: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    trace: IterationTrace
    grid: ls.Grid
    frozen: FrozenProblem | None = None

    @property
    def converged(self):
        return bool(self.trace.diff_h1) and self.trace.diff_h1[-1] <= self.trace.tol

    def to_json(self):
        return json.dumps({"trace": self.trace.to_dict(), "grid": self.grid.to_dict(),
                           "converged": self.converged}, indent=2, sort_keys=True)


def lift(jet, g: ls.Grid):
    """Taylor lift on levels ``-1 .. nt + 1``."""
    times = np.concatenate([[-g.dt], g.times, [g.times[-1] + g.dt]])
    return taylor_psi(jet, times)


def prepare(scn, h=None, eta=None):
    """Grid, geometry and data for a scenario, with ``dt`` sized for the frozen speeds.

    The lift makes the frozen coefficients depart from the background, so the
    speed bound is read off the first frozen problem (with a 10% margin for the
    later iterates) before the final grid is laid out.
    """
    g = scn.grid(h=h, eta=eta)
    for _ in range(3):
        geom = GridGeometry.build(scn.dom, g.z1, g.z2)
        phi0, phi1 = scn.initial_data(g)
        jet = build_jet(phi0, phi1, geom, scn.gas, g.h)
        fr = assemble_frozen(geom, scn.gas, g, np.zeros(g.shape), lift(jet, g))
        c = SPEED_MARGIN * ls.c_max(fr.problem)
        if c * g.dt <= g.cfl * g.h:
            return g, geom, phi0, phi1
        g = scn.grid(h=h, eta=eta, c_max=c)
    return g, geom, phi0, phi1


def iterate(geom: GridGeometry, gas: GasState, g: ls.Grid, phi0, phi1, m_max=12, tol_h1=1e-13,
            high_order=4, check_cfl=True, start=None):
    """Picard iteration until ``||phi_{m+1} - phi_m||_{H^1}`` drops to ``tol_h1``.

    ``start`` seeds ``phi_0`` (zero by default).  Raises ``NoConvergence``
    (carrying the trace) when ``m_max`` solves do not get there.
    """
    jet = build_jet(phi0, phi1, geom, gas, g.h)
    psi_ext = lift(jet, g)
    psi = psi_ext[1:-1]
    phi = np.zeros(g.shape) if start is None else np.array(start, float)
    trace = IterationTrace(tol=tol_h1)
    frozen = None
    for m in range(m_max):
        frozen = assemble_frozen(geom, gas, g, phi, psi_ext)
        sol = ls.solve(frozen.problem, g, check_cfl=check_cfl)
        diff = h1_norm(sol.u - phi, g)
        phi = sol.u
        trace.diff_h1.append(diff)
        trace.sweeps.append(sol.sweeps)
        trace.high_norm.append(weighted_sobolev(phi + psi, g, g.eta, high_order) if high_order else 0.0)
        if diff <= tol_h1:
            return NonlinearResult(phi + psi, phi, psi, trace, g, frozen)
    rat = trace.ratios
    last = rat[-1] if rat else float("nan")
    raise NoConvergence(f"no convergence after {m_max} iterations: last H1 difference "
                        f"{trace.diff_h1[-1]:.3e} > {tol_h1:.1e}, last ratio {last:.3f}", trace=trace)


def contraction_ratio(trace: IterationTrace):
    """Geometric-mean ratio; ``nan`` for traces shorter than three iterates."""
    if len(trace.diff_h1) < 3:
        return float("nan")
    return trace.sigma_hat


def boundedness_check(trace: IterationTrace, bound):
    """Whether every iterate stays in the high-norm ball of radius ``bound``."""
    return bool(all(x <= bound for x in trace.high_norm))


# ---------------------------------------------------------- residual check

def _fd_derivs(u, g: ls.Grid):
    """First and second space-time derivatives by ``np.gradient`` (independent of the scheme)."""
    sp = (g.dt, g.h, g.h)
    first = [np.gradient(u, sp[a], axis=a, edge_order=2) for a in range(3)]
    second = {}
    for i in range(3):
        for j in range(i, 3):
            second[(i, j)] = np.gradient(first[i], sp[j], axis=j, edge_order=2)
    return first, second


def _interior(arr, band=3):
    return arr[band:-band, band:-band, band:-band]


def quasilinear_residual(Phi, geom: GridGeometry, gas: GasState, g: ls.Grid, band=3):
    """Max of ``|alpha_ij D_ij Phi + alpha_k D_k Phi|`` away from the box edges."""
    first, second = _fd_derivs(Phi, g)
    alpha, lower = geom.alpha(gas, tuple(first))
    res = sum(alpha[..., i, j] * second[(i, j)] * (1 if i == j else 2) for (i, j) in second)
    res = res + lower[..., 1] * first[1] + lower[..., 2] * first[2]
    return float(np.max(np.abs(_interior(res, band))))


def linear_residual(u, c0sq, g: ls.Grid, band=3):
    """The same evaluator for the background operator ``D00 - c0^2 (D11 + D22)``."""
    _, second = _fd_derivs(u, g)
    res = second[(0, 0)] - c0sq * (second[(1, 1)] + second[(2, 2)])
    return float(np.max(np.abs(_interior(res, band))))


def corner_gradient(Phi, ratio, h):
    """Largest ``|(D1, D2) Phi|`` at the corner node over all levels (ghost-consistent)."""
    out = 0.0
    for n in range(Phi.shape[0]):
        U = ls.padded(Phi[n], ratio)
        out = max(out, float(np.hypot(ls.d1(U, h)[0, 0], ls.d2(U, h)[0, 0])))
    return out
