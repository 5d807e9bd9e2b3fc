"""Explicit finite-difference solver for the linear corner problem.

Equation: ``sum_{i,j=0..2} r_ij d_ij phi + sum_i r_i d_i phi = f`` with
``r_00 = 1``, the oblique condition ``b1 d1 phi + b2 d2 phi = 0`` on ``{z1 = 0}``
and ``d2 phi = 0`` on ``{z2 = 0}``.

The grid is node centred with one ghost layer.  Arrays on the padded grid have
shape ``(nx + 2, ny + 2)``; index 1 is the first physical node.  Every stencil is
written so that reflecting the input in ``z2`` reflects the output bit for bit.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from math import ceil
from pathlib import Path

import numpy as np

from .errors import CFLViolation, InstabilityDetected

CFL_LIMIT = 1 / np.sqrt(2)
GROWTH_LIMIT = 1e12
R_KEYS = ("00", "01", "02", "11", "12", "22")


@dataclass(frozen=True)
class Grid:
    h: float
    dt: float
    Z: float
    T: float
    eta: float = 4.0
    cfl: float = 0.5
    extended: bool = False

    @classmethod
    def build(cls, h, T, Z, c_max, cfl=0.5, eta=4.0, extended=False):
        """Snap ``Z`` to the mesh and pick ``dt <= cfl h / c_max`` that lands on ``T``."""
        n = max(2, int(round(Z / h)))
        nt = max(1, ceil(T * c_max / (cfl * h) - 1e-9))
        return cls(h, T / nt, n * h, T, eta, cfl, extended)

    @property
    def nx(self):
        return int(round(self.Z / self.h)) + 1

    @property
    def ny(self):
        return 2 * self.nx - 1 if self.extended else self.nx

    @property
    def nt(self):
        return int(round(self.T / self.dt))

    @property
    def shape(self):
        return (self.nt + 1, self.nx, self.ny)

    @property
    def z1(self):
        return self.h * np.arange(self.nx)

    @property
    def z2(self):
        offset = self.nx - 1 if self.extended else 0
        return self.h * (np.arange(self.ny) - offset)

    @property
    def axis_index(self):
        return self.nx - 1 if self.extended else 0

    @property
    def times(self):
        return self.dt * np.arange(self.nt + 1)

    def mesh(self):
        return np.meshgrid(self.z1, self.z2, indexing="ij")

    def to_dict(self):
        d = asdict(self)
        d.update(nx=self.nx, ny=self.ny, nt=self.nt)
        return d


@dataclass
class LinearIBVP:
    """Coefficients and data on a ``Grid``.

    ``r`` maps ``'00','01','02','11','12','22'`` to arrays of shape ``(nx, ny)``
    (frozen in time) or ``(nt + 1, nx, ny)``; scalars are allowed.  ``b1`` and
    ``b2`` are the boundary coefficients along ``{z1 = 0}`` (length ``ny``).
    """

    r: dict
    b1: np.ndarray
    b2: np.ndarray
    phi0: np.ndarray
    phi1: np.ndarray
    f: np.ndarray | None = None
    r_lower: dict | None = None
    background: dict = field(default_factory=lambda: {"11": -1.0, "22": -1.0})
    delta: float = 0.0
    s0: int = 3
    b2_jet: tuple | None = None

    @classmethod
    def background_problem(cls, g: Grid, c0sq=1.0, phi0=None, phi1=None, f=None):
        shape = (g.nx, g.ny)
        z = np.zeros(shape)
        r = {"00": 1.0, "01": 0.0, "02": 0.0, "11": -c0sq, "12": 0.0, "22": -c0sq}
        return cls(r, -np.ones(g.ny), np.zeros(g.ny),
                   z if phi0 is None else np.asarray(phi0, float),
                   z if phi1 is None else np.asarray(phi1, float), f,
                   background={"11": -c0sq, "22": -c0sq}, b2_jet=(0.0, 0.0, 0.0))

    def coeff(self, key, n):
        return level(self.r.get(key, 0.0), n)

    def lower(self, key, n):
        if not self.r_lower:
            return 0.0
        return level(self.r_lower.get(key, 0.0), n)

    def forcing(self, n):
        return 0.0 if self.f is None else level(self.f, n)

    @property
    def ratio(self):
        return np.asarray(self.b2, float) / np.asarray(self.b1, float)

    @property
    def has_mixed_time(self):
        return any(np.any(np.asarray(self.r.get(k, 0.0)) != 0) for k in ("01", "02"))


def level(arr, n):
    """Time level ``n`` of a coefficient that may be frozen in time."""
    a = np.asarray(arr)
    return a[min(max(n, 0), a.shape[0] - 1)] if a.ndim == 3 else a


def c_max(p: LinearIBVP):
    """Upper bound on characteristic speeds over the whole grid."""
    r01 = np.asarray(p.r.get("01", 0.0), float)
    r02 = np.asarray(p.r.get("02", 0.0), float)
    r11 = np.asarray(p.r["11"], float)
    r22 = np.asarray(p.r["22"], float)
    r12 = np.asarray(p.r.get("12", 0.0), float)
    lam = -(r11 + r22) / 2 + np.sqrt(((r11 - r22) / 2) ** 2 + r12**2)
    b = np.sqrt(r01**2 + r02**2)
    return float(np.max(b + np.sqrt(b**2 + np.maximum(lam, 0.0))))


# -------------------------------------------------------------- stencils

def pad(u):
    return np.pad(np.asarray(u, float), 1)


def fill_ghosts(U, ratio):
    """Impose the boundary conditions on the ghost layer of ``U`` in place.

    Bottom, top and right edges are even mirrors; the left edge is the discrete
    oblique condition ``b1 D1 u + b2 D2 u = 0`` with ``ratio = b2 / b1``.
    """
    U[:, 0] = U[:, 2]
    U[:, -1] = U[:, -3]
    U[-1, :] = U[-3, :]
    U[0, 1:-1] = U[2, 1:-1] + ratio * (U[1, 2:] - U[1, :-2])
    U[0, 0] = U[0, 2]
    U[0, -1] = U[0, -3]
    return U


def padded(u, ratio):
    return fill_ghosts(pad(u), ratio)


def d1(U, h):
    return (U[2:, 1:-1] - U[:-2, 1:-1]) / (2 * h)


def d2(U, h):
    return (U[1:-1, 2:] - U[1:-1, :-2]) / (2 * h)


def d11(U, h):
    return ((U[2:, 1:-1] + U[:-2, 1:-1]) - 2 * U[1:-1, 1:-1]) / h**2


def d22(U, h):
    return ((U[1:-1, 2:] + U[1:-1, :-2]) - 2 * U[1:-1, 1:-1]) / h**2


def d12(U, h):
    P = U[2:, :] - U[:-2, :]
    return (P[:, 2:] - P[:, :-2]) / (4 * h**2)


def spatial_operator(p: LinearIBVP, n, U, h):
    """``r11 D11 + 2 r12 D12 + r22 D22 + r1 D1 + r2 D2`` at level ``n``."""
    out = p.coeff("11", n) * d11(U, h) + 2 * p.coeff("12", n) * d12(U, h)
    out = out + p.coeff("22", n) * d22(U, h)
    if p.r_lower:
        out = out + p.lower("1", n) * d1(U, h) + p.lower("2", n) * d2(U, h)
    return out


def mixed_time(p: LinearIBVP, n, U, h):
    """``r01 D1 + r02 D2`` at level ``n`` (multiplies a time difference)."""
    return p.coeff("01", n) * d1(U, h) + p.coeff("02", n) * d2(U, h)


# -------------------------------------------------------------- solution

@dataclass
class SolutionField:
    u: np.ndarray
    grid: Grid
    meta: dict = field(default_factory=dict)
    sweeps: int = 0

    def dump(self, stem):
        stem = Path(stem)
        stem.parent.mkdir(parents=True, exist_ok=True)
        np.ascontiguousarray(self.u, dtype="<f8").tofile(stem.with_suffix(".bin"))
        g = self.grid
        side = {"h": g.h, "dt": g.dt, "Z": g.Z, "T": g.T, "shape": list(self.u.shape), "eta": g.eta}
        side.update(self.meta)
        stem.with_suffix(".json").write_text(json.dumps(side, indent=2, sort_keys=True))
        return stem.with_suffix(".bin"), stem.with_suffix(".json")

    @staticmethod
    def load(stem):
        stem = Path(stem)
        side = json.loads(stem.with_suffix(".json").read_text())
        u = np.fromfile(stem.with_suffix(".bin"), dtype="<f8").reshape(side["shape"])
        return u, side


def _check_shapes(p: LinearIBVP, g: Grid):
    want = (g.nx, g.ny)
    for name, arr in (("phi0", p.phi0), ("phi1", p.phi1)):
        if np.shape(arr) != want:
            raise ValueError(f"{name} has shape {np.shape(arr)}, grid needs {want}")
    if np.shape(p.b1) != (g.ny,) or np.shape(p.b2) != (g.ny,):
        raise ValueError("b1/b2 must be sampled along z1 = 0 (length ny)")


def solve(p: LinearIBVP, g: Grid, check_cfl=True, max_sweeps=50, sweep_tol=1e-15,
          growth_limit=GROWTH_LIMIT):
    """March the three-level scheme from the initial data to ``T``."""
    _check_shapes(p, g)
    h, dt = g.h, g.dt
    cm = c_max(p)
    if check_cfl:
        if g.cfl > CFL_LIMIT:
            raise CFLViolation(f"CFL factor {g.cfl} exceeds the stability limit {CFL_LIMIT:.4f}")
        if dt * cm > g.cfl * h * (1 + 1e-9):
            raise CFLViolation(f"dt={dt:.4e} exceeds {g.cfl} h / c_max = {g.cfl * h / cm:.4e}")
    ratio = p.ratio
    u = np.zeros(g.shape)
    u[0] = p.phi0
    scale = max(np.max(np.abs(p.phi0), initial=0.0), g.T * np.max(np.abs(p.phi1), initial=0.0),
                g.T**2 * (0.0 if p.f is None else np.max(np.abs(p.f), initial=0.0)), 1e-300)
    if g.nt == 0:
        return SolutionField(u, g)

    U0 = padded(p.phi0, ratio)
    U1 = padded(p.phi1, ratio)
    utt = p.forcing(0) - (2 * mixed_time(p, 0, U1, h) + spatial_operator(p, 0, U0, h)
                          + p.lower("0", 0) * p.phi1)
    u[1] = p.phi0 + dt * p.phi1 + 0.5 * dt**2 * utt
    total_sweeps = 0
    Uprev, Ucur = U0, padded(u[1], ratio)
    for n in range(1, g.nt):
        new, k = _step(p, n, dt, h, u[n - 1], u[n], Uprev, Ucur, ratio, max_sweeps, sweep_tol)
        total_sweeps += k
        peak = np.max(np.abs(new))
        if not np.isfinite(peak) or peak > growth_limit * scale:
            raise InstabilityDetected(
                f"solution grew to {peak:.3e} (x{peak / scale:.1e} the data scale) at step {n + 1} "
                f"of {g.nt}; dt*c_max/h = {dt * cm / h:.3f}")
        u[n + 1] = new
        Uprev, Ucur = Ucur, padded(new, ratio)
    return SolutionField(u, g, sweeps=total_sweeps)


def _step(p, n, dt, h, prev, cur, Uprev, Ucur, ratio, max_sweeps=50, sweep_tol=1e-15):
    """One leapfrog step from levels ``(n-1, n)`` to ``n+1``; a negative ``dt`` marches backwards.

    The mixed time-space terms make the new level implicit through its first
    differences only; fixed-point sweeps resolve it.  Returns ``(new, sweeps)``.
    """
    r0 = p.lower("0", n)
    A = 1 + 0.5 * dt * r0
    rhs = 2 * cur - prev + 0.5 * dt * r0 * prev
    rhs = rhs + dt**2 * (p.forcing(n) - spatial_operator(p, n, Ucur, h))
    if not p.has_mixed_time:
        return rhs / A, 1
    rhs = rhs + dt * mixed_time(p, n, Uprev, h)
    guess = padded(2 * cur - prev, ratio)
    new = None
    for k in range(1, max_sweeps + 1):
        cand = (rhs - dt * mixed_time(p, n, guess, h)) / A
        if new is not None and np.max(np.abs(cand - new)) <= sweep_tol * max(np.max(np.abs(cand)), 1e-300):
            return cand, k
        new = cand
        guess = padded(new, ratio)
    return new, max_sweeps


def extend_in_time(p: LinearIBVP, g: Grid, u, layers):
    """Continue a discrete solution ``layers`` steps past both ends with the same scheme.

    The scheme is time reversible, so levels before 0 come from marching with
    ``-dt``.  Coefficients and forcing are held at their end values.
    """
    u = np.asarray(u, float)
    if layers == 0:
        return u
    ratio = p.ratio
    nt = u.shape[0] - 1
    after = [u[-2], u[-1]]
    for k in range(layers):
        new, _ = _step(p, nt, g.dt, g.h, after[-2], after[-1], padded(after[-2], ratio),
                       padded(after[-1], ratio), ratio)
        after.append(new)
    before = [u[1], u[0]]
    for k in range(layers):
        new, _ = _step(p, 0, -g.dt, g.h, before[-2], before[-1], padded(before[-2], ratio),
                       padded(before[-1], ratio), ratio)
        before.append(new)
    return np.concatenate([np.array(before[:1:-1]), u, np.array(after[2:])])


def homogenize(p: LinearIBVP, g: Grid):
    """Zero-data problem for ``phi - w`` with ``w = phi0 + z0 phi1``; returns ``(p', w)``."""
    ratio = p.ratio
    h = g.h
    U1 = padded(p.phi1, ratio)
    w = p.phi0[None] + g.times[:, None, None] * p.phi1[None]
    f_new = np.zeros(g.shape)
    for n in range(g.nt + 1):
        Lw = 2 * mixed_time(p, n, U1, h) + spatial_operator(p, n, padded(w[n], ratio), h)
        Lw = Lw + p.lower("0", n) * p.phi1
        f_new[n] = p.forcing(n) - Lw
    zero = np.zeros_like(p.phi0)
    q = LinearIBVP(p.r, p.b1, p.b2, zero, zero.copy(), f_new, p.r_lower, p.background,
                   p.delta, p.s0, p.b2_jet)
    return q, w


def residual(p: LinearIBVP, g: Grid, u):
    """``L_h phi - f`` at levels ``1 .. nt-1`` using the scheme's own stencils."""
    u = np.asarray(u, float)
    ratio = p.ratio
    h, dt = g.h, g.dt
    out = np.zeros((max(g.nt - 1, 0), g.nx, g.ny))
    Upad = [padded(u[n], ratio) for n in range(g.nt + 1)]
    for n in range(1, g.nt):
        dtt = (u[n + 1] - 2 * u[n] + u[n - 1]) / dt**2
        dtd = (Upad[n + 1] - Upad[n - 1])
        val = dtt + mixed_time(p, n, dtd, h) / dt + p.lower("0", n) * (u[n + 1] - u[n - 1]) / (2 * dt)
        out[n - 1] = val + spatial_operator(p, n, Upad[n], h) - p.forcing(n)
    return out


def trapezoid_weights(g: Grid):
    w1 = np.full(g.nx, g.h)
    w1[[0, -1]] *= 0.5
    w2 = np.full(g.ny, g.h)
    w2[[0, -1]] *= 0.5
    return w1[:, None] * w2[None, :]


def discrete_energy(p: LinearIBVP, g: Grid, u):
    """Leapfrog energy at half levels; conserved for frozen symmetric problems with f = 0."""
    wts = trapezoid_weights(g)
    ratio = p.ratio
    out = []
    for n in range(g.nt):
        vel = (u[n + 1] - u[n]) / g.dt
        Au = spatial_operator(p, n, padded(u[n], ratio), g.h)
        out.append(float(np.sum(wts * vel**2) + np.sum(wts * u[n + 1] * Au)))
    return np.array(out)


# -------------------------------------------------------------- assumptions

@dataclass
class AssumptionReport:
    items: dict
    tol: float

    @property
    def passed(self):
        return all(v["passed"] for v in self.items.values())

    def to_dict(self):
        return {"items": self.items, "tol": self.tol, "passed": self.passed}


def _item(residual, passed):
    return {"residual": float(residual), "passed": bool(passed)}


def validate_assumptions(p: LinearIBVP, g: Grid, tol=1e-8):
    """Residuals of the structural hypotheses on the coefficients."""
    shape = (g.nt + 1, g.nx, g.ny)
    r = {k: np.broadcast_to(np.asarray(p.r.get(k, 0.0), float), shape if np.ndim(p.r.get(k, 0.0)) == 3
                            else (g.nx, g.ny)) for k in R_KEYS}
    items = {}
    bg = p.background
    r11b, r22b = bg.get("11", -1.0), bg.get("22", -1.0)
    hyper = float(np.max((r["11"] + r["22"]) / 2 + np.sqrt(((r["11"] - r["22"]) / 2) ** 2 + r["12"] ** 2)))
    items["i"] = _item(max(float(np.max(np.abs(r["00"] - 1.0))), max(hyper, 0.0)),
                       np.all(r["00"] == 1.0) and hyper < 0 and r11b == r22b and r11b < 0)
    dev = max(float(np.max(np.abs(r[k] - bg.get(k, 1.0 if k == "00" else 0.0)))) for k in R_KEYS)
    b1_min = float(np.min(np.abs(p.b1)))
    items["ii"] = _item(dev, (dev <= p.delta if p.delta > 0 else dev == 0.0) and p.s0 >= 3 and b1_min >= 0.5)
    if not g.extended:
        j0 = g.axis_index
        on2 = max(float(np.max(np.abs(r["02"][..., j0]))), float(np.max(np.abs(r["12"][..., j0]))))
        if p.b2_jet is not None:
            jet = [abs(float(v)) for v in p.b2_jet]
        else:
            b = np.asarray(p.b2, float)
            jet = [abs(b[0]), abs((-3 * b[0] + 4 * b[1] - b[2]) / (2 * g.h)),
                   abs((2 * b[0] - 5 * b[1] + 4 * b[2] - b[3]) / g.h**2)]
        res3 = max(on2, *jet)
        items["iii"] = _item(res3, res3 <= tol)
    con = float(np.max(np.abs(r["12"][..., 0, :] / r["11"][..., 0, :] - p.ratio)))
    r01 = float(np.max(np.abs(r["01"][..., 0, :])))
    items["iv"] = _item(max(con, r01), max(con, r01) <= tol)
    return AssumptionReport(items, tol)


# -------------------------------------------------------------- oracle

def cosine_oracle(g: Grid, modes=(1, 1), c0sq=1.0, amplitude=1.0):
    """Separable Neumann mode ``A cos(k1 z1) cos(k2 z2) cos(w z0)`` on the box.

    ``k_i = pi n_i / Z`` makes every edge a zero-flux edge, and the box edges at
    ``Z`` match the solver's mirror ghosts.  Returns ``(phi0, phi1, exact)``
    with ``exact`` of shape ``g.shape``.
    """
    if g.extended:
        raise ValueError("the cosine oracle lives on the quarter-plane grid")
    k1, k2 = (np.pi * n / g.Z for n in modes)
    w = np.sqrt(c0sq * (k1**2 + k2**2))
    Z1, Z2 = g.mesh()
    space = amplitude * np.cos(k1 * Z1) * np.cos(k2 * Z2)
    exact = np.cos(w * g.times)[:, None, None] * space[None]
    return space, np.zeros_like(space), exact
