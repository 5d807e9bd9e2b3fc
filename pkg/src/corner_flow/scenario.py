"""Scenario files: walls, gas, bump data, grid and iteration settings (TOML).

Example::

    mode = "nonlinear"

    [gas]
    gamma = 1.4
    b0 = 0.0

    [walls.wall1]
    epsilon = 1e-3
    poly_coeffs = [1.0, 0.5]
    cutoff_radius = 1.0

    [[data.bumps]]
    center = [0.3, 0.2]
    radius = 0.5
    amplitude = 1e-3
    symmetrize = true
    field = "phi0"

    [grid]
    h = 0.03125
    cfl = 0.5
    T = 1.0
    eta = [4.0, 8.0, 16.0]

    [iteration]
    m_max = 12
    tol_h1 = 1e-13
"""
from __future__ import annotations

import hashlib
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import geometry as geo
from .coefficients import GasState, boundary_coeffs
from .errors import ConfigError

MODES = ("check-identities", "linear", "nonlinear", "convergence-study")
AMPLITUDE_MAX = 0.05
WALL_EPS_MAX = 0.05
SPEED_MARGIN = 1.1


@dataclass(frozen=True)
class Bump:
    """``amplitude (1 - |z - c|^2 / radius^2)^power`` on the disc; C^(power-1)."""

    center: tuple
    radius: float
    amplitude: float
    symmetrize: bool = True
    field: str = "phi0"
    power: int = 7

    def centers(self):
        c1, c2 = self.center
        if not self.symmetrize:
            return [(c1, c2)]
        pts = {(s1 * c1, s2 * c2) for s1 in (1, -1) for s2 in (1, -1)}
        return sorted(pts)

    def evaluate(self, z1, z2, deriv2=False):
        out = np.zeros(np.broadcast(z1, z2).shape)
        for c1, c2 in self.centers():
            q = ((z1 - c1) ** 2 + (z2 - c2) ** 2) / self.radius**2
            inside = q < 1
            base = np.where(inside, 1 - q, 0.0)
            if deriv2:
                out = out + np.where(inside, -self.power * base ** (self.power - 1)
                                     * 2 * (z2 - c2) / self.radius**2, 0.0)
            else:
                out = out + base**self.power
        return self.amplitude * out

    @property
    def reach(self):
        return max(np.hypot(*c) for c in self.centers()) + self.radius


@dataclass
class Scenario:
    dom: geo.CornerDomain = field(default_factory=geo.CornerDomain.flat)
    gas: GasState = field(default_factory=GasState)
    bumps: list = field(default_factory=list)
    h: float = 1 / 32
    cfl: float = 0.5
    T: float = 1.0
    eta: tuple = (4.0, 8.0, 16.0)
    m_max: int = 12
    tol_h1: float = 1e-13
    mode: str = "nonlinear"
    projection_width: float = 0.5
    source_text: str = ""

    @property
    def epsilon(self):
        amps = [abs(b.amplitude) for b in self.bumps]
        return max(amps + [self.dom.wall1.epsilon, self.dom.wall2.epsilon])

    @property
    def c_max(self):
        return SPEED_MARGIN * np.sqrt(self.gas.c0sq)

    @property
    def support_radius(self):
        return max([b.reach for b in self.bumps], default=0.0)

    @property
    def Z(self):
        """Support plus the distance a signal travels by ``T`` plus ten cells."""
        return self.support_radius + self.c_max * self.T + 10 * self.h

    def grid(self, h=None, eta=None, extended=False, cfl=None, c_max=None):
        from .linear_solver import Grid
        h = self.h if h is None else h
        c = self.c_max if c_max is None else c_max
        Z = self.support_radius + c * self.T + 10 * h
        return Grid.build(h, self.T, Z, c, self.cfl if cfl is None else cfl,
                          self.eta[0] if eta is None else eta, extended)

    def initial_data(self, grid):
        """``(phi0, phi1)`` on the grid, with the oblique correction for curved walls."""
        Z1, Z2 = grid.mesh()
        out = {"phi0": np.zeros(Z1.shape), "phi1": np.zeros(Z1.shape)}
        for b in self.bumps:
            out[b.field] = out[b.field] + b.evaluate(Z1, Z2)
        if not self.dom.is_flat:
            b1, b2 = boundary_coeffs(self.dom, grid.z2)
            chi = 1.0 - geo._smoothstep(grid.z1 / self.projection_width)
            for name in out:
                d2 = sum((b.evaluate(0.0, grid.z2, deriv2=True) for b in self.bumps if b.field == name),
                         np.zeros(grid.ny))
                k = -(b2 / b1) * d2
                out[name] = out[name] + (grid.z1 * chi)[:, None] * k[None, :]
        return out["phi0"], out["phi1"]

    @property
    def config_hash(self):
        return hashlib.sha256(self.source_text.encode()).hexdigest()[:16]


def _wall(spec, where):
    if spec is None:
        return geo.WallProfile.zero()
    try:
        coeffs = tuple(float(c) for c in spec.get("poly_coeffs", [1.0]))
        radius = float(spec.get("cutoff_radius", 1.0))
        if "epsilon" in spec:
            eps = float(spec["epsilon"])
            if not 0 <= eps <= WALL_EPS_MAX:
                raise ConfigError(f"{where}.epsilon={eps} outside the admissible range [0, {WALL_EPS_MAX}]")
            return geo.WallProfile.from_epsilon(eps, coeffs, radius)
        wall = geo.WallProfile(coeffs, radius)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    if wall.epsilon > WALL_EPS_MAX:
        raise ConfigError(f"{where}: W^(6,inf) size {wall.epsilon:.3e} exceeds {WALL_EPS_MAX}")
    return wall


def _get(table, key, kind, where, default=None):
    if key not in table:
        if default is None:
            raise ConfigError(f"missing field {where}.{key}")
        return default
    try:
        return kind(table[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"field {where}.{key}: {exc}") from exc


def from_dict(cfg, source_text=""):
    if not isinstance(cfg, dict):
        raise ConfigError("scenario must be a table")
    known = {"mode", "gas", "walls", "data", "grid", "iteration"}
    extra = set(cfg) - known
    if extra:
        raise ConfigError(f"unknown top-level field(s): {sorted(extra)}")
    mode = cfg.get("mode", "nonlinear")
    if mode not in MODES:
        raise ConfigError(f"field mode: '{mode}' is not one of {MODES}")
    g = cfg.get("gas", {})
    try:
        gas = GasState(_get(g, "gamma", float, "gas", 1.4), _get(g, "b0", float, "gas", 0.0))
    except ValueError as exc:
        raise ConfigError(f"gas: {exc}") from exc
    walls = cfg.get("walls", {})
    dom = geo.CornerDomain(_wall(walls.get("wall1"), "walls.wall1"), _wall(walls.get("wall2"), "walls.wall2"))
    bumps = []
    for i, b in enumerate(cfg.get("data", {}).get("bumps", [])):
        where = f"data.bumps[{i}]"
        center = b.get("center")
        if not (isinstance(center, list) and len(center) == 2):
            raise ConfigError(f"field {where}.center must be a pair of numbers")
        amp = _get(b, "amplitude", float, where)
        if abs(amp) > AMPLITUDE_MAX:
            raise ConfigError(f"field {where}.amplitude={amp} outside the admissible envelope {AMPLITUDE_MAX}")
        fld = b.get("field", "phi0")
        if fld not in ("phi0", "phi1"):
            raise ConfigError(f"field {where}.field must be 'phi0' or 'phi1'")
        radius = _get(b, "radius", float, where)
        if radius <= 0:
            raise ConfigError(f"field {where}.radius must be positive")
        power = _get(b, "power", int, where, 7)
        if power < 7:
            raise ConfigError(f"field {where}.power={power} gives less than C^6 smoothness")
        bumps.append(Bump((float(center[0]), float(center[1])), radius, amp,
                          bool(b.get("symmetrize", True)), fld, power))
    grid = cfg.get("grid", {})
    eta = grid.get("eta", [4.0, 8.0, 16.0])
    eta = tuple(float(e) for e in (eta if isinstance(eta, list) else [eta]))
    if any(e < 1 for e in eta):
        raise ConfigError("field grid.eta: weights must be >= 1")
    h = _get(grid, "h", float, "grid", 1 / 32)
    T = _get(grid, "T", float, "grid", 1.0)
    cfl = _get(grid, "cfl", float, "grid", 0.5)
    if h <= 0 or T <= 0 or cfl <= 0:
        raise ConfigError("grid.h, grid.T and grid.cfl must be positive")
    it = cfg.get("iteration", {})
    sc = Scenario(dom, gas, bumps, h, cfl, T, eta, _get(it, "m_max", int, "iteration", 12),
                  _get(it, "tol_h1", float, "iteration", 1e-13), mode, source_text=source_text)
    return sc


def load(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        cfg = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return from_dict(cfg, text)
