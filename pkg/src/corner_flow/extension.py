"""Odd/even extension across ``{z2 = 0}`` and mollification in ``z2``.

Fields are arrays whose last axis is ``z2``.  A quarter-plane field samples
``z2 = 0, h, ..., Z``; its extension samples ``-Z, ..., Z`` with the axis at the
middle index, so reflection is an index flip.
"""
from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .errors import KernelUnderresolved

ODD_KEYS = frozenset({"02", "12"})


@dataclass(frozen=True)
class ExtendedField:
    values: np.ndarray
    parity: str
    source: str = ""

    @property
    def axis_index(self):
        return self.values.shape[-1] // 2

    def mirror_residual(self):
        v = self.values
        sign = -1.0 if self.parity == "odd" else 1.0
        return float(np.max(np.abs(v[..., ::-1] - sign * v), initial=0.0))

    def restrict(self):
        return self.values[..., self.axis_index:]


def extend(field, parity, source=""):
    """Mirror-fill a quarter-plane field onto the full strip."""
    if parity not in ("odd", "even"):
        raise ValueError("parity must be 'odd' or 'even'")
    v = np.asarray(field, dtype=float)
    lower = v[..., :0:-1]
    if parity == "odd":
        lower = -lower
        v = v.copy()
        v[..., 0] = 0.0     # an odd function has no value on the axis
    return ExtendedField(np.concatenate([lower, v], axis=-1), parity, source)


def bump(s):
    """Unnormalized ``exp(-1/(1 - s^2))`` on ``|s| < 1``."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1
    out[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    return out


@dataclass(frozen=True)
class Mollifier:
    """Friedrichs kernel ``eta(s/eps)/eps`` tabulated at the grid spacing ``h``."""

    epsilon: float
    h: float

    def __post_init__(self):
        if self.epsilon < 2 * self.h:
            raise KernelUnderresolved(
                f"mollifier width {self.epsilon} is below two grid spacings ({2 * self.h})")

    @property
    def half_width(self):
        return int(np.ceil(self.epsilon / self.h))

    @property
    def weights(self):
        """One-sided weights ``K_0, K_1, ..., K_n`` (times ``h``), mass exactly 1."""
        k = np.arange(self.half_width + 1)
        w = bump(k * self.h / self.epsilon)
        return w / (w[0] + 2 * np.sum(w[1:]))

    @property
    def kernel(self):
        w = self.weights
        return np.concatenate([w[:0:-1], w]) / self.h

    @property
    def mass(self):
        return float(np.sum(self.kernel) * self.h)


def mollify_z2(field, m: Mollifier):
    """Convolve along the last axis; edge values are held beyond the truncation.

    Summed as ``K_0 F_j + sum_k K_k (F_{j-k} + F_{j+k})``, which keeps odd and
    even inputs exactly odd and even in floating point.
    """
    parity = None
    if isinstance(field, ExtendedField):
        parity, source, field = field.parity, field.source, field.values
    f = np.asarray(field, dtype=float)
    w = m.weights
    n = len(w) - 1
    pad = [(0, 0)] * (f.ndim - 1) + [(n, n)]
    fp = np.pad(f, pad, mode="edge")
    size = f.shape[-1]
    out = w[0] * fp[..., n:n + size]
    for k in range(1, n + 1):
        out = out + w[k] * (fp[..., n - k:n - k + size] + fp[..., n + k:n + k + size])
    if parity is not None:
        return ExtendedField(out, parity, source)
    return out


def coefficient_ratios(r, b1, b2):
    """``r_ij / r_11`` (keys as in ``r``) and ``b_i / b_1`` before extension."""
    ratios = {k: np.asarray(v, dtype=float) / np.asarray(r["11"], dtype=float) for k, v in r.items()}
    return ratios, {"1": np.ones_like(np.asarray(b1, dtype=float)),
                    "2": np.asarray(b2, dtype=float) / np.asarray(b1, dtype=float)}


def extend_ratios(ratios, bratios):
    er = {k: extend(v, "odd" if k in ODD_KEYS else "even", k) for k, v in ratios.items()}
    eb = {k: extend(v, "odd" if k == "2" else "even", "b" + k) for k, v in bratios.items()}
    return er, eb


@dataclass
class Lemma32Report:
    parity_residual: float
    sup_excess: float
    b2_corner: float
    b2_corner_difference: float
    b2_corner_derivative: float
    conormal_residual: float
    r01_boundary: float
    constant_residual: float
    tol: float = 1e-8

    @property
    def items(self):
        return {
            "parity": self.parity_residual == 0.0,
            "bounds": self.sup_excess <= 0.0,
            "corner": max(abs(self.b2_corner), abs(self.b2_corner_difference)) <= self.tol,
            "conormal": max(self.conormal_residual, self.r01_boundary) <= self.tol,
            "constants": self.constant_residual <= 1e-12,
        }

    @property
    def passed(self):
        return all(self.items.values())

    def to_dict(self):
        d = asdict(self)
        d["items"] = self.items
        d["passed"] = self.passed
        return d


def check_lemma32(r, b1, b2, m: Mollifier, delta, background, c_bound=2.0, tol=1e-8):
    """Check the regularized coefficients built from quarter-plane fields.

    ``r`` maps keys ``'00','01','02','11','12','22'`` to arrays over ``(z1, z2)``
    (an optional leading time axis is allowed); ``b1``, ``b2`` are ``(z1, z2)``
    arrays.  ``background`` maps the same keys to the constants ``rbar_ij``.
    The corner difference is the undivided first difference of the mollified
    ``b2/b1`` at ``(0, 0)``; the divided derivative is reported alongside.
    """
    ratios, bratios = coefficient_ratios(r, b1, b2)
    er, eb = extend_ratios(ratios, bratios)
    mr = {k: mollify_z2(v, m) for k, v in er.items()}
    mb = {k: mollify_z2(v, m) for k, v in eb.items()}
    parity = max(v.mirror_residual() for v in list(mr.values()) + list(mb.values()))
    bg = {"00": 1.0, **background}
    rbar11 = bg["11"]
    excess = max(float(np.max(np.abs(v.values))) - (c_bound * delta + abs(bg.get(k, 0.0) / rbar11))
                 for k, v in mr.items())
    tb2 = mb["2"].values
    j0 = mb["2"].axis_index
    corner = float(tb2[..., 0, j0])
    diff = float(tb2[..., 0, j0 + 1] - tb2[..., 0, j0])
    deriv = float((tb2[..., 0, j0 + 1] - tb2[..., 0, j0 - 1]) / (2 * m.h))
    con = float(np.max(np.abs(mr["12"].values[..., 0, :] - tb2[..., 0, :])))
    r01 = float(np.max(np.abs(mr["01"].values[..., 0, :]))) if "01" in mr else 0.0
    const = np.full(tb2.shape, 0.7)
    const_res = float(np.max(np.abs(mollify_z2(const, m) - 0.7)))
    return Lemma32Report(parity, float(excess), corner, diff, deriv, con, r01, const_res, tol)
