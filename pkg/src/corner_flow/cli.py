"""``corner-flow run <config>``: scenario-driven checks, solves and studies."""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import compatibility as cp
from . import energy
from . import extension as ext
from . import linear_solver as ls
from . import nonlinear as nl
from . import scenario as scn_mod
from .coefficients import GridGeometry, check_lemma21, slip_candidate
from .errors import ConfigError, CornerFlowError

log = logging.getLogger("corner_flow")


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to ``None``."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


class Writer:
    """Puts every artifact under ``out`` and stamps JSON reports with the run metadata."""

    def __init__(self, out, meta):
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.meta = meta
        self.written = []

    def json(self, name, payload):
        body = dict(_clean(payload))
        body["meta"] = _clean(self.meta)
        path = self.out / name
        path.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")
        self.written.append(path.name)
        return path

    def csv(self, name, header, rows):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"# config_hash={self.meta['config_hash']}"])
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in row])
        path = self.out / name
        path.write_text(buf.getvalue())
        self.written.append(path.name)
        return path

    def field(self, stem, u, grid):
        sf = ls.SolutionField(u, grid, meta={"config_hash": self.meta["config_hash"]})
        paths = sf.dump(self.out / stem)
        self.written.extend(p.name for p in paths)


def _meta(scn, grid):
    return {"config_hash": scn.config_hash, "grid": grid.to_dict(), "mode": scn.mode}


# ------------------------------------------------------------------ modes

def run_check_identities(scn, args, out_dir):
    g = scn.grid()
    w = Writer(out_dir, _meta(scn, g))
    rng = np.random.default_rng(args.seed)
    samples = np.sort(rng.uniform(0.0, 0.9, 32))
    l21 = check_lemma21(scn.dom, scn.gas, slip_candidate(scn.dom), samples=samples)
    w.json("lemma21.json", {"seed": args.seed, "samples": samples, **l21.to_dict()})

    geom = GridGeometry.build(scn.dom, g.z1, g.z2)
    phi0, phi1 = scn.initial_data(g)
    jet = cp.build_jet(phi0, phi1, geom, scn.gas, g.h)
    fr = nl.assemble_frozen(geom, scn.gas, g, np.zeros(g.shape), nl.lift(jet, g))
    p = fr.problem
    r0 = {k: np.asarray(ls.level(v, 0), float) * np.ones((g.nx, g.ny)) for k, v in p.r.items()}
    b1 = np.broadcast_to(geom.bbar1, (g.nx, g.ny))
    b2 = np.broadcast_to(geom.bbar2, (g.nx, g.ny))
    l32 = ext.check_lemma32(r0, b1, b2, ext.Mollifier(4 * g.h, g.h), p.delta, p.background)
    w.json("lemma32.json", l32.to_dict())
    w.json("assumptions.json", ls.validate_assumptions(p, g).to_dict())
    w.json("compatibility.json", cp.check_compatibility(jet, geom).to_dict())
    return 0


def _linear_problem(scn, g):
    """Rest-state linearization in the curved geometry, driven by the scenario data."""
    geom = GridGeometry.build(scn.dom, g.z1, g.z2)
    zero = np.zeros((g.nx, g.ny))
    alpha, lower = geom.alpha(scn.gas, (zero, zero, zero))
    r = {k: alpha[..., i, j].copy() for k, (i, j) in nl.R_INDEX.items()}
    r["00"] = 1.0
    phi0, phi1 = scn.initial_data(g)
    bg = {"11": -scn.gas.c0sq, "22": -scn.gas.c0sq}
    r_lower = {"1": lower[..., 1], "2": lower[..., 2]} if not scn.dom.is_flat else None
    dev = max(float(np.max(np.abs(np.asarray(r[k]) - bg.get(k, 0.0)))) for k in nl.R_INDEX if k != "00")
    return ls.LinearIBVP(r, geom.bbar1.copy(), geom.bbar2.copy(), phi0, phi1, None, r_lower, bg, dev,
                         3, geom.bbar2_jet)


def run_linear(scn, args, out_dir):
    g = scn.grid()
    w = Writer(out_dir, _meta(scn, g))
    p = _linear_problem(scn, g)
    w.json("assumptions.json", ls.validate_assumptions(p, g).to_dict())
    sol = ls.solve(p, g)
    w.field("phi", sol.u, g)
    reports = energy.weighted_norms(sol, p, g, max_order=4, eta=list(scn.eta))
    rows = []
    for rep in reports:
        for k in range(len(rep.lhs)):
            rows.append([rep.eta, k, rep.lhs[k], rep.terminal[k], rep.rhs[k], rep.ratios[k]])
    w.csv("energy.csv", ["eta", "order", "lhs", "terminal", "rhs", "C_hat"], rows)
    diag = energy.check_estimate(reports, window=slice(None))
    w.json("estimate.json", diag.to_dict())
    return 0


def run_nonlinear(scn, args, out_dir):
    g, geom, phi0, phi1 = nl.prepare(scn)
    w = Writer(out_dir, _meta(scn, g))
    jet = cp.build_jet(phi0, phi1, geom, scn.gas, g.h)
    w.json("compatibility.json", cp.check_compatibility(jet, geom).to_dict())
    try:
        res = nl.iterate(geom, scn.gas, g, phi0, phi1, m_max=scn.m_max, tol_h1=scn.tol_h1)
    except nl.NoConvergence as exc:
        trace = exc.trace
        w.csv("trace.csv", *_trace_rows(trace))
        w.json("nonlinear.json", {"converged": False, "trace": trace.to_dict(), "error": str(exc)})
        raise
    w.csv("trace.csv", *_trace_rows(res.trace))
    w.field("Phi", res.Phi, g)
    summary = {
        "converged": res.converged,
        "trace": res.trace.to_dict(),
        "sigma_hat": nl.contraction_ratio(res.trace),
        "residual": nl.quasilinear_residual(res.Phi, geom, scn.gas, g),
        "corner_gradient": nl.corner_gradient(res.Phi, geom.ratio, g.h),
        "epsilon": scn.epsilon,
    }
    w.json("nonlinear.json", summary)
    return 0


def _trace_rows(trace):
    ratios = [float("nan")] + trace.ratios
    rows = [[m, d, r, hn, s] for m, (d, r, hn, s) in
            enumerate(zip(trace.diff_h1, ratios, trace.high_norm, trace.sweeps))]
    return ["m", "diff_h1", "ratio", "high_norm", "sweeps"], rows


def run_convergence(scn, args, out_dir):
    levels = max(args.refine, 2)
    modes = (3, 2)
    rows, errors = [], []
    grids = []
    coarse = scn.grid()
    for lev in range(levels):
        # same box and the same dt/h on every level, so only the mesh changes
        g = ls.Grid(coarse.h / 2**lev, coarse.dt / 2**lev, coarse.Z, coarse.T, coarse.eta, coarse.cfl)
        h = g.h
        phi0, phi1, exact = ls.cosine_oracle(g, modes, scn.gas.c0sq)
        p = ls.LinearIBVP.background_problem(g, scn.gas.c0sq, phi0, phi1)
        sol = ls.solve(p, g)
        err = float(np.max(np.abs(sol.u - exact)))
        errors.append(err)
        grids.append(g.to_dict())
        ratio = errors[-2] / err if lev else float("nan")
        rows.append([h, err, ratio, math.log2(ratio) if lev else float("nan")])
    meta = {"config_hash": scn.config_hash, "grid": grids, "mode": scn.mode, "modes": list(modes)}
    w = Writer(out_dir, meta)
    w.csv("convergence.csv", ["h", "linf_error", "ratio", "observed_order"], rows)
    w.json("convergence.json", {"h": [r[0] for r in rows], "error": errors,
                                "ratio": [r[2] for r in rows], "order": [r[3] for r in rows]})
    return 0


MODE_RUNNERS = {
    "check-identities": run_check_identities,
    "linear": run_linear,
    "nonlinear": run_nonlinear,
    "convergence-study": run_convergence,
}


def _eta_list(text):
    try:
        vals = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad eta list '{text}'") from exc
    if not vals:
        raise argparse.ArgumentTypeError("empty eta list")
    return vals


def build_parser():
    ap = argparse.ArgumentParser(prog="corner-flow", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario file")
    run.add_argument("config", help="scenario TOML file")
    run.add_argument("--mode", choices=scn_mod.MODES, help="override the scenario's mode")
    run.add_argument("--out", default="out", help="output directory (default: ./out)")
    run.add_argument("--eta", type=_eta_list, help="comma-separated weights, e.g. 4,8,16")
    run.add_argument("--refine", type=int, default=3, help="refinement levels for convergence-study")
    run.add_argument("--seed", type=int, default=0, help="seed for randomized identity sampling")
    run.add_argument("-v", "--verbose", action="store_true")
    return ap


def run(args):
    scn = scn_mod.load(args.config)
    if args.mode:
        scn.mode = args.mode
    if args.eta:
        if any(e < 1 for e in args.eta):
            raise ConfigError("--eta: weights must be >= 1")
        scn.eta = tuple(sorted(args.eta))
    return MODE_RUNNERS[scn.mode](scn, args, args.out)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return run(args)
    except CornerFlowError as exc:
        print(f"corner-flow: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:   # noqa: BLE001 - last-resort status for unexpected failures
        print(f"corner-flow: unexpected {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
