"""Command-line interface.

Exit codes: 0 success, 2 input error, 3 numerical failure. Output files are
written only after every computation has succeeded, each through a
temporary file and an atomic rename.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from . import io as sio
from .config import AnalysisConfig
from .extensions import partial_panel, partial_roc_add, partial_roc_drop
from .inference import (FitError, band_binomial, band_monte_carlo, berman_tests, cdf_tests, envelope,
                        resolve_threads, wilcoxon_auc)
from .model_roc import roc_model_grid, roc_model_pp, roc_theoretical
from .models import fit_logistic, fit_poisson_loglinear, model_to_dict, simulate_poisson
from .rho import estimate_rho_isotonic, estimate_rho_kernel, roc_from_rho
from .roc import (RocCurve, curve_to_csv, curve_to_json, roc_casecontrol, roc_covariate_grid,
                  roc_covariate_pp, summarize)
from .smoothing import KernelSpec, smooth_band, smooth_roc
from .spatial import PresenceGrid, Raster, Window, spatial_cdf
from .svg import roc_svg

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3


class Outputs:
    """Files to be written once the run has succeeded."""

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)
        self.files: Dict[Path, str] = {}

    def add(self, name: str, text: str):
        self.files[self.out_dir / name] = text

    def add_json(self, name: str, obj):
        self.add(name, json.dumps(obj, indent=2, sort_keys=True) + "\n")

    def add_curve(self, stem: str, curve: RocCurve, band=None, title=""):
        self.add(f"{stem}.json", curve_to_json(curve) + "\n")
        self.add(f"{stem}.csv", curve_to_csv(curve))
        self.add(f"{stem}.svg", roc_svg([curve], band, title=title))

    def commit(self):
        for path, text in self.files.items():
            sio.atomic_write(path, text)
        return sorted(str(p) for p in self.files)


# --------------------------------------------------------------------------
# loading


def _load_window(args, reference: Optional[Raster] = None) -> Window:
    if getattr(args, "window", None):
        return sio.read_window_json(args.window)
    if reference is None:
        raise sio.InputError("a --window file or a raster is required")
    return reference.bounding_window()


def _load_points(args, W: Window):
    return sio.read_points_csv(args.points, W, weight_column=getattr(args, "weights_column", None) or "weight")


def _presence_grid(path) -> PresenceGrid:
    r = sio.read_ascii_grid(path)
    v = r.values
    status = np.where(np.isfinite(v), (v > 0).astype(int), -1)
    return PresenceGrid(r.grid, status)


def _require(args, *names):
    missing = [n for n in names if not getattr(args, n, None)]
    if missing:
        raise sio.InputError("missing required option(s): " + ", ".join("--" + m.replace("_", "-")
                                                                       for m in missing))


def _covariates(paths) -> Dict[str, Raster]:
    covs = {}
    for p in paths:
        name = Path(p).stem
        if name in covs:
            raise sio.InputError(f"duplicate covariate name {name!r}")
        covs[name] = sio.read_ascii_grid(p)
    return covs


def _config(args) -> AnalysisConfig:
    rasters = [r for r in (getattr(args, "raster", None),) if r]
    rasters += list(getattr(args, "covariates", None) or [])
    return AnalysisConfig(points=getattr(args, "points", None), grid=getattr(args, "grid", None),
                          rasters=tuple(rasters), window=getattr(args, "window", None),
                          direction=getattr(args, "direction", "high"),
                          baseline=getattr(args, "baseline", None),
                          nsim=getattr(args, "nsim", 0) or 0, seed=getattr(args, "seed", None),
                          level=getattr(args, "level", 0.95), output_dir=args.out,
                          threads=resolve_threads(getattr(args, "threads", 1)))


# --------------------------------------------------------------------------
# commands


def cmd_roc(args, out: Outputs):
    cfg = _config(args)
    kind = args.kind
    if kind == "covariate":
        _require(args, "raster")
        Z = sio.read_ascii_grid(args.raster)
        base = sio.read_ascii_grid(args.baseline) if args.baseline else None
        if args.grid:
            pg = _presence_grid(args.grid)
            curve = roc_covariate_grid(pg, Z, cfg.direction, args.fp_convention or "all", base)
        else:
            _require(args, "points")
            W = _load_window(args, Z)
            curve = roc_covariate_pp(_load_points(args, W), Z, cfg.direction, base)
    elif kind == "model":
        _require(args, "covariates")
        covs = _covariates(args.covariates)
        first = next(iter(covs.values()))
        if args.fit == "poisson":
            _require(args, "points")
            W = _load_window(args, first)
            pp = _load_points(args, W)
            model = fit_poisson_loglinear(pp, covs, tol=cfg.tol, max_iter=cfg.max_iter)
            curve = roc_model_pp(model, pp, loo=args.loo)
        else:
            _require(args, "grid")
            pg = _presence_grid(args.grid)
            model = fit_logistic(pg, covs, tol=cfg.tol, max_iter=cfg.max_iter)
            curve = roc_model_grid(model, pg, loo=args.loo, fp_convention=args.fp_convention or "all")
        md = model_to_dict(model, {Path(p).stem: str(Path(p).resolve()) for p in args.covariates})
        md["data"] = {"points": str(Path(args.points).resolve()) if args.points else None,
                      "grid": str(Path(args.grid).resolve()) if args.grid else None,
                      "window": str(Path(args.window).resolve()) if args.window else None}
        out.add_json(f"{args.name}_model.json", md)
    elif kind == "casecontrol":
        _require(args, "points")
        if args.raster:
            Z = sio.read_ascii_grid(args.raster)
            W = _load_window(args, Z)
            pp = _load_points(args, W)
            curve = roc_casecontrol(pp, Z, cfg.direction)
        else:
            raise sio.InputError("casecontrol needs --raster")
        if args.smooth:
            x = Z.lookup(pp.x, pp.y)
            y = x[pp.marks == 0]
            x = x[pp.marks == 1]
            spec = KernelSpec(h1=args.h1 or "auto", h2=args.h2 or "auto")
            curve = smooth_roc(x[np.isfinite(x)], y[np.isfinite(y)], spec, direction=cfg.direction)
            band = smooth_band(x[np.isfinite(x)], y[np.isfinite(y)], spec, cfg.level,
                               direction=cfg.direction)
            out.add_json(f"{args.name}_band.json", band.as_dict())
    elif kind == "theoretical":
        _require(args, "score", "intensity")
        S = sio.read_ascii_grid(args.score)
        lam = sio.read_ascii_grid(args.intensity)
        W = _load_window(args, lam)
        base = sio.read_ascii_grid(args.baseline) if args.baseline else None
        curve = roc_theoretical(S, lam, W, base, direction=cfg.direction)
    else:  # pragma: no cover - argparse restricts choices
        raise sio.InputError(kind)
    out.add_curve(args.name, curve, title=f"{kind} ROC")
    s = summarize(curve)
    return f"AUC={s.auc:.6f} youden1={s.youden_one_sided:.6f} youden2={s.youden_two_sided:.6f}"


def cmd_test(args, out: Outputs):
    _require(args, "points", "raster")
    Z = sio.read_ascii_grid(args.raster)
    W = _load_window(args, Z)
    pp = _load_points(args, W)
    if args.which == "wilcoxon":
        if pp.marks is None:
            raise sio.InputError("wilcoxon needs a mark column (1 = case, 0 = control)")
        z = Z.lookup(pp.x, pp.y)
        sign = 1.0 if args.direction == "high" else -1.0
        ok = np.isfinite(z)
        res = wilcoxon_auc(sign * z[ok & (pp.marks == 1)], sign * z[ok & (pp.marks == 0)])
        results = {"wilcoxon": res["test"]}
        extra = {"auc": res["auc"]}
    elif args.which == "berman":
        results = berman_tests(pp, Z, W, conditional=args.conditional)
        extra = {}
    else:
        all_ = cdf_tests(pp, Z, W)
        key = {"ks": ["ks", "ks_one_sided"], "cvm": ["cvm"], "ad": ["ad"]}[args.which]
        results = {k: all_[k] for k in key}
        extra = {}
    report = {k: v.as_dict() for k, v in results.items()}
    report.update(extra)
    out.add_json(f"{args.name}.json", report)
    return "\n".join(v.line() for v in results.values())


def cmd_rho(args, out: Outputs):
    _require(args, "points", "raster")
    Z = sio.read_ascii_grid(args.raster)
    W = _load_window(args, Z)
    pp = _load_points(args, W)
    if args.method == "kernel":
        est = estimate_rho_kernel(pp, Z, W, args.bandwidth or "auto")
    else:
        est = estimate_rho_isotonic(pp, Z, W, args.monotone)
    curve = roc_from_rho(est, spatial_cdf(Z, W))
    out.add_json(f"{args.name}.json", est.as_dict())
    out.add_curve(f"{args.name}_roc", curve, title=f"ROC from rho ({args.method})")
    return f"lambda_total={est.lambda_total:.6g} kappa={est.kappa:.6g}"


def _model_from_json(path):
    d = json.loads(Path(path).read_text())
    covs = {k: sio.read_ascii_grid(v) for k, v in d["covariates"].items()}
    return d, covs


def cmd_partial(args, out: Outputs):
    _require(args, "model")
    d, covs = _model_from_json(args.model)
    data = d.get("data", {})
    pts = args.points or data.get("points")
    grid = args.grid or data.get("grid")
    win = args.window or data.get("window")
    ref = next(iter(covs.values()), None)
    if d["type"] == "poisson":
        if not pts:
            raise sio.InputError("the model's point data are unknown; pass --points")
        W = sio.read_window_json(win) if win else _load_window(args, ref or sio.read_ascii_grid(args.candidate))
        pp = sio.read_points_csv(pts, W)
        grid_ref = (ref or sio.read_ascii_grid(args.candidate)).grid
        model = fit_poisson_loglinear(pp, covs, grid=grid_ref)
        dataset = pp
    else:
        if not grid:
            raise sio.InputError("the model's presence grid is unknown; pass --grid")
        dataset = _presence_grid(grid)
        model = fit_logistic(dataset, covs, offset=d.get("offset") if d.get("offset") is not None else False)
    curves = []
    if args.mode == "add":
        _require(args, "candidate")
        for c in args.candidate:
            curves.append(partial_roc_add(model, sio.read_ascii_grid(c), dataset, args.direction,
                                          name=Path(c).stem))
    else:
        names = args.drop or list(model.names)
        for nm in names:
            curves.append(partial_roc_drop(model, nm, dataset, args.direction))
    panel = partial_panel(curves)
    for c, row in zip(curves, panel):
        stem = f"{args.name}_{row['covariate']}"
        row["curve_ref"] = f"{stem}.json"
        out.add_curve(stem, c, title=f"partial ROC ({args.mode} {row['covariate']})")
    out.add_json(f"{args.name}.json", panel)
    return "\n".join(f"{r['covariate']}: partial AUC={r['partial_auc']:.6f}" for r in panel)


def cmd_band(args, out: Outputs):
    cfg = _config(args)
    _require(args, "points")
    if args.method == "envelope":
        _require(args, "intensity")
        lam = sio.read_ascii_grid(args.intensity)
        W = _load_window(args, lam)
        Z = sio.read_ascii_grid(args.raster) if args.raster else None
        pp = _load_points(args, W)
        band = envelope(lam, Z, W, args.nsim, args.rank, cfg.seed, cfg.direction, threads=cfg.threads)
        curve = roc_covariate_pp(pp, Z if Z is not None else lam, cfg.direction)
    elif args.method == "binomial":
        _require(args, "raster")
        Z = sio.read_ascii_grid(args.raster)
        W = _load_window(args, Z)
        pp = _load_points(args, W)
        curve = roc_covariate_pp(pp, Z, cfg.direction)
        band = band_binomial(curve, curve.meta["n_points"], cfg.level)
    else:
        _require(args, "covariates")
        covs = _covariates(args.covariates)
        first = next(iter(covs.values()))
        W = _load_window(args, first)
        pp = _load_points(args, W)
        model = fit_poisson_loglinear(pp, covs)
        Z = sio.read_ascii_grid(args.raster) if args.raster else None
        band = band_monte_carlo(model, pp, args.nsim, cfg.level, cfg.seed, covariate=Z,
                                direction=cfg.direction, threads=cfg.threads)
        curve = roc_covariate_pp(pp, Z, cfg.direction) if Z is not None else roc_model_pp(model, pp)
    out.add_json(f"{args.name}.json", band.as_dict())
    out.add_curve(f"{args.name}_curve", curve, band, title=f"{args.method} band")
    return f"mean width={float(np.mean(band.width())):.6f}"


def cmd_simulate(args, out: Outputs):
    _require(args, "intensity")
    lam = sio.read_ascii_grid(args.intensity)
    W = _load_window(args, lam)
    pp = simulate_poisson(lam, W, args.seed)
    out.add(f"{args.name}.csv", sio.format_points_csv(pp))
    return f"n={pp.n}"


# --------------------------------------------------------------------------
# parser


def _common(p, points=True, raster=True):
    if points:
        p.add_argument("--points", help="CSV with header x,y[,mark][,weight]")
    if raster:
        p.add_argument("--raster", help="covariate raster (ESRI ASCII grid)")
    p.add_argument("--window", help="window JSON {xmin,xmax,ymin,ymax[,mask_path]}")
    p.add_argument("--direction", choices=("high", "low"), default="high")
    p.add_argument("--weights-column", dest="weights_column", default=None)
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--name", default=None, help="output file stem")
    p.add_argument("--threads", type=int, default=1,
                   help="worker threads (overridden by SPROC_THREADS)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sproc", description="Spatial ROC analysis")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("roc", help="compute an ROC curve")
    p.add_argument("kind", choices=("covariate", "model", "casecontrol", "theoretical"))
    _common(p)
    p.add_argument("--grid", help="presence grid (1 present, 0 absent, NODATA unknown)")
    p.add_argument("--baseline", help="baseline raster")
    p.add_argument("--fp-convention", dest="fp_convention", choices=("absence", "all", "area"))
    p.add_argument("--fit", choices=("poisson", "logistic"), default="poisson")
    p.add_argument("--covariates", nargs="+")
    p.add_argument("--loo", action="store_true", help="use leave-one-out fitted values")
    p.add_argument("--score", help="discriminant raster for theoretical curves")
    p.add_argument("--intensity", help="true intensity raster for theoretical curves")
    p.add_argument("--smooth", action="store_true", help="kernel-smoothed case-control curve")
    p.add_argument("--h1", type=float)
    p.add_argument("--h2", type=float)
    p.add_argument("--level", type=float, default=0.95)
    p.set_defaults(func=cmd_roc, default_name="roc")

    p = sub.add_parser("test", help="covariate tests")
    p.add_argument("which", choices=("berman", "ks", "cvm", "ad", "wilcoxon"))
    p.add_argument("--conditional", action="store_true",
                   help="Berman Z1 with the variance of S given n")
    _common(p)
    p.set_defaults(func=cmd_test, default_name="test")

    p = sub.add_parser("rho", help="estimate the resource selection function")
    _common(p)
    p.add_argument("--method", choices=("kernel", "isotonic"), default="kernel")
    p.add_argument("--bandwidth", type=float)
    p.add_argument("--monotone", choices=("increasing", "decreasing"), default="increasing")
    p.set_defaults(func=cmd_rho, default_name="rho")

    p = sub.add_parser("partial", help="partial ROC for adding or dropping covariates")
    p.add_argument("mode", choices=("add", "drop"))
    _common(p, raster=False)
    p.add_argument("--model", help="model JSON written by 'roc model'")
    p.add_argument("--grid")
    p.add_argument("--candidate", nargs="+")
    p.add_argument("--drop", nargs="+")
    p.set_defaults(func=cmd_partial, default_name="partial")

    p = sub.add_parser("band", help="confidence bands and envelopes")
    _common(p)
    p.add_argument("--method", choices=("binomial", "montecarlo", "envelope"), default="binomial")
    p.add_argument("--covariates", nargs="+", help="model covariates (montecarlo)")
    p.add_argument("--intensity", help="intensity raster (envelope)")
    p.add_argument("--nsim", type=int, default=99)
    p.add_argument("--rank", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--level", type=float, default=0.95)
    p.set_defaults(func=cmd_band, default_name="band")

    p = sub.add_parser("simulate", help="simulate a Poisson pattern from an intensity raster")
    _common(p, points=False, raster=False)
    p.add_argument("--intensity")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_simulate, default_name="points")
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.name is None:
        args.name = args.default_name
    out = Outputs(Path(args.out))
    try:
        message = args.func(args, out)
        out.commit()
    except (FitError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"sproc: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (sio.InputError, ValueError, KeyError, TypeError, FileNotFoundError, OSError) as exc:
        print(f"sproc: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    print(message)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
