"""Batch scenario runner: ``finslerlab <command> --config cfg.json --out dir``.

Every command writes a CSV (plot-ready data) and ``summary.json``.  Exit codes:
0 all assertions pass, 2 configuration error, 3 a mathematical assertion or a
checked hypothesis failed (the witness is in the summary).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ScenarioConfig
from .errors import FinslerError, HypothesisViolated
from .hypersurface import SIGN_CONVENTION

EXIT_OK, EXIT_CONFIG, EXIT_ASSERT = 0, 2, 3


class Run:
    """Collects assertions and outputs of one command."""

    def __init__(self, command, cfg: ScenarioConfig, out: Path):
        self.command, self.cfg, self.out = command, cfg, out
        self.assertions = []
        self.results = {}
        self.files = []

    def check(self, name, passed, margin=None, witness=None):
        self.assertions.append({"name": name, "passed": bool(passed),
                                "margin": None if margin is None else float(margin), "witness": witness})

    def csv(self, name, columns, rows):
        path = self.out / name
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        with open(path, "w", newline="\n") as fh:
            fh.write(f"# finslerlab {__version__} {self.command}; sign convention: {SIGN_CONVENTION}\n")
            fh.write(",".join(columns) + "\n")
            for row in rows:
                fh.write(",".join(format(float(v), ".17g") for v in row) + "\n")
        self.files.append(name)

    @property
    def passed(self):
        return all(a["passed"] for a in self.assertions)

    def summary(self, wall):
        worst = {a["name"]: a["margin"] for a in self.assertions if a["margin"] is not None}
        return {"command": self.command, "version": __version__, "config": self.cfg.to_dict(),
                "passed": self.passed, "assertions": self.assertions, "worst_margins": worst,
                "results": self.results, "outputs": self.files, "sign_convention": SIGN_CONVENTION,
                "wall_time": wall}


def _metric(text):
    from .metrics import metric_from_name

    try:
        return metric_from_name(text)
    except (ValueError, FinslerError) as exc:
        raise ConfigError(f"bad metric {text!r}: {exc}") from exc


def _surface(metric, cfg):
    from .hypersurface import surface_from_name

    try:
        return surface_from_name(metric, cfg.surface, n=cfg.surface_samples, outward=cfg.outward)
    except (ValueError, FinslerError) as exc:
        raise ConfigError(f"bad surface {cfg.surface!r}: {exc}") from exc


def _start(metric, cfg):
    d = metric.dim
    x0 = np.zeros(d) if cfg.x0 is None else np.asarray(cfg.x0, dtype=float)
    y0 = np.eye(d)[0] if cfg.y0 is None else np.asarray(cfg.y0, dtype=float)
    if x0.shape != (d,) or y0.shape != (d,):
        raise ConfigError(f"x0 and y0 need {d} components")
    if not metric.chart.contains(x0):
        raise ConfigError("x0 lies outside the chart")
    return x0, y0 / metric.F(x0, y0)


def _tangent_dirs(d, n=32):
    if d == 2:
        return np.ones((1, 1))
    a = np.linspace(0.0, np.pi, n, endpoint=False)
    return np.stack([np.cos(a), np.sin(a)], axis=1)


# --------------------------------------------------------------------------- commands


def cmd_curvature_report(run: Run):
    from .curvature import flag_curvature
    from .metrics import sample_chart
    from .tcurvature import measure_delta, t_curvature_batch, transverse_part

    cfg = run.cfg
    metric = _metric(cfg.metric)
    rng = np.random.default_rng(cfg.seed)
    d = metric.dim
    x = sample_chart(metric.chart, d, cfg.samples, rng)
    y = rng.normal(size=(cfg.samples, d))
    u = transverse_part(metric, x, y, rng.normal(size=(cfg.samples, d)))
    K = flag_curvature(metric, x, y, u)
    T = t_curvature_batch(metric, x, y, u)
    delta_hat, _ = measure_delta(metric, (x, y, u), transverse=False)
    kmax = float(K.max())
    k_hat = float(np.sqrt(-kmax)) if kmax < 0 else 0.0
    cols = [f"x{i}" for i in range(d)] + [f"y{i}" for i in range(d)] + [f"v{i}" for i in range(d)] + ["K", "T"]
    run.csv("curvature.csv", cols, np.column_stack([x, y, u, K, T]))
    run.results.update({"max_K": kmax, "min_K": float(K.min()), "max_abs_T": float(np.abs(T).max()),
                        "certificate": {"k": k_hat, "delta": float(delta_hat), "delta_below_k": delta_hat < k_hat}})
    slack = cfg.tolerance("slack")
    if cfg.k is not None:
        run.check("K <= -k^2", kmax <= -cfg.k**2 + slack, -cfg.k**2 - kmax)
    if cfg.delta is not None:
        run.check("|T| <= delta", delta_hat <= cfg.delta + slack, cfg.delta - delta_hat)


def cmd_geodesic(run: Run):
    from .geodesics import integrate_geodesic

    cfg = run.cfg
    metric = _metric(cfg.metric)
    x0, y0 = _start(metric, cfg)
    path = integrate_geodesic(metric, x0, y0, cfg.T, tol=cfg.tolerance("geodesic"))
    ts = np.linspace(0.0, cfg.T, cfg.n_times)
    x, v = path.position(ts), path.velocity(ts)
    speed = path.speed(ts)
    d = metric.dim
    run.csv("geodesic.csv", ["t"] + [f"x{i}" for i in range(d)] + [f"v{i}" for i in range(d)] + ["F"],
            np.column_stack([ts, x, v, speed]))
    drift = float(np.abs(speed - speed[0]).max())
    run.results.update({"end": path.end.tolist(), "speed_drift": drift})
    run.check("speed constant", drift <= 1e3 * cfg.tolerance("geodesic"), 1e3 * cfg.tolerance("geodesic") - drift)


def cmd_jacobi(run: Run):
    from .geodesics import parallel_frame
    from .jacobi import integrate_jacobi_frame

    cfg = run.cfg
    metric = _metric(cfg.metric)
    x0, y0 = _start(metric, cfg)
    d = metric.dim
    frame = parallel_frame(metric, (x0, y0, cfg.T))
    ts = np.linspace(0.0, cfg.T, cfg.n_times)
    J = integrate_jacobi_frame(frame, np.zeros(d), np.eye(d)[0], grid=ts)
    norm = J.norm()[:, 0]
    res = float(np.abs(J.residual(ts[1:-1])).max())
    run.csv("jacobi.csv", ["t", "norm_J"] + [f"phi{i}" for i in range(d)], np.column_stack([ts, norm, J.phi[:, :, 0]]))
    run.results.update({"final_norm": float(norm[-1]), "jacobi_residual": res})
    run.check("Jacobi equation residual", res <= cfg.tolerance("tol"), cfg.tolerance("tol") - res)


def _base_min_kn(surface):
    from .hypersurface import normal_curvature

    u = surface.samples
    dirs = _tangent_dirs(surface.metric.dim)
    return float(normal_curvature(surface, u, np.broadcast_to(dirs, (len(u),) + dirs.shape)).min())


def cmd_focal(run: Run):
    from .hypersurface import detect_focal

    cfg = run.cfg
    metric = _metric(cfg.metric)
    surface = _surface(metric, cfg)
    rows, first = [], []
    for i, u in enumerate(surface.samples):
        rep = detect_focal(surface, u, T_max=cfg.T)
        stride = max(1, len(rep.times) // 500)
        for t, det in zip(rep.times[::stride], rep.det[::stride]):
            rows.append((i, t, det))
        first.append(rep.focal_times[0] if rep.focal_times else np.inf)
    run.csv("focal.csv", ["sample", "t", "det"], rows)
    min_kn = _base_min_kn(surface)
    delta = 0.0 if cfg.delta is None else cfg.delta
    finite = [t for t in first if np.isfinite(t)]
    run.results.update({"min_kn": min_kn, "focal_times": [None if not np.isfinite(t) else t for t in first],
                        "first_focal": min(finite) if finite else None})
    if min_kn >= delta:
        run.check("no focal point when k_n >= delta", not finite, None,
                  None if not finite else {"t": min(finite)})


def cmd_compare(run: Run):
    from .geodesics import parallel_frame
    from .jacobi import comparison_check

    cfg = run.cfg
    metric, bar = _metric(cfg.metric), _metric(cfg.metric_bar)
    if metric.dim != bar.dim:
        raise ConfigError("metric and metric_bar must have the same dimension")
    x0, y0 = _start(metric, cfg)
    xb = np.zeros(bar.dim)
    yb = np.eye(bar.dim)[0] / bar.F(xb, np.eye(bar.dim)[0])
    if len(cfg.spectrum) != metric.dim - 1 or len(cfg.spectrum_bar) != metric.dim - 1:
        raise ConfigError(f"spectra need {metric.dim - 1} eigenvalues")
    ts = np.linspace(0.0, cfg.T, max(cfg.n_times, 301))
    frame = parallel_frame(metric, (x0, y0, cfg.T))
    frame_bar = parallel_frame(bar, (xb, yb, cfg.T))
    rep = comparison_check(frame, cfg.spectrum, frame_bar, cfg.spectrum_bar, grid=ts)
    cols = ["t"] + [f"norm_J{a}" for a in range(metric.dim - 1)] + [f"norm_Jbar{a}" for a in range(metric.dim - 1)]
    run.csv("compare.csv", cols, np.column_stack([rep.grid, rep.norm, rep.norm_bar]))
    run.results.update({"min_margin": rep.min_margin, "curvature_gap": rep.curvature_gap})
    run.check("|J| >= |Jbar|", rep.holds, rep.min_margin, rep.witness)


def cmd_theorem3(run: Run):
    from .flow import EquidistantFlow, flow_certificate, theorem3_verify

    cfg = run.cfg
    metric = _metric(cfg.metric)
    surface = _surface(metric, cfg)
    rng = np.random.default_rng(cfg.seed)
    flow = EquidistantFlow(surface, cfg.T)
    k, delta = cfg.k, cfg.delta
    if k is None or delta is None:
        k_hat, delta_hat, info = flow_certificate(flow, n=cfg.samples, rng=rng)
        k = k_hat if k is None else k
        delta = delta_hat if delta is None else delta
        run.results["certificate"] = info
    run.results.update({"k": k, "delta": delta})
    run.check("delta < k", delta < k, k - delta)
    rep = theorem3_verify(surface, k, delta, cfg.T, n_times=cfg.n_times, rng=rng, t_samples=cfg.samples,
                          slack=cfg.tolerance("slack"), tol=cfg.tolerance("tol"), flow=flow)
    rows = [(r.t, r.min_kn, r.min_ktilde, r.min_ktilde_predicted, r.theorem3_margin, r.riccati_gap,
             r.proposition3_margin, r.verdict == "locally-convex") for r in rep.reports]
    run.csv("theorem3.csv", ["t", "min_kn", "min_ktilde", "min_ktilde_predicted", "theorem3_margin",
                             "riccati_gap", "proposition3_margin", "locally_convex"], rows)
    run.results["hypotheses"] = rep.hypotheses
    gap = max(r.riccati_gap for r in rep.reports)
    run.check("all N_t locally convex", all(r.verdict == "locally-convex" for r in rep.reports),
              min(r.min_kn for r in rep.reports))
    run.check("Riccati k~ > delta", all(r.theorem3_margin > 0 for r in rep.reports),
              min(r.theorem3_margin for r in rep.reports))
    run.check("k_n >= k~ - delta - tol", all(r.proposition3_margin >= -cfg.tolerance("tol") for r in rep.reports),
              min(r.proposition3_margin for r in rep.reports))
    run.check("predicted vs measured k~", gap <= cfg.tolerance("riccati"), cfg.tolerance("riccati") - gap)


def cmd_lemma2(run: Run):
    from .riccati import lemma2_check, random_certified_f

    cfg = run.cfg
    rng = np.random.default_rng(cfg.seed)
    rows, violations, rejected = [], 0, 0
    for lam in cfg.lambdas:
        for trial in range(cfg.trials):
            f, fp = random_certified_f(lam, cfg.T, rng)
            v = lemma2_check(lam, f, cfg.T, fprime=fp)
            rejected += not v.precondition_ok
            violations += v.precondition_ok and not v.holds
            rows.append((lam, trial, v.precondition_ok, v.holds, v.max_value + lam))
    run.csv("lemma2.csv", ["lambda", "trial", "certified", "holds", "max_f_plus_lambda"], rows)
    worst = max(r[4] for r in rows)
    run.results.update({"violations": violations, "rejected": rejected, "worst_excess": worst})
    run.check("f <= -lambda on certified inputs", violations == 0, -worst)


COMMANDS = {
    "curvature-report": cmd_curvature_report,
    "geodesic": cmd_geodesic,
    "jacobi": cmd_jacobi,
    "focal": cmd_focal,
    "compare": cmd_compare,
    "theorem3": cmd_theorem3,
    "lemma2": cmd_lemma2,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="finslerlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="scenario JSON (defaults apply when omitted)")
        p.add_argument("--out", help="output directory (overrides the config)")
        p.add_argument("--seed", type=int, help="random seed (overrides the config)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    started = time.perf_counter()
    try:
        cfg = ScenarioConfig.load(args.config) if args.config else ScenarioConfig().validate()
        if args.seed is not None:
            cfg.seed = args.seed
        if args.out:
            cfg.out = args.out
        cfg.validate()
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    run = Run(args.command, cfg, out)
    code = EXIT_OK
    try:
        COMMANDS[args.command](run)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except HypothesisViolated as exc:
        run.check(f"hypothesis: {exc.which}", False, None, exc.witness)
    if not run.passed:
        code = EXIT_ASSERT
    summary = run.summary(time.perf_counter() - started)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, default=_jsonable) + "\n")
    for a in run.assertions:
        print(f"{'PASS' if a['passed'] else 'FAIL'}  {a['name']}" + ("" if a["margin"] is None else f"  margin={a['margin']:.3g}"))
    print(f"{args.command}: {'ok' if code == EXIT_OK else 'assertion failed'} (finslerlab {__version__})")
    return code


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serialisable: {type(obj)!r}")


if __name__ == "__main__":
    sys.exit(main())
