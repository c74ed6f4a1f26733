"""Command-line driver: data generation, fitting, prediction, scoring.

Every command reads its inputs from the data directory and the output
directory and writes plain-text or ``.npy`` artifacts. Exit codes: 0 on
success, 2 on validation or missing-prerequisite errors, 3 when an
optimizer fails to converge.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from contextlib import contextmanager

import numpy as np

from . import bicop, gaussfield, margins, scoring, spatial_cvine as scvm, spatial_rvine as sv, vine
from ._common import ConvergenceError, DomainError, SpatialVineError, ValidationError
from .data import DatasetBundle, RunConfig, generate_synthetic, ingest, load_config, substream, write_bundle
from .stations import distance_matrix, distances_to

log = logging.getLogger("spatialvine")

COMMANDS = ("generate", "fit-margins", "to-copula", "fit-sv", "fit-scvm", "fit-sg",
            "predict", "score", "report", "pipeline")
NU_FALLBACK = (float(np.log(10.0)), 0.0, 0.0)
INTERVAL_ALPHA = 0.05


class PrerequisiteError(ValidationError):
    """A required input artifact is missing."""


# ---------------------------------------------------------------------------
# helpers


@contextmanager
def output_lock(directory):
    """Exclusive lockfile so two commands never write one directory."""
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, ".lock")
    try:
        fd = os.open(path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ValidationError(f"{path} exists: another command is writing {directory}") from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        os.unlink(path)


def _need(path, hint):
    if not os.path.exists(path):
        raise PrerequisiteError(f"missing {path}; run '{hint}' first")
    return path


def _out(cfg: RunConfig, name: str) -> str:
    return os.path.join(cfg.out, name)


def _bundle(cfg: RunConfig) -> DatasetBundle:
    _need(cfg.path("stations"), "generate")
    _need(cfg.path("temps"), "generate")
    return ingest(cfg.path("stations"), cfg.path("temps"), cfg.path("split"))


def _write_matrix(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([x if isinstance(x, str) else repr(float(x)) if isinstance(x, (float, np.floating))
                        else x for x in r])


def _read_matrix(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array([[float(x) for x in r[1:]] for r in rows[1:]])


def _manifest(cfg: RunConfig, command: str, lines: list):
    """Record counts and artifacts of a command in the run manifest.

    Each command owns one section, replaced on rerun, so reruns leave the
    manifest byte-identical.
    """
    path = _out(cfg, "manifest.txt")
    sections: dict = {}
    if os.path.exists(path):
        cur = None
        with open(path) as fh:
            for ln in fh:
                ln = ln.rstrip("\n")
                if ln.startswith("[") and ln.endswith("]"):
                    cur = ln[1:-1]
                    sections[cur] = []
                elif cur is not None and ln:
                    sections[cur].append(ln)
    sections[command] = list(lines)
    with open(path, "w") as fh:
        for name in sorted(sections):
            fh.write(f"[{name}]\n" + "".join(f"{ln}\n" for ln in sections[name]))


def _training(bundle: DatasetBundle):
    idx = bundle.training
    if idx.size < 4:
        raise ValidationError(f"need at least 4 training stations, found {idx.size}")
    return idx, bundle.stations.subset(idx), bundle.temps[:, idx]


def _check_fit(fit, what):
    if not fit.converged and "ABNORMAL" not in fit.message.upper():
        raise ConvergenceError(f"{what} did not converge: {fit.message}")
    if not fit.converged:
        log.warning("%s: line search stopped early (%s); keeping best iterate", what, fit.message)


# ---------------------------------------------------------------------------
# commands


def cmd_generate(cfg: RunConfig):
    bundle, truth = generate_synthetic(cfg.gen_train, cfg.gen_val, cfg.gen_days, cfg.seed,
                                       trunc=cfg.gen_trunc)
    paths = write_bundle(bundle, cfg.data_dir)
    os.makedirs(cfg.out, exist_ok=True)
    st = truth.structure
    sv.save_sv(os.path.join(cfg.data_dir, "truth_sv.txt"), st, truth.layout, truth.sv_params,
               meta={"seed": cfg.seed})
    margins.save_margins(os.path.join(cfg.data_dir, "truth_margins.txt"), truth.margins)
    _manifest(cfg, "generate", [f"stations {len(bundle.stations)}", f"dates {len(bundle.dates)}",
                                f"training {bundle.training.size}", f"validation {bundle.validation.size}",
                                *(f"artifact {p}" for p in paths.values())])


def cmd_fit_margins(cfg: RunConfig):
    bundle = _bundle(cfg)
    idx, st, T = _training(bundle)
    fit = margins.fit_margins(T, st)
    _check_fit(fit.skewt_fit, "skew-t margins")
    margins.save_margins(_out(cfg, "margins.txt"), fit.params)
    _write_matrix(_out(cfg, "residuals.csv"), ["date", *st.ids],
                  ([d.isoformat(), *row] for d, row in zip(bundle.dates[margins.AR_ORDER:], fit.residuals)))
    _manifest(cfg, "fit-margins", [f"training {len(st)}", f"dates {T.shape[0]}",
                                   f"residual_rows {fit.residuals.shape[0]}",
                                   "artifact margins.txt", "artifact residuals.csv"])


def cmd_to_copula(cfg: RunConfig):
    bundle = _bundle(cfg)
    idx, st, T = _training(bundle)
    params = margins.load_margins(_need(_out(cfg, "margins.txt"), "fit-margins"))
    res = margins.compute_residuals(T, params, st)
    U = margins.to_copula_data(res, params, st)
    _write_matrix(_out(cfg, "copula.csv"), ["date", *st.ids],
                  ([d.isoformat(), *row] for d, row in zip(bundle.dates[margins.AR_ORDER:], U)))
    _manifest(cfg, "to-copula", [f"rows {U.shape[0]}", f"columns {U.shape[1]}", "artifact copula.csv"])


def _copula_data(cfg):
    header, U = _read_matrix(_need(_out(cfg, "copula.csv"), "to-copula"))
    return header[1:], U


def cmd_fit_sv(cfg: RunConfig):
    bundle = _bundle(cfg)
    idx, st, _ = _training(bundle)
    ids, U = _copula_data(cfg)
    if tuple(ids) != st.ids:
        raise ValidationError("copula.csv columns do not match the training stations")
    k = min(cfg.trunc, len(st) - 1)
    fitted = vine.select_vine(U, k, cfg.candidates(), cfg.alpha)
    vine.save_vine(_out(cfg, "rvine.txt"), fitted.structure, fitted.specs)
    pred = sv.build_predictors(st)
    layout = sv.layout_from_specs(fitted.specs)
    start = sv.start_values(U, fitted.structure, fitted.specs, pred, nu_fallback=NU_FALLBACK)
    params, fit = sv.fit_sv(U, fitted.structure, layout, pred, start)
    sv.save_sv(_out(cfg, "sv_model.txt"), fitted.structure, sv.prepare_layout(layout), params, pred,
               meta={"loglik": repr(float(fit.loglik)), "start_loglik": repr(float(fit.start_loglik)),
                     "converged": int(fit.converged)})
    _check_fit(fit, "spatial R-vine")
    _manifest(cfg, "fit-sv", [f"truncation {k}", f"edges {len(fitted.structure.edges)}",
                              f"parameters {params.size}", "artifact rvine.txt", "artifact sv_model.txt"])


def cmd_fit_scvm(cfg: RunConfig):
    bundle = _bundle(cfg)
    idx, st, _ = _training(bundle)
    ids, U = _copula_data(cfg)
    D, E = scvm.station_geometry(st)
    triples, weights = scvm.build_components(D)
    comps = scvm.fit_cvm(U, triples, cfg.candidates(), cfg.alpha)
    geom = scvm.build_geometry(cfg.scvm_kind, triples, D, E)
    layout = scvm.layout_from_components(comps)
    start = scvm.start_values(comps, geom, cfg.nu_distance_scale, nu_fallback=NU_FALLBACK)
    params, fit = scvm.fit_scvm(U, geom, layout, weights, start, cfg.nu_distance_scale)
    scvm.save_scvm(_out(cfg, "scvm_model.txt"), triples, layout, params, cfg.nu_distance_scale)
    _check_fit(fit, "spatial composite vine")
    _manifest(cfg, "fit-scvm", [f"components {len(triples)}", f"parameters {params.size}",
                                "artifact scvm_model.txt"])


def cmd_fit_sg(cfg: RunConfig):
    bundle = _bundle(cfg)
    idx, st, _ = _training(bundle)
    _, R = _read_matrix(_need(_out(cfg, "residuals.csv"), "fit-margins"))
    p, fit = gaussfield.fit_sg(R, distance_matrix(st))
    gaussfield.save_sg(_out(cfg, "sg_model.txt"), p, fit)
    _check_fit(fit, "Gaussian variogram")
    _manifest(cfg, "fit-sg", ["parameters 3", "artifact sg_model.txt"])


def _predict_residual_copula(cfg, model, st, target, U, rng):
    """(N - 3, nsim) copula draws at ``target`` for the vine models."""
    if model == "sv":
        structure, layout, params, info = sv.load_sv(_need(_out(cfg, "sv_model.txt"), "fit-sv"))
        path = sv.extend_for_prediction(target, st, structure, layout, params,
                                        radius=info["earth_radius"], elev_guard=info["elev_guard"])
        return sv.predict_samples(path, U, cfg.nsim, rng)
    triples, layout, params, meta = scvm.load_scvm(_need(_out(cfg, "scvm_model.txt"), "fit-scvm"))
    pv = scvm.prediction_vine(target, st, params, scale=meta["nu_distance_scale"])
    return pv.draws(U, cfg.nsim, rng)


def cmd_predict(cfg: RunConfig):
    bundle = _bundle(cfg)
    idx, st, _ = _training(bundle)
    model = cfg.model
    mp = margins.load_margins(_need(_out(cfg, "margins.txt"), "fit-margins"))
    val = bundle.validation
    if val.size == 0:
        raise ValidationError("no validation stations to predict")
    written = []
    if model == "sg":
        p = gaussfield.load_sg(_need(_out(cfg, "sg_model.txt"), "fit-sg"))
        _, R = _read_matrix(_need(_out(cfg, "residuals.csv"), "fit-margins"))
        D = distance_matrix(st)
    else:
        _, U = _copula_data(cfg)
    for v in val:
        sid = bundle.stations.ids[v]
        one = bundle.stations.subset([v])
        rng = substream(cfg.seed, f"predict/{model}/{sid}")
        if model == "sg":
            dt_ = distances_to(st, one.lon[0], one.lat[0])
            _, _, eps = gaussfield.predict_conditional(dt_, D, p, R, cfg.nsim, rng)
            T = margins.reconstruct(eps, mp, one)
        else:
            target = (one.lon[0], one.lat[0], one.elev[0])
            draws = _predict_residual_copula(cfg, model, st, target, U, rng)
            T = margins.back_transform(draws, mp, one)
        name = f"pred_{model}_{sid}.npy"
        np.save(_out(cfg, name), T)
        written.append(f"artifact {name} shape {T.shape[0]}x{T.shape[1]}")
    _manifest(cfg, f"predict {model}", [f"validation {val.size}", f"nsim {cfg.nsim}", *written])


def _available_models(cfg, bundle):
    out = []
    for m in ("sv", "scvm", "sg"):
        if all(os.path.exists(_out(cfg, f"pred_{m}_{bundle.stations.ids[v]}.npy")) for v in bundle.validation):
            out.append(m)
    return out


def cmd_score(cfg: RunConfig):
    bundle = _bundle(cfg)
    models = _available_models(cfg, bundle)
    if not models:
        raise PrerequisiteError("no prediction files found; run 'predict' first")
    rows = []
    a = margins.AR_ORDER
    for v in bundle.validation:
        sid = bundle.stations.ids[v]
        obs = bundle.temps[a:, v]
        for m in models:
            X = np.load(_out(cfg, f"pred_{m}_{sid}.npy"))[a:]
            crps = scoring.crps_empirical(X, obs)
            lo, hi = scoring.central_interval(X, INTERVAL_ALPHA)
            isc = scoring.interval_score(lo, hi, obs, INTERVAL_ALPHA)
            err = X.mean(axis=1) - obs
            for t in range(obs.size):
                rows.append([sid, m, t + a + 1, crps[t], isc[t], err[t]])
    _write_matrix(_out(cfg, "scores.csv"), ["station", "model", "t", "crps", "interval_score", "point_error"], rows)
    _manifest(cfg, "score", [f"models {','.join(models)}", f"rows {len(rows)}", "artifact scores.csv"])


def cmd_report(cfg: RunConfig):
    path = _need(_out(cfg, "scores.csv"), "score")
    with open(path, newline="") as fh:
        rd = list(csv.DictReader(fh))
    if not rd:
        raise ValidationError("scores.csv is empty")
    models = sorted({r["model"] for r in rd}, key=["sv", "scvm", "sg"].index)
    stations = sorted({r["station"] for r in rd})
    series = {(r["station"], r["model"]): [] for r in rd}
    for r in rd:
        series[(r["station"], r["model"])].append((int(r["t"]), float(r["crps"]),
                                                   float(r["interval_score"]), float(r["point_error"])))
    base = "sg" if "sg" in models else models[-1]

    def cols(key):
        a = np.array(sorted(series[key]))
        return a[:, 0], a[:, 1], a[:, 2], a[:, 3]

    summary, diffs = [], []
    pooled = {m: [] for m in models}
    for s in stations + ["ALL"]:
        for m in models:
            if s == "ALL":
                c = np.concatenate([cols((x, m))[1] for x in stations])
                isc = np.concatenate([cols((x, m))[2] for x in stations])
                err = np.concatenate([cols((x, m))[3] for x in stations])
                cb = np.concatenate([cols((x, base))[1] for x in stations])
            else:
                t, c, isc, err = cols((s, m))
                cb = cols((s, base))[1]
                if m != base:
                    for tt, d in zip(t, scoring.log_score_difference(np.maximum(c, 1e-300), np.maximum(cb, 1e-300))):
                        diffs.append([s, m, base, int(tt), d])
            share = scoring.outperformance_share(c, cb)
            summary.append([s, m, float(c.mean()), float(isc.mean()), float(np.mean(err ** 2)), share])
    _write_matrix(_out(cfg, "summary.csv"),
                  ["station", "model", "mean_crps", "mean_interval_score", "mse", f"outperformance_vs_{base}"],
                  summary)
    _write_matrix(_out(cfg, "logscore_diff.csv"), ["station", "model", "baseline", "t", "log_crps_diff"], diffs)
    _manifest(cfg, "report", [f"models {','.join(models)}", f"stations {len(stations)}",
                              "artifact summary.csv", "artifact logscore_diff.csv"])


def cmd_pipeline(cfg: RunConfig):
    models = cfg.model_list()
    cmd_generate(cfg)
    cmd_fit_margins(cfg)
    cmd_to_copula(cfg)
    fitters = {"sv": cmd_fit_sv, "scvm": cmd_fit_scvm, "sg": cmd_fit_sg}
    for m in models:
        fitters[m](cfg)
    for m in models:
        cmd_predict(_with(cfg, model=m))
    cmd_score(cfg)
    cmd_report(cfg)


def _with(cfg: RunConfig, **kw) -> RunConfig:
    d = dict(cfg.__dict__)
    d.update(kw)
    return RunConfig(**d)


HANDLERS = {
    "generate": cmd_generate, "fit-margins": cmd_fit_margins, "to-copula": cmd_to_copula,
    "fit-sv": cmd_fit_sv, "fit-scvm": cmd_fit_scvm, "fit-sg": cmd_fit_sg, "predict": cmd_predict,
    "score": cmd_score, "report": cmd_report, "pipeline": cmd_pipeline,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="spatialvine", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="key = value configuration file")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--data", dest="data_dir", help="data directory (stations.csv, temps.csv, split.csv)")
    ap.add_argument("--model", choices=("sv", "scvm", "sg"))
    ap.add_argument("--models", help="comma-separated models for 'pipeline'")
    ap.add_argument("--trunc", type=int)
    ap.add_argument("--nsim", type=int)
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, overrides={k: getattr(args, k) for k in
                                                  ("seed", "out", "data_dir", "model", "models", "trunc", "nsim")})
        with output_lock(cfg.out):
            HANDLERS[args.command](cfg)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (SpatialVineError, DomainError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
