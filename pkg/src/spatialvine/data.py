"""Dataset bundles: CSV ingestion, run configuration and synthetic data."""

from __future__ import annotations

import csv
import datetime as dt
import os
import zlib
from dataclasses import dataclass, field, fields

import numpy as np

from . import bicop, margins, spatial_rvine as sv, vine
from ._common import DomainError, ValidationError
from .stations import Stations

ENV_PREFIX = "SPATIALVINE_"


# ---------------------------------------------------------------------------
# bundles


@dataclass
class DatasetBundle:
    """Stations, a (dates x stations) temperature matrix and split labels."""

    stations: Stations
    dates: list
    temps: np.ndarray
    split: dict = field(default_factory=dict)

    def __post_init__(self):
        self.temps = np.asarray(self.temps, dtype=float)
        if self.temps.shape != (len(self.dates), len(self.stations)):
            raise ValidationError(f"temperature matrix {self.temps.shape} does not match "
                                  f"{len(self.dates)} dates x {len(self.stations)} stations")
        if not self.split:
            self.split = {i: "training" for i in self.stations.ids}
        bad = set(self.split.values()) - {"training", "validation"}
        if bad:
            raise ValidationError(f"unknown split labels {sorted(bad)}")

    def indices(self, label: str) -> np.ndarray:
        return np.array([k for k, i in enumerate(self.stations.ids) if self.split.get(i) == label], dtype=int)

    @property
    def training(self) -> np.ndarray:
        return self.indices("training")

    @property
    def validation(self) -> np.ndarray:
        return self.indices("validation")


def _float(text, where):
    try:
        v = float(text)
    except ValueError:
        raise ValidationError(f"{where}: not a number: {text!r}") from None
    if not np.isfinite(v):
        raise ValidationError(f"{where}: missing or non-finite value {text!r}")
    return v


def read_stations(path) -> Stations:
    """``id,name,lon,lat,elev`` table."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [h.strip() for h in rows[0]] != ["id", "name", "lon", "lat", "elev"]:
        raise ValidationError(f"{path}: header must be id,name,lon,lat,elev")
    ids, names, vals = [], [], []
    for n, r in enumerate(rows[1:], start=2):
        if len(r) != 5:
            raise ValidationError(f"{path} row {n}: expected 5 fields, got {len(r)}")
        ids.append(r[0].strip())
        names.append(r[1].strip())
        vals.append([_float(r[k], f"{path} row {n} column {c}") for k, c in ((2, "lon"), (3, "lat"), (4, "elev"))])
    if len(set(ids)) != len(ids):
        dup = sorted({i for i in ids if ids.count(i) > 1})
        raise ValidationError(f"{path}: duplicate station ids {dup}")
    v = np.array(vals, dtype=float).reshape(-1, 3)
    try:
        return Stations(tuple(ids), v[:, 0], v[:, 1], v[:, 2], tuple(names))
    except DomainError as exc:
        raise ValidationError(f"{path}: {exc}") from None


def read_temps(path, stations: Stations):
    """``date,<id>,...`` table; returns (dates, matrix in station order)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][0].strip() != "date":
        raise ValidationError(f"{path}: first header field must be 'date'")
    cols = [c.strip() for c in rows[0][1:]]
    known = set(stations.ids)
    for c in cols:
        if c not in known:
            raise ValidationError(f"{path}: column {c!r} is not a known station id")
    if len(set(cols)) != len(cols):
        raise ValidationError(f"{path}: duplicate temperature columns")
    missing = [i for i in stations.ids if i not in cols]
    if missing:
        raise ValidationError(f"{path}: no temperature column for stations {missing}")
    dates, data = [], []
    for n, r in enumerate(rows[1:], start=2):
        if len(r) != len(cols) + 1:
            raise ValidationError(f"{path} row {n}: expected {len(cols) + 1} fields, got {len(r)}")
        try:
            d = dt.date.fromisoformat(r[0].strip())
        except ValueError:
            raise ValidationError(f"{path} row {n}: bad ISO date {r[0]!r}") from None
        if dates and d != dates[-1] + dt.timedelta(days=1):
            raise ValidationError(f"{path} row {n}: dates not contiguous ({dates[-1]} -> {d})")
        dates.append(d)
        data.append([_float(x, f"{path} row {n} column {c}") for x, c in zip(r[1:], cols)])
    if not dates:
        raise ValidationError(f"{path}: no data rows")
    M = np.array(data, dtype=float)
    order = [cols.index(i) for i in stations.ids]
    return dates, M[:, order]


def read_split(path, stations: Stations) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [h.strip() for h in rows[0]] != ["id", "split"]:
        raise ValidationError(f"{path}: header must be id,split")
    out = {}
    for n, r in enumerate(rows[1:], start=2):
        if len(r) != 2 or r[0].strip() not in stations.ids:
            raise ValidationError(f"{path} row {n}: unknown station or malformed row")
        out[r[0].strip()] = r[1].strip()
    return out


def ingest(stations_csv, temps_csv, split_csv=None) -> DatasetBundle:
    """Read and validate a bundle; missing values are rejected."""
    st = read_stations(stations_csv)
    dates, M = read_temps(temps_csv, st)
    split = read_split(split_csv, st) if split_csv and os.path.exists(split_csv) else {}
    return DatasetBundle(st, dates, M, split)


def _num(x) -> str:
    return repr(float(x))


def write_bundle(bundle: DatasetBundle, directory) -> dict:
    """Write stations.csv, temps.csv and split.csv; returns the paths."""
    os.makedirs(directory, exist_ok=True)
    st = bundle.stations
    paths = {k: os.path.join(directory, f"{k}.csv") for k in ("stations", "temps", "split")}
    with open(paths["stations"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "name", "lon", "lat", "elev"])
        for k in range(len(st)):
            w.writerow([st.ids[k], st.names[k], _num(st.lon[k]), _num(st.lat[k]), _num(st.elev[k])])
    with open(paths["temps"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", *st.ids])
        for d, row in zip(bundle.dates, bundle.temps):
            w.writerow([d.isoformat(), *(_num(x) for x in row)])
    with open(paths["split"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "split"])
        for i in st.ids:
            w.writerow([i, bundle.split[i]])
    return paths


# ---------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    """Flat run configuration; see ``CONFIG_KEYS`` in the README."""

    data_dir: str = "data"
    stations: str = ""
    temps: str = ""
    split: str = ""
    out: str = "out"
    model: str = "sv"
    models: str = "sv,sg"
    trunc: int = 10
    families: str = "Gaussian,StudentT,Clayton,Clayton180,Gumbel,Gumbel180,Frank"
    alpha: float = 0.05
    nsim: int = 1000
    seed: int = 0
    nu_distance_scale: float = 100.0
    scvm_kind: str = "select"
    gen_train: int = 12
    gen_val: int = 4
    gen_days: int = 730
    gen_trunc: int = 3

    def path(self, name: str) -> str:
        explicit = getattr(self, name)
        return explicit or os.path.join(self.data_dir, f"{name}.csv")

    def candidates(self):
        return [bicop.parse_family(f.strip()) for f in self.families.split(",") if f.strip()]

    def model_list(self):
        out = [m.strip() for m in self.models.split(",") if m.strip()]
        for m in out:
            if m not in ("sv", "scvm", "sg"):
                raise ValidationError(f"unknown model {m!r}")
        return out


CONFIG_KEYS = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, value: str):
    default = getattr(RunConfig, key)
    try:
        if isinstance(default, bool):
            return value.strip().lower() in ("1", "true", "yes")
        if isinstance(default, int):
            return int(value)
        if isinstance(default, float):
            return float(value)
    except ValueError:
        raise ValidationError(f"config key {key!r}: cannot parse {value!r}") from None
    return value.strip()


def load_config(path=None, env=None, overrides=None) -> RunConfig:
    """Defaults, then the key=value file, then environment, then overrides.

    Environment variables use the ``SPATIALVINE_`` prefix with the key in
    upper case (``SPATIALVINE_TRUNC=3``). Unknown keys are rejected.
    """
    values: dict = {}
    if path:
        if not os.path.exists(path):
            raise ValidationError(f"config file {path} not found")
        with open(path) as fh:
            for n, ln in enumerate(fh, start=1):
                ln = ln.split("#", 1)[0].strip()
                if not ln:
                    continue
                if "=" not in ln:
                    raise ValidationError(f"{path} line {n}: expected key = value")
                k, v = (x.strip() for x in ln.split("=", 1))
                if k not in CONFIG_KEYS:
                    raise ValidationError(f"{path} line {n}: unknown key {k!r}")
                values[k] = _coerce(k, v)
    env = os.environ if env is None else env
    for name, v in env.items():
        if name.startswith(ENV_PREFIX):
            k = name[len(ENV_PREFIX):].lower()
            if k not in CONFIG_KEYS:
                raise ValidationError(f"environment variable {name}: unknown key {k!r}")
            values[k] = _coerce(k, v)
    for k, v in (overrides or {}).items():
        if v is None:
            continue
        if k not in CONFIG_KEYS:
            raise ValidationError(f"unknown key {k!r}")
        values[k] = v
    cfg = RunConfig(**values)
    if cfg.trunc < 1 or cfg.nsim < 1 or not 0 < cfg.alpha < 1 or cfg.nu_distance_scale <= 0:
        raise ValidationError("trunc and nsim must be positive, alpha in (0, 1), distance scale > 0")
    if cfg.model not in ("sv", "scvm", "sg"):
        raise ValidationError(f"unknown model {cfg.model!r}")
    return cfg


def substream(seed: int, name: str) -> np.random.Generator:
    """Named, reproducible random stream derived from one seed."""
    return np.random.default_rng([int(seed), zlib.crc32(name.encode())])


# ---------------------------------------------------------------------------
# synthetic data


DEFAULT_TRUTH_SV = sv.SVParams([2.4, -0.33, 1.5, -0.3, 0.05, -0.05, 0.8, -0.15, 0.02, -0.02],
                               [np.log(4.0), 0.0, 0.0])


# skew-t (omega, alpha, nu) of the generator's residuals
TRUTH_SKEWT = (0.6, -3.0, 5.0)


@dataclass
class TruthRecord:
    """Ground truth behind a synthetic bundle."""

    sv_params: sv.SVParams
    structure: vine.RVineStructure
    layout: dict
    margins: margins.MarginalParams
    w: np.ndarray
    copula_data: np.ndarray


def default_truth_margins(stations: Stations, n_days: int) -> tuple[margins.MarginalParams, np.ndarray]:
    """Plausible marginal truth: seasonal AR(3) with cold-skewed skew-t errors.

    Only intercepts and linear covariate terms are nonzero; the skew-t
    location makes the residuals mean zero. The weight
    series is ``exp(ln 6 + 0.4 cos(2 pi t / 365.25))``.
    """
    std = margins.StandardizationRecord.from_stations(stations)
    beta = np.zeros(margins.N_BETA)
    eta = np.zeros(margins.N_ETA)
    B, H = margins.BETA_SLICES, margins.ETA_SLICES
    # linear covariate columns sit right after each group's intercept: elev first
    beta[B["beta0"].start:B["beta0"].start + 2] = (1.25, -0.3)
    beta[B["beta_s"].start] = -0.15
    beta[B["beta_c"].start] = -0.6
    beta[B["gamma1"].start] = 0.8
    beta[B["gamma2"].start] = -0.1
    beta[B["gamma3"].start] = 0.05
    omega, alpha, nu = TRUTH_SKEWT
    eta[H["omega"].start] = np.log(omega)
    eta[H["alpha"].start] = alpha
    eta[H["nu"].start] = np.log(nu)
    # location that gives the residuals mean zero
    eta[H["xi"].start] = -omega * margins.skewt_mean_offset(alpha, nu)
    t = np.arange(1, n_days + 1)
    w = np.exp(np.log(6.0) + 0.4 * np.cos(2 * np.pi * t / margins.YEAR))
    p = np.polynomial.Polynomial.fit(t, np.log(w), min(margins.WEIGHT_DEGREE, n_days - 1))
    start = np.array([[0.5, -1.5, 0.0, -0.5]] * 3)
    mp = margins.MarginalParams(beta, eta, std, margins.WeightPoly(np.asarray(p.coef), np.asarray(p.domain)),
                                start, n_days)
    return mp, w


def station_grid(n: int, rng: np.random.Generator) -> tuple[Stations, np.ndarray]:
    """Jittered grid over a 9 x 7.7 degree box (about 650 x 850 km).

    Elevations are drawn independently of position so the covariates are
    not collinear. Also returns a mask of interior grid cells.
    """
    ncol = int(np.ceil(np.sqrt(n)))
    nrow = int(np.ceil(n / ncol))
    lon0, lon1, lat0, lat1 = 6.0, 15.0, 47.3, 55.0
    cells = [(r, c) for r in range(nrow) for c in range(ncol)][:n]
    lon = np.array([lon0 + (c + 0.5 + rng.uniform(-0.45, 0.45)) * (lon1 - lon0) / ncol for _, c in cells])
    lat = np.array([lat0 + (r + 0.5 + rng.uniform(-0.45, 0.45)) * (lat1 - lat0) / nrow for r, _ in cells])
    elev = rng.uniform(20.0, 1000.0, n)
    interior = np.array([0 < r < nrow - 1 and 0 < c < ncol - 1 for r, c in cells])
    ids = tuple(f"S{k + 1:03d}" for k in range(n))
    return Stations(ids, lon, lat, elev, tuple(f"station {k + 1}" for k in range(n))), interior


def generate_synthetic(n_train: int = 12, n_val: int = 4, n_days: int = 730, seed: int = 0,
                       sv_params: sv.SVParams | None = None, trunc: int = 3,
                       start_date=dt.date(2001, 1, 1)) -> tuple[DatasetBundle, TruthRecord]:
    """Bundle simulated from a spatial R-vine with StudentT pair copulas.

    The truth vine spans training and validation stations; its trees are
    maximum spanning trees under the model-implied |tau|. Copula data are
    mapped to temperatures with the truth margins. Validation stations are
    drawn from interior grid cells first.
    """
    if n_days <= margins.AR_ORDER:
        raise DomainError("n_days must exceed 3")
    if n_train < 4 or n_val < 0:
        raise DomainError("need at least 4 training stations")
    params = sv_params or DEFAULT_TRUTH_SV
    rng = substream(seed, "generate")
    st, interior = station_grid(n_train + n_val, rng)
    pred = sv.build_predictors(st)
    k = min(trunc, params.trunc, len(st) - 1)
    structure = sv.geometric_structure(pred, params, k)
    layout = {e: bicop.STUDENT_T for e in structure.edges}
    specs = sv.model_specs(structure, layout, params, pred)
    U = vine.simulate(structure, specs, n_days - margins.AR_ORDER, seed=substream(seed, "simulate"))
    mp, w = default_truth_margins(st, n_days)
    T = np.empty((n_days, len(st)))
    for s in range(len(st)):
        one = st.subset([s])
        T[:, s] = margins.back_transform(U[:, s], mp, one, w_hat=w)
    # validation sites preferably inside the network, where prediction is interpolation
    order = np.lexsort((rng.uniform(size=len(st)), ~interior))
    val = set(order[:n_val].tolist())
    split = {st.ids[s]: ("validation" if s in val else "training") for s in range(len(st))}
    dates = [start_date + dt.timedelta(days=i) for i in range(n_days)]
    return DatasetBundle(st, dates, T, split), TruthRecord(params, structure, layout, mp, w, U)
