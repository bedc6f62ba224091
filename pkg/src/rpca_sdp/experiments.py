"""Experiment runners: preprocessing, per-method components and reports."""

import csv
import io
import json
import logging
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.linalg import subspace_angles

from . import __version__
from .baselines import default_lambda, nl1_components, pca_components, sph_components
from .core import as_data_matrix
from .datasets import REMOTE_DATASETS, iris_subsample, load_csv, load_dataset
from .exceptions import DegenerateColumnError, InvalidArgumentError, RpcaError
from .lld import LldOptions, gamma_heuristic, lld_components, lld_solve
from .mdr import mdr_components
from .robust_stats import box_stats, center_rows, euclidean_median, madn, surface_distances

logger = logging.getLogger(__name__)

METHODS = ("mdr", "sph", "nl1", "lld", "pca")
GAMMA_MODES = ("model-fit", "rank-control")
TABLE_COLUMNS = ("Method", "IQR", "min", "25th", "75th", "max", "out%")
TABLE_NAMES = {"mdr": "MDR", "sph": "sphPCA", "nl1": "N+L1", "lld": "LLD", "pca": "PCA"}
SIG_DIGITS = 12


@dataclass
class ExperimentConfig:
    """Everything that determines an experiment's output.

    ``drop_columns`` holds 1-based column numbers. ``lam`` overrides the
    N+L1 weight; when it is ``None`` the weight is ``lam_scale / sqrt(n)``.
    ``gamma`` is a number or one of ``"model-fit"`` (``0.8 sqrt(p/n)``) and
    ``"rank-control"``. ``subsample_seed`` only affects the iris subsample.
    """

    dataset: str
    methods: tuple = METHODS
    T: int = 1
    K: int = 94
    gamma: object = "model-fit"
    lam: float = None
    lam_scale: float = 1.0
    seed: int = 0
    centering: str = "euclidean-median"
    column_scaling: str = "none"
    drop_columns: tuple = ()
    output: str = None
    format: str = "json"
    delimiter: str = ","
    header: bool = False
    na_policy: str = "reject"
    subsample_seed: int = None
    svd_mode: str = "full"

    def __post_init__(self):
        if isinstance(self.methods, str):
            self.methods = tuple(m.strip() for m in self.methods.split(",") if m.strip())
        self.methods = tuple(self.methods)
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise InvalidArgumentError(f"unknown method(s) {unknown}; choose from {list(METHODS)}")
        if not self.methods:
            raise InvalidArgumentError("at least one method is required")
        if len(set(self.methods)) != len(self.methods):
            raise InvalidArgumentError("methods must not repeat")
        if self.T < 1 or self.K < 1:
            raise InvalidArgumentError("T and K must be positive")
        if isinstance(self.gamma, str):
            if self.gamma not in GAMMA_MODES:
                try:
                    self.gamma = float(self.gamma)
                except ValueError:
                    raise InvalidArgumentError(
                        f"gamma must be a number or one of {GAMMA_MODES}"
                    ) from None
        if not isinstance(self.gamma, str) and not self.gamma > 0:
            raise InvalidArgumentError("gamma must be positive")
        if self.lam is not None and not self.lam > 0:
            raise InvalidArgumentError("lambda must be positive")
        if self.centering not in ("euclidean-median", "none"):
            raise InvalidArgumentError("centering must be 'euclidean-median' or 'none'")
        if self.column_scaling not in ("madn", "none"):
            raise InvalidArgumentError("column_scaling must be 'madn' or 'none'")
        if self.format not in ("json", "csv"):
            raise InvalidArgumentError("format must be 'json' or 'csv'")
        self.drop_columns = tuple(int(c) for c in self.drop_columns)
        if any(c < 1 for c in self.drop_columns):
            raise InvalidArgumentError("drop_columns are 1-based column numbers")

    def to_dict(self):
        return asdict(self)


def preset_config(name, **overrides):
    """Settings used for the bundled experiments, with keyword overrides."""
    base = {"dataset": name}
    if name == "iris":
        base.update(lam_scale=0.3)
    elif name == "bus":
        base.update(T=3, drop_columns=(9,), column_scaling="madn")
    base.update(overrides)
    return ExperimentConfig(**base)


def substream(seed, name):
    """Random stream for a named consumer, independent of scheduling order."""
    return np.random.SeedSequence([int(seed), zlib.crc32(name.encode("utf-8"))])


# ---------------------------------------------------------------------------
# data
# ---------------------------------------------------------------------------


def load_experiment_data(config):
    """Raw matrix plus an optional mask of the rows that summary statistics use."""
    name = config.dataset
    if name == "iris":
        X, labels = iris_subsample(seed=config.subsample_seed)
        return X, labels == "setosa"
    if name in REMOTE_DATASETS:
        return load_dataset(name), None
    return load_csv(name, config.delimiter, config.header, config.na_policy), None


def preprocess(X, config):
    """Column drop, then MADN column scaling, then Euclidean-median centering."""
    X = as_data_matrix(X)
    if config.drop_columns:
        p = X.shape[1]
        bad = [c for c in config.drop_columns if c > p]
        if bad:
            raise InvalidArgumentError(f"drop_columns {bad} exceed the {p} available columns")
        keep = np.setdiff1d(np.arange(p), np.asarray(config.drop_columns) - 1)
        X = X[:, keep]
    if config.column_scaling == "madn":
        scales = np.array([madn(X[:, j]) for j in range(X.shape[1])])
        zero = np.flatnonzero(scales == 0.0)
        if zero.size:
            raise DegenerateColumnError(int(zero[0]))
        X = X / scales
    if config.centering == "euclidean-median":
        rng = np.random.default_rng(substream(config.seed, "centering"))
        mu, _ = euclidean_median(X, rng=rng)
        X = center_rows(X, mu)
    return X


def resolve_gamma(config, n, p, T):
    if isinstance(config.gamma, str):
        return gamma_heuristic(n, p, T, mode=config.gamma)
    return float(config.gamma)


def resolve_lambda(config, n):
    return float(config.lam) if config.lam is not None else config.lam_scale * default_lambda(n)


# ---------------------------------------------------------------------------
# per-method work
# ---------------------------------------------------------------------------


def compute_components(method, X, T, config):
    """Return ``(V, extras)`` for one method; ``V`` has ``T`` columns."""
    n, p = X.shape
    extras = {}
    if method == "pca":
        comps = pca_components(X, T)
    elif method == "sph":
        comps = sph_components(X, T)
    elif method == "mdr":
        comps = mdr_components(X, T, K=config.K, rng=substream(config.seed, method))
        extras["ratio"] = [float(r) for r in comps.extras["ratios"]]
        extras["alpha"] = [float(a) for a in comps.extras["alphas"]]
    elif method == "lld":
        gamma = resolve_gamma(config, n, p, T)
        comps = lld_components(X, T, gamma, LldOptions(svd_mode=config.svd_mode))
        res = comps.extras["result"]
        extras.update(
            gamma=gamma,
            residual=res.final_residual / float(np.linalg.norm(X)),
            iterations=res.iterations,
            rank=res.rank,
        )
    elif method == "nl1":
        lam = resolve_lambda(config, n)
        comps = nl1_components(X, lam, T, LldOptions(svd_mode=config.svd_mode))
        res = comps.extras["result"]
        extras.update(
            **{"lambda": lam},
            residual=res.final_residual / float(np.linalg.norm(X)),
            iterations=res.iterations,
        )
    else:
        raise InvalidArgumentError(f"unknown method {method!r}")
    return comps.V, extras


def _run_methods(X, T, config, fn):
    """Run ``fn(method)`` for each method concurrently; keep declared order."""

    def timed(method):
        t0 = time.perf_counter()
        try:
            out = fn(method)
            err = None
        except RpcaError as exc:
            logger.error("%s failed: %s", method, exc)
            out, err = None, {"type": type(exc).__name__, "message": str(exc)}
        return out, err, time.perf_counter() - t0

    with ThreadPoolExecutor(max_workers=len(config.methods)) as pool:
        futures = [pool.submit(timed, m) for m in config.methods]
        outs = [f.result() for f in futures]
    results, timing = {}, {}
    for m, (out, err, dt) in zip(config.methods, outs):
        results[m] = out if err is None else {"error": err}
        timing[m] = dt
    return results, timing


@dataclass
class Report:
    kind: str
    config: dict
    results: dict
    timing: dict = field(default_factory=dict)
    version: str = __version__

    @property
    def failed(self):
        return [m for m, r in self.results.items() if "error" in r]

    def to_dict(self, include_timing=True):
        d = {"kind": self.kind, "config": self.config, "results": self.results, "version": self.version}
        if include_timing:
            d["timing"] = self.timing
        return d


def run_projection_experiment(config, X=None, bulk=None):
    """Project onto each method's top component and summarize the spread.

    Box statistics use the rows flagged by ``bulk`` when given (for iris,
    the setosa rows); projected values for every row are kept for plotting.
    """
    if config.T != 1:
        raise InvalidArgumentError("projection experiments use T = 1")
    if X is None:
        X, bulk = load_experiment_data(config)
        X = preprocess(X, config)
    X = as_data_matrix(X)

    def one(method):
        V, extras = compute_components(method, X, 1, config)
        v = V[:, 0]
        y = X @ v
        ys = y if bulk is None else y[bulk]
        return {
            "component": v.tolist(),
            "box": box_stats(ys).as_dict(),
            "projection": y.tolist(),
            "extras": extras,
        }

    results, timing = _run_methods(X, 1, config, one)
    return Report("project", config.to_dict(), results, timing)


def run_regression_experiment(config, X=None):
    """Distances from each observation to each method's T-dimensional surface.

    PCA is always computed as the reference. ``fraction_below`` counts the
    positions where the sorted robust distance is strictly smaller than the
    sorted PCA distance.
    """
    if X is None:
        X, _ = load_experiment_data(config)
        X = preprocess(X, config)
    X = as_data_matrix(X)
    T = config.T
    V_pca, _ = compute_components("pca", X, T, config)
    d_pca = surface_distances(X, V_pca)
    ref = np.sort(d_pca)
    qs = (0.25, 0.5, 0.75, 0.9, 0.95)

    def one(method):
        V, extras = (V_pca, {}) if method == "pca" else compute_components(method, X, T, config)
        d = surface_distances(X, V)
        srt = np.sort(d)
        return {
            "components": V.T.tolist(),
            "distances": d.tolist(),
            "sorted_pairs": np.column_stack([ref, srt]).tolist(),
            "fraction_below": float(np.mean(srt < ref)),
            "quantiles": {str(q): float(np.quantile(d, q)) for q in qs},
            "pca_quantiles": {str(q): float(np.quantile(d_pca, q)) for q in qs},
            "extras": extras,
        }

    results, timing = _run_methods(X, T, config, one)
    return Report("regress", config.to_dict(), results, timing)


# ---------------------------------------------------------------------------
# synthetic recovery
# ---------------------------------------------------------------------------


@dataclass
class SyntheticConfig:
    n: int = 200
    p: int = 30
    rank: int = 2
    corrupt_fraction: float = 0.1
    corrupt_scale: float = 3.0
    seed: int = 0
    gamma: float = None
    detect_tol: float = 1e-3

    def __post_init__(self):
        if min(self.n, self.p, self.rank) < 1 or self.rank > min(self.n, self.p):
            raise InvalidArgumentError("need 1 <= rank <= min(n, p)")
        if not 0.0 <= self.corrupt_fraction < 1.0:
            raise InvalidArgumentError("corrupt_fraction must lie in [0, 1)")
        if self.corrupt_scale < 0:
            raise InvalidArgumentError("corrupt_scale must be nonnegative")


def make_corrupted_low_rank(n, p, rank, corrupt_fraction, corrupt_scale, rng):
    """Gaussian rank-``rank`` matrix with a random subset of rows replaced.

    Replacement rows point in uniformly random directions with norm
    ``corrupt_scale`` times the mean clean row norm.

    Returns ``(X, L, support)`` where ``support`` is a boolean row mask.
    """
    rng = np.random.default_rng(rng)
    L = rng.standard_normal((n, rank)) @ rng.standard_normal((rank, p))
    m = int(round(corrupt_fraction * n))
    support = np.zeros(n, dtype=bool)
    X = L.copy()
    if m:
        idx = rng.choice(n, size=m, replace=False)
        support[idx] = True
        D = rng.standard_normal((m, p))
        D /= np.linalg.norm(D, axis=1, keepdims=True)
        X[idx] = corrupt_scale * np.linalg.norm(L, axis=1).mean() * D
    return X, L, support


def run_synthetic(cfg):
    """Generate row-corrupted low-rank data, run LLD and score the recovery.

    A row counts as detected when its ``C`` row norm exceeds
    ``detect_tol * ||X||_F / sqrt(n)``. Empty detected or true supports give
    precision or recall 1. ``angle_error`` is the sine of the largest
    principal angle between the recovered and true row spaces.
    """
    X, L, support = make_corrupted_low_rank(
        cfg.n, cfg.p, cfg.rank, cfg.corrupt_fraction, cfg.corrupt_scale,
        substream(cfg.seed, "synthetic"),
    )
    gamma = cfg.gamma if cfg.gamma is not None else 0.8 * np.sqrt(cfg.p / cfg.n)
    t0 = time.perf_counter()
    res = lld_solve(X, gamma)
    dt = time.perf_counter() - t0
    cn = np.linalg.norm(res.C, axis=1)
    thresh = cfg.detect_tol * float(np.linalg.norm(X)) / np.sqrt(cfg.n)
    detected = cn > thresh
    hits = int((detected & support).sum())
    precision = hits / detected.sum() if detected.any() else 1.0
    recall = hits / support.sum() if support.any() else 1.0

    V_true = np.linalg.svd(L, full_matrices=False)[2][: cfg.rank].T
    s, Vt = np.linalg.svd(res.P, full_matrices=False)[1:]
    r = int(min(cfg.rank, np.count_nonzero(s > 1e-6 * max(s[0], 1e-300))))
    if r == 0:
        angle = 1.0
    else:
        angle = float(np.sin(subspace_angles(Vt[:r].T, V_true).max()))
        if r < cfg.rank:
            angle = 1.0
    return Report(
        "synthetic",
        asdict(cfg),
        {
            "lld": {
                "precision": float(precision),
                "recall": float(recall),
                "angle_error": angle,
                "gamma": float(gamma),
                "iterations": res.iterations,
                "residual": res.final_residual / float(np.linalg.norm(X)),
                "detected": np.flatnonzero(detected).tolist(),
                "support": np.flatnonzero(support).tolist(),
                "max_clean_row_norm": float(cn[~support].max()) if (~support).any() else 0.0,
                "threshold": thresh,
            }
        },
        {"lld": dt},
    )


# ---------------------------------------------------------------------------
# emission
# ---------------------------------------------------------------------------


def report_to_json(report, include_timing=True):
    return json.dumps(report.to_dict(include_timing), indent=2, sort_keys=True)


def projection_table_rows(report):
    """Rows of the summary table in the report's method order."""
    rows = []
    for m, r in report.results.items():
        if "box" not in r:
            continue
        b = r["box"]
        rows.append([TABLE_NAMES[m], b["iqr"], b["min"], b["q25"], b["q75"], b["max"], 100.0 * b["outlier_fraction"]])
    return rows


def report_to_csv(report):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE_COLUMNS)
    for row in projection_table_rows(report):
        w.writerow([row[0]] + [f"{x:.{SIG_DIGITS}g}" for x in row[1:]])
    return buf.getvalue()


def regression_table_csv(report):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["Method", "fraction_below", "q75", "pca_q75"])
    for m, r in report.results.items():
        if "error" in r:
            continue
        w.writerow([
            TABLE_NAMES[m],
            f"{r['fraction_below']:.{SIG_DIGITS}g}",
            f"{r['quantiles']['0.75']:.{SIG_DIGITS}g}",
            f"{r['pca_quantiles']['0.75']:.{SIG_DIGITS}g}",
        ])
    return buf.getvalue()


def write_report(report, path, fmt="json"):
    if fmt == "json":
        text = report_to_json(report)
    elif report.kind == "project":
        text = report_to_csv(report)
    elif report.kind == "regress":
        text = regression_table_csv(report)
    else:
        raise InvalidArgumentError(f"no CSV layout for {report.kind} reports")
    if path in (None, "-"):
        return text
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)
    return text
