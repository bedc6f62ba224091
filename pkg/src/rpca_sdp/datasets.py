"""Data ingestion: CSV parsing, the embedded iris sample and cached downloads."""

import csv
import hashlib
import io
import json
import logging
import os
import urllib.request
from importlib import resources
from pathlib import Path

import numpy as np

from .exceptions import InvalidArgumentError, InvalidInputError

logger = logging.getLogger(__name__)

NA_TOKENS = frozenset({"", "na", "nan", "n/a", "null", "?"})
CACHE_ENV = "RPCA_SDP_DATA"

IRIS_SPECIES = ("setosa", "versicolor", "virginica")

# name -> download source and parsing options; sha256 of the raw payload is
# pinned in the cache manifest on first successful fetch
REMOTE_DATASETS = {
    "no2": {
        "url": "http://lib.stat.cmu.edu/datasets/NO2.dat",
        "file": "no2.csv",
        "shape": (500, 8),
        "format": "whitespace",
    },
    "bus": {
        "url": "https://vincentarelbundock.github.io/Rdatasets/csv/robustbase/bus.csv",
        "file": "bus.csv",
        "shape": (218, 18),
        "format": "rdatasets",
    },
}


def _parse_field(tok, lineno, col):
    t = tok.strip()
    if t.lower() in NA_TOKENS:
        return np.nan
    try:
        return float(t)
    except ValueError:
        raise InvalidInputError(
            f"line {lineno}, column {col + 1}: cannot parse {tok!r} as a number"
        ) from None


def parse_csv_text(text, delimiter=",", header=False, na_policy="reject", source="<text>"):
    """Parse delimited numeric text; see :func:`load_csv`."""
    if na_policy not in ("reject", "drop-row"):
        raise InvalidArgumentError(f"na_policy must be 'reject' or 'drop-row', got {na_policy!r}")
    if delimiter is None:
        lines = [(i + 1, ln.split()) for i, ln in enumerate(text.splitlines())]
    else:
        reader = csv.reader(io.StringIO(text), delimiter=delimiter)
        lines = [(reader.line_num, row) for row in reader]
    lines = [(i, r) for i, r in lines if r and any(c.strip() for c in r)]
    if header and lines:
        lines = lines[1:]
    if not lines:
        raise InvalidInputError(f"{source}: no data rows")

    width = len(lines[0][1])
    rows = []
    for lineno, r in lines:
        if len(r) != width:
            raise InvalidInputError(
                f"{source}: line {lineno} has {len(r)} fields, expected {width}"
            )
        rows.append([_parse_field(t, lineno, j) for j, t in enumerate(r)])
    X = np.array(rows, dtype=np.float64)

    bad = ~np.isfinite(X).all(axis=1)
    if bad.any():
        if na_policy == "reject":
            lineno = lines[int(np.flatnonzero(bad)[0])][0]
            raise InvalidInputError(f"{source}: missing or non-finite value on line {lineno}")
        logger.info("%s: dropped %d row(s) with missing values", source, int(bad.sum()))
        X = X[~bad]
        if X.shape[0] == 0:
            raise InvalidInputError(f"{source}: every row had missing values")
    logger.info("%s: loaded %d rows x %d columns", source, X.shape[0], X.shape[1])
    return X


def load_csv(path, delimiter=",", header=False, na_policy="reject"):
    """Read a numeric matrix from a delimited text file.

    Parameters
    ----------
    delimiter : str or None
        Field separator; ``None`` splits on runs of whitespace.
    header : bool
        Skip the first non-empty line.
    na_policy : {"reject", "drop-row"}
        Missing tokens (empty, NA, NaN, ?) either raise or remove the row.
    """
    path = Path(path)
    if not path.is_file():
        raise InvalidArgumentError(f"no such file: {path}")
    return parse_csv_text(
        path.read_text(encoding="utf-8"), delimiter, header, na_policy, source=str(path)
    )


def load_iris():
    """All 150 iris measurements and their species labels."""
    text = resources.files("rpca_sdp").joinpath("data/iris.csv").read_text(encoding="utf-8")
    reader = csv.reader(io.StringIO(text))
    next(reader)
    X, labels = [], []
    for row in reader:
        X.append([float(t) for t in row[:4]])
        labels.append(row[4])
    return np.array(X), np.array(labels)


def iris_subsample(n_each=5, seed=None):
    """All setosa rows followed by ``n_each`` virginica and ``n_each`` versicolor.

    Without a seed the first rows of each species in dataset order are used;
    a seed draws them uniformly without replacement instead.

    Returns
    -------
    X : ndarray, shape (50 + 2 n_each, 4)
    labels : ndarray of str
    """
    X, labels = load_iris()
    rng = None if seed is None else np.random.default_rng(seed)
    idx = list(np.flatnonzero(labels == "setosa"))
    for sp in ("virginica", "versicolor"):
        pool = np.flatnonzero(labels == sp)
        if rng is None:
            pick = pool[:n_each]
        else:
            pick = np.sort(rng.choice(pool, size=n_each, replace=False))
        idx.extend(pick)
    idx = np.asarray(idx)
    return X[idx], labels[idx]


# ---------------------------------------------------------------------------
# downloaded datasets
# ---------------------------------------------------------------------------


def cache_dir():
    d = os.environ.get(CACHE_ENV)
    return Path(d) if d else Path.home() / ".cache" / "rpca_sdp"


def _manifest_path(root):
    return root / "checksums.json"


def _read_manifest(root):
    p = _manifest_path(root)
    return json.loads(p.read_text()) if p.is_file() else {}


def _convert(name, raw):
    spec = REMOTE_DATASETS[name]
    text = raw.decode("utf-8")
    if spec["format"] == "whitespace":
        X = parse_csv_text(text, delimiter=None, source=name)
    else:
        X = parse_csv_text(text, delimiter=",", header=True, source=name)
        X = X[:, 1:]  # leading row-name column
    if X.shape != spec["shape"]:
        raise InvalidInputError(f"{name}: expected shape {spec['shape']}, got {X.shape}")
    return X


def fetch_dataset(name, root=None, force=False, timeout=60):
    """Download ``name`` into the cache and verify its checksum.

    The first successful download records the payload's SHA-256 in
    ``checksums.json``; later fetches must match it.
    """
    if name not in REMOTE_DATASETS:
        raise InvalidArgumentError(f"unknown dataset {name!r}; choose from {sorted(REMOTE_DATASETS)}")
    root = Path(root) if root else cache_dir()
    root.mkdir(parents=True, exist_ok=True)
    spec = REMOTE_DATASETS[name]
    target = root / spec["file"]
    if target.is_file() and not force:
        return target
    with urllib.request.urlopen(spec["url"], timeout=timeout) as resp:
        raw = resp.read()
    digest = hashlib.sha256(raw).hexdigest()
    manifest = _read_manifest(root)
    known = manifest.get(name)
    if known is not None and known != digest:
        raise InvalidInputError(f"{name}: checksum mismatch ({digest} != pinned {known})")
    X = _convert(name, raw)
    np.savetxt(target, X, delimiter=",", fmt="%.17g")
    manifest[name] = digest
    _manifest_path(root).write_text(json.dumps(manifest, indent=2, sort_keys=True))
    logger.info("fetched %s -> %s (sha256 %s)", name, target, digest)
    return target


def dataset_path(name, root=None):
    root = Path(root) if root else cache_dir()
    return root / REMOTE_DATASETS[name]["file"]


def have_dataset(name, root=None):
    return dataset_path(name, root).is_file()


def load_dataset(name, root=None):
    """Load a fetched dataset from the cache."""
    if name not in REMOTE_DATASETS:
        raise InvalidArgumentError(f"unknown dataset {name!r}")
    p = dataset_path(name, root)
    if not p.is_file():
        raise InvalidArgumentError(f"{name} is not cached at {p}; run the fetch-data subcommand")
    return load_csv(p)
