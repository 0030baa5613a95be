"""On-disk formats: dataset directories, model files and ingestion.

Matrices are header-less comma-separated text. Floats are written with 17
significant digits, which round-trips every float64 exactly; annotations are
the integers -1 and 1. A dataset directory is described by ``manifest.json``.
"""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bilinear import BilinearModel
from .errors import DataFormatError
from .learners.conse import ConseModel
from .synthgen import AnnotationMatrix, WorldDraw

log = logging.getLogger(__name__)

FORMAT_VERSION = "1"

FILES = {
    "train_features": "train_features.csv",
    "test_features": "test_features.csv",
    "seen_labels": "seen_labels.csv",
    "unseen_labels": "unseen_labels.csv",
    "train_annotations": "train_annotations.csv",
    "test_annotations_seen": "test_annotations_seen.csv",
    "test_annotations_unseen": "test_annotations_unseen.csv",
}
OPTIONAL_FILES = {
    "ground_truth_v": "ground_truth_v.csv",
    "train_annotations_noiseless": "train_annotations_noiseless.csv",
    "test_annotations_seen_noiseless": "test_annotations_seen_noiseless.csv",
    "test_annotations_unseen_noiseless": "test_annotations_unseen_noiseless.csv",
}


# -- matrices ---------------------------------------------------------------

def write_matrix(path, a, integer: bool = False) -> None:
    a = np.asarray(a)
    with open(path, "w", newline="") as fh:
        for row in a:
            if integer:
                fh.write(",".join(str(int(v)) for v in row))
            else:
                fh.write(",".join(format(float(v), ".17g") for v in row))
            fh.write("\n")


def read_matrix(path, rows: int | None = None, cols: int | None = None,
                integer: bool = False) -> np.ndarray:
    """Parse a header-less CSV matrix, checking its shape when ``rows``/``cols`` are given."""
    path = Path(path)
    parsed = []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row:
                if cols == 0:  # a matrix with rows but no columns is written as blank lines
                    parsed.append([])
                    continue
                raise DataFormatError(f"{path.name}: empty row {i}")
            if cols is None:
                cols = len(row)
            if len(row) != cols:
                raise DataFormatError(f"{path.name}: row {i} has {len(row)} fields, expected {cols}")
            try:
                parsed.append([int(v) if integer else float(v) for v in row])
            except ValueError as exc:
                raise DataFormatError(f"{path.name}: row {i}: {exc}") from None
    if rows is not None and len(parsed) != rows:
        raise DataFormatError(f"{path.name}: has {len(parsed)} rows, expected {rows}")
    dtype = np.int8 if integer else np.float64
    if not parsed or cols == 0:
        return np.zeros((len(parsed), cols or 0), dtype=dtype)
    out = np.array(parsed, dtype=np.int64 if integer else np.float64)
    if not integer and not np.all(np.isfinite(out)):
        bad = np.argwhere(~np.isfinite(out))[0]
        raise DataFormatError(f"{path.name}: non-finite value at row {bad[0]}, column {bad[1]}")
    return out.astype(dtype)


def _check_pm1(a: np.ndarray, name: str) -> None:
    bad = np.argwhere((a != 1) & (a != -1))
    if bad.size:
        r, c = bad[0]
        raise DataFormatError(f"{name}: entry at row {r}, column {c} is {a[r, c]}, expected -1 or 1")


# -- datasets -----------------------------------------------------------------

@dataclass
class Dataset:
    """A dataset directory loaded into memory."""

    train_x: np.ndarray
    train_y: AnnotationMatrix
    test_x: np.ndarray
    test_y_seen: AnnotationMatrix
    test_y_unseen: AnnotationMatrix
    seen: np.ndarray
    unseen: np.ndarray
    manifest: dict = field(default_factory=dict)
    v_star: BilinearModel | None = None

    @property
    def all_labels(self) -> np.ndarray:
        return np.vstack([self.seen, self.unseen])

    @property
    def test_y(self) -> AnnotationMatrix:
        """Test annotations over ``[seen; unseen]``."""
        vals = np.hstack([self.test_y_seen.values, self.test_y_unseen.values])
        clean = None
        if self.test_y_seen.noiseless is not None and self.test_y_unseen.noiseless is not None:
            clean = np.hstack([self.test_y_seen.noiseless, self.test_y_unseen.noiseless])
        return AnnotationMatrix(vals, clean)

    @classmethod
    def from_draw(cls, draw: WorldDraw) -> "Dataset":
        return cls(draw.train_x, draw.train_y, draw.test_x, draw.test_y_seen, draw.test_y_unseen,
                   draw.seen, draw.unseen, {}, draw.world.v_star)


def _manifest(ds: Dataset, flip_prob, seed, files: dict, extra: dict | None = None) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "d": int(ds.train_x.shape[1]),
        "n": int(ds.seen.shape[1]),
        "m_train": int(ds.train_x.shape[0]),
        "m_test": int(ds.test_x.shape[0]),
        "l_seen": int(ds.seen.shape[0]),
        "l_unseen": int(ds.unseen.shape[0]),
        "flip_prob": flip_prob,
        "seed": seed,
        "files": files,
        **(extra or {}),
    }


def _write_dataset(directory, ds: Dataset, flip_prob, seed, extra=None) -> dict:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = dict(FILES)
    write_matrix(directory / FILES["train_features"], ds.train_x)
    write_matrix(directory / FILES["test_features"], ds.test_x)
    write_matrix(directory / FILES["seen_labels"], ds.seen)
    write_matrix(directory / FILES["unseen_labels"], ds.unseen)
    write_matrix(directory / FILES["train_annotations"], ds.train_y.values, integer=True)
    write_matrix(directory / FILES["test_annotations_seen"], ds.test_y_seen.values, integer=True)
    write_matrix(directory / FILES["test_annotations_unseen"], ds.test_y_unseen.values, integer=True)
    if ds.v_star is not None:
        files["ground_truth_v"] = OPTIONAL_FILES["ground_truth_v"]
        write_matrix(directory / files["ground_truth_v"], ds.v_star.v)
    for name, ann in (("train_annotations", ds.train_y), ("test_annotations_seen", ds.test_y_seen),
                      ("test_annotations_unseen", ds.test_y_unseen)):
        if ann.noiseless is not None:
            key = f"{name}_noiseless"
            files[key] = OPTIONAL_FILES[key]
            write_matrix(directory / files[key], ann.noiseless, integer=True)
    manifest = _manifest(ds, flip_prob, seed, files, extra)
    with open(directory / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def write_world(directory, draw: WorldDraw) -> dict:
    """Persist a generated world; returns the manifest."""
    return _write_dataset(directory, Dataset.from_draw(draw), draw.world.flip_prob, draw.world.seed,
                          {"synth_config": draw.config.to_dict()})


def read_world(directory) -> Dataset:
    directory = Path(directory)
    try:
        with open(directory / "manifest.json") as fh:
            manifest = json.load(fh)
    except FileNotFoundError:
        raise DataFormatError(f"{directory}: no manifest.json") from None
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{directory}/manifest.json: {exc}") from None
    if manifest.get("format_version") != FORMAT_VERSION:
        raise DataFormatError(f"unsupported format_version {manifest.get('format_version')!r}")
    try:
        d, n = manifest["d"], manifest["n"]
        m_train, m_test = manifest["m_train"], manifest["m_test"]
        l_seen, l_unseen = manifest["l_seen"], manifest["l_unseen"]
        files = manifest["files"]
    except KeyError as exc:
        raise DataFormatError(f"manifest is missing key {exc}") from None

    def path_of(logical: str) -> Path:
        if logical not in files:
            raise DataFormatError(f"manifest has no file entry for {logical!r}")
        p = directory / files[logical]
        if not p.exists():
            raise DataFormatError(f"file for {logical!r} is missing: {p}")
        return p

    def ann(logical: str, rows: int, cols: int) -> AnnotationMatrix:
        vals = read_matrix(path_of(logical), rows, cols, integer=True)
        _check_pm1(vals, files[logical])
        clean = None
        if f"{logical}_noiseless" in files:
            clean = read_matrix(path_of(f"{logical}_noiseless"), rows, cols, integer=True)
            _check_pm1(clean, files[f"{logical}_noiseless"])
        clean = None if clean is None else clean.reshape(rows, cols)
        return AnnotationMatrix(vals.reshape(rows, cols), clean)

    v_star = None
    if "ground_truth_v" in files:
        v_star = BilinearModel(read_matrix(path_of("ground_truth_v"), n, d))
    return Dataset(
        train_x=read_matrix(path_of("train_features"), m_train, d).reshape(m_train, d),
        train_y=ann("train_annotations", m_train, l_seen),
        test_x=read_matrix(path_of("test_features"), m_test, d).reshape(m_test, d),
        test_y_seen=ann("test_annotations_seen", m_test, l_seen),
        test_y_unseen=ann("test_annotations_unseen", m_test, l_unseen),
        seen=read_matrix(path_of("seen_labels"), l_seen, n).reshape(l_seen, n),
        unseen=read_matrix(path_of("unseen_labels"), l_unseen, n).reshape(l_unseen, n),
        manifest=manifest,
        v_star=v_star,
    )


def _read_annotations_any(path, rows: int, cols: int) -> np.ndarray:
    vals = read_matrix(path, rows, cols, integer=False)
    if np.all((vals == 0) | (vals == 1)):
        log.warning("%s: 0/1 annotations detected; mapping 0 -> -1", Path(path).name)
        return np.where(vals == 1, 1, -1).astype(np.int8)
    bad = np.argwhere((vals != 1) & (vals != -1))
    if bad.size:
        r, c = bad[0]
        raise DataFormatError(f"{Path(path).name}: entry at row {r}, column {c} is {vals[r, c]!r}; "
                              "annotations must be -1/1 or 0/1")
    return vals.astype(np.int8)


def ingest_external(features_csv, labels_csv, annotations_csv, out_dir,
                    test_features_csv=None, test_annotations_csv=None) -> dict:
    """Validate precomputed features/label codes/annotations into a dataset directory.

    All ingested labels count as seen. Without a test split the test files
    are written empty.
    """
    x = read_matrix(features_csv)
    labels = read_matrix(labels_csv)
    if x.shape[0] == 0 or labels.shape[0] == 0:
        raise DataFormatError("features and labels must be non-empty")
    y = _read_annotations_any(annotations_csv, x.shape[0], labels.shape[0])
    if test_features_csv is not None:
        tx = read_matrix(test_features_csv, cols=x.shape[1])
        ty = _read_annotations_any(test_annotations_csv, tx.shape[0], labels.shape[0])
    else:
        tx = np.zeros((0, x.shape[1]))
        ty = np.zeros((0, labels.shape[0]), dtype=np.int8)
    ds = Dataset(x, AnnotationMatrix(y), tx, AnnotationMatrix(ty),
                 AnnotationMatrix(np.zeros((tx.shape[0], 0), dtype=np.int8)),
                 labels, np.zeros((0, labels.shape[1])))
    return _write_dataset(out_dir, ds, None, None, {"source": "external"})


# -- models -------------------------------------------------------------------

def _sidecar(path: Path) -> Path:
    return path.with_suffix(".json")


def write_model(path, model, metadata: dict | None = None) -> None:
    """Write a model matrix as CSV with a JSON sidecar next to it."""
    path = Path(path)
    meta = dict(metadata or {})
    if isinstance(model, ConseModel):
        coef = np.vstack([model.weights, model.bias[None, :]])
        write_matrix(path, coef)
        seen_path = path.with_suffix(".seen.csv")
        write_matrix(seen_path, model.seen)
        meta.update(learner="conse", n=model.n, d=model.d, l_seen=int(model.seen.shape[0]),
                    t=model.t, seen_file=seen_path.name)
    else:
        write_matrix(path, model.v)
        meta.setdefault("learner", "bilinear")
        meta.update(n=model.n, d=model.d)
    with open(_sidecar(path), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_model_metadata(path) -> dict:
    try:
        with open(_sidecar(Path(path))) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise DataFormatError(f"model sidecar {_sidecar(Path(path))} not found") from None


def read_model(path):
    """Load a :class:`BilinearModel` (or a ConSE model) written by :func:`write_model`."""
    path = Path(path)
    meta = read_model_metadata(path)
    n, d = meta.get("n"), meta.get("d")
    if meta.get("learner") == "conse":
        coef = read_matrix(path)
        seen = read_matrix(path.parent / meta["seen_file"])
        if coef.shape != (d + 1, meta["l_seen"]) or seen.shape != (meta["l_seen"], n):
            raise DataFormatError(f"{path.name}: ConSE matrices disagree with sidecar (n={n}, d={d})")
        return ConseModel(coef[:d].copy(), coef[d].copy(), seen, int(meta["t"]))
    v = read_matrix(path)
    if v.shape != (n, d):
        raise DataFormatError(f"{path.name}: matrix is {v.shape[0]}x{v.shape[1]} "
                              f"but sidecar declares n={n}, d={d}")
    return BilinearModel(v)


def write_trace(path, trace) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "objective", "best"])
        for epoch, obj, best in trace.rows():
            w.writerow([epoch, format(obj, ".17g"), format(best, ".17g")])


def write_rows(path, rows: list[dict], columns: list[str] | None = None) -> None:
    """CSV with a header; floats at full precision."""
    columns = columns or (list(rows[0]) if rows else [])
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
        w.writeheader()
        for row in rows:
            w.writerow({k: format(v, ".17g") if isinstance(v, float) else v for k, v in row.items()})
