"""
Feature, geotag and ground-truth file repository.

Binary feature file layout (little endian):
    magic "VPRF" | version u32 = 1 | count u32 | dim u32 | count*dim float32, row-major
CSV feature file: one frame per line, dim comma-separated numbers, no header.
Geotag CSV: header "frame,lat,lon". Ground-truth CSV: "query,db" or "query,lat,lon".
"""

import io
import logging
import struct
from pathlib import Path
from typing import Literal, Optional, Type, Union

import numpy as np
import pandas as pd

from services.errors import (
    CountMismatchError,
    DataError,
    FeatureFormatError,
    GeotagError,
    GroundTruthError,
)
from services.featurestore import RENORM_TOLERANCE, FrameDatabase, GroundTruth, TruthMode, normalize_rows

logger = logging.getLogger(__name__)

FeatureFormat = Literal["binary", "csv"]
PathLike = Union[str, Path]

MAGIC = b"VPRF"
VERSION = 1
HEADER = struct.Struct("<4sIII")

_SUFFIX_FORMATS = {".bin": "binary", ".vprf": "binary", ".csv": "csv", ".txt": "csv"}

# pandas and decoding failures a malformed csv can raise
_CSV_FAILURES = (UnicodeDecodeError, pd.errors.EmptyDataError, pd.errors.ParserError)


def infer_format(path: PathLike) -> FeatureFormat:
    suffix = Path(path).suffix.lower()
    if suffix not in _SUFFIX_FORMATS:
        raise FeatureFormatError(f"cannot infer feature format from suffix '{suffix}'", path=path)
    return _SUFFIX_FORMATS[suffix]  # type: ignore[return-value]


def load_features(
    path: PathLike,
    format: Optional[FeatureFormat] = None,
    *,
    renorm_tol: float = RENORM_TOLERANCE,
    label: Optional[str] = None,
) -> FrameDatabase:
    """
    Load a feature file into a FrameDatabase.

    Args:
        path: feature file
        format: "binary" or "csv"; inferred from the suffix when omitted
        renorm_tol: rows whose norm deviates from 1 by at most this are renormalized
        label: source label, defaults to the file stem

    Raises:
        FeatureFormatError, CountMismatchError, ZeroVectorError, NormToleranceError
    """
    path = Path(path)
    fmt = format or infer_format(path)
    if not path.exists():
        raise FeatureFormatError("feature file does not exist", path=path)

    if fmt == "binary":
        matrix = _read_binary(path)
    elif fmt == "csv":
        matrix = _read_csv(path)
    else:
        raise FeatureFormatError(f"unknown feature format '{fmt}'", path=path)

    features = normalize_rows(matrix, renorm_tol=renorm_tol, path=str(path))
    db = FrameDatabase(features, None, label or path.stem)
    logger.info("Loaded %d frames of dim %d from %s", len(db), db.dim, path)
    return db


def _read_table(path: Path, error: Type[DataError]) -> pd.DataFrame:
    try:
        return pd.read_csv(path, dtype=str, skipinitialspace=True, encoding="utf-8")
    except _CSV_FAILURES as e:
        raise error(f"unreadable csv: {e}", path=path) from e


def _read_binary(path: Path) -> np.ndarray:
    data = path.read_bytes()
    if len(data) < HEADER.size:
        raise FeatureFormatError(f"truncated header: {len(data)} bytes", path=path)
    magic, version, count, dim = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FeatureFormatError(f"bad magic {magic!r}, expected {MAGIC!r}", path=path)
    if version != VERSION:
        raise FeatureFormatError(f"unsupported version {version}", path=path)
    if dim == 0:
        raise FeatureFormatError("header declares dim 0", path=path)

    available = (len(data) - HEADER.size) // 4
    expected = count * dim
    if (len(data) - HEADER.size) % 4 or available != expected:
        complete_rows = available // dim
        raise CountMismatchError(
            f"header declares {count} frames of dim {dim} but body holds {available} floats",
            path=path,
            frame=min(complete_rows, count),
        )
    matrix = np.frombuffer(data, dtype="<f4", count=expected, offset=HEADER.size)
    return matrix.reshape(count, dim).astype(np.float64)


def _read_csv(path: Path) -> np.ndarray:
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as e:
        raise FeatureFormatError(f"feature csv is not valid UTF-8: {e.reason}", path=path) from e
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise FeatureFormatError("empty feature csv", path=path)

    widths = [line.count(",") + 1 for line in lines]
    dim = widths[0]
    for frame, width in enumerate(widths):
        if width != dim:
            raise FeatureFormatError(f"row has {width} values, expected {dim}", path=path, frame=frame)

    try:
        frame_table = pd.read_csv(io.StringIO("\n".join(lines)), header=None, dtype=str)
    except _CSV_FAILURES as e:
        raise FeatureFormatError(f"unreadable feature csv: {e}", path=path) from e
    numeric = frame_table.apply(lambda col: pd.to_numeric(col.str.strip(), errors="coerce"))
    bad_rows = np.flatnonzero(numeric.isna().any(axis=1).to_numpy())
    if bad_rows.size:
        raise FeatureFormatError("non-numeric feature value", path=path, frame=int(bad_rows[0]))
    return numeric.to_numpy(dtype=np.float64)


def save_features(db: FrameDatabase, path: PathLike, format: Optional[FeatureFormat] = None) -> Path:
    """Write a database in binary (float32) or csv format."""
    path = Path(path)
    fmt = format or infer_format(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "binary":
        header = HEADER.pack(MAGIC, VERSION, len(db), db.dim)
        body = np.ascontiguousarray(db.features, dtype="<f4").tobytes()
        path.write_bytes(header + body)
    elif fmt == "csv":
        pd.DataFrame(db.features).to_csv(path, header=False, index=False, float_format="%.9g")
    else:
        raise FeatureFormatError(f"unknown feature format '{fmt}'", path=path)
    logger.info("Saved %d frames to %s (%s)", len(db), path, fmt)
    return path


def load_geotags(path: PathLike, expected_count: Optional[int] = None) -> np.ndarray:
    """
    Load a geotag CSV into an (N, 2) array of (lat, lon) sorted by frame index.

    Raises:
        GeotagError: bad header, non-numeric value, duplicate or missing frame
        CountMismatchError: row count differs from expected_count
    """
    path = Path(path)
    if not path.exists():
        raise GeotagError("geotag file does not exist", path=path)
    table = _read_table(path, GeotagError)
    table.columns = [str(c).strip() for c in table.columns]
    if list(table.columns) != ["frame", "lat", "lon"]:
        raise GeotagError(f"expected header frame,lat,lon, got {','.join(table.columns)}", path=path)

    numeric = table.apply(lambda col: pd.to_numeric(col.str.strip(), errors="coerce"))
    bad = np.flatnonzero(numeric.isna().any(axis=1).to_numpy())
    if bad.size:
        row = int(bad[0])
        frame = numeric["frame"].iloc[row]
        raise GeotagError(
            f"non-numeric value in row {row + 1}",
            path=path,
            frame=int(frame) if not pd.isna(frame) else None,
        )

    frames = numeric["frame"].to_numpy()
    if not np.all(frames == np.round(frames)):
        raise GeotagError("frame index must be an integer", path=path)
    frames = frames.astype(np.int64)

    duplicated = numeric["frame"].duplicated()
    if duplicated.any():
        raise GeotagError("duplicate frame index", path=path, frame=int(frames[duplicated.to_numpy()][0]))

    if expected_count is not None and len(frames) != expected_count:
        raise CountMismatchError(f"{len(frames)} geotag rows for {expected_count} frames", path=path)

    count = expected_count if expected_count is not None else len(frames)
    missing = np.setdiff1d(np.arange(count), frames)
    if missing.size:
        raise GeotagError("missing frame index", path=path, frame=int(missing[0]))
    extra = frames[(frames < 0) | (frames >= count)]
    if extra.size:
        raise GeotagError(f"frame index outside [0, {count})", path=path, frame=int(extra[0]))

    ordered = numeric.assign(frame=frames).sort_values("frame")
    return ordered[["lat", "lon"]].to_numpy(dtype=np.float64)


def save_geotags(geotags: np.ndarray, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table = pd.DataFrame({"frame": np.arange(len(geotags)), "lat": geotags[:, 0], "lon": geotags[:, 1]})
    table.to_csv(path, index=False, float_format="%.10f")
    return path


def load_ground_truth(path: PathLike, mode: Optional[TruthMode] = None) -> GroundTruth:
    """
    Load ground truth; the mode is taken from the header when not given.

    Raises:
        GroundTruthError: header/mode mismatch, non-numeric value, duplicate query
    """
    path = Path(path)
    if not path.exists():
        raise GroundTruthError("ground-truth file does not exist", path=path)
    table = _read_table(path, GroundTruthError)
    columns = [str(c).strip() for c in table.columns]
    table.columns = columns

    detected: Optional[TruthMode] = None
    if columns == ["query", "db"]:
        detected = "frame"
    elif columns == ["query", "lat", "lon"]:
        detected = "gps"
    if detected is None:
        raise GroundTruthError(f"unrecognized ground-truth header {','.join(columns)}", path=path)
    if mode is not None and mode != detected:
        raise GroundTruthError(f"requested {mode} ground truth but file holds {detected} truth", path=path)

    numeric = table.apply(lambda col: pd.to_numeric(col.str.strip(), errors="coerce"))
    bad = np.flatnonzero(numeric.isna().any(axis=1).to_numpy())
    if bad.size:
        raise GroundTruthError(f"non-numeric value in row {int(bad[0]) + 1}", path=path)

    queries = numeric["query"].to_numpy().astype(np.int64)
    duplicated = numeric["query"].duplicated().to_numpy()
    if duplicated.any():
        raise GroundTruthError("duplicate query index", path=path, frame=int(queries[duplicated][0]))

    if detected == "frame":
        truths = numeric["db"].to_numpy().astype(np.int64)
        pairs = {int(q): int(t) for q, t in zip(queries, truths)}
    else:
        coords = numeric[["lat", "lon"]].to_numpy(dtype=np.float64)
        pairs = {int(q): (float(lat), float(lon)) for q, (lat, lon) in zip(queries, coords)}
    logger.info("Loaded %d %s ground-truth pairs from %s", len(pairs), detected, path)
    return GroundTruth(detected, pairs)


def save_ground_truth(truth: GroundTruth, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    queries = sorted(truth.pairs)
    if truth.mode == "frame":
        table = pd.DataFrame({"query": queries, "db": [int(truth.pairs[q]) for q in queries]})
        table.to_csv(path, index=False)
    else:
        coords = np.array([truth.pairs[q] for q in queries], dtype=np.float64).reshape(-1, 2)
        table = pd.DataFrame({"query": queries, "lat": coords[:, 0], "lon": coords[:, 1]})
        table.to_csv(path, index=False, float_format="%.10f")
    return path
