"""Reading price CSVs and writing distributions, curves and reports."""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .qwalk import PositionDistribution
from .returns import PriceSeries

__all__ = [
    "DataFormatError",
    "read_price_csv",
    "file_digest",
    "write_json",
    "write_csv",
    "write_distribution",
    "write_curves",
    "fmt",
]


class DataFormatError(ValueError):
    pass


def fmt(x: float) -> str:
    """17 significant digits, enough to round-trip a double."""
    return format(float(x), ".17g")


def _missing(cell: str) -> bool:
    return cell.strip().lower() in ("", "null", "nan", "na", "n/a", "none", "-")


def read_price_csv(path, ticker: str | None = None) -> PriceSeries:
    """
    Load opening prices from a headered CSV.

    The header must contain ``date`` and ``open`` columns in any letter
    case; other columns are ignored. Rows with a missing or non-positive
    opening price are dropped. Remaining dates must be ISO ``YYYY-MM-DD``
    and strictly increasing.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        columns = {name.strip().lower(): i for i, name in enumerate(header)}
        if "date" not in columns or "open" not in columns:
            raise DataFormatError(f"{path}: header needs 'date' and 'open' columns, got {header}")
        i_date, i_open = columns["date"], columns["open"]

        dates, prices = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) <= max(i_date, i_open):
                raise DataFormatError(f"{path}:{lineno}: too few columns")
            cell = row[i_open]
            if _missing(cell):
                continue
            try:
                price = float(cell)
            except ValueError:
                raise DataFormatError(f"{path}:{lineno}: bad opening price {cell!r}") from None
            if not math.isfinite(price) or price <= 0:
                continue
            try:
                day = _dt.date.fromisoformat(row[i_date].strip()[:10])
            except ValueError:
                raise DataFormatError(f"{path}:{lineno}: bad date {row[i_date]!r}") from None
            if dates and day <= dates[-1]:
                raise DataFormatError(f"{path}:{lineno}: dates not strictly increasing at {day}")
            dates.append(day)
            prices.append(price)

    return PriceSeries(ticker or path.stem, tuple(dates), np.array(prices, dtype=float))


def file_digest(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (_dt.date, Path)):
        return str(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj))
    return path


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def write_distribution(stem, dist: PositionDistribution) -> tuple[Path, Path]:
    """``<stem>.csv`` with (coordinate, probability) rows and ``<stem>.json``."""
    stem = Path(stem)
    csv_path = write_csv(stem.with_suffix(".csv"), ["coordinate", "probability"],
                         zip(dist.positions, dist.probabilities))
    json_path = write_json(stem.with_suffix(".json"), dist.to_dict())
    return csv_path, json_path


def write_curves(path, edges, empirical, fitted) -> Path:
    """Plot-ready curve file: bin centre, empirical and fitted probability."""
    edges = np.asarray(edges, dtype=float)
    centers = 0.5 * (edges[:-1] + edges[1:])
    return write_csv(path, ["bin_center", "empirical", "fitted"], zip(centers, empirical, fitted))
