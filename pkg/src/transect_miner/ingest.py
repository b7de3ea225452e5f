"""Sample-file parsing, censoring resolution and projection onto a transect.

Input files are delimited text with one header row.  The columns ``SITE``,
``TRAVERSE``, ``EAST``, ``NORTH`` and ``MATERIAL`` are required, ``WEIGHT``
is optional, and every other column holding numbers is an element.  Values
below a detection limit are written as ``<limit``; empty cells are missing.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import CellError, FormatError, GeometryError, InsufficientDataError

REQUIRED_COLUMNS = ("SITE", "TRAVERSE", "EAST", "NORTH", "MATERIAL")
WEIGHT_COLUMN = "WEIGHT"
CENSORING_POLICIES = ("half_limit", "fixed_fraction", "drop")


@dataclass(frozen=True)
class Censored:
    """Concentration reported as below the detection limit ``limit``."""

    limit: float


@dataclass(frozen=True)
class SampleRow:
    site_id: str
    traverse_id: str
    easting: float
    northing: float
    material: str
    weight: float = 1.0
    # one slot per element: float value, Censored, or None (missing)
    concentrations: tuple = ()


@dataclass(frozen=True)
class SampleTable:
    rows: tuple
    element_names: tuple
    material_names: tuple

    def __len__(self):
        return len(self.rows)

    @property
    def n_censored(self):
        return sum(isinstance(v, Censored) for r in self.rows for v in r.concentrations)

    def counts(self):
        """Return ``{(site, material): n_rows}`` in first-seen order."""
        out = {}
        for r in self.rows:
            key = (r.site_id, r.material)
            out[key] = out.get(key, 0) + 1
        return out


@dataclass(frozen=True)
class Transect:
    """One material at one site, reduced to ordered 1-D positions."""

    site_id: str
    material: str
    positions: np.ndarray
    Y: np.ndarray
    weights: np.ndarray
    element_names: tuple
    dropped_elements: tuple = ()
    source_rows: tuple = field(default=())

    @property
    def n(self):
        return len(self.positions)

    def column(self, element):
        return self.Y[:, self.element_names.index(element)]


def _parse_float(text):
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(text)
    return value


def _parse_slot(text):
    text = text.strip()
    if not text:
        return None
    if text.startswith("<"):
        limit = _parse_float(text[1:].strip())
        if limit <= 0:
            raise ValueError(text)
        return Censored(limit)
    value = _parse_float(text)
    if value <= 0:
        raise ValueError(text)
    return value


def _looks_numeric(text):
    try:
        _parse_slot(text)
    except ValueError:
        return False
    return True


def _sniff_delimiter(header_line):
    return ";" if header_line.count(";") > header_line.count(",") else ","


def parse_samples(path, delimiter=None):
    """Read a delimited sample file into a :class:`SampleTable`.

    Parameters
    ----------
    path : str or Path
        UTF-8 text file with one header row.
    delimiter : str, optional
        ``","`` or ``";"``; detected from the header line when omitted.

    Raises
    ------
    FileNotFoundError
        If `path` does not exist.
    FormatError
        Missing required columns, no element columns, or no data rows.
    CellError
        A coordinate, weight or element cell is not numeric.
    """
    text = Path(path).read_text(encoding="utf-8-sig")
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise FormatError(f"{path}: empty file, expected a header row")
    if delimiter is None:
        delimiter = _sniff_delimiter(lines[0])
    records = [r for r in csv.reader(io.StringIO(text), delimiter=delimiter) if any(c.strip() for c in r)]
    header = [h.strip() for h in records[0]]
    upper = [h.upper() for h in header]
    if len(set(upper)) != len(upper):
        raise FormatError(f"{path}: duplicate column names in header")
    missing = [c for c in REQUIRED_COLUMNS if c not in upper]
    if missing:
        raise FormatError(f"{path}: header lacks required column(s) {', '.join(missing)}")
    body = records[1:]
    if not body:
        raise FormatError(f"{path}: no samples")
    for i, rec in enumerate(body, start=2):
        if len(rec) != len(header):
            raise FormatError(f"{path}: row {i} has {len(rec)} fields, header has {len(header)}")

    index = {name: upper.index(name) for name in REQUIRED_COLUMNS}
    weight_idx = upper.index(WEIGHT_COLUMN) if WEIGHT_COLUMN in upper else None
    reserved = set(index.values()) | ({weight_idx} if weight_idx is not None else set())

    # a column is an element unless none of its filled cells is numeric (e.g. sample IDs)
    element_idx = []
    for j in range(len(header)):
        if j in reserved:
            continue
        filled = [rec[j] for rec in body if rec[j].strip()]
        if not filled or any(_looks_numeric(c) for c in filled):
            element_idx.append(j)
    if not element_idx:
        raise FormatError(f"{path}: no element columns")

    rows = []
    materials = []
    for i, rec in enumerate(body, start=2):
        def number(j):
            try:
                return _parse_float(rec[j])
            except ValueError:
                raise CellError(f"not a number: {rec[j]!r}", row=i, column=header[j]) from None

        slots = []
        for j in element_idx:
            try:
                slots.append(_parse_slot(rec[j]))
            except ValueError:
                raise CellError(
                    f"not a positive concentration: {rec[j]!r}", row=i, column=header[j]
                ) from None
        weight = 1.0
        if weight_idx is not None and rec[weight_idx].strip():
            weight = number(weight_idx)
            if weight < 0:
                raise CellError("negative weight", row=i, column=header[weight_idx])
        material = rec[index["MATERIAL"]].strip()
        if material not in materials:
            materials.append(material)
        rows.append(
            SampleRow(
                site_id=rec[index["SITE"]].strip(),
                traverse_id=rec[index["TRAVERSE"]].strip(),
                easting=number(index["EAST"]),
                northing=number(index["NORTH"]),
                material=material,
                weight=weight,
                concentrations=tuple(slots),
            )
        )
    return SampleTable(tuple(rows), tuple(header[j] for j in element_idx), tuple(materials))


def resolve_censoring(table, policy="half_limit", fraction=None):
    """Replace every censored slot according to `policy`.

    ``half_limit`` substitutes half the detection limit, ``fixed_fraction``
    substitutes ``fraction * limit`` with ``0 < fraction <= 1``, and ``drop``
    turns the slot into a missing value.
    """
    if policy == "half_limit":
        fraction = 0.5
    elif policy == "fixed_fraction":
        if fraction is None or not 0 < fraction <= 1:
            raise ValueError(f"fixed_fraction needs 0 < fraction <= 1, got {fraction!r}")
    elif policy != "drop":
        raise ValueError(f"unknown censoring policy {policy!r}; choose from {CENSORING_POLICIES}")

    def resolve(slot):
        if not isinstance(slot, Censored):
            return slot
        return None if policy == "drop" else slot.limit * fraction

    rows = tuple(
        replace(r, concentrations=tuple(resolve(s) for s in r.concentrations)) for r in table.rows
    )
    return replace(table, rows=rows)


def principal_positions(east, north):
    """Signed distance of each point along the principal line of the cloud.

    The line passes through the centroid along the leading eigenvector of the
    2x2 coordinate covariance.  The sign is fixed so that the eigenvector's
    largest-magnitude component is positive, and the result is shifted so
    that its minimum is zero.
    """
    xy = np.column_stack([np.asarray(east, float), np.asarray(north, float)])
    if len(xy) < 2:
        raise InsufficientDataError("need at least two points to define a transect")
    centered = xy - xy.mean(axis=0)
    cov = centered.T @ centered / len(xy)
    evals, evecs = np.linalg.eigh(cov)
    scale = 1.0 + np.abs(xy).max()
    if evals[-1] <= (1e-12 * scale) ** 2:
        raise GeometryError("sample coordinates are all identical; no transect direction")
    direction = evecs[:, -1]
    if direction[np.argmax(np.abs(direction))] < 0:
        direction = -direction
    proj = centered @ direction
    return proj - proj.min()


def project_to_transect(table, site_id, material, max_missing_fraction=0.1):
    """Collapse the rows of one (site, material) onto a 1-D transect.

    Elements missing in more than `max_missing_fraction` of the rows are
    dropped; remaining gaps take the value of the nearest sample along the
    transect (the earlier one on ties).  Censored slots must already be
    resolved.
    """
    rows = [r for r in table.rows if r.site_id == site_id and r.material == material]
    if len(rows) < 2:
        raise InsufficientDataError(
            f"site {site_id!r}, material {material!r}: {len(rows)} sample(s), need at least 2"
        )
    if any(isinstance(v, Censored) for r in rows for v in r.concentrations):
        raise ValueError("censored values present; call resolve_censoring first")
    source = [i for i, r in enumerate(table.rows) if r.site_id == site_id and r.material == material]

    pos = principal_positions([r.easting for r in rows], [r.northing for r in rows])
    order = np.argsort(pos, kind="stable")
    pos = pos[order]
    rows = [rows[i] for i in order]
    source = tuple(source[i] for i in order)

    raw = np.array(
        [[np.nan if v is None else v for v in r.concentrations] for r in rows], dtype=float
    ).reshape(len(rows), len(table.element_names))
    missing = np.isnan(raw)
    keep = missing.mean(axis=0) <= max_missing_fraction
    names = tuple(n for n, k in zip(table.element_names, keep) if k)
    dropped = tuple(n for n, k in zip(table.element_names, keep) if not k)
    if not names:
        raise InsufficientDataError(
            f"site {site_id!r}, material {material!r}: every element exceeds the missing-value limit"
        )
    Y = raw[:, keep]
    for j in range(Y.shape[1]):
        gaps = np.flatnonzero(np.isnan(Y[:, j]))
        if not len(gaps):
            continue
        have = np.flatnonzero(~np.isnan(Y[:, j]))
        for i in gaps:
            nearest = have[np.argmin(np.abs(pos[have] - pos[i]))]
            Y[i, j] = Y[nearest, j]

    return Transect(
        site_id=site_id,
        material=material,
        positions=pos,
        Y=Y,
        weights=np.array([r.weight for r in rows], dtype=float),
        element_names=names,
        dropped_elements=dropped,
        source_rows=source,
    )


def transects_from_table(table, site_ids=None, materials=None, max_missing_fraction=0.1):
    """Project every (site, material) group, in first-seen order."""
    out = []
    for site, material in table.counts():
        if site_ids is not None and site not in site_ids:
            continue
        if materials is not None and material not in materials:
            continue
        out.append(project_to_transect(table, site, material, max_missing_fraction))
    return out


def _format_slot(slot):
    if slot is None:
        return ""
    if isinstance(slot, Censored):
        return f"<{slot.limit!r}"
    return repr(float(slot))


def write_samples(table, path, delimiter=","):
    """Write `table` in the layout :func:`parse_samples` reads (exact round trip)."""
    header = [*REQUIRED_COLUMNS, WEIGHT_COLUMN, *table.element_names]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        writer.writerow(header)
        for r in table.rows:
            writer.writerow(
                [r.site_id, r.traverse_id, repr(float(r.easting)), repr(float(r.northing)),
                 r.material, repr(float(r.weight)), *(_format_slot(s) for s in r.concentrations)]
            )
