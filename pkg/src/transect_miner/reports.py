"""File formats: transects, fit bundles, profiles and ranking tables.

JSON floats use Python's shortest round-trip repr, so a curve written by one
process evaluates bit-identically when read by another.  Report CSVs start
with a ``# config_sha256=...`` comment line tying them to the run config.
"""

from __future__ import annotations

import csv
import json
import re
from pathlib import Path

import numpy as np

from .gam import FittedCurve
from .ingest import Transect
from .pipeline import FitBundle

TRANSECT_FORMAT = "transect-miner/transect"
BUNDLE_FORMAT = "transect-miner/fit-bundle"
PROFILE_FORMAT = "transect-miner/curvature-profile"


def slug(*parts):
    """Filesystem-safe name joining `parts` with double underscores."""
    return "__".join(re.sub(r"[^A-Za-z0-9._-]+", "-", str(p)) for p in parts)


def dump_json(doc, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def load_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def transect_to_dict(t):
    return {
        "format": TRANSECT_FORMAT,
        "version": 1,
        "site_id": t.site_id,
        "material": t.material,
        "element_names": list(t.element_names),
        "dropped_elements": list(t.dropped_elements),
        "positions": t.positions.tolist(),
        "weights": t.weights.tolist(),
        "Y": t.Y.tolist(),
        "source_rows": list(t.source_rows),
    }


def transect_from_dict(doc):
    if doc.get("format") != TRANSECT_FORMAT:
        raise ValueError(f"not a transect document: format={doc.get('format')!r}")
    names = tuple(doc["element_names"])
    return Transect(
        site_id=doc["site_id"],
        material=doc["material"],
        positions=np.array(doc["positions"], dtype=float),
        Y=np.array(doc["Y"], dtype=float).reshape(len(doc["positions"]), len(names)),
        weights=np.array(doc["weights"], dtype=float),
        element_names=names,
        dropped_elements=tuple(doc.get("dropped_elements", ())),
        source_rows=tuple(doc.get("source_rows", ())),
    )


def write_bundle(bundle, directory):
    """One JSON per fitted element plus ``bundle.json`` with order and failures."""
    directory = Path(directory)
    for name, curve in bundle.fits.items():
        dump_json(curve.to_dict(), directory / f"{slug(name)}.json")
    dump_json(
        {
            "format": BUNDLE_FORMAT,
            "version": 1,
            "site_id": bundle.site_id,
            "material": bundle.material,
            "positions": bundle.positions.tolist(),
            "elements": list(bundle.fits),
            "files": {name: f"{slug(name)}.json" for name in bundle.fits},
            "failed": dict(bundle.failed),
        },
        directory / "bundle.json",
    )


def read_bundle(directory):
    directory = Path(directory)
    doc = load_json(directory / "bundle.json")
    if doc.get("format") != BUNDLE_FORMAT:
        raise ValueError(f"{directory}: not a fit bundle")
    fits = {name: FittedCurve.from_dict(load_json(directory / doc["files"][name])) for name in doc["elements"]}
    return FitBundle(doc["site_id"], doc["material"], np.array(doc["positions"], dtype=float), fits, doc["failed"])


def _num(v):
    return repr(float(v))


def _writer(fh, config_hash):
    if config_hash:
        fh.write(f"# config_sha256={config_hash}\n")
    return csv.writer(fh, lineterminator="\n")


def _open(path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return open(path, "w", encoding="utf-8", newline="")


def write_profile_csv(profile, path, config_hash=None):
    exceeds = profile.exceeds()
    with _open(path) as fh:
        w = _writer(fh, config_hash)
        w.writerow(["u", "x", "g", "kappa", "exceeds"])
        c = profile.curve
        for i in range(len(c.u)):
            w.writerow([_num(c.u[i]), _num(c.x[i]), _num(c.g[i]), _num(profile.kappa[i]), int(exceeds[i])])


def profile_to_dict(profile, config_hash=None):
    doc = {
        "format": PROFILE_FORMAT,
        "version": 1,
        "pair": list(profile.pair),
        "c_value": profile.c_value,
        "threshold": profile.threshold,
        "scale_k": profile.curve.k,
        "degenerate": profile.curve.degenerate,
        "n_crossings": profile.n_crossings,
        "intervals_u": profile.intervals.tolist(),
        "intervals_x": profile.intervals_x.tolist(),
        "interval_maxima": profile.interval_maxima.tolist(),
        "flagged_samples": list(profile.flagged),
    }
    if config_hash:
        doc["config_sha256"] = config_hash
    return doc


def write_matrix_csv(matrix, path, config_hash=None):
    names = matrix.element_names
    with _open(path) as fh:
        w = _writer(fh, config_hash)
        w.writerow(["element", *names])
        for i, name in enumerate(names):
            w.writerow([name, *(_num(v) for v in matrix.C[i])])


def read_matrix_csv(path):
    with open(path, encoding="utf-8") as fh:
        rows = [r for r in csv.reader(line for line in fh if not line.startswith("#"))]
    names = tuple(rows[0][1:])
    return names, np.array([[float(v) for v in r[1:]] for r in rows[1:]])


def write_ranked_csv(ranked, path, config_hash=None):
    with _open(path) as fh:
        w = _writer(fh, config_hash)
        w.writerow(["rank", "element_1", "element_2", "c_value"])
        for r, (a, b, c) in enumerate(ranked, start=1):
            w.writerow([r, a, b, _num(c)])


def write_pathfinders_csv(scores, path, config_hash=None):
    with _open(path) as fh:
        w = _writer(fh, config_hash)
        w.writerow(["rank", "element", "row_mean", "row_max"])
        for r, s in enumerate(scores, start=1):
            w.writerow([r, s.element, _num(s.mean), _num(s.max)])


def write_comparison_csv(table, path, config_hash=None):
    with _open(path) as fh:
        w = _writer(fh, config_hash)
        w.writerow(["rank", *table.materials])
        for i, r in enumerate(table.ranks):
            w.writerow([int(r), *("" if np.isnan(v) else _num(v) for v in table.values[i])])


def write_text(text, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
