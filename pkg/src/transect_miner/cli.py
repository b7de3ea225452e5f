"""``transect-miner`` command line: synth, ingest, fit and rank.

All stages can share one output directory::

    transect-miner synth  --config run.toml --out run/
    transect-miner ingest --config run.toml --out run/ --input run/samples.csv
    transect-miner fit    --config run.toml --out run/
    transect-miner rank   --config run.toml --out run/

``ingest`` writes ``run/transects``, ``fit`` reads it and writes
``run/fits``, ``rank`` reads that and writes ``run/reports``.  Exit codes:
0 success, 2 I/O problem, 3 invalid user input, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import reports, svg
from .config import RunConfig
from .errors import (
    CoverageError,
    FitError,
    FormatError,
    GeometryError,
    InsufficientDataError,
    SelectionError,
    TransectMinerError,
)
from .ingest import parse_samples, project_to_transect, resolve_censoring, write_samples
from .pipeline import fit_transect, rank_bundle
from .ranking import material_comparison, top_k
from .synth import generate

EXIT_OK, EXIT_IO, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3, 4

log = logging.getLogger("transect_miner")


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _write_config(cfg, directory):
    reports.write_text(cfg.to_json(), Path(directory) / "run_config.json")


def cmd_synth(cfg, out, args):
    s = cfg["synth"]
    table, truth = generate(cfg.synth_config())
    rows = list(table.rows)
    for i, material in enumerate(s["null_materials"], start=1):
        extra, _ = generate(cfg.synth_config(material=material, seed_offset=1000 * i, planted=False))
        rows.extend(extra.rows)
    table = type(table)(tuple(rows), table.element_names, (s["material"], *s["null_materials"]))
    out.mkdir(parents=True, exist_ok=True)
    write_samples(table, out / "samples.csv")
    doc = truth.to_dict()
    doc["material"] = s["material"]
    doc["null_materials"] = list(s["null_materials"])
    reports.dump_json(doc, out / "truth.json")
    _write_config(cfg, out)
    print(f"wrote {len(table)} samples, {len(table.element_names)} elements to {out / 'samples.csv'}")
    print(f"planted: {', '.join(truth.planted_elements) or '(none)'}")
    return EXIT_OK


def cmd_ingest(cfg, out, args):
    c = cfg["ingest"]
    path = args.input or c["input"]
    if not path:
        raise CliError("no input file: set ingest.input or pass --input", EXIT_INPUT)
    if not Path(path).is_file():
        raise CliError(f"input file not found: {path}", EXIT_IO)
    table = parse_samples(path, c["delimiter"] or None)
    table = resolve_censoring(table, c["censoring"], c["censoring_fraction"])
    groups = list(table.counts())
    for material in c["materials"]:
        if material not in table.material_names:
            raise CliError(f"material not found: {material!r} (have {', '.join(table.material_names)})", EXIT_INPUT)
    sites = {s for s, _ in groups}
    for site in c["sites"]:
        if site not in sites:
            raise CliError(f"site not found: {site!r}", EXIT_INPUT)
    target = out / "transects"
    target.mkdir(parents=True, exist_ok=True)
    counts = table.counts()
    for site, material in groups:
        if c["sites"] and site not in c["sites"]:
            continue
        if c["materials"] and material not in c["materials"]:
            continue
        t = project_to_transect(table, site, material, c["max_missing_fraction"])
        reports.dump_json(reports.transect_to_dict(t), target / f"{reports.slug(site, material)}.transect.json")
        dropped = f", dropped {', '.join(t.dropped_elements)}" if t.dropped_elements else ""
        print(f"site {site} material {material}: {counts[(site, material)]} samples, "
              f"{len(t.element_names)} elements{dropped}")
    _write_config(cfg, target)
    return EXIT_OK


def _transect_files(directory):
    directory = Path(directory)
    if (directory / "transects").is_dir():
        directory = directory / "transects"
    files = sorted(directory.glob("*.transect.json"))
    if not files:
        raise CliError(f"no transect files in {directory}", EXIT_IO)
    return files


def cmd_fit(cfg, out, args):
    source = args.input or cfg["fit"]["input"] or out
    files = _transect_files(source)
    fit_cfg = cfg.fit_config()
    target = out / "fits"
    target.mkdir(parents=True, exist_ok=True)
    report = []
    total_ok = 0
    for path in files:
        t = reports.transect_from_dict(reports.load_json(path))
        for key in ("lambda_overrides", "power_overrides"):
            unknown = sorted(set(cfg["fit"][key]) - set(t.element_names))
            if unknown:
                log.warning("fit.%s names elements not in %s/%s: %s", key, t.site_id, t.material, ", ".join(unknown))
        bundle = fit_transect(t, fit_cfg)
        name = reports.slug(t.site_id, t.material)
        reports.write_bundle(bundle, target / name)
        for element in t.element_names:
            curve = bundle.fits.get(element)
            if curve is None:
                report.append([t.site_id, t.material, element, "failed", "", "", "", "", bundle.failed[element]])
                continue
            report.append([t.site_id, t.material, element, "converged", curve.iterations,
                           repr(curve.lam), repr(curve.edf), repr(curve.gcv_score), ""])
        total_ok += len(bundle.fits)
        print(f"site {t.site_id} material {t.material}: {len(bundle.fits)} fitted, {len(bundle.failed)} failed")
        for element, why in bundle.failed.items():
            print(f"  excluded {element}: {why}")
    with open(target / "convergence.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["site", "material", "element", "status", "iterations", "lambda", "edf", "gcv", "reason"])
        w.writerows(report)
    _write_config(cfg, target)
    if total_ok == 0:
        raise CliError("no element could be fitted", EXIT_NUMERIC)
    return EXIT_OK


def _bundle_dirs(directory):
    directory = Path(directory)
    if (directory / "fits").is_dir():
        directory = directory / "fits"
    dirs = sorted(p.parent for p in directory.glob("*/bundle.json"))
    if not dirs:
        raise CoverageError(f"no fit bundles in {directory}; run 'fit' first")
    return dirs


def cmd_rank(cfg, out, args):
    source = args.input or cfg["rank"]["input"] or out
    r = cfg["rank"]
    curv = cfg.curvature_config()
    digest = cfg.sha256()
    target = out / "reports"
    target.mkdir(parents=True, exist_ok=True)
    results = []
    for d in _bundle_dirs(source):
        bundle = reports.read_bundle(d)
        results.append((bundle, rank_bundle(bundle, curv, n_jobs=r["n_jobs"])))
    vmax = max((float(res.matrix.C.max()) for _, res in results if res.matrix.C.size), default=0.0)

    by_site = {}
    for bundle, res in results:
        name = reports.slug(res.site_id, res.material)
        mdir = target / name
        top = top_k(res.matrix, r["top_k"]) if res.profiles else res.ranked
        plot_pairs = {
            "all": {p.pair for p in res.profiles},
            "top": {(a, b) for a, b, _ in top},
            "none": set(),
        }[r["pair_plots"]]
        for prof in res.profiles:
            stem = mdir / "profiles" / reports.slug(*prof.pair)
            reports.write_profile_csv(prof, stem.with_suffix(".csv"), digest)
            reports.dump_json(reports.profile_to_dict(prof, digest), stem.with_suffix(".json"))
            if prof.pair in plot_pairs:
                reports.write_text(svg.curvature_svg(prof, bundle.positions), stem.with_suffix(".svg"))
        reports.write_matrix_csv(res.matrix, mdir / "c_matrix.csv", digest)
        reports.write_text(svg.heatmap_svg(res.matrix, vmax=vmax), mdir / "heatmap.svg")
        reports.write_ranked_csv(top, mdir / "top_k.csv", digest)
        reports.write_pathfinders_csv(res.pathfinders, mdir / "pathfinders.csv", digest)
        by_site.setdefault(res.site_id, []).append(top)
        lead = f"{top.entries[0][0]}/{top.entries[0][1]} c={top.entries[0][2]:.4g}" if len(top) else "no pairs"
        print(f"site {res.site_id} material {res.material}: {len(res.profiles)} pairs, top {lead}")

    for site, ranked in by_site.items():
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            table = material_comparison(ranked, r["top_k"])
        for w in caught:
            log.warning("%s", w.message)
        stem = target / f"comparison__{reports.slug(site)}"
        reports.write_comparison_csv(table, stem.with_suffix(".csv"), digest)
        if table.materials:
            reports.write_text(svg.comparison_svg(table, f"top-ranked c-values, site {site}"), stem.with_suffix(".svg"))
    _write_config(cfg, target)
    return EXIT_OK


COMMANDS = {"synth": cmd_synth, "ingest": cmd_ingest, "fit": cmd_fit, "rank": cmd_rank}


def build_parser():
    parser = argparse.ArgumentParser(prog="transect-miner", description=__doc__.split("\n")[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="TOML configuration file")
    parser.add_argument("--out", default=".", help="output directory (default: current directory)")
    parser.add_argument("--input", help="input file (ingest) or directory (fit, rank)")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config entry, e.g. --set fit.lambda=10 (repeatable)")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.config and not Path(args.config).is_file():
            raise CliError(f"config file not found: {args.config}", EXIT_IO)
        cfg = RunConfig.load(args.config, args.set)
        with np.errstate(all="ignore"):
            return COMMANDS[args.command](cfg, Path(args.out), args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (FitError, SelectionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FormatError, InsufficientDataError, GeometryError, CoverageError, TransectMinerError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
