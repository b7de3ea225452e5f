"""The staged command-line workflow, driven from Python.

Equivalent shell session::

    transect-miner synth  --out run --set 'synth.null_materials=["leaf"]'
    transect-miner ingest --out run --input run/samples.csv
    transect-miner fit    --out run
    transect-miner rank   --out run --set rank.top_k=10

A single element can then be refitted with a fixed smoothing parameter
(``--set 'fit.lambda_overrides={E03 = 10.0}'``) and re-ranked without
repeating ingest.

Run:  python demos/04_cli_pipeline.py
"""

from pathlib import Path

from transect_miner.cli import main

run = Path("demo_output") / "run"
steps = [
    ["synth", "--out", str(run), "--set", 'synth.null_materials=["leaf"]'],
    ["ingest", "--out", str(run), "--input", str(run / "samples.csv")],
    ["fit", "--out", str(run)],
    ["rank", "--out", str(run), "--set", "rank.top_k=10"],
]
for argv in steps:
    print("$ transect-miner", " ".join(argv))
    code = main(argv)
    if code:
        raise SystemExit(code)

for path in sorted((run / "reports").glob("*")):
    print(path)
