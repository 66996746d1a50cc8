"""Driving the command line from Python.

Runs two verification suites on the dual numbers, writes a JSON report,
re-renders it as CSV, and shows the exit code for a non-associative input.
"""

import json
import tempfile
from pathlib import Path

from nccartier.cli import main

with tempfile.TemporaryDirectory() as tmp:
    out = Path(tmp) / "report.json"
    code = main(["verify", "-a", "trunc:2", "--dmax", "2", "--suites", "hh-dims,kp,cartier",
                 "--format", "json", "--out", str(out)])
    doc = json.loads(out.read_text())
    print("exit code", code)
    for r in doc["results"]:
        print(f"  {r['name']:10s} {r['status']:6s} {r['dims']}")
    print("\nthe same report as CSV:")
    main(["report", str(out), "--format", "csv"])

    bad = Path(tmp) / "bad.txt"
    bad.write_text("[meta]\np = 3\ndim = 3\n[unit]\n1 0 0\n[product]\n0 0 -> 0\n0 1 -> 1\n0 2 -> 2\n"
                   "1 0 -> 1\n2 0 -> 2\n1 2 -> 1\n2 1 -> 2\n")
    print("\nnon-associative input:")
    print("exit code", main(["verify", "-a", str(bad), "--suites", "relations"]))
