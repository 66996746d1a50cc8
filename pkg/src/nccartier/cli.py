"""Command-line driver: ``compute``, ``verify`` and ``report``.

Exit codes: 0 all suites pass, 1 a suite failed, 2 inconclusive
(truncation or size budget), 3 input error.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import io
import json
import os
import pickle
import re
import sys
import tempfile
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .algebras import (
    Algebra,
    AxiomError,
    FiniteMonoid,
    check,
    cyclic_group,
    group_algebra,
    matrix_algebra,
    monoid_algebra,
    prime_field,
    truncated_monoid,
    truncated_polynomial,
)
from .derham import (
    PresentedAlgebra,
    cyclic_presentation,
    parse_presentation,
    truncated_presentation,
)
from .suites import NEEDS_ODD_PRIME, SUITES, Runner, Source

SCHEMA = "nccartier.report/1"
CACHE_VERSION = 1
CACHE_ENV = "NCCARTIER_CACHE_DIR"


class SpecError(ValueError):
    """Malformed algebra specification, with a position when known."""

    def __init__(self, msg: str, line: int | None = None, col: int | None = None, path: str = ""):
        where = ":".join(str(x) for x in (path, line, col) if x not in (None, ""))
        super().__init__(f"{where}: {msg}" if where else msg)
        self.line, self.col = line, col


class InputError(ValueError):
    pass


# ---------------------------------------------------------------------------
# algebra sources


def parse_algebra_spec(path) -> Algebra | FiniteMonoid | PresentedAlgebra:
    """Read an algebra file.

    Sections: ``[meta]`` (``p``, ``dim``, ``labels``, ``name``), ``[unit]``,
    ``[product]`` (``i j -> k:c, ...``), ``[presentation]`` (``variables``,
    ``relations``) and ``[monoid]`` (``identity``, ``zero`` and table rows).
    A monoid table wins over a presentation, which wins over a product
    table; when several are given they must describe the same algebra.
    """
    path = str(path)
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise SpecError(f"cannot read: {e.strerror}", path=path) from None
    sections: dict[str, list[tuple[int, str]]] = {}
    current = None
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        m = re.fullmatch(r"\s*\[(\w+)\]\s*", line)
        if m:
            current = m.group(1).lower()
            if current not in ("meta", "unit", "product", "presentation", "monoid"):
                raise SpecError(f"unknown section [{current}]", ln, line.index("[") + 1, path)
            sections.setdefault(current, [])
            continue
        if current is None:
            raise SpecError("content before the first section", ln, 1, path)
        sections[current].append((ln, line))
    meta = _keyvals(sections.get("meta", []), path)
    p = _int(meta.get("p"), path) if "p" in meta else None
    name = meta.get("name", (None, None, Path(path).stem))[2]

    monoid = _parse_monoid(sections["monoid"], path, name) if "monoid" in sections else None
    pres = None
    if "presentation" in sections:
        kv = _keyvals(sections["presentation"], path)
        if p is None:
            raise SpecError("[presentation] needs p in [meta]", path=path)
        vars_ = [v.strip() for v in kv.get("variables", (0, 0, ""))[2].split(",") if v.strip()]
        rels = [r.strip() for r in kv.get("relations", (0, 0, ""))[2].split(",") if r.strip()]
        try:
            pres = parse_presentation(p, vars_, rels, name)
        except (ValueError, SyntaxError, TypeError) as e:
            ln = kv.get("relations", (None,))[0]
            raise SpecError(str(e), ln, None, path) from None
    alg = _parse_table(sections, meta, p, path, name) if "product" in sections else None

    if alg is not None:
        check(alg)
    candidates = [x for x in (monoid, pres) if x is not None]
    if alg is not None and candidates:
        other = monoid_algebra(monoid, p) if monoid is not None else pres.to_algebra()
        if other.dim != alg.dim or not np.array_equal(other.st, alg.st):
            raise SpecError("[product] disagrees with the other description", path=path)
    if monoid is not None:
        return monoid
    if pres is not None:
        check(pres.to_algebra())
        return pres
    if alg is not None:
        return alg
    raise SpecError("no [product], [presentation] or [monoid] section", path=path)


def _keyvals(lines, path):
    out = {}
    for ln, line in lines:
        if "=" not in line:
            raise SpecError("expected key = value", ln, 1, path)
        k, v = line.split("=", 1)
        out[k.strip().lower()] = (ln, line.index("=") + 2, v.strip())
    return out


def _int(entry, path):
    ln, col, v = entry
    try:
        return int(v)
    except ValueError:
        raise SpecError(f"expected an integer, got {v!r}", ln, col, path) from None


def _parse_table(sections, meta, p, path, name) -> Algebra:
    if p is None:
        raise SpecError("[product] needs p in [meta]", path=path)
    if "dim" not in meta:
        raise SpecError("[product] needs dim in [meta]", path=path)
    dim = _int(meta["dim"], path)
    st = np.zeros((dim, dim, dim), dtype=np.int64)
    pat = re.compile(r"\s*(\d+)\s+(\d+)\s*->\s*(.*)")
    for ln, line in sections["product"]:
        m = pat.fullmatch(line)
        if not m:
            raise SpecError("expected 'i j -> k:c, ...'", ln, 1, path)
        i, j = int(m.group(1)), int(m.group(2))
        if i >= dim or j >= dim:
            raise SpecError(f"index out of range (dim {dim})", ln, m.start(1) + 1, path)
        rhs = m.group(3).strip()
        for term in filter(None, (t.strip() for t in rhs.split(","))):
            tm = re.fullmatch(r"(\d+)\s*(?::\s*(-?\d+))?", term)
            col = m.start(3) + rhs.find(term) + 1
            if not tm or int(tm.group(1)) >= dim:
                raise SpecError(f"bad term {term!r}", ln, col, path)
            st[i, j, int(tm.group(1))] += int(tm.group(2) or 1)
    unit = np.zeros(dim, dtype=np.int64)
    if "unit" in sections:
        ln, line = sections["unit"][0]
        vals = line.split()
        if len(vals) != dim or not all(re.fullmatch(r"-?\d+", v) for v in vals):
            raise SpecError(f"[unit] needs {dim} integers", ln, 1, path)
        unit[:] = [int(v) for v in vals]
    else:
        unit[0] = 1
    labels = meta.get("labels", (0, 0, ""))[2]
    labels = tuple(x.strip() for x in labels.split(",")) if labels else tuple(f"e{i}" for i in range(dim))
    if len(labels) != dim:
        raise SpecError(f"{len(labels)} labels for dim {dim}", meta["labels"][0], meta["labels"][1], path)
    return Algebra(p, st, unit, labels, name)


def _parse_monoid(lines, path, name) -> FiniteMonoid:
    kv, rows = {}, []
    for ln, line in lines:
        if "=" in line:
            k, v = line.split("=", 1)
            kv[k.strip().lower()] = (ln, line.index("=") + 2, v.strip())
        else:
            try:
                rows.append(tuple(int(x) for x in line.split()))
            except ValueError:
                raise SpecError("table rows are integers", ln, 1, path) from None
    ident = _int(kv["identity"], path) if "identity" in kv else 0
    zero = _int(kv["zero"], path) if "zero" in kv else None
    labels = tuple(x.strip() for x in kv["labels"][2].split(",")) if "labels" in kv else None
    G = FiniteMonoid(tuple(rows), ident, zero, labels, name)
    G.validate()
    return G


def load_source(algebra: str, p: int) -> Source:
    """Builtin name (``group:Z/n``, ``trunc:m``, ``matrix:n``, ``field``) or algebra file."""
    try:
        return _load_source(algebra, p)
    except (SpecError, AxiomError, InputError):
        raise
    except ValueError as e:
        raise InputError(f"{algebra}: {e}") from None


def _load_source(algebra: str, p: int) -> Source:
    m = re.fullmatch(r"group:Z/(\d+)", algebra)
    if m:
        n = int(m.group(1))
        return Source(group_algebra(n, p), cyclic_group(n), cyclic_presentation(n, p), algebra)
    m = re.fullmatch(r"trunc:(\d+)", algebra)
    if m:
        k = int(m.group(1))
        return Source(truncated_polynomial(k, p), truncated_monoid(k), truncated_presentation(k, p), algebra)
    m = re.fullmatch(r"matrix:(\d+)", algebra)
    if m:
        return Source(matrix_algebra(int(m.group(1)), p), None, None, algebra)
    if algebra == "field":
        return Source(prime_field(p), truncated_monoid(1), PresentedAlgebra(p, (), ()), algebra)
    if not Path(algebra).exists():
        raise InputError(f"unknown algebra {algebra!r}: not a builtin and no such file")
    obj = parse_algebra_spec(algebra)
    if isinstance(obj, FiniteMonoid):
        return Source(check(monoid_algebra(obj, p)), obj, None, algebra)
    if obj.p != p:
        raise InputError(f"algebra file is over F_{obj.p} but --prime is {p}")
    if isinstance(obj, PresentedAlgebra):
        return Source(obj.to_algebra(), None, obj, algebra)
    return Source(obj, None, None, algebra)


# ---------------------------------------------------------------------------
# configuration and cache


@dataclass
class RunConfig:
    prime: int
    algebra: str
    d_max: int
    suites: list[str] = field(default_factory=list)
    truncation: int | None = None
    seed: int = 0
    out: str | None = None
    format: str = "json"
    cache_dir: str | None = None
    matrices: bool = False

    def validate(self):
        from .linalg import is_prime

        if not is_prime(self.prime):
            raise InputError(f"--prime {self.prime} is not prime")
        if self.d_max < 0:
            raise InputError("--dmax must be non-negative")
        if self.truncation is not None and self.truncation < 0:
            raise InputError("--truncation must be non-negative")
        unknown = [s for s in self.suites if s not in SUITES]
        if unknown:
            raise InputError(f"unknown suites: {', '.join(unknown)}")
        bad = [s for s in self.suites if s in NEEDS_ODD_PRIME]
        if self.prime == 2 and bad:
            raise InputError(
                f"p = 2 is excluded for {', '.join(bad)}: the Cartier constructions are stated for odd primes only"
            )

    def echo(self) -> dict:
        d = asdict(self)
        for k in ("out", "format", "cache_dir"):
            d.pop(k)
        return d


class Cache:
    """Pickled suite results under ``(algebra hash, p, N, construction)``."""

    def __init__(self, root: str | None):
        root = root or os.environ.get(CACHE_ENV)
        self.root = Path(root) if root else None
        self.hits = 0

    def key(self, *parts) -> str:
        h = hashlib.sha256(repr(parts).encode()).hexdigest()
        return h[:32]

    def get(self, key):
        if self.root is None:
            return None
        try:
            with open(self.root / f"{key}.pkl", "rb") as f:
                version, value = pickle.load(f)
            if version != CACHE_VERSION:
                return None
        except Exception:
            return None  # missing or corrupt: recompute
        self.hits += 1
        return value

    def put(self, key, value):
        if self.root is None:
            return
        self.root.mkdir(parents=True, exist_ok=True)
        _atomic_write(self.root / f"{key}.pkl", pickle.dumps((CACHE_VERSION, value)))


def algebra_hash(A: Algebra) -> str:
    h = hashlib.sha256()
    h.update(f"{A.p}:{A.dim}".encode())
    h.update(np.ascontiguousarray(A.st).tobytes())
    h.update(np.ascontiguousarray(A.unit).tobytes())
    return h.hexdigest()


def _atomic_write(path: Path, data: bytes):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# running and reporting


def run_suite(config: RunConfig) -> dict:
    """Run the selected suites and build the report."""
    config.validate()
    src = load_source(config.algebra, config.prime)
    cache = Cache(config.cache_dir)
    runner = Runner(src, config.prime, config.d_max, config.truncation, config.seed, matrices=config.matrices)
    ahash = algebra_hash(src.algebra)
    results, timings = [], {}
    for name in config.suites:
        key = cache.key(ahash, config.prime, config.truncation, name, config.d_max, config.seed, config.matrices)
        t0 = time.perf_counter()
        res = cache.get(key)
        if res is None:
            res = runner.run(name)
            if not res["status"].startswith("inconclusive"):
                cache.put(key, res)
        timings[name] = round(time.perf_counter() - t0, 3)
        results.append(res)
    return {
        "schema": SCHEMA,
        "tool": {"name": "nccartier", "version": __version__},
        "config": config.echo(),
        "algebra": {"name": src.algebra.name, "dim": src.algebra.dim, "hash": ahash},
        "results": results,
        # everything that may differ between identical runs lives here
        "run": {
            "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
            "timings": timings,
            "cache_hits": cache.hits,
        },
    }


def exit_code(report: dict) -> int:
    st = [r["status"] for r in report["results"]]
    if any(s == "fail" for s in st):
        return 1
    if any(s.startswith("inconclusive") for s in st):
        return 2
    return 0


def render(report: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report, indent=2, sort_keys=True) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["suite", "degree", "quantity", "value"])
        for r in report["results"]:
            w.writerow([r["name"], "", "status", r["status"]])
            for q, vals in r["dims"].items():
                if isinstance(vals, list):
                    for d, v in enumerate(vals):
                        w.writerow([r["name"], d, q, v])
                else:
                    w.writerow([r["name"], "", q, vals])
        return buf.getvalue()
    if fmt == "text":
        cfg = report["config"]
        lines = [
            f"nccartier {report['tool']['version']}  algebra {report['algebra']['name']}"
            f"  p={cfg['prime']}  dmax={cfg['d_max']}  seed={cfg['seed']}",
        ]
        width = max([len(r["name"]) for r in report["results"]] + [5])
        for r in report["results"]:
            dims = "  ".join(f"{k}={v}" for k, v in r["dims"].items())
            lines.append(f"{r['name']:<{width}}  {r['status']:<8}  {dims}".rstrip())
        return "\n".join(lines) + "\n"
    raise InputError(f"unknown format {fmt!r}")


def emit_report(report: dict, fmt: str, out: str | None = None) -> str:
    text = render(report, fmt)
    if out is None:
        sys.stdout.write(text)
    else:
        try:
            _atomic_write(Path(out), text.encode())
        except OSError as e:
            raise InputError(f"cannot write {out}: {e.strerror}") from None
    return text


# ---------------------------------------------------------------------------
# argument parsing


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nccartier", description="Cartier isomorphism computations over F_p.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp, suites_default):
        sp.add_argument("--prime", "-p", type=int, default=3)
        sp.add_argument("--algebra", "-a", default="group:Z/2",
                        help="group:Z/n, trunc:m, matrix:n, field, or an algebra file")
        sp.add_argument("--dmax", type=int, default=1)
        sp.add_argument("--suites", default=suites_default,
                        help=f"comma-separated subset of: {', '.join(SUITES)}; 'all' for every suite")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--format", choices=("json", "csv", "text"), default="text")
        sp.add_argument("--out")
        sp.add_argument("--cache-dir", help=f"result cache (default: ${CACHE_ENV}, else no cache)")
        sp.add_argument("--truncation", type=int, help="number of levels N to build")
        sp.add_argument("--matrices", action="store_true", help="include homology-level matrices")

    common(sub.add_parser("compute", help="dimensions only"), "hh-dims")
    common(sub.add_parser("verify", help="run verification suites"), "all")
    rp = sub.add_parser("report", help="re-render a saved JSON report")
    rp.add_argument("input")
    rp.add_argument("--format", choices=("json", "csv", "text"), default="text")
    rp.add_argument("--out")
    return ap


def _suite_list(s: str) -> list[str]:
    if s.strip() == "all":
        return list(SUITES)
    return [x.strip() for x in s.split(",") if x.strip()]


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "report":
            try:
                report = json.loads(Path(args.input).read_text())
            except (OSError, json.JSONDecodeError) as e:
                raise InputError(f"cannot read report {args.input}: {e}") from None
            if report.get("schema") != SCHEMA:
                raise InputError(f"unsupported report schema {report.get('schema')!r}")
            emit_report(report, args.format, args.out)
            return exit_code(report)
        cfg = RunConfig(args.prime, args.algebra, args.dmax, _suite_list(args.suites), args.truncation,
                        args.seed, args.out, args.format, args.cache_dir, args.matrices)
        report = run_suite(cfg)
        emit_report(report, cfg.format, cfg.out)
        return exit_code(report)
    except (InputError, SpecError, AxiomError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
