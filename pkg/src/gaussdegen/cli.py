"""Command-line interface: ``gaussdegen analyze|construct|cartan|sample``.

Exit codes: 0 success, 1 error, 2 the input was analysed but shows no
degenerate Gauss map to report (NON_DEGENERATE or UNDETERMINED).
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import re
import sys
import tempfile

import numpy as np

from . import __version__, cartan, constructors, dsl, engine
from .proj import ProjSubspace

SCHEMA = "gaussdegen/1"
EXIT_OK, EXIT_ERROR, EXIT_DEGENERATE = 0, 1, 2

_NAMES_RE = re.compile(r"^\s*#\s*names:\s*(.+)$", re.MULTILINE)


class CLIError(Exception):
    pass


# ------------------------------------------------------------- serialization


def _fmt_float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        return "null"
    if x == 0.0:
        return "0.0"
    return format(x, ".17g")


def dumps(obj, indent: int = 0) -> str:
    """Deterministic JSON: sorted keys, 17 significant digits for floats."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_json_str(str(k))}: {dumps(obj[k], indent + 1)}" for k in sorted(obj, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        return "[\n" + ",\n".join(pad + dumps(v, indent + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, np.ndarray):
        return dumps(obj.tolist(), indent)
    return _json_str(str(obj))


def _json_str(s: str) -> str:
    return json.dumps(s)


def write_atomic(path: str, text: str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read(path: str) -> tuple[str, str]:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise CLIError(f"cannot read {path}: {exc.strerror}") from None
    return raw.decode("utf-8"), hashlib.sha256(raw).hexdigest()


def _param_names(text: str, n: int) -> list[str]:
    m = _NAMES_RE.search(text)
    if m:
        names = m.group(1).split()
        if len(names) == n:
            return names
    return [f"t{i + 1}" for i in range(n)]


# ------------------------------------------------------------------ analyze


def sample_record(spec: dsl.VarietySpec, u, tol: float) -> dict:
    rec = {"u": [float(v) for v in u]}
    try:
        loc = engine._locals(spec, u, 3)[0]
        td = engine._rank_from_local(loc, tol)
    except (engine.SingularPointError, dsl.EvaluationError) as exc:
        rec["error"] = str(exc)
        return rec
    rec["rank"] = td.rank
    rec["leaf_dim"] = td.leaf.dim
    if 0 < td.rank < spec.n:
        try:
            fd = engine._fundamental_from(loc, td)
        except engine.FrameError as exc:
            rec["error"] = str(exc)
            return rec
        fp = engine.focal_polynomial(fd)
        rec["focal_polynomial"] = fp.as_list()
        rec["r_fold"] = bool(engine.is_r_fold_focus(fp, tol))
        rec["symmetry_residuals"] = [float(v) for v in fd.symmetry_residuals]
        if fd.l == 1 and rec["r_fold"]:
            try:
                focus = engine._focus_from(loc, td)[0]
                rec["focus"] = [float(v) for v in focus.coords / np.linalg.norm(focus.coords)]
            except engine.NotApplicable:
                pass
    return rec


def cmd_analyze(args) -> int:
    text, digest = _read(args.spec_file)
    spec = dsl.parse(text)
    if args.grid < 1:
        raise CLIError(f"invalid grid size {args.grid}")
    grid = engine.default_grid(spec, args.grid)
    verdict = engine.classify(spec, grid, tol=args.tol, fd_tol=args.fd_tol)
    report = {
        "schema": SCHEMA,
        "kind": "analysis",
        "input": {"file": os.path.basename(args.spec_file), "sha256": digest},
        "spec": {"n": spec.n, "N": spec.N, "text": spec.text()},
        "tolerances": {"rank": args.tol, "focus_rank": args.fd_tol,
                       "root_cluster": engine.ROOT_CLUSTER_TOL},
        "grid": {"per_axis": args.grid, "points": len(grid)},
        "verdict": {"case": verdict.case_tag.value, "focal_dim": verdict.focal_dim,
                    "evidence": verdict.evidence},
        "samples": [sample_record(spec, u, args.tol) for u in grid],
    }
    write_atomic(args.out, dumps(report) + "\n")
    print(f"{verdict.case_tag.value}" + (f" ({verdict.detail})" if verdict.detail else ""),
          file=sys.stderr)
    if verdict.case_tag in (engine.CaseTag.NON_DEGENERATE, engine.CaseTag.UNDETERMINED):
        return EXIT_DEGENERATE
    return EXIT_OK


# ---------------------------------------------------------------- construct


def _spec_file_text(spec: dsl.VarietySpec, names=None, comment: str = "") -> str:
    lines = []
    if comment:
        lines.append(f"# {comment}")
    if names:
        lines.append("# names: " + " ".join(names))
    lines.append(spec.text().rstrip("\n"))
    return "\n".join(lines) + "\n"


def _parse_vector(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise CLIError(f"bad vector {text!r}: expected comma-separated numbers") from None


def cmd_construct(args) -> int:
    if args.kind == "cone":
        if not args.vertex or not args.directrix:
            raise CLIError("cone needs --vertex (repeatable) and --directrix")
        directrix = dsl.parse(_read(args.directrix)[0])
        vertex = ProjSubspace.span(np.array([_parse_vector(v) for v in args.vertex]))
        spec = constructors.build_cone(vertex, directrix)
        names = [f"t{i + 1}" for i in range(directrix.n)] + [f"s{j + 1}" for j in range(vertex.dim + 1)]
        text = _spec_file_text(spec, names, "cone")
    elif args.kind == "twisted-cone":
        if not args.family:
            raise CLIError("twisted-cone needs --family")
        fam = constructors.parse_family(_read(args.family)[0])
        spec = constructors.build_twisted_cone(fam)
        text = _spec_file_text(spec, ["t", "phi", "s"], "twisted cone")
    else:
        if not args.family or not args.curve:
            raise CLIError("twisted-cylinder needs --curve and --family")
        curve = dsl.parse(_read(args.curve)[0])
        fam = constructors.parse_family(_read(args.family)[0])
        spec = constructors.build_twisted_cylinder(curve, fam)
        text = _spec_file_text(spec, ["t", "phi", "s"], "twisted cylinder; x4 = 0 is the hyperplane at infinity")
    write_atomic(args.out, text)
    return EXIT_OK


# ------------------------------------------------------------------- cartan


def _parse_overrides(items) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise CLIError(f"bad --set {item!r}: expected NAME=VALUE")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def cmd_cartan(args) -> int:
    _, digest = _read(args.tableau_file)
    t = cartan.load_tableau(args.tableau_file, _parse_overrides(args.set))
    rep = cartan.cartan_test(t)
    report = {
        "schema": SCHEMA,
        "kind": "cartan",
        "input": {"file": os.path.basename(args.tableau_file), "sha256": digest},
        "name": t.name,
        "constants": {k: str(v) for k, v in t.constants.items()},
        "flags": {"trials": cartan.FLAG_TRIALS, "seed": cartan.FLAG_SEED},
    }
    report.update(rep.as_dict())
    write_atomic(args.out, dumps(report) + "\n")
    return EXIT_OK


# ------------------------------------------------------------------- sample


def _focus_rows(spec, pts, tol):
    rows = []
    seen = set()
    for u in pts:
        try:
            loc = engine._locals(spec, u, 3)[0]
            td = engine._rank_from_local(loc, tol)
            if td.leaf.dim != 1 or td.rank == 0:
                continue
            f = engine._focus_from(loc, td)[0].coords
        except (engine.NotApplicable, engine.SingularPointError, engine.FrameError, dsl.EvaluationError):
            continue
        key = tuple(np.round(f / np.linalg.norm(f) * np.sign(f[np.argmax(np.abs(f))]), 10))
        if key not in seen:
            seen.add(key)
            rows.append((u, f))
    return rows


def cmd_sample(args) -> int:
    text, _ = _read(args.spec_file)
    spec = dsl.parse(text)
    if args.grid < 1:
        raise CLIError(f"invalid grid size {args.grid}")
    if not 0 <= args.chart <= spec.N:
        raise CLIError(f"chart index {args.chart} out of range 0..{spec.N}")
    axes = [np.linspace(lo, hi, args.grid) for lo, hi in zip(spec.lower, spec.upper)]
    pts = np.array(np.meshgrid(*axes, indexing="ij")).reshape(spec.n, -1).T
    names = _param_names(text, spec.n)
    xcols = [f"x{i}" for i in range(spec.N + 1) if i != args.chart]
    records, dropped = [], 0

    def add(u, x, flag):
        nonlocal dropped
        c = x[args.chart]
        if abs(c) <= 1e-12 * np.linalg.norm(x):
            dropped += 1
            return
        aff = np.delete(x / c, args.chart)
        records.append((list(u), list(aff), flag))

    for u in pts:
        try:
            add(u, spec.evaluate(u), 0)
        except dsl.EvaluationError:
            dropped += 1
    if not args.no_focus:
        for u, f in _focus_rows(spec, pts, args.tol):
            add(u, f, 1)
    if args.format == "ply":
        out = ["ply", "format ascii 1.0", f"comment dropped {dropped}",
               f"element vertex {len(records)}"]
        out += [f"property double {c}" for c in names + xcols] + ["property uchar is_focus", "end_header"]
        out += [" ".join(_fmt_float(v) for v in u + x) + f" {flag}" for u, x, flag in records]
    else:
        out = [",".join(names + xcols + ["is_focus"])]
        out += [",".join(_fmt_float(v) for v in u + x) + f",{flag}" for u, x, flag in records]
    write_atomic(args.out, "\n".join(out) + "\n")
    if dropped:
        print(f"dropped {dropped} rows where x{args.chart} vanishes", file=sys.stderr)
    return EXIT_OK


# --------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gaussdegen", description="Degenerate Gauss maps of parametrized varieties.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="classify a variety spec and write a JSON report")
    a.add_argument("spec_file")
    a.add_argument("--grid", type=int, default=9, help="points per parameter axis (default 9)")
    a.add_argument("--tol", type=float, default=engine.RANK_TOL, help="relative rank tolerance (default 1e-8)")
    a.add_argument("--fd-tol", type=float, default=engine.FD_RANK_TOL,
                   help="rank tolerance for the finite-difference focus Jacobian (default 1e-5)")
    a.add_argument("--out", default="-", help="output JSON path (default stdout)")
    a.set_defaults(func=cmd_analyze)

    c = sub.add_parser("construct", help="build a cone, twisted cone or twisted cylinder spec")
    c.add_argument("kind", choices=["cone", "twisted-cone", "twisted-cylinder"])
    c.add_argument("--family", help="plane-family file (three tuples)")
    c.add_argument("--curve", help="curve in the hyperplane x4 = 0 (twisted cylinder)")
    c.add_argument("--vertex", action="append", help="vertex point as comma-separated coordinates; repeat for a vertex subspace")
    c.add_argument("--directrix", help="directrix spec file (cone)")
    c.add_argument("--out", default="-", help="output spec path (default stdout)")
    c.set_defaults(func=cmd_construct)

    t = sub.add_parser("cartan", help="run Cartan's test on a tableau JSON file")
    t.add_argument("tableau_file")
    t.add_argument("--set", action="append", metavar="NAME=VALUE", help="override a tableau constant")
    t.add_argument("--out", default="-", help="output JSON path (default stdout)")
    t.set_defaults(func=cmd_cartan)

    s = sub.add_parser("sample", help="write an affine point cloud with focal points flagged")
    s.add_argument("spec_file")
    s.add_argument("--grid", type=int, default=20, help="points per parameter axis (default 20)")
    s.add_argument("--chart", type=int, default=0, help="coordinate set to 1 (default 0)")
    s.add_argument("--format", choices=["csv", "ply"], default="csv")
    s.add_argument("--tol", type=float, default=engine.RANK_TOL)
    s.add_argument("--no-focus", action="store_true", help="skip the focal points")
    s.add_argument("--out", default="-", help="output path (default stdout)")
    s.set_defaults(func=cmd_sample)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CLIError, dsl.DSLError, dsl.EvaluationError, cartan.TableauError,
            constructors.ConstructionError, engine.NotApplicable, engine.SingularPointError,
            engine.FrameError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
