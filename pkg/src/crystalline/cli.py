"""Problem-file parser, computation dispatch, and stable JSON reports.

Problem files are line-oriented sections of key = value pairs::

    [base]
    ring = Z/4            # Z | Q | Z/N
    pd = trivial          # trivial | standard  (standard needs prime = p)

    [presentation]
    vars = x
    rels = x^2            # comma-separated polynomials presenting R = P/J
    ideal = x^2           # generators f_i (an R-basis of J/J^2)
    weights = 2           # optional declared weights

    [crystal]
    structure = true      # or: rank = r  plus  connection_x = [[...], ...]

    [compute]
    task = cohomology     # cohomology | compare | verify-connection | envelope-dump
    i = 0..1
    level = 4
    nu_max = 3
    weight = 6
    side = both           # CA | deRham | both
    kmax = 64

Reports are emitted as JSON on stdout with a fixed key order, so repeated
runs of one input are byte-identical; timing is only included on request.
Exit codes: 0 success, 1 input error, 2 computation refusal, 3 internal
invariant violation.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from math import factorial

from . import exactalg
from .cechcomp import (
    CohomologyRequest,
    build_double_complex,
    compare_edges,
    crys_cohomology,
)
from .crystal import (
    ConnectionData,
    NotWithinBound,
    RefusalError,
    Verified,
    check_integrable,
    check_pd_quasinilpotent,
)
from .envelope import (
    AlgebraPresentation,
    Element,
    EnvelopeError,
    EnvelopePresentation,
    Poly,
    build_envelope,
)
from .pdpoly import ExprError, TruncationParams, parse_terms


class ProblemError(ValueError):
    def __init__(self, line: int, col: int, message: str):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col
        self.message = message


@dataclass
class ProblemFile:
    base: exactalg.BaseDpRing
    chart_vars: list
    quotient_rels: list
    ideal_gens: list
    weights: list | None
    structure: bool
    rank: int
    connection: dict          # chart var -> matrix of pd-element strings
    task: str
    degrees: list
    level: int
    nu_max: int
    weight_cutoff: int
    side: str
    kmax: int
    source_positions: dict = field(default_factory=dict)


_SECTIONS = ("base", "presentation", "crystal", "compute")
_TASKS = ("cohomology", "compare", "verify-connection", "envelope-dump")
_SIDES = ("CA", "deRham", "both")


def _split_list(value: str):
    return [v.strip() for v in value.split(",") if v.strip()]


def _scan_sections(text: str):
    """(section, key, value, line, value_col) tuples with positions."""
    out = []
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        stripped = line.strip()
        indent = len(line) - len(line.lstrip())
        if stripped.startswith("[") and stripped.endswith("]"):
            section = stripped[1:-1].strip()
            if section not in _SECTIONS:
                raise ProblemError(lineno, indent + 1, f"unknown section [{section}]")
            continue
        if "=" not in stripped:
            raise ProblemError(lineno, indent + 1, "expected key = value")
        if section is None:
            raise ProblemError(lineno, indent + 1, "key outside any section")
        key, _, value = stripped.partition("=")
        value_col = line.index("=") + 2
        out.append((section, key.strip(), value.strip(), lineno, value_col))
    return out


def _parse_matrix(value: str, lineno: int, col: int):
    """Split [[e, e], [e, e]] into entry strings; ^[k] brackets are opaque."""
    entries = []
    row: list = []
    depth = 0
    buf = ""
    prev = ""
    i = 0
    in_exp = False
    for i, ch in enumerate(value):
        if in_exp:
            buf += ch
            if ch == "]":
                in_exp = False
            continue
        if ch == "[" and prev == "^":
            buf += ch
            in_exp = True
        elif ch == "[":
            depth += 1
            if depth > 2:
                raise ProblemError(lineno, col + i, "matrix nests too deep")
            if depth == 2:
                row = []
        elif ch == "]":
            if depth == 2:
                row.append(buf.strip())
                buf = ""
                entries.append(row)
            elif depth == 0:
                raise ProblemError(lineno, col + i, "unbalanced ']'")
            depth -= 1
        elif ch == "," and depth == 2:
            row.append(buf.strip())
            buf = ""
        elif ch == "," and depth == 1:
            pass
        else:
            buf += ch
        if not ch.isspace():
            prev = ch
    if depth != 0 or in_exp:
        raise ProblemError(lineno, col + i, "unclosed bracket")
    if not entries:
        raise ProblemError(lineno, col, "empty matrix")
    return entries


def parse_problem(text: str) -> ProblemFile:
    """Parse and validate a problem file; raises ProblemError with position."""
    pairs = _scan_sections(text)
    data: dict = {s: {} for s in _SECTIONS}
    pos: dict = {}
    for section, key, value, lineno, col in pairs:
        if key in data[section]:
            raise ProblemError(lineno, 1, f"duplicate key {key!r} in [{section}]")
        data[section][key] = value
        pos[(section, key)] = (lineno, col)

    def where(section, key):
        return pos.get((section, key), (0, 0))

    def need(section, key):
        if key not in data[section]:
            raise ProblemError(0, 0, f"missing {key!r} in [{section}]")
        return data[section][key]

    # -- base -------------------------------------------------------------
    ring_text = need("base", "ring").replace(" ", "")
    pd = data["base"].get("pd", "trivial")
    if ring_text == "Z":
        ring = exactalg.integers()
    elif ring_text == "Q":
        ring = exactalg.rationals()
    elif ring_text.startswith("Z/"):
        lineno, col = where("base", "ring")
        try:
            modulus = int(ring_text[2:])
        except ValueError:
            raise ProblemError(lineno, col, f"bad modulus in {ring_text!r}")
        if pd == "standard":
            pl, pc = where("base", "prime")
            if "prime" not in data["base"]:
                raise ProblemError(*where("base", "ring"),
                                   "standard pd needs prime = p")
            p = int(data["base"]["prime"])
            try:
                ring = exactalg.BaseDpRing("ZmodN", modulus=modulus,
                                           pd_structure="standard-p", prime=p)
            except ValueError as e:
                raise ProblemError(pl, pc, str(e))
        else:
            try:
                ring = exactalg.integers_mod(modulus)
            except ValueError as e:
                raise ProblemError(lineno, col, str(e))
    else:
        raise ProblemError(*where("base", "ring"), f"unknown ring {ring_text!r}")
    if pd not in ("trivial", "standard"):
        raise ProblemError(*where("base", "pd"), f"unknown pd structure {pd!r}")

    # -- presentation --------------------------------------------------------
    chart_vars = _split_list(need("presentation", "vars"))
    if not chart_vars:
        raise ProblemError(*where("presentation", "vars"), "need chart variables")
    if len(set(chart_vars)) != len(chart_vars):
        raise ProblemError(*where("presentation", "vars"), "repeated chart variable")
    rels = _split_list(data["presentation"].get("rels", ""))
    ideal = _split_list(data["presentation"].get("ideal", ""))
    weights = None
    if "weights" in data["presentation"]:
        try:
            weights = [int(v) for v in _split_list(data["presentation"]["weights"])]
        except ValueError:
            raise ProblemError(*where("presentation", "weights"), "weights must be integers")

    # -- crystal ---------------------------------------------------------------
    structure = data["crystal"].get("structure", "").lower() in ("true", "yes", "1")
    rank = 1
    connection = {}
    if not structure:
        if "rank" not in data["crystal"]:
            structure = True
        else:
            rank = int(data["crystal"]["rank"])
            if rank < 1:
                raise ProblemError(*where("crystal", "rank"), "rank must be >= 1")
            for v in chart_vars:
                key = f"connection_{v}"
                if key in data["crystal"]:
                    lineno, col = where("crystal", key)
                    mat = _parse_matrix(data["crystal"][key], lineno, col)
                    if len(mat) != rank or any(len(r) != rank for r in mat):
                        raise ProblemError(
                            lineno, col,
                            f"connection matrix for {v} must be {rank}x{rank} "
                            "([crystal] section)")
                    connection[v] = mat

    # -- compute -----------------------------------------------------------------
    task = data["compute"].get("task", "cohomology")
    if task not in _TASKS:
        raise ProblemError(*where("compute", "task"), f"unknown task {task!r}")
    i_text = data["compute"].get("i", "0..1").replace(" ", "")
    if ".." in i_text:
        a, _, b = i_text.partition("..")
        try:
            degrees = list(range(int(a), int(b) + 1))
        except ValueError:
            raise ProblemError(*where("compute", "i"), f"bad degree range {i_text!r}")
    else:
        try:
            degrees = [int(i_text)]
        except ValueError:
            raise ProblemError(*where("compute", "i"), f"bad degree {i_text!r}")
    level = int(data["compute"].get("level", "2"))
    nu_max = int(data["compute"].get("nu_max", str(max(degrees) + 1)))
    weight = int(data["compute"].get("weight", "6"))
    side = data["compute"].get("side", "both")
    if side not in _SIDES:
        raise ProblemError(*where("compute", "side"), f"unknown side {side!r}")
    kmax = int(data["compute"].get("kmax", "64"))

    problem = ProblemFile(ring, chart_vars, rels, ideal, weights, structure,
                          rank, connection, task, degrees, level, nu_max,
                          weight, side, kmax, pos)
    _validate_expressions(problem)
    return problem


def _validate_expressions(problem: ProblemFile):
    """Parse every polynomial and matrix entry, mapping errors to positions."""
    for group, items in (("rels", problem.quotient_rels),
                         ("ideal", problem.ideal_gens)):
        lineno, col = problem.source_positions.get(("presentation", group), (0, 0))
        for text in items:
            try:
                Poly.parse(text, problem.base, problem.chart_vars)
            except (ExprError, EnvelopeError) as e:
                off = getattr(e, "pos", 0)
                raise ProblemError(lineno, col + off, f"in {group!r}: {e}")
    for v, mat in problem.connection.items():
        lineno, col = problem.source_positions.get(("crystal", f"connection_{v}"), (0, 0))
        for row in mat:
            for entry in row:
                try:
                    parse_terms(entry)
                except ExprError as e:
                    raise ProblemError(lineno, col + e.pos,
                                       f"in connection_{v}: {e.message}")


def format_problem(problem: ProblemFile) -> str:
    """Canonical text of a problem; reparses to an equivalent ProblemFile."""
    lines = ["[base]"]
    if problem.base.kind == "Z":
        lines.append("ring = Z")
    elif problem.base.kind == "Q":
        lines.append("ring = Q")
    else:
        lines.append(f"ring = Z/{problem.base.modulus}")
        if problem.base.pd_structure == "standard-p":
            lines.append("pd = standard")
            lines.append(f"prime = {problem.base.prime}")
    lines.append("")
    lines.append("[presentation]")
    lines.append(f"vars = {', '.join(problem.chart_vars)}")
    if problem.quotient_rels:
        lines.append(f"rels = {', '.join(problem.quotient_rels)}")
    if problem.ideal_gens:
        lines.append(f"ideal = {', '.join(problem.ideal_gens)}")
    if problem.weights:
        lines.append(f"weights = {', '.join(str(w) for w in problem.weights)}")
    lines.append("")
    lines.append("[crystal]")
    if problem.structure:
        lines.append("structure = true")
    else:
        lines.append(f"rank = {problem.rank}")
        for v in problem.chart_vars:
            if v in problem.connection:
                rows = ", ".join("[" + ", ".join(r) + "]" for r in problem.connection[v])
                lines.append(f"connection_{v} = [{rows}]")
    lines.append("")
    lines.append("[compute]")
    lines.append(f"task = {problem.task}")
    if len(problem.degrees) > 1:
        lines.append(f"i = {problem.degrees[0]}..{problem.degrees[-1]}")
    else:
        lines.append(f"i = {problem.degrees[0]}")
    lines.append(f"level = {problem.level}")
    lines.append(f"nu_max = {problem.nu_max}")
    lines.append(f"weight = {problem.weight_cutoff}")
    lines.append(f"side = {problem.side}")
    lines.append(f"kmax = {problem.kmax}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Dispatch


def _build_objects(problem: ProblemFile):
    src = AlgebraPresentation.from_strings(
        problem.base, problem.chart_vars, problem.quotient_rels,
        problem.ideal_gens, problem.weights)
    trunc = TruncationParams(factorial(problem.level), problem.level,
                             problem.weight_cutoff)
    env = build_envelope(src, trunc)
    conn = None
    if not problem.structure:
        carrier = env.carrier
        names = problem.chart_vars + [f"t{i+1}" for i in range(carrier.core.e)]
        gammas = []
        for v in problem.chart_vars:
            mat = problem.connection.get(
                v, [["0"] * problem.rank for _ in range(problem.rank)])
            rows = []
            for r in mat:
                row = []
                for entry in r:
                    row.append(_entry_to_element(entry, carrier, problem).data)
                rows.append(row)
            gammas.append(rows)
        conn = ConnectionData(env, problem.rank, gammas, n_max=problem.level)
    return env, conn


def _entry_to_element(text: str, carrier, problem: ProblemFile):
    """A pd-element string over chart and t variables, as a carrier element."""
    ring = problem.base
    chart_index = {n: i for i, n in enumerate(problem.chart_vars)}
    t_index = {f"t{i+1}": i for i in range(carrier.core.e)}
    acc = Element(carrier, {})
    for coeff, factors in parse_terms(text):
        alpha = [0] * carrier.core.d
        kk = [0] * carrier.core.e
        extra = 1
        for name, exp, divided in factors:
            if name in chart_index:
                if divided:
                    raise EnvelopeError(
                        f"chart variable {name} has no divided powers")
                alpha[chart_index[name]] += exp
            elif name in t_index:
                if not divided:
                    extra *= factorial(exp)
                kk[t_index[name]] += exp
            else:
                raise EnvelopeError(f"unknown variable {name!r} in connection entry")
        c = coeff * extra
        if c.denominator != 1 and ring.kind != "Q":
            if ring.kind == "ZmodN":
                val = ring.mul(c.numerator, ring.inverse(c.denominator))
            else:
                raise EnvelopeError(f"non-integral coefficient {c}")
        else:
            val = c if ring.kind == "Q" else ring.normalize(c.numerator)
        poly = Poly(ring, carrier.core.d, {tuple(alpha): ring.one()})
        base = Element(carrier, carrier.inject_poly(poly))
        tmono = (tuple([0] * carrier.core.d), tuple(kk),
                 tuple([0] * carrier.xi_count))
        term = base * Element(carrier, {tmono: val})
        acc = acc + term
    return acc


def _shape_json(shape):
    return shape.to_json()


def _qn_json(res):
    if isinstance(res, Verified):
        return {"status": "verified",
                "witnesses": {str(k): v for k, v in sorted(res.witnesses.items())},
                "k": res.k}
    return {"status": "inconclusive", "level": res.level,
            "direction": res.direction, "k_max": res.k_max,
            "note": "not a disproof; raise kmax to retry"}


def run(problem: ProblemFile) -> dict:
    """Execute the problem's task and assemble the report."""
    env, conn = _build_objects(problem)
    report = {
        "schema": 1,
        "task": problem.task,
        "base": str(problem.base),
        "parameters": {
            "level": problem.level,
            "nu_max": problem.nu_max,
            "weight_cutoff": problem.weight_cutoff,
            "side": problem.side,
            "kmax": problem.kmax,
            "i": list(problem.degrees),
        },
        "annotations": [],
        "certificates": {},
        "results": {},
    }
    if env.envelope_is_chart:
        report["annotations"].append("envelope = chart")
    if not env.graded:
        report["annotations"].append("filtered grading: weight bands incomplete")
    ring = problem.base
    if ring.kind == "ZmodN" and problem.level >= ring.modulus:
        report["annotations"].append("tower stabilized: level >= modulus")

    if problem.task == "envelope-dump":
        report["results"]["presentation"] = env.dump().splitlines()
        return report

    if problem.task == "verify-connection":
        target = conn if conn is not None else ConnectionData(env, 1, None,
                                                              n_max=problem.level)
        integrable = check_integrable(target)
        qn = check_pd_quasinilpotent(target, problem.kmax)
        report["results"]["integrable"] = integrable
        report["certificates"]["quasi_nilpotence"] = _qn_json(qn)
        if isinstance(qn, NotWithinBound):
            raise RefusalError("quasi-nilpotence inconclusive at kmax="
                               f"{problem.kmax} (reported, not disproved)")
        return report

    if problem.task == "compare":
        dc = build_double_complex(env, conn, problem.nu_max, problem.level,
                                  problem.weight_cutoff, problem.kmax)
        degree_range = (min(problem.degrees), max(problem.degrees))
        rep = compare_edges(dc, degree_range)
        report["results"]["row_edge_qiso"] = rep["row_edge_qiso"]
        report["results"]["column_edge_qiso"] = rep["column_edge_qiso"]
        report["results"]["weights"] = {
            str(w): v for w, v in sorted(rep["weights"].items())}
        if conn is not None:
            report["certificates"]["quasi_nilpotence"] = _qn_json(
                conn.ensure_quasinilpotent(problem.kmax))
        return report

    # cohomology
    req = CohomologyRequest(env, conn, problem.degrees, problem.level,
                            problem.nu_max, problem.weight_cutoff,
                            problem.side, problem.kmax)
    res = crys_cohomology(req)
    out = {}
    for i, per_weight in sorted(res["degrees"].items()):
        entry = {}
        for w, v in sorted(per_weight.items()):
            cell = {}
            if "deRham" in v:
                cell["deRham"] = _shape_json(v["deRham"])
            if "CA" in v:
                cell["CA"] = _shape_json(v["CA"])
            if "agree" in v:
                cell["agree"] = v["agree"]
            cell["complete"] = v["complete"]
            entry[str(w)] = cell
        out[f"H^{i}"] = entry
    report["results"]["cohomology"] = out
    if res["stabilized"] is not None:
        report["results"]["stabilized"] = res["stabilized"]
    if conn is not None:
        report["certificates"]["quasi_nilpotence"] = _qn_json(
            conn.ensure_quasinilpotent(problem.kmax))
    return report


# ---------------------------------------------------------------------------
# Entry point


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="crystalline",
        description="Exact crystalline cohomology of presented affine algebras "
                    "over divided power base rings.")
    parser.add_argument("problem", help="problem file path, or - for stdin")
    parser.add_argument("--weight-cutoff", type=int, default=None)
    parser.add_argument("--level", type=int, default=None)
    parser.add_argument("--nu-max", type=int, default=None)
    parser.add_argument("--kmax", type=int, default=None)
    parser.add_argument("--side", choices=_SIDES, default=None)
    parser.add_argument("--json", action="store_true", default=True,
                        help="JSON report on stdout (default)")
    parser.add_argument("--pretty", action="store_true",
                        help="indent the JSON report")
    parser.add_argument("--timing", action="store_true",
                        help="include wall time (breaks byte-determinism)")
    args = parser.parse_args(argv)

    try:
        if args.problem == "-":
            text = sys.stdin.read()
        else:
            with open(args.problem, "r", encoding="utf-8") as fh:
                text = fh.read()
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1

    t0 = time.monotonic()
    try:
        problem = parse_problem(text)
        if args.weight_cutoff is not None:
            problem.weight_cutoff = args.weight_cutoff
        if args.level is not None:
            problem.level = args.level
        if args.nu_max is not None:
            problem.nu_max = args.nu_max
        if args.kmax is not None:
            problem.kmax = args.kmax
        if args.side is not None:
            problem.side = args.side
    except (ProblemError, ExprError) as e:
        name = args.problem if args.problem != "-" else "<stdin>"
        line = getattr(e, "line", 0)
        col = getattr(e, "col", getattr(e, "pos", 0))
        message = getattr(e, "message", str(e))
        print(f"{name}:{line}:{col}: {message}", file=sys.stderr)
        return 1

    try:
        report = run(problem)
    except RefusalError as e:
        print(f"refused: {e}", file=sys.stderr)
        return 2
    except (ProblemError, EnvelopeError, ExprError, ValueError) as e:
        print(f"input error: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # internal invariant violation
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return 3

    if args.timing:
        report["timing_seconds"] = round(time.monotonic() - t0, 3)
    indent = 2 if args.pretty else None
    print(json.dumps(report, sort_keys=True, indent=indent))
    return 0


if __name__ == "__main__":
    sys.exit(main())
