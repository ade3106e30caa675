"""Plain-text serialisation of samples, kernel expansions, solutions and tables.

Every file starts with ``#``-prefixed header lines of ``key=value`` pairs.
Numbers are written with ``repr`` so that the text is locale-independent and
reading it back reproduces the same floats bit for bit.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from pathlib import Path

import numpy as np

from .distributions import TrainingSet
from .kernel import GaussianKernel, KernelExpansion
from .solver import SvmSolution

__all__ = [
    "fmt",
    "parse_value",
    "header_line",
    "parse_header",
    "write_table",
    "read_table",
    "write_training_set",
    "read_training_set",
    "write_expansion",
    "read_expansion",
    "write_solution",
    "read_solution",
    "write_record",
    "read_record",
]


def fmt(v) -> str:
    """Canonical text for a scalar: ``repr`` for floats, ``str`` otherwise."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    if isinstance(v, (list, tuple)):
        return ";".join(fmt(x) for x in v)
    return str(v)


def parse_value(s: str):
    """Inverse of :func:`fmt` for scalars: int, float, bool or string."""
    s = s.strip()
    if s in ("true", "false"):
        return s == "true"
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def header_line(fields: Mapping) -> str:
    return "# " + " ".join(f"{k}={fmt(v)}" for k, v in fields.items())


def parse_header(lines: Iterable[str]) -> dict:
    out = {}
    for line in lines:
        for tok in line.lstrip("#").split():
            if "=" in tok:
                k, v = tok.split("=", 1)
                out[k] = parse_value(v)
    return out


def _split_header(path: Path):
    head, body = [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                head.append(line)
            elif line:
                body.append(line)
    return head, body


def write_table(path, columns: Sequence[str], rows: Iterable[Sequence], header: Mapping | None = None) -> Path:
    """Header lines, then a comma-separated column line, then one line per row."""
    path = Path(path)
    lines = []
    if header:
        lines.append(header_line(header))
    lines.append(",".join(columns))
    for r in rows:
        if len(r) != len(columns):
            raise ValueError(f"row has {len(r)} fields, expected {len(columns)}")
        lines.append(",".join(fmt(v) for v in r))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_table(path) -> tuple[dict, list[str], list[list]]:
    head, body = _split_header(Path(path))
    columns = body[0].split(",")
    rows = [[parse_value(v) for v in line.split(",")] for line in body[1:]]
    return parse_header(head), columns, rows


def write_training_set(path, ts: TrainingSet) -> Path:
    header = {"d": ts.d, "n": ts.n, "seed": ts.seed}
    header.update({k: v for k, v in ts.meta.items() if k not in header})
    cols = [f"x{i + 1}" for i in range(ts.d)] + ["y"]
    rows = ([*map(float, x), int(y)] for x, y in zip(ts.x, ts.y))
    return write_table(path, cols, rows, header)


def read_training_set(path) -> TrainingSet:
    header, cols, rows = read_table(path)
    d = int(header["d"])
    arr = np.array(rows, dtype=float).reshape(-1, d + 1)
    if arr.shape[0] != int(header["n"]):
        raise ValueError(f"header says n={header['n']} but file has {arr.shape[0]} samples")
    meta = {k: v for k, v in header.items() if k not in ("n", "seed")}
    return TrainingSet(arr[:, :d].copy(), arr[:, d].astype(np.int64), int(header["seed"]), meta)


def _expansion_lines(exp: KernelExpansion) -> list[str]:
    lines = [header_line({"sigma": exp.sigma, "d": exp.d, "n_centers": exp.coefficients.size, "offset": exp.offset})]
    lines.append(",".join([f"c{i + 1}" for i in range(exp.d)] + ["coef"]))
    for x, c in zip(exp.centers, exp.coefficients):
        lines.append(",".join(fmt(float(v)) for v in (*x, c)))
    return lines


def write_expansion(path, exp: KernelExpansion) -> Path:
    path = Path(path)
    path.write_text("\n".join(_expansion_lines(exp)) + "\n", encoding="utf-8")
    return path


def read_expansion(path) -> KernelExpansion:
    head, body = _split_header(Path(path))
    h = parse_header(head[:1])
    d = int(h["d"])
    arr = np.array([[float(v) for v in line.split(",")] for line in body[1:]]).reshape(-1, d + 1)
    if arr.shape[0] != int(h["n_centers"]):
        raise ValueError("center count does not match header")
    return KernelExpansion(GaussianKernel(float(h["sigma"])), arr[:, :d], arr[:, d], float(h["offset"]))


def write_solution(path, sol: SvmSolution) -> Path:
    path = Path(path)
    footer = header_line(
        {
            "objective": sol.objective,
            "certificate": sol.certificate,
            "lambda": sol.lam,
            "iterations": sol.iterations,
            "with_offset": sol.with_offset,
            "route": sol.route,
        }
    )
    path.write_text("\n".join(_expansion_lines(sol.expansion) + [footer]) + "\n", encoding="utf-8")
    return path


def read_solution(path) -> SvmSolution:
    head, _ = _split_header(Path(path))
    footer = parse_header(head[-1:])
    exp = read_expansion(path)
    return SvmSolution(
        exp,
        float(footer["objective"]),
        float(footer["certificate"]),
        int(footer["iterations"]),
        float(footer["lambda"]),
        bool(footer["with_offset"]),
        str(footer["route"]),
    )


def write_record(path, record: Mapping, header: Mapping | None = None) -> Path:
    """One ``key = value`` line per entry."""
    path = Path(path)
    lines = [header_line(header)] if header else []
    lines += [f"{k} = {fmt(v)}" for k, v in record.items()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_record(path) -> dict:
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line or line.startswith("#"):
            continue
        k, v = line.split("=", 1)
        out[k.strip()] = parse_value(v)
    return out
