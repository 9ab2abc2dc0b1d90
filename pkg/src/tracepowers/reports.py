"""Report and config file formats: versioned header block plus TSV rows.

Files start with ``# key = value`` header lines (schema identifier first),
then a column-name row, then tab-separated records.  They are append-safe,
diff-friendly and round-trip exactly: floats are written with ``repr`` so
``parse(emit(rows)) == rows``.  All writes are atomic (temp file + rename).
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Iterable, Sequence

from .stein import LemmaReport
from .symfunc import Group

REPORT_SCHEMA = "tracepowers.report/1"
CONFIG_SCHEMA = "tracepowers.config/1"


class ReportFormatError(ValueError):
    """Malformed or schema-incompatible report/config file."""


@dataclass(frozen=True)
class ExperimentRow:
    """One (group, n, j) record of a Monte Carlo run."""

    group: str
    n: int
    j: int
    samples: int
    seed: int
    ks: float
    bound_term1: float
    bound_term2: float
    bound_total: float
    mean_w: float
    var_w: float
    oracle_mean: float
    oracle_var: float
    passed: bool

    @property
    def key(self) -> tuple:
        return (self.group, self.n, self.j, self.seed)


EXPERIMENT_COLUMNS = [f.name for f in fields(ExperimentRow)]

_FIELD_PARSERS = {int: int, float: float, str: str,
                  bool: lambda s: s == "true"}


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_atomic(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(header: dict[str, str], columns: Sequence[str],
          rows: Iterable[Sequence]) -> str:
    lines = [f"# schema = {REPORT_SCHEMA}"]
    for key, value in header.items():
        lines.append(f"# {key} = {value}")
    lines.append("\t".join(columns))
    for row in rows:
        lines.append("\t".join(_format_value(v) for v in row))
    return "\n".join(lines) + "\n"


def _parse_lines(text: str) -> tuple[dict[str, str], list[str], list[list[str]]]:
    header: dict[str, str] = {}
    columns: list[str] = []
    records: list[list[str]] = []
    for raw in text.splitlines():
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, _, value = body.partition("=")
                header[key.strip()] = value.strip()
            continue
        if not columns:
            columns = line.split("\t")
            continue
        records.append(line.split("\t"))
    if header.get("schema") != REPORT_SCHEMA:
        raise ReportFormatError(
            f"expected schema {REPORT_SCHEMA}, got {header.get('schema')!r}")
    return header, columns, records


# ---------------------------------------------------------------------------
# Experiment reports.
# ---------------------------------------------------------------------------

def write_experiment_report(path, rows: Sequence[ExperimentRow],
                            header: dict[str, str]) -> None:
    header = {"kind": "experiment", **header}
    body = _emit(header, EXPERIMENT_COLUMNS,
                 [[getattr(r, c) for c in EXPERIMENT_COLUMNS] for r in rows])
    _write_atomic(Path(path), body)


def read_experiment_report(path) -> tuple[dict[str, str], list[ExperimentRow]]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ReportFormatError(f"cannot read {path}: {exc}") from exc
    header, columns, records = _parse_lines(text)
    if header.get("kind") != "experiment":
        raise ReportFormatError(f"not an experiment report: {path}")
    if columns != EXPERIMENT_COLUMNS:
        raise ReportFormatError(f"column mismatch in {path}")
    typed = [(f.name, f.type) for f in fields(ExperimentRow)]
    rows = []
    for record in records:
        if len(record) != len(typed):
            raise ReportFormatError(f"bad record length in {path}")
        kwargs = {}
        for (name, ftype), cell in zip(typed, record):
            if ftype in ("bool", bool):
                kwargs[name] = cell == "true"
            elif ftype in ("int", int):
                kwargs[name] = int(cell)
            elif ftype in ("float", float):
                kwargs[name] = float(cell)
            else:
                kwargs[name] = cell
        rows.append(ExperimentRow(**kwargs))
    return header, rows


def merge_experiment_rows(
        row_groups: Sequence[Sequence[ExperimentRow]]) -> list[ExperimentRow]:
    """Concatenate, drop duplicate (group, n, j, seed) keys, stable-sort."""
    seen = set()
    merged: list[ExperimentRow] = []
    for rows in row_groups:
        for row in rows:
            if row.key in seen:
                continue
            seen.add(row.key)
            merged.append(row)
    merged.sort(key=lambda r: r.key)
    return merged


# ---------------------------------------------------------------------------
# Verification (lemma suite) reports.
# ---------------------------------------------------------------------------

VERIFY_COLUMNS = ["group", "j", "lemma", "status", "min_valid_n",
                  "hypothesis", "residual", "detail"]


def write_verify_report(path, reports: Sequence[LemmaReport],
                        header: dict[str, str]) -> None:
    header = {"kind": "verify", **header}
    rows = [[r.group.value, r.j, r.lemma,
             "exact-match" if r.exact else "residual-nonzero",
             r.min_valid_n, r.hypothesis, r.residual, r.detail]
            for r in reports]
    _write_atomic(Path(path), _emit(header, VERIFY_COLUMNS, rows))


def read_verify_report(path) -> tuple[dict[str, str], list[dict[str, str]]]:
    header, columns, records = _parse_lines(Path(path).read_text())
    if header.get("kind") != "verify":
        raise ReportFormatError(f"not a verify report: {path}")
    if columns != VERIFY_COLUMNS:
        raise ReportFormatError(f"column mismatch in {path}")
    return header, [dict(zip(columns, rec)) for rec in records]


# ---------------------------------------------------------------------------
# Raw sample export.
# ---------------------------------------------------------------------------

SAMPLE_COLUMNS = ["index", "seed", "w"]


def write_sample_export(path, seed: int, w_values,
                        header: dict[str, str]) -> None:
    header = {"kind": "samples", **header}
    rows = [[i, seed, float(w)] for i, w in enumerate(w_values)]
    _write_atomic(Path(path), _emit(header, SAMPLE_COLUMNS, rows))


# ---------------------------------------------------------------------------
# Experiment configuration.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    """A Monte Carlo run description; CLI flags override file values.

    Default tolerances live here (not in code paths): ``ks_ceiling`` is the
    absolute KS acceptance ceiling, ``moment_se_factor`` the allowed number
    of standard errors in moment cross-checks.
    """

    group: str = "U"
    n: int = 8
    js: tuple[int, ...] = (1,)
    samples: int = 1000
    seed: int = 0
    out: str = ""
    export_samples: bool = False
    oracle_checks: bool = False
    oracle_weight: int = 6
    ks_ceiling: float = 0.02
    moment_se_factor: float = 5.0
    workers: int = 0  # 0 = auto
    chunk: int = 1024

    def __post_init__(self) -> None:
        if self.n < 1 or self.samples < 1:
            raise ValueError("need n >= 1 and samples >= 1")
        if not self.js or any(j < 1 for j in self.js):
            raise ValueError("need at least one j >= 1")

    @property
    def group_enum(self) -> Group:
        return Group.parse(self.group)

    def header(self, version: str) -> dict[str, str]:
        return {
            "tool_version": version,
            "group": self.group,
            "n": str(self.n),
            "js": ",".join(map(str, self.js)),
            "samples": str(self.samples),
            "seed": str(self.seed),
            "chunk": str(self.chunk),
            "ks_ceiling": repr(self.ks_ceiling),
            "moment_se_factor": repr(self.moment_se_factor),
        }


_CONFIG_KEYS = {
    "group": str,
    "n": int,
    "j": "js",
    "samples": int,
    "seed": int,
    "out": str,
    "export_samples": "bool",
    "oracle_checks": "bool",
    "oracle_weight": int,
    "ks_ceiling": float,
    "moment_se_factor": float,
    "workers": int,
    "chunk": int,
}


def parse_js(text: str) -> tuple[int, ...]:
    return tuple(int(part) for part in text.replace(" ", "").split(",") if part)


def load_config(path) -> ExperimentConfig:
    """Parse a plain-text ``key = value`` config file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ReportFormatError(f"cannot read config {path}: {exc}") from exc
    values: dict[str, object] = {}
    schema = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ReportFormatError(f"bad config line: {line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key == "schema":
            schema = value
            continue
        if key not in _CONFIG_KEYS:
            raise ReportFormatError(f"unknown config key: {key!r}")
        kind = _CONFIG_KEYS[key]
        if kind == "js":
            values["js"] = parse_js(value)
        elif kind == "bool":
            values[key] = value.lower() in ("1", "true", "yes", "on")
        elif kind is str:
            values[key] = value
        else:
            values[key] = kind(value)
    if schema != CONFIG_SCHEMA:
        raise ReportFormatError(
            f"expected config schema {CONFIG_SCHEMA}, got {schema!r}")
    return ExperimentConfig(**values)


def apply_overrides(config: ExperimentConfig, **overrides) -> ExperimentConfig:
    """Return the config with non-None overrides applied."""
    updates = {k: v for k, v in overrides.items() if v is not None}
    return replace(config, **updates) if updates else config
