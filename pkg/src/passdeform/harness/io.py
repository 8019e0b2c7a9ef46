"""Setup files (YAML, schema 1) and result files (CSV / JSON)."""
from __future__ import annotations

import csv
import io
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ..errors import PassDeformError, ResourceError, ValidationError
from ..setups import SetupSpec, Subsystem

SCHEMA = 1
RESULT_SCHEMA = 1
TOP_KEYS = {"schema", "name", "subsystems", "correlations", "interactions", "observables", "partitions",
            "parameters"}
SUB_KEYS = {"label", "energy_levels", "init"}


class SetupFileError(ValidationError):
    """Schema or validation failure, located at a line of the setup file."""

    def __init__(self, source: str, line: int | None, message: str):
        self.source, self.line, self.message = source, line, message
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {message}")


# --------------------------------------------------------------------------- node lookup

def _line(node, path=()) -> int | None:
    """1-based line of the YAML node reached by following `path` (keys / list positions)."""
    cur = node
    best = node.start_mark.line + 1 if node is not None else None
    for key in path:
        nxt = None
        if isinstance(cur, yaml.MappingNode):
            for k, v in cur.value:
                if k.value == key:
                    best = k.start_mark.line + 1
                    nxt = v
                    break
        elif isinstance(cur, yaml.SequenceNode) and isinstance(key, int) and key < len(cur.value):
            nxt = cur.value[key]
            best = nxt.start_mark.line + 1
        if nxt is None:
            break
        cur = nxt
    return best


def _token_line(node, tokens) -> int | None:
    """Line of the first scalar (key or value) under node equal to one of tokens."""
    stack = [node]
    found = {}
    while stack:
        cur = stack.pop()
        if isinstance(cur, yaml.ScalarNode):
            if cur.value in tokens and cur.value not in found:
                found[cur.value] = cur.start_mark.line + 1
        elif isinstance(cur, yaml.MappingNode):
            for k, v in reversed(cur.value):
                stack.extend([v, k])
        elif isinstance(cur, yaml.SequenceNode):
            stack.extend(reversed(cur.value))
    for t in tokens:
        if t in found:
            return found[t]
    return None


def _node(root, path):
    cur = root
    for key in path:
        if isinstance(cur, yaml.MappingNode):
            cur = next((v for k, v in cur.value if k.value == key), None)
        else:
            return None
        if cur is None:
            return None
    return cur


def _fail(src, root, path, msg):
    raise SetupFileError(src, _line(root, path), msg)


def setup_from_dict(data, root=None, source: str = "<setup>") -> SetupSpec:
    """Build and fully validate a SetupSpec from the parsed mapping."""
    if not isinstance(data, dict):
        _fail(source, root, (), "top level must be a mapping")
    for key in data:
        if key not in TOP_KEYS:
            _fail(source, root, (key,), f"unknown key {key!r}; allowed: {sorted(TOP_KEYS)}")
    if data.get("schema") != SCHEMA:
        _fail(source, root, ("schema",), f"schema must be {SCHEMA}, got {data.get('schema')!r}")
    subs_raw = data.get("subsystems")
    if not isinstance(subs_raw, list) or not subs_raw:
        _fail(source, root, ("subsystems",), "subsystems must be a non-empty list")
    subs = []
    for i, s in enumerate(subs_raw):
        here = ("subsystems", i)
        if not isinstance(s, dict):
            _fail(source, root, here, "each subsystem must be a mapping")
        for key in s:
            if key not in SUB_KEYS:
                _fail(source, root, here + (key,), f"unknown subsystem key {key!r}; allowed: {sorted(SUB_KEYS)}")
        for key in SUB_KEYS:
            if key not in s:
                _fail(source, root, here, f"subsystem {i} is missing {key!r}")
        init = s["init"]
        if not isinstance(init, dict) or (("thermal" in init) == ("populations" in init)):
            _fail(source, root, here + ("init",), "init must give exactly one of 'thermal: beta' or 'populations: [...]'")
        extra = set(init) - {"thermal", "populations", "generator"}
        if extra:
            _fail(source, root, here + ("init", sorted(extra)[0]), f"unknown init key {sorted(extra)[0]!r}")
        try:
            subs.append(Subsystem(str(s["label"]), tuple(s["energy_levels"]), beta=init.get("thermal"),
                                  populations=init.get("populations"), generator=init.get("generator")))
        except (ValidationError, TypeError, ValueError) as exc:
            key = "populations" if "populations" in init else "thermal"
            path = here + ("init", key) if "populations" in str(exc) or "beta" in str(exc) else here
            _fail(source, root, path, str(exc))
    corr = data.get("correlations")
    if corr is not None:
        if not isinstance(corr, dict) or "populations" not in corr:
            _fail(source, root, ("correlations",), "correlations must be a mapping with 'populations'")
        corr = corr["populations"]
    try:
        setup = SetupSpec(tuple(subs), corr, data.get("interactions") or {}, data.get("observables") or {},
                          data.get("partitions") or {}, data.get("parameters") or {}, str(data.get("name", "")))
    except ResourceError as exc:
        raise SetupFileError(source, _line(root, ("subsystems",)), str(exc)) from None
    except (ValidationError, TypeError, ValueError) as exc:
        path = ("correlations",) if "correlation" in str(exc) else ("subsystems",)
        _fail(source, root, path, str(exc))
    # eager validation of every named expression
    for group, build in (("interactions", setup.interaction), ("observables", setup.observable),
                         ("partitions", setup.partition)):
        for name in getattr(setup, group):
            try:
                build(name)
            except (PassDeformError, KeyError, TypeError, ValueError) as exc:
                msg = f"{group[:-1]} {name!r}: {exc}"
                tokens = [t for t in re.findall(r"'([^']+)'", str(exc)) if t != name]
                sub = _node(root, (group, name))
                line = _token_line(sub, tokens) if sub is not None else None
                if line is None:
                    _fail(source, root, (group, name), msg)
                raise SetupFileError(source, line, msg)
    return setup


def parse_setup_text(text: str, source: str = "<string>") -> SetupSpec:
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise SetupFileError(source, mark.line + 1 if mark else None, f"YAML syntax error: {exc}") from None
    return setup_from_dict(data, root, source)


def parse_setup(path) -> SetupSpec:
    """Read and validate a setup file; errors carry the offending line number."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SetupFileError(str(path), None, f"cannot read setup file: {exc}") from None
    return parse_setup_text(text, str(path))


def dump_setup(setup: SetupSpec, path=None) -> str:
    text = yaml.safe_dump(setup.to_dict(), sort_keys=False, default_flow_style=None, width=100)
    if path is not None:
        Path(path).write_text(text)
    return text


# --------------------------------------------------------------------------- results

def plain(x):
    """Convert numpy scalars / arrays and tuples into JSON-friendly builtins."""
    if isinstance(x, dict):
        return {str(k): plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [plain(v) for v in x]
    if hasattr(x, "tolist"):
        return plain(x.tolist())
    if isinstance(x, bool):
        return x
    if isinstance(x, int):
        return int(x)
    if isinstance(x, float):
        return float(x)
    return x


@dataclass
class ScenarioResult:
    scenario: str
    columns: tuple
    rows: list                      # list of lists aligned with columns; last column is the verdict
    summary: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.columns = tuple(self.columns)
        self.rows = plain(self.rows)
        self.summary = plain(self.summary)
        self.metadata = plain(self.metadata)

    @property
    def verdicts(self) -> list[bool]:
        k = self.columns.index("verdict")
        return [bool(r[k]) for r in self.rows]

    @property
    def all_satisfied(self) -> bool:
        return all(self.verdicts)

    def column(self, name) -> list:
        k = self.columns.index(name)
        return [r[k] for r in self.rows]

    def to_dict(self) -> dict:
        return {"schema": RESULT_SCHEMA, "scenario": self.scenario, "columns": list(self.columns),
                "rows": [list(r) for r in self.rows], "summary": self.summary, "metadata": self.metadata}

    @classmethod
    def from_dict(cls, d) -> "ScenarioResult":
        if d.get("schema") != RESULT_SCHEMA:
            raise ValidationError(f"unsupported result schema {d.get('schema')!r}")
        return cls(d["scenario"], tuple(d["columns"]), [list(r) for r in d["rows"]], d.get("summary", {}),
                   d.get("metadata", {}))


def _cell(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    return str(x)


def _uncell(s: str):
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


def results_to_csv(result: ScenarioResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(result.columns)
    for r in result.rows:
        w.writerow([_cell(x) for x in r])
    return buf.getvalue()


def results_to_json(result: ScenarioResult) -> str:
    return json.dumps(result.to_dict(), sort_keys=True, indent=2) + "\n"


def emit_results(result: ScenarioResult, fmt: str = "json", out=None) -> Path | str:
    """Write the result as CSV or JSON; returns the path (or the text when out is None).

    A directory `out` receives <scenario>.<fmt>.  Output is byte-stable for
    identical inputs: no timestamps, sorted keys, repr-precision floats.
    """
    if fmt == "csv":
        text = results_to_csv(result)
    elif fmt == "json":
        text = results_to_json(result)
    else:
        raise ValidationError(f"unknown format {fmt!r}; use csv or json")
    if out is None:
        return text
    out = Path(out)
    if out.is_dir():
        out = out / f"{result.scenario}.{fmt}"
    out.write_text(text)
    return out


def load_results(path) -> ScenarioResult:
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".csv":
        rows = list(csv.reader(io.StringIO(text)))
        return ScenarioResult(path.stem, tuple(rows[0]), [[_uncell(c) for c in r] for r in rows[1:]])
    return ScenarioResult.from_dict(json.loads(text))
