"""Files in and out: flat key=value configs, CSV ingestion for SUR and panel
data, chain archives, posterior summaries and histogram data.

Floats are written with ``repr`` so every value survives a write/read cycle
bit for bit. All writers are atomic (temporary file, then rename).
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import MissingColumn, NonFiniteValue, UnbalancedPanel, ValidationError
from .mcmc import Chains
from .panel import PanelData
from .sur import SurData

ARCHIVE_MAGIC = "dpgls-chains v1"


# key=value configs


def parse_kv(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment, blank lines are skipped."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"line {lineno}: expected key = value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ValidationError(f"line {lineno}: empty key")
        if key in out:
            raise ValidationError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def read_kv(path) -> dict:
    return parse_kv(Path(path).read_text(encoding="utf-8"))


def format_kv(cfg: dict) -> str:
    return "".join(f"{k} = {cfg[k]}\n" for k in sorted(cfg))


def config_hash(cfg: dict) -> str:
    """SHA-256 prefix of the canonical (sorted, normalized) config text."""
    return hashlib.sha256(format_kv(cfg).encode("utf-8")).hexdigest()[:16]


def atomic_write(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# tables


def fmt_float(x) -> str:
    return repr(float(x))


def read_table(path) -> dict:
    """Read a numeric CSV into ``{column: float array}`` in header order.

    Raises :class:`NonFiniteValue` naming the row (1-based, header excluded)
    and column of any unparsable, missing or non-finite cell.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(row for row in fh if not row.startswith("#"))
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        if len(set(header)) != len(header):
            raise ValidationError(f"{path}: duplicate column names")
        cols = {h: [] for h in header}
        for r, row in enumerate(reader, 1):
            if not row:
                continue
            if len(row) != len(header):
                raise ValidationError(f"{path}: row {r} has {len(row)} fields, expected {len(header)}")
            for h, cell in zip(header, row):
                try:
                    v = float(cell)
                except ValueError:
                    raise NonFiniteValue(f"row {r}, column {h!r}: cannot parse {cell!r}") from None
                if not math.isfinite(v):
                    raise NonFiniteValue(f"row {r}, column {h!r}: non-finite value {cell!r}")
                cols[h].append(v)
    return {h: np.array(v, dtype=float) for h, v in cols.items()}


def table_to_csv(columns: dict, meta: dict = None) -> str:
    buf = io.StringIO()
    for k, v in (meta or {}).items():
        buf.write(f"# {k}={v}\n")
    w = csv.writer(buf, lineterminator="\n")
    names = list(columns)
    w.writerow(names)
    n = len(next(iter(columns.values()))) if columns else 0
    arrays = [np.asarray(columns[c]) for c in names]
    for i in range(n):
        w.writerow([fmt_float(a[i]) for a in arrays])
    return buf.getvalue()


def write_table(path, columns: dict, meta: dict = None):
    atomic_write(path, table_to_csv(columns, meta))


def _require(table, cols, path=""):
    for c in cols:
        if c not in table:
            raise MissingColumn(f"{path}: missing column {c!r}" if path else f"missing column {c!r}")


def _split(value) -> list:
    if isinstance(value, (list, tuple)):
        return list(value)
    return [s.strip() for s in str(value).split(",") if s.strip()]


def parse_equations(model: dict) -> dict:
    """``eq.<name> = y ~ x1 + x2`` entries to ``{name: (y, [x1, x2])}``."""
    eqs = {}
    for key, value in model.items():
        if not key.startswith("eq."):
            continue
        if "~" not in value:
            raise ValidationError(f"{key}: expected 'response ~ x1 + x2'")
        lhs, rhs = value.split("~", 1)
        xs = [s.strip() for s in rhs.split("+") if s.strip()]
        eqs[key[3:]] = (lhs.strip(), xs)
    return eqs


def panel_grid(table: dict, id_col="id", t_col="t", path=""):
    """Row index of every (individual, period) cell, enforcing a full grid."""
    _require(table, [id_col, t_col], path)
    ids = np.unique(table[id_col])
    periods = np.unique(table[t_col])
    pos = {}
    for row, (i, t) in enumerate(zip(table[id_col], table[t_col])):
        key = (i, t)
        if key in pos:
            raise UnbalancedPanel(f"row {row + 1}: duplicate cell ({id_col}={i:g}, {t_col}={t:g})")
        pos[key] = row
    index = np.empty((ids.size, periods.size), dtype=int)
    for a, i in enumerate(ids):
        for b, t in enumerate(periods):
            if (i, t) not in pos:
                raise UnbalancedPanel(f"missing cell ({id_col}={i:g}, {t_col}={t:g})")
            index[a, b] = pos[(i, t)]
    return ids, periods, index


def load_csv(path, schema: str, model: dict = None):
    """Load a CSV as :class:`SurData` (``schema='system'``) or :class:`PanelData`
    (``schema='panel'``).

    ``model`` selects the columns. For systems, ``eq.<name> = y ~ x1 + x2``
    entries (an intercept is added unless ``intercept = false``). For panels,
    ``y``, ``x`` (comma separated) and optionally ``id`` and ``t`` naming the
    index columns. Without ``model``, a system uses every column named
    ``y*`` as a response on all other columns, and a panel uses ``y`` on all
    non-index columns.
    """
    table = read_table(path)
    model = dict(model or {})
    if schema == "system":
        eqs = parse_equations(model)
        if not eqs:
            ys = [c for c in table if c.startswith("y")]
            xs = [c for c in table if not c.startswith("y")]
            if not ys:
                raise MissingColumn(f"{path}: no response columns (named y*)")
            eqs = {c: (c, xs) for c in ys}
        intercept = _as_bool(model.get("intercept", "true"))
        Y, Xs, names = [], [], []
        for _, (yc, xcols) in eqs.items():
            _require(table, [yc] + xcols, path)
            n = table[yc].size
            cols = ([np.ones(n)] if intercept else []) + [table[c] for c in xcols]
            if not cols:
                raise ValidationError(f"equation for {yc!r} has no regressors")
            Y.append(table[yc])
            Xs.append(np.column_stack(cols))
            names.append((["const"] if intercept else []) + list(xcols))
        return SurData(np.column_stack(Y), Xs, names, list(eqs))
    if schema == "panel":
        id_col, t_col = model.get("id", "id"), model.get("t", "t")
        ids, periods, index = panel_grid(table, id_col, t_col, path)
        y_col = model.get("y", "y")
        xcols = _split(model["x"]) if "x" in model else [c for c in table if c not in (id_col, t_col, y_col)]
        _require(table, [y_col] + xcols, path)
        y = table[y_col][index]
        X = np.stack([table[c][index] for c in xcols], axis=-1)
        return PanelData(y, X, xcols, list(ids), list(periods))
    raise ValidationError(f"schema must be 'system' or 'panel', got {schema!r}")


def _as_bool(value) -> bool:
    v = str(value).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValidationError(f"expected a boolean, got {value!r}")


# chain archives


@dataclass
class ChainArchive:
    names: list
    draws: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.draws = np.atleast_2d(np.asarray(self.draws, dtype=float))
        if len(set(self.names)) != len(self.names):
            raise ValidationError("archive column names must be unique")
        if self.draws.shape[1] != len(self.names):
            raise ValidationError("archive has a different number of names and columns")

    @classmethod
    def from_chains(cls, chains: Chains, meta=None, extra_columns=None):
        names, data = chains.as_table()
        if extra_columns:
            names = names + list(extra_columns)
            data = np.column_stack([data] + [np.asarray(v, dtype=float) for v in extra_columns.values()])
        return cls(names, data, dict(meta or {}))

    def column(self, name):
        if name not in self.names:
            raise MissingColumn(f"archive has no parameter {name!r}")
        return self.draws[:, self.names.index(name)]

    def to_csv(self) -> str:
        meta = {"format": ARCHIVE_MAGIC, **self.meta}
        return table_to_csv({n: self.draws[:, j] for j, n in enumerate(self.names)}, meta)


def save_archive(path, archive: ChainArchive):
    atomic_write(path, archive.to_csv())


def load_archive(path) -> ChainArchive:
    meta = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            k, _, v = line[1:].strip().partition("=")
            meta[k.strip()] = v.strip()
    if meta.pop("format", None) != ARCHIVE_MAGIC:
        raise ValidationError(f"{path}: not a chain archive")
    table = read_table(path)
    names = list(table)
    draws = np.column_stack([table[n] for n in names]) if names else np.empty((0, 0))
    return ChainArchive(names, draws, meta)


# summaries


def _is_integer_chain(x) -> bool:
    return x.size > 0 and np.all(x == np.round(x))


def summarize_chains(archive: ChainArchive, levels=(0.025, 0.5, 0.975)) -> list:
    """Mean, s.d., quantiles and (integer chains only) the modal value.

    Quantiles interpolate linearly between order statistics (Hyndman-Fan
    type 7, numpy's ``linear`` method), so the median of 1..100 is 50.5.
    """
    levels = [float(q) for q in levels]
    if any(not 0 <= q <= 1 for q in levels):
        raise ValidationError("quantile levels must lie in [0, 1]")
    if archive.draws.shape[0] == 0:
        raise ValidationError("archive has no draws")
    rows = []
    for j, name in enumerate(archive.names):
        x = archive.draws[:, j]
        row = {"name": name, "mean": float(x.mean()), "sd": float(x.std(ddof=1)) if x.size > 1 else 0.0}
        for q in levels:
            row[f"q{q:g}"] = float(np.quantile(x, q, method="linear"))
        if _is_integer_chain(x):
            vals, counts = np.unique(x, return_counts=True)
            row["mode"] = float(vals[np.argmax(counts)])
        else:
            row["mode"] = math.nan
        rows.append(row)
    return rows


def _cell(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return fmt_float(v)


def rows_to_csv(rows: list, meta: dict = None) -> str:
    buf = io.StringIO()
    for k, v in (meta or {}).items():
        buf.write(f"# {k}={v}\n")
    if not rows:
        return buf.getvalue()
    w = csv.writer(buf, lineterminator="\n")
    keys = list(rows[0])
    w.writerow(keys)
    for r in rows:
        w.writerow([_cell(r[k]) for k in keys])
    return buf.getvalue()


def export_histogram(archive: ChainArchive, parameter: str, bins: int) -> list:
    """Equal-width bins over ``[min, max]`` of one chain: ``(lo, hi, count)`` rows."""
    if int(bins) < 1:
        raise ValidationError("bins must be at least 1")
    x = archive.column(parameter)
    if x.size == 0:
        raise ValidationError(f"chain {parameter!r} is empty")
    counts, edges = np.histogram(x, bins=int(bins))
    return [{"lo": float(edges[k]), "hi": float(edges[k + 1]), "count": int(counts[k])} for k in range(len(counts))]
