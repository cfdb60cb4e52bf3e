"""CSV sample files and flat ``key=value`` configuration files.

CSV files are UTF-8 and comma separated with a header row. Columns are
named ``x1_0..``, ``x2_0..`` and ``y_0..``; roles a file does not carry are
omitted. Numbers are written in shortest round-trip form, so re-reading a
written file reproduces the arrays exactly.
"""

from __future__ import annotations

import csv
import re
from pathlib import Path

import numpy as np

from .core import TrainingCorpus
from .errors import ConfigError, CorpusError

ROLES = ("x1", "x2", "y")
_COLUMN = re.compile(r"^(x1|x2|y)_(\d+)$")


def format_number(v: float) -> str:
    return repr(float(v))


def write_csv(path, arrays: dict[str, np.ndarray]) -> None:
    """Write role arrays (``{"x1": (n, M1), ...}``) to ``path`` in role order."""
    roles = [r for r in ROLES if r in arrays]
    unknown = set(arrays) - set(ROLES)
    if unknown:
        raise CorpusError(f"unknown CSV roles {sorted(unknown)}")
    cols, blocks = [], []
    n = None
    for r in roles:
        a = np.asarray(arrays[r], dtype=float)
        if a.ndim == 1:
            a = a[:, None]
        if n is not None and a.shape[0] != n:
            raise CorpusError("CSV roles have different row counts")
        n = a.shape[0]
        cols += [f"{r}_{i}" for i in range(a.shape[1])]
        blocks.append(a)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        if blocks:
            for row in np.hstack(blocks):
                w.writerow([format_number(v) for v in row])


def read_csv(path, required: tuple[str, ...] = ()) -> dict[str, np.ndarray]:
    """Read a sample file into role arrays; ``required`` roles must be present."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise CorpusError(f"cannot read {path}: {exc.strerror}") from None
    if not rows:
        raise CorpusError(f"{path}: missing header row")
    header = [h.strip() for h in rows[0]]
    layout: dict[str, list[tuple[int, int]]] = {}
    for j, name in enumerate(header):
        m = _COLUMN.match(name)
        if not m:
            raise CorpusError(f"{path}: unrecognised column '{name}'")
        layout.setdefault(m.group(1), []).append((int(m.group(2)), j))
    for role, cols in layout.items():
        if sorted(i for i, _ in cols) != list(range(len(cols))):
            raise CorpusError(f"{path}: columns of role {role} are not numbered 0..{len(cols) - 1}")
    missing = [r for r in required if r not in layout]
    if missing:
        raise CorpusError(f"{path}: missing role(s) {missing}")
    body = [r for r in rows[1:] if any(c.strip() for c in r)]
    try:
        data = np.array([[float(c) for c in r] for r in body], dtype=float).reshape(len(body), len(header))
    except ValueError:
        raise CorpusError(f"{path}: non-numeric or ragged rows") from None
    if not np.all(np.isfinite(data)):
        raise CorpusError(f"{path}: non-finite values")
    out = {}
    for role in ROLES:
        if role in layout:
            idx = [j for _, j in sorted(layout[role])]
            out[role] = data[:, idx]
    return out


def read_corpus(labeled1, labeled2, unlabeled) -> TrainingCorpus:
    """Corpus from the three sample files; a ``None`` labeled path means an empty set."""
    u = read_csv(unlabeled, ("x1", "x2"))
    m1, m2 = u["x1"].shape[1], u["x2"].shape[1]
    l1 = read_csv(labeled1, ("x1", "y")) if labeled1 else None
    l2 = read_csv(labeled2, ("x2", "y")) if labeled2 else None
    n = next((d["y"].shape[1] for d in (l1, l2) if d is not None), 1)
    if l1 is None:
        l1 = {"x1": np.zeros((0, m1)), "y": np.zeros((0, n))}
    if l2 is None:
        l2 = {"x2": np.zeros((0, m2)), "y": np.zeros((0, n))}
    return TrainingCorpus(l1["x1"], l1["y"], l2["x2"], l2["y"], u["x1"], u["x2"])


def write_corpus(directory, corpus: TrainingCorpus) -> list[Path]:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = [d / "labeled1.csv", d / "labeled2.csv", d / "unlabeled.csv"]
    write_csv(paths[0], {"x1": corpus.labeled1_x, "y": corpus.labeled1_y})
    write_csv(paths[1], {"x2": corpus.labeled2_x, "y": corpus.labeled2_y})
    write_csv(paths[2], {"x1": corpus.unlabeled_x1, "x2": corpus.unlabeled_x2})
    return paths


def parse_config(text: str) -> dict[str, str]:
    """Parse ``key=value`` lines; ``#`` starts a comment, blank lines are ignored."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected key=value")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key '{key}'")
        out[key] = value.strip()
    return out


def read_config(path) -> dict[str, str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)
