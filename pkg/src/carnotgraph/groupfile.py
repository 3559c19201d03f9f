"""Group-definition files and the shipped catalog.

A group file is line oriented; ``#`` starts a comment::

    name = H1
    layer_dims = 2 1
    brackets = 1 2 3 1            # i j k num/den  ->  c[i][j][k], 1-based
    subgroup W = 1 0 0
    subgroup L = 0 1 0 ; 0 0 1    # rows separated by ';'
    norm_weights = 1 1            # optional, one per layer

Several ``brackets`` lines accumulate.  The antisymmetric entry
``c[j][i][k] = -c[i][j][k]`` is filled in automatically, unless the file also
gives ``c[j][i][k]`` explicitly (which is how a broken algebra can be written
down on purpose).
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .algebra import StratifiedAlgebra
from .exceptions import ParseError

CATALOG_ENV = "CARNOTGRAPH_CATALOG"
GROUP_SUFFIX = ".grp"


@dataclass
class GroupDefinition:
    algebra: StratifiedAlgebra
    subgroups: dict[str, list[list[Fraction]]] = field(default_factory=dict)
    norm_weights: tuple[float, ...] | None = None
    path: str | None = None

    @property
    def name(self) -> str:
        return self.algebra.name


def catalog_dir() -> Path:
    env = os.environ.get(CATALOG_ENV)
    if env:
        return Path(env)
    return Path(__file__).with_name("catalog")


def catalog_names() -> list[str]:
    return sorted(p.stem for p in catalog_dir().glob("*" + GROUP_SUFFIX))


def iter_lines(text: str):
    """Yield (1-based line number, content) with comments and blanks removed."""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line


def parse_fraction(tok: str, path=None, line=None) -> Fraction:
    try:
        return Fraction(tok)
    except (ValueError, ZeroDivisionError):
        raise ParseError(f"not a rational number: {tok!r}", path, line) from None


def parse_rows(value: str, n: int | None = None, path=None, line=None) -> list[list[Fraction]]:
    rows = []
    for chunk in value.split(";"):
        toks = chunk.split()
        if not toks:
            continue
        row = [parse_fraction(t, path, line) for t in toks]
        if n is not None and len(row) != n:
            raise ParseError(f"row has {len(row)} entries, expected {n}", path, line)
        rows.append(row)
    return rows


def split_key(line: str, path=None, lineno=None) -> tuple[str, str]:
    if "=" not in line:
        raise ParseError(f"expected 'key = value', got {line!r}", path, lineno)
    key, value = line.split("=", 1)
    return " ".join(key.split()), value.strip()


def parse_group_text(text: str, path: str | None = None) -> GroupDefinition:
    name = Path(path).stem if path else ""
    layer_dims = None
    entries: list[tuple[int, int, int, Fraction, int]] = []
    subgroup_lines: dict[str, tuple[str, int]] = {}
    weights = None

    for lineno, line in iter_lines(text):
        key, value = split_key(line, path, lineno)
        if key == "name":
            name = value
        elif key == "layer_dims":
            try:
                layer_dims = tuple(int(t) for t in value.split())
            except ValueError:
                raise ParseError(f"layer_dims must be integers: {value!r}", path, lineno) from None
            if not layer_dims or any(d <= 0 for d in layer_dims):
                raise ParseError("layer_dims must be positive", path, lineno)
        elif key in ("brackets", "bracket"):
            for chunk in value.split(";"):
                toks = chunk.split()
                if not toks:
                    continue
                if len(toks) != 4:
                    raise ParseError(f"bracket entry needs 'i j k num/den', got {chunk.strip()!r}", path, lineno)
                try:
                    i, j, k = (int(t) for t in toks[:3])
                except ValueError:
                    raise ParseError(f"bracket indices must be integers: {chunk.strip()!r}", path, lineno) from None
                entries.append((i, j, k, parse_fraction(toks[3], path, lineno), lineno))
        elif key.startswith("subgroup "):
            label = key.split(None, 1)[1]
            subgroup_lines[label] = (value, lineno)
        elif key == "norm_weights":
            try:
                weights = tuple(float(t) for t in value.split())
            except ValueError:
                raise ParseError(f"norm_weights must be numbers: {value!r}", path, lineno) from None
        else:
            raise ParseError(f"unknown key {key!r}", path, lineno)

    if layer_dims is None:
        raise ParseError("missing layer_dims", path)
    n = sum(layer_dims)
    explicit = {(i, j, k) for i, j, k, _, _ in entries}
    c: dict[tuple[int, int, int], Fraction] = {}
    for i, j, k, v, lineno in entries:
        if not all(1 <= t <= n for t in (i, j, k)):
            raise ParseError(f"bracket index out of range 1..{n}", path, lineno)
        c[(i - 1, j - 1, k - 1)] = v
        if (j, i, k) not in explicit and i != j:
            c[(j - 1, i - 1, k - 1)] = -v
    algebra = StratifiedAlgebra.from_brackets(
        layer_dims, [(i, j, k, v) for (i, j, k), v in c.items()], name=name, n=n, antisymmetrize=False
    )
    subgroups = {label: parse_rows(v, n, path, ln) for label, (v, ln) in subgroup_lines.items()}
    if weights is not None and len(weights) != len(layer_dims):
        raise ParseError("norm_weights needs one entry per layer", path)
    return GroupDefinition(algebra, subgroups, weights, path)


def resolve_group_path(ref: str, base: Path | None = None) -> Path:
    p = Path(ref)
    candidates = [p]
    if base is not None and not p.is_absolute():
        candidates.append(base / p)
    candidates.append(catalog_dir() / p)
    candidates.append(catalog_dir() / (ref + GROUP_SUFFIX))
    for c in candidates:
        if c.is_file():
            return c
    raise ParseError(f"group {ref!r} not found (catalog: {catalog_dir()})")


def load_group(ref: str | os.PathLike, base: Path | None = None) -> GroupDefinition:
    """Load a group by catalog name (``"H1"``) or file path."""
    path = resolve_group_path(str(ref), base)
    return parse_group_text(path.read_text(), str(path))
