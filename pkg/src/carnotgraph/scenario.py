"""Scenario files for the command-line tool.

Line oriented, ``#`` comments, one ``key = value`` or ``key: value`` per line::

    group = H1                          # catalog name or path (relative to this file)
    subgroup W = 1 0 0                  # optional, overrides the group file
    subgroup L = 0 1 0 ; 0 0 1
    normal = yes                        # L must be an ideal (default yes)
    phi poly: l1 = 3*w1                 # one line per L parameter; missing ones are 0
    phi poly: l2 = -3/2*w1**2
    domain box: -1 .. 1                 # lo .. hi per W parameter; repeat for unions
    region box: 0 .. 1                  # V for area-check (default: the domain)
    base = 1/2                          # W parameters of the base point
    ladder = 2^-3 .. 2^-12              # or an explicit list: 0.1 0.01 0.001
    tol = 1e-4
    seed = 0
    samples = 10000
    deltas = 0.2 0.1 0.05
    hom = 1 0 0                         # images of the W basis (jacobian command)
    lambda = 2                          # precompose the jacobian map with δ_λ

Parameters ``w1..`` / ``l1..`` are the coordinates at the pivot columns of
the reduced bases of W and L.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .exceptions import ParseError, PreconditionError
from .graph import BoxDomain, GraphFunction, PolynomialRule
from .group import CarnotGroup
from .groupfile import GroupDefinition, iter_lines, load_group, parse_fraction, parse_rows
from .splitting import Splitting, make_splitting

_RANGE = re.compile(r"(\S+?)\s*\.\.\s*(\S+)")
_POW2 = re.compile(r"^2\^(-?\d+)$")
_PHI = re.compile(r"^l(\d+)$")


@dataclass
class Scenario:
    group_ref: str
    path: str | None = None
    subgroups: dict[str, list[list[Fraction]]] = field(default_factory=dict)
    normal: bool = True
    phi: dict[int, tuple[str, int]] = field(default_factory=dict)  # l index -> (expr, line)
    domain: list[tuple[list[float], list[float]]] = field(default_factory=list)
    region: list[tuple[list[float], list[float]]] = field(default_factory=list)
    base: list[Fraction] | None = None
    ladder: list[float] | None = None
    tol: float | None = None
    seed: int | None = None
    samples: int | None = None
    deltas: list[float] | None = None
    hom: list[list[Fraction]] | None = None
    lam: Fraction | None = None
    lines: dict[str, int] = field(default_factory=dict)

    # -- resolution -------------------------------------------------------

    def definition(self) -> GroupDefinition:
        base = Path(self.path).parent if self.path else None
        try:
            return load_group(self.group_ref, base)
        except ParseError as e:
            if e.path is None:
                raise ParseError(str(e), self.path, self.lines.get("group")) from None
            raise

    def splitting(self, definition: GroupDefinition | None = None) -> Splitting:
        d = definition or self.definition()
        group = CarnotGroup.from_definition(d)
        subs = {**d.subgroups, **self.subgroups}
        if "W" not in subs or "L" not in subs:
            raise PreconditionError("no subgroup W / subgroup L given in the scenario or the group file")
        for label in ("W", "L"):
            for row in subs[label]:
                if len(row) != group.n:
                    raise ParseError(
                        f"subgroup {label} row has {len(row)} entries, group has dimension {group.n}",
                        self.path,
                        self.lines.get(f"subgroup {label}"),
                    )
        return make_splitting(group, subs["W"], subs["L"], require_normal=self.normal)

    def _boxes(self, boxes, S: Splitting, key: str) -> BoxDomain:
        for lo, hi in boxes:
            if len(lo) != S.dim_W:
                raise ParseError(f"{key} box needs {S.dim_W} ranges, got {len(lo)}", self.path, self.lines.get(key))
        return BoxDomain(S, [(np.array(lo), np.array(hi)) for lo, hi in boxes])

    def domain_for(self, S: Splitting) -> BoxDomain:
        if not self.domain:
            raise PreconditionError("scenario has no 'domain box' line")
        return self._boxes(self.domain, S, "domain box")

    def region_for(self, S: Splitting) -> BoxDomain:
        if not self.region:
            return self.domain_for(S)
        return self._boxes(self.region, S, "region box")

    def function(self, S: Splitting) -> GraphFunction:
        for j, (_, line) in self.phi.items():
            if not 1 <= j <= S.dim_L:
                raise ParseError(f"phi coordinate l{j} out of range l1..l{S.dim_L}", self.path, line)
        exprs = [self.phi.get(j, ("0", None))[0] for j in range(1, S.dim_L + 1)]
        try:
            rule = PolynomialRule.from_strings(exprs, S.dim_W)
        except (ValueError, TypeError, SyntaxError) as e:
            raise ParseError(f"bad phi polynomial: {e}", self.path, self.lines.get("phi")) from None
        return GraphFunction(S, self.domain_for(S), rule)

    def base_point(self, S: Splitting) -> np.ndarray:
        if self.base is None:
            raise PreconditionError("scenario has no 'base' line")
        if len(self.base) != S.dim_W:
            raise ParseError(f"base needs {S.dim_W} W parameters", self.path, self.lines.get("base"))
        return S.w_point(np.array(self.base, dtype=object))


def parse_ladder(value: str, path=None, line=None) -> list[float]:
    """``2^-3 .. 2^-12`` (powers of two) or an explicit list of scales."""
    m = _RANGE.fullmatch(value.strip())
    if m:
        a, b = (_POW2.match(t) for t in m.groups())
        if not (a and b):
            raise ParseError("ladder ranges must be written 2^a .. 2^b", path, line)
        lo, hi = int(a.group(1)), int(b.group(1))
        step = -1 if hi < lo else 1
        out = [2.0 ** e for e in range(lo, hi + step, step)]
    else:
        out = []
        for t in value.split():
            p = _POW2.match(t)
            out.append(2.0 ** int(p.group(1)) if p else _float(t, path, line))
    if not out or any(t <= 0 for t in out):
        raise ParseError("ladder values must be positive", path, line)
    return out


def _float(tok: str, path, line) -> float:
    try:
        return float(Fraction(tok))
    except (ValueError, ZeroDivisionError):
        raise ParseError(f"not a number: {tok!r}", path, line) from None


def _int(tok: str, path, line) -> int:
    try:
        return int(tok)
    except ValueError:
        raise ParseError(f"not an integer: {tok!r}", path, line) from None


def _box(value: str, path, line):
    ranges = _RANGE.findall(value)
    rest = _RANGE.sub("", value).strip()
    if not ranges or rest:
        raise ParseError(f"box must be 'lo .. hi' per W parameter, got {value!r}", path, line)
    lo = [_float(a, path, line) for a, _ in ranges]
    hi = [_float(b, path, line) for _, b in ranges]
    if any(h <= l for l, h in zip(lo, hi)):
        raise ParseError("box ranges need lo < hi", path, line)
    return lo, hi


def _split(line: str, path, lineno) -> tuple[str, str]:
    # 'phi poly: l1 = ...' and 'domain box: ...' use a colon; everything else '='
    for sep in (":", "="):
        if sep in line:
            key, value = line.split(sep, 1)
            key = " ".join(key.split())
            if sep == ":" and key not in ("phi poly", "domain box", "region box"):
                continue
            return key, value.strip()
    raise ParseError(f"expected 'key = value', got {line!r}", path, lineno)


def parse_scenario_text(text: str, path: str | None = None) -> Scenario:
    sc = Scenario(group_ref="", path=path)
    for lineno, line in iter_lines(text):
        key, value = _split(line, path, lineno)
        sc.lines.setdefault(key, lineno)
        if key == "group":
            sc.group_ref = value
        elif key.startswith("subgroup "):
            label = key.split(None, 1)[1]
            sc.subgroups[label] = parse_rows(value, None, path, lineno)
        elif key == "normal":
            if value.lower() not in ("yes", "no", "true", "false"):
                raise ParseError("normal must be yes or no", path, lineno)
            sc.normal = value.lower() in ("yes", "true")
        elif key == "phi poly":
            lhs, eq, rhs = value.partition("=")
            m = _PHI.match(lhs.strip())
            if not eq or not m or not rhs.strip():
                raise ParseError("expected 'phi poly: l<j> = <polynomial in w1..>'", path, lineno)
            j = int(m.group(1))
            if j in sc.phi:
                raise ParseError(f"l{j} given twice", path, lineno)
            sc.phi[j] = (rhs.strip(), lineno)
            sc.lines.setdefault("phi", lineno)
        elif key == "domain box":
            sc.domain.append(_box(value, path, lineno))
        elif key == "region box":
            sc.region.append(_box(value, path, lineno))
        elif key == "base":
            sc.base = [parse_fraction(t, path, lineno) for t in value.split()]
        elif key == "ladder":
            sc.ladder = parse_ladder(value, path, lineno)
        elif key == "tol":
            sc.tol = _float(value, path, lineno)
        elif key == "seed":
            sc.seed = _int(value, path, lineno)
        elif key == "samples":
            sc.samples = _int(value, path, lineno)
        elif key == "deltas":
            sc.deltas = [_float(t, path, lineno) for t in value.split()]
        elif key == "hom":
            sc.hom = parse_rows(value, None, path, lineno)
        elif key == "lambda":
            sc.lam = parse_fraction(value, path, lineno)
        else:
            raise ParseError(f"unknown key {key!r}", path, lineno)
    if not sc.group_ref:
        raise ParseError("missing 'group' line", path)
    return sc


def load_scenario(path: str | Path) -> Scenario:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as e:
        raise ParseError(f"cannot read scenario: {e.strerror}", str(p)) from None
    return parse_scenario_text(text, str(p))
