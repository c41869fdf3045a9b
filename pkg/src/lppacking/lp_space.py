"""Finitely supported vectors in l_p(A) over a growing set of coordinate labels."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple

# entries smaller than this after arithmetic are treated as exact zeros
ZERO_CUTOFF = 1e-15

_COORD_RE = re.compile(r"^s(\d+)i(\d+)$")


class CoordId(NamedTuple):
    """Label of one coordinate axis: ``stage`` that minted it, ``index`` within that stage."""

    stage: int
    index: int

    def __str__(self) -> str:
        return f"s{self.stage}i{self.index}"

    @classmethod
    def parse(cls, text: str) -> "CoordId":
        m = _COORD_RE.match(text)
        if m is None:
            raise ValueError(f"malformed coordinate id {text!r}")
        stage, index = int(m.group(1)), int(m.group(2))
        if stage < 1:
            raise ValueError(f"coordinate stage must be positive, got {text!r}")
        return cls(stage, index)


@dataclass(frozen=True)
class SpaceParams:
    p: float
    eta: float = 1e-9

    def __post_init__(self):
        if not (self.p >= 1.0) or self.p == float("inf"):
            raise ValueError(f"exponent p must lie in [1, inf), got {self.p}")
        if not (self.eta > 0.0):
            raise ValueError(f"strictness margin eta must be positive, got {self.eta}")


class SparsePoint:
    """Immutable map CoordId -> float with no stored zeros.

    Entries are kept in ascending CoordId order, which is also the summation
    order of every norm computed here.
    """

    __slots__ = ("_d", "_hash")

    def __init__(self, entries: Mapping[CoordId, float] | Iterable[tuple[CoordId, float]] = ()):
        items = entries.items() if isinstance(entries, Mapping) else entries
        d = {}
        for k, v in items:
            if not isinstance(k, CoordId):
                k = CoordId(*k)
            v = float(v)
            if abs(v) >= ZERO_CUTOFF:
                d[k] = v
        self._d = dict(sorted(d.items()))
        self._hash = None

    @property
    def entries(self) -> dict[CoordId, float]:
        return dict(self._d)

    @property
    def support(self) -> frozenset[CoordId]:
        return frozenset(self._d)

    def get(self, coord: CoordId) -> float:
        return self._d.get(coord, 0.0)

    def items(self):
        return self._d.items()

    def __len__(self) -> int:
        return len(self._d)

    def __contains__(self, coord) -> bool:
        return coord in self._d

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparsePoint):
            return NotImplemented
        return self._d == other._d

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(tuple(self._d.items()))
        return self._hash

    def __repr__(self) -> str:
        inner = ", ".join(f"{k}: {v!r}" for k, v in self._d.items())
        return f"SparsePoint({{{inner}}})"

    def __add__(self, other: "SparsePoint") -> "SparsePoint":
        return add(self, other)

    def __sub__(self, other: "SparsePoint") -> "SparsePoint":
        return sub(self, other)

    def __neg__(self) -> "SparsePoint":
        return scale(self, -1.0)

    def __mul__(self, c: float) -> "SparsePoint":
        return scale(self, c)

    __rmul__ = __mul__

    def restrict(self, keep) -> "SparsePoint":
        """Coordinate restriction to the axes for which ``keep(coord)`` is true."""
        return SparsePoint((k, v) for k, v in self._d.items() if keep(k))

    # serialization

    def to_dict(self) -> dict:
        return {"entries": {str(k): v for k, v in self._d.items()}}

    @classmethod
    def from_dict(cls, data: Mapping) -> "SparsePoint":
        return cls((CoordId.parse(k), float(v)) for k, v in data["entries"].items())

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "SparsePoint":
        return cls.from_dict(json.loads(text))


ORIGIN = SparsePoint()


def unit(coord: CoordId) -> SparsePoint:
    return SparsePoint({coord: 1.0})


def add(x: SparsePoint, y: SparsePoint) -> SparsePoint:
    d = dict(x._d)
    for k, v in y._d.items():
        d[k] = d.get(k, 0.0) + v
    return SparsePoint(d)


def sub(x: SparsePoint, y: SparsePoint) -> SparsePoint:
    d = dict(x._d)
    for k, v in y._d.items():
        d[k] = d.get(k, 0.0) - v
    return SparsePoint(d)


def scale(x: SparsePoint, c: float) -> SparsePoint:
    return SparsePoint((k, c * v) for k, v in x._d.items())


def disjoint_support(x: SparsePoint, y: SparsePoint) -> bool:
    return x._d.keys().isdisjoint(y._d.keys())


def _p_of(params) -> float:
    return params.p if isinstance(params, SpaceParams) else float(params)


def p_norm_pow(x: SparsePoint, params: SpaceParams | float) -> float:
    """Sum of |x_a|^p in ascending coordinate order (the p-th power of the norm)."""
    p = _p_of(params)
    s = 0.0
    for v in x._d.values():
        s += abs(v) ** p
    return s


def p_norm(x: SparsePoint, params: SpaceParams | float) -> float:
    p = _p_of(params)
    return p_norm_pow(x, p) ** (1.0 / p)


def distance_pow(x: SparsePoint, y: SparsePoint, params: SpaceParams | float) -> float:
    """||x - y||_p^p, summed over the union of supports in ascending coordinate order."""
    p = _p_of(params)
    xd, yd = x._d, y._d
    s = 0.0
    for k in sorted(xd.keys() | yd.keys()):
        s += abs(xd.get(k, 0.0) - yd.get(k, 0.0)) ** p
    return s


def distance(x: SparsePoint, y: SparsePoint, params: SpaceParams | float) -> float:
    p = _p_of(params)
    return distance_pow(x, y, p) ** (1.0 / p)


def points_to_json(points: Iterable[SparsePoint]) -> list[dict]:
    return [pt.to_dict() for pt in points]


def points_from_json(data: Iterable[Mapping]) -> list[SparsePoint]:
    return [SparsePoint.from_dict(d) for d in data]
