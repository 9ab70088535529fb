"""Geometry of the 3D topological cluster lattice.

Sites live on doubled integer coordinates: unit-cell corners sit at all-even
points, so a site's role is a pure parity test.

* exactly one odd coordinate: edge qubit (direction = the odd axis)
* exactly two odd coordinates: face qubit (normal = the even axis)
* zero or three odd coordinates: no qubit (cell corner / cell centre)

Transverse lines ``(x, y)`` with ``x`` and ``y`` of equal parity carry photons
on alternate ``z`` steps (half rate); the remaining lines carry a photon at
every ``z`` step (full rate).  The assignment reproduces the checkerboard of
the unit-cell figure up to a global translation.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

AXES = ("x", "y", "z")
HALF = "half"
FULL = "full"


class Site(NamedTuple):
    """A point of the doubled-coordinate lattice."""

    x: int
    y: int
    z: int

    def shifted(self, axis: int, step: int) -> "Site":
        coords = list(self)
        coords[axis] += step
        return Site(*coords)


class CellCoord(NamedTuple):
    """Index of a unit cell; ``dual`` cells are centred on primal corners."""

    cx: int
    cy: int
    cz: int
    dual: bool = False

    @property
    def centre(self) -> Site:
        off = 0 if self.dual else 1
        return Site(2 * self.cx + off, 2 * self.cy + off, 2 * self.cz + off)


@dataclass(frozen=True)
class SiteKind:
    kind: str  # "face" | "edge" | "vertex" | "invalid"
    axis: int | None  # face normal or edge direction
    rate: str  # "half" | "full"

    @property
    def is_qubit(self) -> bool:
        return self.kind in ("face", "edge")


def rate_class(x: int, y: int) -> str:
    """Rate class of the optical line through transverse point ``(x, y)``."""
    return HALF if (x - y) % 2 == 0 else FULL


def classify_site(site: Sequence[int]) -> SiteKind:
    x, y, z = site
    odd = [c % 2 for c in (x, y, z)]
    n_odd = sum(odd)
    rate = rate_class(x, y)
    if n_odd == 1:
        return SiteKind("edge", odd.index(1), rate)
    if n_odd == 2:
        return SiteKind("face", odd.index(0), rate)
    if n_odd == 0:
        return SiteKind("vertex", None, rate)
    return SiteKind("invalid", None, rate)


def is_qubit(site: Sequence[int]) -> bool:
    return sum(c % 2 for c in site) in (1, 2)


class InvalidSiteError(ValueError):
    """Raised for coordinates that are not qubit sites of a region."""


@dataclass(frozen=True)
class PauliOperator:
    """Signed Pauli operator on region qubit indices.

    A qubit in both supports is a Y (Hermitian convention), which Eq.-1 style
    generators never produce.
    """

    sign: int = 1
    x_support: frozenset[int] = frozenset()
    z_support: frozenset[int] = frozenset()

    def __post_init__(self) -> None:
        if self.sign not in (1, -1):
            raise ValueError(f"sign must be +1 or -1, got {self.sign}")
        object.__setattr__(self, "x_support", frozenset(self.x_support))
        object.__setattr__(self, "z_support", frozenset(self.z_support))

    @classmethod
    def from_label(cls, label: str, sign: int = 1) -> "PauliOperator":
        """Build from a dense label such as ``"XZIY"`` (index = position)."""
        xs, zs = set(), set()
        for i, ch in enumerate(label.upper()):
            if ch in "XY":
                xs.add(i)
            if ch in "ZY":
                zs.add(i)
            if ch not in "IXYZ":
                raise ValueError(f"bad Pauli letter {ch!r}")
        return cls(sign, frozenset(xs), frozenset(zs))

    @property
    def support(self) -> frozenset[int]:
        return self.x_support | self.z_support

    @property
    def weight(self) -> int:
        return len(self.support)

    def commutes_with(self, other: "PauliOperator") -> bool:
        overlap = len(self.x_support & other.z_support) + len(self.z_support & other.x_support)
        return overlap % 2 == 0

    def unsigned(self) -> "PauliOperator":
        return PauliOperator(1, self.x_support, self.z_support)

    def __neg__(self) -> "PauliOperator":
        return PauliOperator(-self.sign, self.x_support, self.z_support)

    def to_bits(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        xb = np.zeros(n, dtype=np.uint8)
        zb = np.zeros(n, dtype=np.uint8)
        xb[list(self.x_support)] = 1
        zb[list(self.z_support)] = 1
        return xb, zb

    def label(self, n: int) -> str:
        chars = []
        for q in range(n):
            inx, inz = q in self.x_support, q in self.z_support
            chars.append("Y" if inx and inz else "X" if inx else "Z" if inz else "I")
        return ("+" if self.sign > 0 else "-") + "".join(chars)

    def __mul__(self, other: "PauliOperator") -> "PauliOperator":
        """Group product; raises if the result is not Hermitian (anticommuting factors)."""
        if not self.commutes_with(other):
            raise ValueError("product of anticommuting Paulis is not Hermitian")
        # phase exponent of i, Hermitian-convention bookkeeping per qubit
        phase = 0
        for q in self.support | other.support:
            a = (q in self.x_support, q in self.z_support)
            b = (q in other.x_support, q in other.z_support)
            phase += _g(a, b)
        phase %= 4
        sign = self.sign * other.sign * (1 if phase == 0 else -1)
        return PauliOperator(sign, self.x_support ^ other.x_support, self.z_support ^ other.z_support)


def _g(a: tuple[bool, bool], b: tuple[bool, bool]) -> int:
    """Exponent of i picked up when multiplying single-qubit Paulis ``a * b``."""
    x1, z1 = a
    x2, z2 = b
    if not x1 and not z1:
        return 0
    if x1 and z1:
        return int(z2) - int(x2)
    if x1:
        return int(z2) * (2 * int(x2) - 1)
    return int(x2) * (1 - 2 * int(z2))


OPEN = "open"
PERIODIC = "periodic"


@dataclass(frozen=True)
class Region:
    """Finite block of the lattice.

    ``bounds`` are inclusive doubled-coordinate ranges per axis.  A periodic
    axis identifies ``lo`` with ``hi + 1``, so its extent must be even to keep
    parities consistent.
    """

    bounds: tuple[tuple[int, int], tuple[int, int], tuple[int, int]]
    boundary: tuple[str, str, str] = (OPEN, OPEN, OPEN)

    def __post_init__(self) -> None:
        bounds = tuple((int(lo), int(hi)) for lo, hi in self.bounds)
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "boundary", tuple(self.boundary))
        if len(bounds) != 3 or len(self.boundary) != 3:
            raise ValueError("region needs three axes")
        for (lo, hi), pol in zip(bounds, self.boundary):
            if hi < lo:
                raise ValueError(f"empty axis range ({lo}, {hi})")
            if pol not in (OPEN, PERIODIC):
                raise ValueError(f"unknown boundary policy {pol!r}")
            if pol == PERIODIC and (hi - lo + 1) % 2:
                raise ValueError("periodic axis needs an even extent")

    @classmethod
    def from_cells(cls, nx: int, ny: int, nz: int, boundary: tuple[str, str, str] = (OPEN, OPEN, OPEN)) -> "Region":
        """Block of ``nx * ny * nz`` primal cells.

        Open axes include the closing corner plane (``0..2n``); periodic axes
        span ``0..2n-1``.
        """
        ext = []
        for n, pol in zip((nx, ny, nz), boundary):
            if n < 1:
                raise ValueError("cell counts must be >= 1")
            ext.append((0, 2 * n if pol == OPEN else 2 * n - 1))
        return cls(tuple(ext), boundary)

    def to_json(self) -> str:
        return json.dumps({"bounds": [list(b) for b in self.bounds], "boundary_policy": list(self.boundary)})

    @classmethod
    def from_json(cls, text: str) -> "Region":
        data = json.loads(text)
        return cls(tuple(tuple(b) for b in data["bounds"]), tuple(data["boundary_policy"]))

    def normalise(self, site: Sequence[int]) -> Site | None:
        """Wrap periodic axes; ``None`` if the point falls outside an open axis."""
        coords = []
        for c, (lo, hi), pol in zip(site, self.bounds, self.boundary):
            if pol == PERIODIC:
                c = lo + (c - lo) % (hi - lo + 1)
            elif not lo <= c <= hi:
                return None
            coords.append(c)
        return Site(*coords)

    def contains(self, site: Sequence[int]) -> bool:
        s = self.normalise(site)
        return s is not None and tuple(s) == tuple(site)

    @cached_property
    def sites(self) -> tuple[Site, ...]:
        """Qubit sites in row-major ``(x, y, z)`` order."""
        ranges = [range(lo, hi + 1) for lo, hi in self.bounds]
        return tuple(Site(*p) for p in itertools.product(*ranges) if is_qubit(p))

    @cached_property
    def _index(self) -> dict[Site, int]:
        return {s: i for i, s in enumerate(self.sites)}

    @property
    def n_qubits(self) -> int:
        return len(self.sites)

    def index(self, site: Sequence[int]) -> int:
        try:
            return self._index[Site(*site)]
        except KeyError:
            raise InvalidSiteError(f"{tuple(site)} is not a qubit site of the region") from None

    def __iter__(self) -> Iterator[Site]:
        return iter(self.sites)


def neighbors(site: Sequence[int], region: Region) -> frozenset[Site]:
    """Qubit sites linked to ``site`` by the cluster bonds (at most four)."""
    site = Site(*site)
    if not is_qubit(site) or not region.contains(site):
        raise InvalidSiteError(f"{tuple(site)} is not a qubit site of the region")
    out = set()
    for axis in range(3):
        for step in (-1, 1):
            cand = site.shifted(axis, step)
            if not is_qubit(cand):
                continue
            wrapped = region.normalise(cand)
            if wrapped is not None and wrapped != site:
                out.add(wrapped)
    return frozenset(out)


def stabilizer_generator(site: Sequence[int], region: Region) -> PauliOperator:
    """``X`` on the site and ``Z`` on each linked neighbour present in the region."""
    nbrs = neighbors(site, region)
    return PauliOperator(
        1,
        frozenset({region.index(site)}),
        frozenset(region.index(b) for b in nbrs),
    )


def cell_faces(cell: CellCoord, region: Region) -> list[Site]:
    """The (up to) six face sites bounding ``cell``; edges for a dual cell.

    At open boundaries only the in-region subset is returned.
    """
    centre = cell.centre
    if region.normalise(centre) is None:
        # a cell whose centre lies outside an open axis is not part of the block
        raise InvalidSiteError(f"cell {tuple(cell)} lies outside the region")
    faces = []
    for axis in range(3):
        for step in (-1, 1):
            s = region.normalise(centre.shifted(axis, step))
            if s is not None and s not in faces:
                faces.append(s)
    return faces


def cell_stabilizer(cell: CellCoord, region: Region) -> PauliOperator:
    """Product of X over the cell's faces: the parity measured for syndromes."""
    return PauliOperator(1, frozenset(region.index(s) for s in cell_faces(cell, region)), frozenset())


def target_stabilizer_group(region: Region) -> list[PauliOperator]:
    """One cluster generator per qubit of the region, in index order."""
    if region.n_qubits == 0:
        raise ValueError("region contains no qubits")
    return [stabilizer_generator(s, region) for s in region.sites]


def plane_of(site: Sequence[int]) -> str:
    """Plane containing a site's generator: ``"xy"``, ``"yz"`` or ``"xz"``.

    Half-rate generators have all neighbours at the same ``z``; full-rate
    ones keep ``x`` (yz) or ``y`` (xz) fixed.
    """
    x, y, z = site
    if rate_class(x, y) == HALF:
        return "xy"
    return "yz" if (y - z) % 2 == 0 else "xz"


def generator_matrix(ops: Iterable[PauliOperator], n: int) -> np.ndarray:
    """Stack operators into an ``(m, 2n)`` GF(2) matrix ``[X | Z]``."""
    rows = []
    for op in ops:
        xb, zb = op.to_bits(n)
        rows.append(np.concatenate([xb, zb]))
    if not rows:
        return np.zeros((0, 2 * n), dtype=np.uint8)
    return np.array(rows, dtype=np.uint8)


def gf2_rank(matrix: np.ndarray) -> int:
    """Rank over GF(2) by Gaussian elimination."""
    m = np.array(matrix, dtype=np.uint8) % 2
    rows, cols = m.shape
    rank = 0
    for col in range(cols):
        if rank == rows:
            break
        pivots = np.nonzero(m[rank:, col])[0]
        if pivots.size == 0:
            continue
        p = rank + pivots[0]
        if p != rank:
            m[[rank, p]] = m[[p, rank]]
        hits = np.nonzero(m[:, col])[0]
        hits = hits[hits != rank]
        m[hits] ^= m[rank]
        rank += 1
    return rank


def symplectic_products(matrix: np.ndarray) -> np.ndarray:
    """Pairwise symplectic inner products of the rows of ``[X | Z]``."""
    n = matrix.shape[1] // 2
    x = matrix[:, :n].astype(np.int64)
    z = matrix[:, n:].astype(np.int64)
    return (x @ z.T + z @ x.T) % 2
