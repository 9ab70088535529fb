"""Cell-parity decoding of the cluster lattice with matching.

A :class:`DecoderBlock` holds ``dx * dy * dz`` unit cells of one lattice
flavour.  Along ``x`` the block has two rough boundaries (planes ``0`` and
``dx`` of normal-x faces, each touching a single cell); ``y`` and ``z`` wrap.
A chain of normal-x faces from plane 0 to plane ``dx`` has no syndrome and is
the logical error, so the distance is ``dx + 1``.  Logical failure is read
off as the parity of residual flips on plane 0.

Errors are i.i.d. phase flips per face qubit, optionally with heralded
losses.  Cells sharing a lost face are merged into supercells (union-find,
with both rough boundaries as one extra node) and distances are taken in the
cell graph where lost faces cost nothing.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import networkx as nx
import numpy as np
import pymatching
import scipy.sparse as sp
from scipy.stats import binomtest

from .lattice import CellCoord, Site

PRIMAL = "primal"
DUAL = "dual"


class ResidualSyndromeError(RuntimeError):
    """Error plus correction does not close up."""


@dataclass(frozen=True)
class DecoderBlock:
    dx: int
    dy: int
    dz: int
    flavor: str = PRIMAL

    def __post_init__(self) -> None:
        if min(self.dx, self.dy, self.dz) < 1:
            raise ValueError("block dimensions must be >= 1")
        if self.flavor not in (PRIMAL, DUAL):
            raise ValueError(f"unknown flavour {self.flavor!r}")

    @classmethod
    def for_distance(cls, d: int, flavor: str = PRIMAL) -> "DecoderBlock":
        """Block whose shortest logical chain has ``d`` faces (``dx = d - 1``)."""
        if d < 2:
            raise ValueError("distance must be >= 2")
        return cls(d - 1, d, d, flavor)

    @property
    def distance(self) -> int:
        return self.dx + 1

    @property
    def n_cells(self) -> int:
        return self.dx * self.dy * self.dz

    def cell_index(self, cx: int, cy: int, cz: int) -> int:
        return (cx * self.dy + cy % self.dy) * self.dz + cz % self.dz

    def cell_coord(self, index: int) -> CellCoord:
        cx, rest = divmod(index, self.dy * self.dz)
        cy, cz = divmod(rest, self.dz)
        return CellCoord(cx, cy, cz, self.flavor == DUAL)

    @cached_property
    def _faces(self):
        """Face table: ``(axis, plane, a, b)`` labels and the two adjacent cells (``-1`` = boundary)."""
        labels, cells = [], []
        dx, dy, dz = self.dx, self.dy, self.dz
        for i in range(dx + 1):
            for cy in range(dy):
                for cz in range(dz):
                    lo = self.cell_index(i - 1, cy, cz) if i > 0 else -1
                    hi = self.cell_index(i, cy, cz) if i < dx else -1
                    labels.append((0, i, cy, cz))
                    cells.append((lo, hi))
        for cx in range(dx):
            for j in range(dy):
                for cz in range(dz):
                    labels.append((1, cx, j, cz))
                    cells.append((self.cell_index(cx, j - 1, cz), self.cell_index(cx, j, cz)))
        for cx in range(dx):
            for cy in range(dy):
                for k in range(dz):
                    labels.append((2, cx, cy, k))
                    cells.append((self.cell_index(cx, cy, k - 1), self.cell_index(cx, cy, k)))
        return labels, np.array(cells, dtype=np.int64)

    @property
    def n_faces(self) -> int:
        return len(self._faces[0])

    @property
    def face_cells(self) -> np.ndarray:
        return self._faces[1]

    @cached_property
    def face_lookup(self) -> dict[tuple[int, int, int, int], int]:
        return {lab: i for i, lab in enumerate(self._faces[0])}

    def face_site(self, face: int) -> Site:
        """Doubled coordinate of a face qubit; the dual flavour is shifted by one."""
        axis, a, b, c = self._faces[0][face]
        coords = [2 * a + 1, 2 * b + 1, 2 * c + 1]
        coords[axis] -= 1
        shift = 1 if self.flavor == DUAL else 0
        return Site(*(v + shift for v in coords))

    @cached_property
    def check_matrix(self) -> sp.csr_matrix:
        """Cells x faces incidence over GF(2)."""
        fc = self.face_cells
        rows, cols = [], []
        for f, (a, b) in enumerate(fc):
            for c in (a, b):
                if c >= 0:
                    rows.append(c)
                    cols.append(f)
        data = np.ones(len(rows), dtype=np.uint8)
        return sp.csr_matrix((data, (rows, cols)), shape=(self.n_cells, self.n_faces))

    @cached_property
    def logical_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_faces, dtype=bool)
        mask[: self.dy * self.dz] = True  # normal-x faces on plane 0 come first
        return mask

    def boundary_distance(self, cx: int) -> int:
        return min(cx + 1, self.dx - cx)

    def cell_distance(self, a: int, b: int) -> int:
        ca, cb = self.cell_coord(a), self.cell_coord(b)
        dy = abs(ca.cy - cb.cy)
        dz = abs(ca.cz - cb.cz)
        return abs(ca.cx - cb.cx) + min(dy, self.dy - dy) + min(dz, self.dz - dz)

    def syndrome_of(self, flips: np.ndarray) -> np.ndarray:
        return (self.check_matrix @ flips.astype(np.uint8)) % 2 == 1

    def path_faces(self, a: int, b: int) -> list[int]:
        """Canonical minimal chain between two cells: x first, then y, then z."""
        ca, cb = self.cell_coord(a), self.cell_coord(b)
        faces = []
        x, y, z = ca.cx, ca.cy, ca.cz
        step = 1 if cb.cx > x else -1
        while x != cb.cx:
            plane = x + 1 if step > 0 else x
            faces.append(self.face_lookup[(0, plane, y, z)])
            x += step
        for axis, size, target in ((1, self.dy, cb.cy), (2, self.dz, cb.cz)):
            cur = y if axis == 1 else z
            fwd = (target - cur) % size
            step = 1 if fwd <= size - fwd else -1
            while cur != target:
                plane = (cur + 1) % size if step > 0 else cur
                key = (1, x, plane, z) if axis == 1 else (2, x, y, plane)
                faces.append(self.face_lookup[key])
                cur = (cur + step) % size
                if axis == 1:
                    y = cur
                else:
                    z = cur
        return faces

    def boundary_path(self, a: int) -> list[int]:
        """Minimal chain from a cell to its nearer rough boundary."""
        c = self.cell_coord(a)
        if c.cx + 1 <= self.dx - c.cx:
            planes = range(0, c.cx + 1)
        else:
            planes = range(c.cx + 1, self.dx + 1)
        return [self.face_lookup[(0, i, c.cy, c.cz)] for i in planes]


@dataclass
class ErrorSample:
    flips: np.ndarray
    losses: np.ndarray
    p: float
    p_loss: float
    seed: int | None = None

    @property
    def effective_flips(self) -> np.ndarray:
        return self.flips & ~self.losses

    def z_flip_sites(self, block: DecoderBlock) -> set[Site]:
        return {block.face_site(f) for f in np.flatnonzero(self.effective_flips)}

    def loss_sites(self, block: DecoderBlock) -> set[Site]:
        return {block.face_site(f) for f in np.flatnonzero(self.losses)}


def stream_width(block: DecoderBlock) -> int:
    """Uniform draws consumed per trial, padded to a whole Philox block of four."""
    m = 2 * block.n_faces
    return m + (-m) % 4


def trial_rng(seed: int, trial: int, block: DecoderBlock) -> np.random.Generator:
    """Counter-based stream for one trial: Philox keyed by ``seed``, offset by the trial index."""
    return np.random.Generator(np.random.Philox(key=seed).advance(trial * stream_width(block) // 4))


def _draws_to_sample(u: np.ndarray, block: DecoderBlock, p, p_loss, seed=None) -> ErrorSample:
    F = block.n_faces
    return ErrorSample(u[:F] < p, u[F : 2 * F] < p_loss, p, p_loss, seed)


def sample_errors(block: DecoderBlock, p, p_loss: float, rng: np.random.Generator) -> ErrorSample:
    """Independent flips and losses per face; ``p`` may be a per-face array."""
    if np.any(np.asarray(p) < 0) or np.any(np.asarray(p) > 1) or not 0 <= p_loss <= 1:
        raise ValueError("probabilities must lie in [0, 1]")
    u = rng.random(stream_width(block))
    return _draws_to_sample(u, block, p, p_loss)


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # keep the smaller index as root so supercell ids are reproducible
            if rb < ra:
                ra, rb = rb, ra
            self.parent[rb] = ra


@dataclass
class Syndrome:
    cell_parity: np.ndarray  # parity per cell, lost faces excluded
    supercells: list[tuple[int, ...]]  # merged groups with more than one member (boundary = n_cells)
    odd: list[tuple[int, ...]]  # odd-parity nodes, each a tuple of member cells
    losses: np.ndarray

    @property
    def odd_cells(self) -> set[int]:
        return {c for group in self.odd for c in group}


def extract_syndrome(sample: ErrorSample, block: DecoderBlock) -> Syndrome:
    parity = block.syndrome_of(sample.effective_flips)
    n = block.n_cells
    lost = np.flatnonzero(sample.losses)
    if lost.size == 0:
        odd = [(int(c),) for c in np.flatnonzero(parity)]
        return Syndrome(parity, [], odd, sample.losses)
    uf = _UnionFind(n + 1)
    for f in lost:
        a, b = block.face_cells[f]
        uf.union(n if a < 0 else int(a), n if b < 0 else int(b))
    groups: dict[int, list[int]] = {}
    for c in range(n + 1):
        groups.setdefault(uf.find(c), []).append(c)
    supercells, odd = [], []
    for members in groups.values():
        if len(members) > 1:
            supercells.append(tuple(members))
        if n in members:
            continue  # parity absorbed by the rough boundary
        if int(parity[members].sum()) % 2:
            odd.append(tuple(members))
    odd.sort()
    return Syndrome(parity, sorted(supercells), odd, sample.losses)


def _zero_one_bfs(block: DecoderBlock, sources: Sequence[int], losses: np.ndarray):
    """Distances and parent faces from a set of cells; lost faces cost 0.

    Node ``n_cells`` stands for the (merged) rough boundary.
    """
    n = block.n_cells
    adj = _adjacency(block)
    dist = np.full(n + 1, np.iinfo(np.int64).max, dtype=np.int64)
    parent = np.full(n + 1, -1, dtype=np.int64)
    dq = deque()
    for s in sources:
        dist[s] = 0
        dq.append(s)
    while dq:
        u = dq.popleft()
        if u == n:
            continue  # chains end on the boundary
        for v, f in adj[u]:
            w = 0 if losses[f] else 1
            if dist[u] + w < dist[v]:
                dist[v] = dist[u] + w
                parent[v] = f
                if w == 0:
                    dq.appendleft(v)
                else:
                    dq.append(v)
    return dist, parent


_ADJ_CACHE: dict[DecoderBlock, list] = {}


def _adjacency(block: DecoderBlock) -> list[list[tuple[int, int]]]:
    if block not in _ADJ_CACHE:
        n = block.n_cells
        adj = [[] for _ in range(n + 1)]
        for f, (a, b) in enumerate(block.face_cells):
            a = n if a < 0 else int(a)
            b = n if b < 0 else int(b)
            adj[a].append((b, f))
            adj[b].append((a, f))
        _ADJ_CACHE[block] = adj
    return _ADJ_CACHE[block]


@dataclass
class MatchingGraph:
    """Complete graph on real nodes plus one boundary partner per real node.

    Nodes ``0..k-1`` are real, ``k..2k-1`` their partners.
    """

    nodes: list[tuple[int, ...]]
    weights: dict[tuple[int, int], int]

    @property
    def k(self) -> int:
        return len(self.nodes)

    @property
    def n_nodes(self) -> int:
        return 2 * self.k

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.n_nodes))
        for (a, b), w in self.weights.items():
            g.add_edge(a, b, weight=w)
        return g

    @classmethod
    def from_weights(cls, pair: np.ndarray, boundary: Sequence[int]) -> "MatchingGraph":
        """Graph from a real-real weight matrix and per-node boundary weights."""
        k = len(boundary)
        weights = {}
        for i, j in itertools.combinations(range(k), 2):
            weights[(i, j)] = int(pair[i][j])
            weights[(k + i, k + j)] = 0
        for i in range(k):
            weights[(i, k + i)] = int(boundary[i])
        return cls([(i,) for i in range(k)], weights)


def build_matching_graph(syndrome: Syndrome, block: DecoderBlock) -> MatchingGraph:
    k = len(syndrome.odd)
    if k == 0:
        return MatchingGraph([], {})
    n = block.n_cells
    pair = np.zeros((k, k), dtype=np.int64)
    bound = np.zeros(k, dtype=np.int64)
    if not syndrome.losses.any():
        cells = [g[0] for g in syndrome.odd]
        for i, j in itertools.combinations(range(k), 2):
            pair[i, j] = pair[j, i] = block.cell_distance(cells[i], cells[j])
        for i, c in enumerate(cells):
            bound[i] = block.boundary_distance(block.cell_coord(c).cx)
    else:
        for i, group in enumerate(syndrome.odd):
            dist, _ = _zero_one_bfs(block, group, syndrome.losses)
            bound[i] = dist[n]
            for j, other in enumerate(syndrome.odd):
                if j != i:
                    pair[i, j] = min(dist[c] for c in other)
    graph = MatchingGraph.from_weights(pair, bound)
    graph.nodes = list(syndrome.odd)
    return graph


@dataclass
class Matching:
    pairs: list[tuple[int, int]]
    weight: int


def mwpm(graph: MatchingGraph) -> Matching:
    """Exact minimum-weight perfect matching (networkx blossom).

    Among equal-weight optima the result is whichever the solver reaches from
    the fixed node order, so repeated calls agree.
    """
    if graph.n_nodes == 0:
        return Matching([], 0)
    g = graph.to_networkx()
    mate = nx.min_weight_matching(g, weight="weight")
    pairs = sorted(tuple(sorted(e)) for e in mate)
    if 2 * len(pairs) != graph.n_nodes:
        raise RuntimeError("matching graph has no perfect matching")
    total = sum(graph.weights[p] for p in pairs)
    return Matching(pairs, int(total))


def correction_from_matching(
    matching: Matching, graph: MatchingGraph, block: DecoderBlock, losses: np.ndarray | None = None
) -> np.ndarray:
    """Face flips realising every matched pair (boolean mask over faces)."""
    corr = np.zeros(block.n_faces, dtype=bool)
    k = graph.k
    lossy = losses is not None and losses.any()
    for a, b in matching.pairs:
        if a >= k and b >= k:
            continue
        if lossy:
            src = graph.nodes[a]
            dist, parent = _zero_one_bfs(block, src, losses)
            target = block.n_cells if b >= k else min(graph.nodes[b], key=lambda c: (dist[c], c))
            faces = _trace_back(block, parent, target, set(src))
        elif b >= k:
            faces = block.boundary_path(graph.nodes[a][0])
        else:
            faces = block.path_faces(graph.nodes[a][0], graph.nodes[b][0])
        for f in faces:
            corr[f] ^= True
    if lossy:
        corr &= ~losses
    return corr


def _trace_back(block: DecoderBlock, parent: np.ndarray, target: int, sources: set[int]) -> list[int]:
    n = block.n_cells
    faces = []
    node = target
    while node not in sources:
        f = int(parent[node])
        faces.append(f)
        a, b = block.face_cells[f]
        a = n if a < 0 else int(a)
        b = n if b < 0 else int(b)
        node = a if b == node else b
    return faces


def _peel_losses(block: DecoderBlock, residual: np.ndarray, losses: np.ndarray) -> np.ndarray:
    """Assign lost-face values so the closed chain has no syndrome.

    Works leaf-first on a spanning forest of the lost faces, rooted at the
    boundary node when a component touches it.
    """
    n = block.n_cells
    parity = block.syndrome_of(residual).astype(np.uint8)
    parity = np.append(parity, 0)
    out = residual.copy()
    adj = _adjacency(block)
    seen = np.zeros(n + 1, dtype=bool)
    lost_nodes = sorted({(n if c < 0 else int(c)) for f in np.flatnonzero(losses) for c in block.face_cells[f]})
    roots = ([n] if n in lost_nodes else []) + [c for c in lost_nodes if c != n]
    for root in roots:
        if seen[root]:
            continue
        order, via = [], {}
        seen[root] = True
        stack = [root]
        while stack:
            u = stack.pop()
            order.append(u)
            for v, f in adj[u]:
                if losses[f] and not seen[v]:
                    seen[v] = True
                    via[v] = (u, f)
                    stack.append(v)
        for v in reversed(order[1:]):
            if parity[v]:
                u, f = via[v]
                out[f] ^= True
                parity[v] ^= 1
                parity[u] ^= 1
        if root != n and parity[root]:
            raise ResidualSyndromeError("supercell left with odd parity")
    return out


def logical_failure(sample: ErrorSample, correction: np.ndarray, block: DecoderBlock) -> bool:
    """True when error plus correction crosses the plane-0 cut an odd number of times."""
    combined = sample.effective_flips ^ correction
    if sample.losses.any():
        combined &= ~sample.losses
        combined = _peel_losses(block, combined, sample.losses)
    if block.syndrome_of(combined).any():
        raise ResidualSyndromeError("error plus correction leaves a syndrome")
    return bool(combined[block.logical_mask].sum() % 2)


def decode(sample: ErrorSample, block: DecoderBlock) -> tuple[Syndrome, MatchingGraph, Matching, np.ndarray]:
    syn = extract_syndrome(sample, block)
    graph = build_matching_graph(syn, block)
    matching = mwpm(graph)
    corr = correction_from_matching(matching, graph, block, sample.losses)
    return syn, graph, matching, corr


# -- Monte Carlo ------------------------------------------------------------


@dataclass(frozen=True)
class TrialStats:
    trials: int
    failures: int
    d: int = 0
    p: float = 0.0
    p_loss: float = 0.0
    seed: int = 0
    flavor: str = PRIMAL

    def __post_init__(self) -> None:
        if not 0 <= self.failures <= self.trials:
            raise ValueError("failures must lie in [0, trials]")

    @property
    def rate(self) -> float:
        return self.failures / self.trials

    @property
    def interval(self) -> tuple[float, float]:
        ci = binomtest(self.failures, self.trials).proportion_ci(confidence_level=0.95, method="wilson")
        return (min(ci.low, self.rate), max(ci.high, self.rate))

    @property
    def ci_low(self) -> float:
        return self.interval[0]

    @property
    def ci_high(self) -> float:
        return self.interval[1]


CSV_COLUMNS = ("flavor", "d", "p", "p_loss", "trials", "failures", "rate", "ci_low", "ci_high", "seed")


def stats_row(s: TrialStats) -> str:
    return ",".join(
        [
            s.flavor,
            str(s.d),
            repr(float(s.p)),
            repr(float(s.p_loss)),
            str(s.trials),
            str(s.failures),
            f"{s.rate:.10g}",
            f"{s.ci_low:.10g}",
            f"{s.ci_high:.10g}",
            str(s.seed),
        ]
    )


_PM_CACHE: dict[DecoderBlock, pymatching.Matching] = {}


def _pymatcher(block: DecoderBlock) -> pymatching.Matching:
    if block not in _PM_CACHE:
        logical = sp.csr_matrix(block.logical_mask.astype(np.uint8)[None, :])
        _PM_CACHE[block] = pymatching.Matching.from_check_matrix(block.check_matrix, faults_matrix=logical)
    return _PM_CACHE[block]


def monte_carlo(
    block: DecoderBlock,
    p: float,
    p_loss: float,
    trials: int,
    seed: int,
    method: str = "auto",
    chunk: int = 20000,
) -> TrialStats:
    """Failure count over ``trials`` independent decoding rounds.

    Trial ``i`` draws from :func:`trial_rng` ``(seed, i)``, so counts do not
    depend on chunking or execution order.  ``method="fast"`` decodes batches
    with sparse blossom (loss-free only); ``"exact"`` runs the explicit
    syndrome, graph, matching and correction pipeline per trial.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if method == "auto":
        method = "fast" if p_loss == 0 else "exact"
    if method == "fast" and p_loss != 0:
        raise ValueError("the batched decoder does not handle losses")
    width = stream_width(block)
    failures = 0
    for start in range(0, trials, chunk):
        size = min(chunk, trials - start)
        rng = trial_rng(seed, start, block)
        u = rng.random((size, width))
        if method == "fast":
            flips = u[:, : block.n_faces] < p
            syn = (block.check_matrix @ flips.T.astype(np.uint8)).T % 2
            pred = _pymatcher(block).decode_batch(syn.astype(np.uint8))
            actual = flips[:, block.logical_mask].sum(axis=1) % 2
            failures += int(np.count_nonzero(pred[:, 0] != actual))
        elif method == "exact":
            for row in u:
                sample = _draws_to_sample(row, block, p, p_loss, seed)
                *_, corr = decode(sample, block)
                failures += logical_failure(sample, corr, block)
        else:
            raise ValueError(f"unknown method {method!r}")
    return TrialStats(trials, failures, block.distance, p, p_loss, seed, block.flavor)


def debug_trial(block: DecoderBlock, p: float, p_loss: float, seed: int, trial: int) -> dict:
    """Everything about one trial of :func:`monte_carlo` as plain data."""
    u = trial_rng(seed, trial, block).random(stream_width(block))
    sample = _draws_to_sample(u, block, p, p_loss, seed)
    syn, graph, matching, corr = decode(sample, block)
    return {
        "flips": [list(block.face_site(f)) for f in np.flatnonzero(sample.effective_flips)],
        "losses": [list(block.face_site(f)) for f in np.flatnonzero(sample.losses)],
        "odd": [[list(block.cell_coord(c)[:3]) for c in g] for g in syn.odd],
        "matching": [list(pair) for pair in matching.pairs],
        "weight": matching.weight,
        "correction": [list(block.face_site(f)) for f in np.flatnonzero(corr)],
        "failure": logical_failure(sample, corr, block),
    }


@dataclass
class ScanResult:
    rows: list[TrialStats]
    crossings: list[dict] = field(default_factory=list)

    @property
    def crossing(self) -> float | None:
        vals = [c["p"] for c in self.crossings if c["p"] is not None]
        return float(np.exp(np.mean(np.log(vals)))) if vals else None

    def csv(self) -> str:
        return "\n".join([",".join(CSV_COLUMNS)] + [stats_row(r) for r in self.rows]) + "\n"


def _curve(rows: Iterable[TrialStats], d: int) -> tuple[np.ndarray, np.ndarray]:
    pts = sorted((r.p, r.rate) for r in rows if r.d == d and r.failures > 0)
    if not pts:
        return np.array([]), np.array([])
    ps, rates = zip(*pts)
    return np.log(ps), np.log(rates)


def crossing_point(rows: Sequence[TrialStats], d_small: int, d_large: int) -> float | None:
    """First p where the larger code stops beating the smaller one (log-log interpolation)."""
    lp_a, lr_a = _curve(rows, d_small)
    lp_b, lr_b = _curve(rows, d_large)
    common = sorted(set(lp_a.tolist()) & set(lp_b.tolist()))
    if len(common) < 2:
        return None
    a = dict(zip(lp_a.tolist(), lr_a.tolist()))
    b = dict(zip(lp_b.tolist(), lr_b.tolist()))
    diff = [b[x] - a[x] for x in common]
    for i in range(len(common) - 1):
        if diff[i] < 0 <= diff[i + 1]:
            frac = diff[i] / (diff[i] - diff[i + 1])
            return float(math.exp(common[i] + frac * (common[i + 1] - common[i])))
    return None


def threshold_scan(
    distances: Sequence[int],
    ps: Sequence[float],
    trials: int,
    seed: int,
    p_loss: float = 0.0,
    flavor: str = PRIMAL,
    method: str = "auto",
) -> ScanResult:
    """Logical rates on a (d, p) grid with common random numbers across p."""
    rows = []
    for d in distances:
        block = DecoderBlock.for_distance(d, flavor)
        for p in ps:
            rows.append(monte_carlo(block, p, p_loss, trials, seed, method))
    result = ScanResult(rows)
    ds = sorted(set(distances))
    for small, large in zip(ds, ds[1:]):
        result.crossings.append({"d_small": small, "d_large": large, "p": crossing_point(rows, small, large)})
    return result


def fit_suppression(rows: Sequence[TrialStats], d: int, p_max: float) -> float:
    """Slope of log(rate) against log(p) over points with ``p <= p_max``."""
    pts = [(r.p, r.rate) for r in rows if r.d == d and r.p <= p_max and r.failures > 0]
    if len(pts) < 2:
        raise ValueError("need at least two points with failures to fit")
    lp, lr = np.log(np.array(pts)).T
    slope, _ = np.polyfit(lp, lr, 1)
    return float(slope)


# -- heralded chip failure --------------------------------------------------


def detect_faulty_chip(
    syndromes: Sequence[Syndrome],
    block: DecoderBlock,
    window: int,
    region: int = 1,
    multiple: float = 5.0,
    min_count: int = 15,
) -> list[tuple[int, int]]:
    """Transverse ``region x region`` cell patches whose odd-cell count is anomalous.

    The stream is cut into consecutive windows of ``window`` syndromes; a patch
    is flagged when, within one window, its count exceeds ``multiple`` times
    the median over patches and is at least ``min_count``.  The median keeps
    the baseline stable when a dead patch and its neighbours all light up.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    if not syndromes:
        return []
    px = -(-block.dx // region)
    py = -(-block.dy // region)
    cx = np.arange(block.n_cells) // (block.dy * block.dz)
    cy = (np.arange(block.n_cells) // block.dz) % block.dy
    patch = (cx // region) * py + (cy // region)
    flagged: set[tuple[int, int]] = set()
    for start in range(0, len(syndromes) - window + 1, window):
        counts = np.zeros(px * py, dtype=np.int64)
        for syn in syndromes[start : start + window]:
            odd = np.zeros(block.n_cells, dtype=bool)
            odd[list(syn.odd_cells)] = True
            counts += np.bincount(patch[odd], minlength=px * py)
        base = np.median(counts)
        for idx in np.flatnonzero((counts > multiple * base) & (counts >= min_count)):
            flagged.add((int(idx // py), int(idx % py)))
    return sorted(flagged)


def dead_region_probabilities(block: DecoderBlock, p: float, patch: tuple[int, int], region: int, p_dead: float = 0.5):
    """Per-face flip probabilities with one transverse patch randomised."""
    probs = np.full(block.n_faces, p)
    for f, (a, b) in enumerate(block.face_cells):
        for c in (a, b):
            if c < 0:
                continue
            cc = block.cell_coord(int(c))
            if (cc.cx // region, cc.cy // region) == tuple(patch):
                probs[f] = p_dead
    return probs
