import itertools
from collections import deque
from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clusterflow import decoder as D


def blank(block):
    return np.zeros(block.n_faces, dtype=bool)


def sample_with(block, flips=(), losses=()):
    f, l = blank(block), blank(block)
    f[list(flips)] = True
    l[list(losses)] = True
    return D.ErrorSample(f, l, 0.0, 0.0)


def bfs_distances(block, source):
    """Cell-graph oracle: plain BFS over face adjacency, boundary as sink node n_cells.

    Paths never pass through the boundary; two boundary matches cover that case.
    """
    n = block.n_cells
    adj = [set() for _ in range(n + 1)]
    for a, b in block.face_cells:
        a = n if a < 0 else int(a)
        b = n if b < 0 else int(b)
        adj[a].add(b)
        adj[b].add(a)
    dist = [-1] * (n + 1)
    dist[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        if u == n:
            continue
        for v in adj[u]:
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def brute_min_matching(weights, n):
    """Bitmask oracle over all perfect matchings of an n-node graph."""

    @lru_cache(maxsize=None)
    def best(mask):
        if mask == (1 << n) - 1:
            return 0
        i = next(k for k in range(n) if not mask >> k & 1)
        out = float("inf")
        for j in range(i + 1, n):
            if not mask >> j & 1 and (i, j) in weights:
                out = min(out, weights[(i, j)] + best(mask | 1 << i | 1 << j))
        return out

    return best(0)


# -- geometry ----------------------------------------------------------------


def test_block_for_distance():
    blk = D.DecoderBlock.for_distance(3)
    assert (blk.dx, blk.dy, blk.dz, blk.distance) == (2, 3, 3, 3)
    assert blk.n_cells == 18
    # x faces on planes 0..dx, y and z faces wrap
    assert blk.n_faces == 3 * 9 + 2 * 2 * 9
    with pytest.raises(ValueError):
        D.DecoderBlock.for_distance(1)
    with pytest.raises(ValueError):
        D.DecoderBlock(2, 2, 2, "other")


def test_cell_index_roundtrip():
    blk = D.DecoderBlock(3, 4, 5)
    for i in range(blk.n_cells):
        c = blk.cell_coord(i)
        assert blk.cell_index(c.cx, c.cy, c.cz) == i


def test_every_face_touches_two_cells_or_boundary():
    blk = D.DecoderBlock(3, 3, 3)
    counts = np.zeros(blk.n_cells, dtype=int)
    for a, b in blk.face_cells:
        assert a >= 0 or b >= 0
        for c in (a, b):
            if c >= 0:
                counts[c] += 1
    assert (counts == 6).all()
    assert blk.check_matrix.shape == (blk.n_cells, blk.n_faces)


def test_distances_match_bfs_oracle():
    blk = D.DecoderBlock(4, 3, 5)
    for src in range(0, blk.n_cells, 7):
        ref = bfs_distances(blk, src)
        for dst in range(blk.n_cells):
            assert blk.cell_distance(src, dst) == ref[dst]
        assert blk.boundary_distance(blk.cell_coord(src).cx) == ref[blk.n_cells]


def test_paths_close_syndromes():
    blk = D.DecoderBlock(3, 4, 4)
    rng = np.random.default_rng(1)
    for _ in range(50):
        a, b = rng.integers(blk.n_cells, size=2)
        if a == b:
            continue
        path = np.zeros(blk.n_faces, dtype=bool)
        path[blk.path_faces(int(a), int(b))] = True
        assert path.sum() == blk.cell_distance(int(a), int(b))
        assert set(np.flatnonzero(blk.syndrome_of(path))) == {a, b}
        edge = np.zeros(blk.n_faces, dtype=bool)
        edge[blk.boundary_path(int(a))] = True
        assert set(np.flatnonzero(blk.syndrome_of(edge))) == {a}


def test_logical_chain_is_invisible():
    blk = D.DecoderBlock.for_distance(3)
    chain = [blk.face_lookup[(0, x, 0, 0)] for x in range(blk.dx + 1)]
    assert len(chain) == blk.distance
    s = sample_with(blk, chain)
    assert not blk.syndrome_of(s.flips).any()
    assert D.logical_failure(s, blank(blk), blk)


def test_face_sites_distinct_and_dual_shifted():
    prim = D.DecoderBlock(2, 2, 2)
    dual = D.DecoderBlock(2, 2, 2, D.DUAL)
    sites = [prim.face_site(f) for f in range(prim.n_faces)]
    assert len(set(sites)) == len(sites)
    assert dual.face_site(0) == tuple(c + 1 for c in prim.face_site(0))


# -- sampling and syndromes --------------------------------------------------


def test_sample_shapes_and_stream():
    blk = D.DecoderBlock.for_distance(3)
    assert D.stream_width(blk) % 4 == 0 and D.stream_width(blk) >= 2 * blk.n_faces
    s1 = D.sample_errors(blk, 0.3, 0.1, D.trial_rng(5, 2, blk))
    s2 = D.sample_errors(blk, 0.3, 0.1, D.trial_rng(5, 2, blk))
    assert (s1.flips == s2.flips).all() and (s1.losses == s2.losses).all()
    assert not (s1.effective_flips & s1.losses).any()
    with pytest.raises(ValueError):
        D.sample_errors(blk, 1.5, 0, np.random.default_rng())


def test_trial_streams_are_contiguous():
    blk = D.DecoderBlock.for_distance(3)
    w = D.stream_width(blk)
    block = D.trial_rng(9, 0, blk).random(3 * w)
    for t in range(3):
        assert np.array_equal(D.trial_rng(9, t, blk).random(w), block[t * w : (t + 1) * w])


def test_single_flip_syndrome():
    blk = D.DecoderBlock(3, 3, 3)
    f = blk.face_lookup[(1, 1, 1, 1)]
    syn = D.extract_syndrome(sample_with(blk, [f]), blk)
    assert len(syn.odd) == 2 and syn.supercells == []


def test_loss_merges_cells():
    blk = D.DecoderBlock(3, 3, 3)
    f = blk.face_lookup[(1, 1, 1, 1)]
    syn = D.extract_syndrome(sample_with(blk, losses=[f]), blk)
    assert len(syn.supercells) == 1 and len(syn.supercells[0]) == 2
    assert syn.odd == []


# -- matching ----------------------------------------------------------------


def test_mwpm_small_examples():
    g = D.MatchingGraph.from_weights(np.array([[0, 1], [1, 0]]), [5, 5])
    m = D.mwpm(g)
    assert m.weight == 1 and (0, 1) in m.pairs
    g = D.MatchingGraph.from_weights(np.array([[0, 9], [9, 0]]), [1, 2])
    assert D.mwpm(g).weight == 3
    assert D.mwpm(D.MatchingGraph([], {})).weight == 0


def test_mwpm_is_deterministic():
    pair = np.array([[0, 2, 2], [2, 0, 2], [2, 2, 0]])
    g = D.MatchingGraph.from_weights(pair, [1, 1, 1])
    assert D.mwpm(g).pairs == D.mwpm(g).pairs


@settings(max_examples=150, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_mwpm_matches_brute_force(k, seed):
    rng = np.random.default_rng(seed)
    pair = rng.integers(1, 12, size=(k, k))
    pair = np.triu(pair, 1) + np.triu(pair, 1).T
    g = D.MatchingGraph.from_weights(pair, rng.integers(1, 12, size=k))
    assert D.mwpm(g).weight == brute_min_matching(g.weights, g.n_nodes)


# -- correction --------------------------------------------------------------


def test_single_flip_corrected_exactly():
    blk = D.DecoderBlock(3, 3, 3)
    f = blk.face_lookup[(1, 1, 1, 1)]
    s = sample_with(blk, [f])
    _, _, m, corr = D.decode(s, blk)
    assert m.weight == 1 and np.flatnonzero(corr).tolist() == [f]
    assert not D.logical_failure(s, corr, blk)


def test_residual_syndrome_raises():
    blk = D.DecoderBlock(3, 3, 3)
    s = sample_with(blk, [blk.face_lookup[(1, 1, 1, 1)]])
    with pytest.raises(D.ResidualSyndromeError):
        D.logical_failure(s, blank(blk), blk)


def test_all_weight_two_errors_corrected():
    blk = D.DecoderBlock(4, 4, 4)
    assert blk.distance == 5
    failures = 0
    for a, b in itertools.combinations(range(blk.n_faces), 2):
        s = sample_with(blk, [a, b])
        *_, corr = D.decode(s, blk)
        failures += D.logical_failure(s, corr, blk)
    assert failures == 0


def test_single_loss_is_harmless():
    blk = D.DecoderBlock.for_distance(3)
    for f in range(blk.n_faces):
        for flipped in (False, True):
            s = sample_with(blk, [f] if flipped else [], [f])
            *_, corr = D.decode(s, blk)
            assert not D.logical_failure(s, corr, blk)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_lossy_decoding_closes_syndrome(seed):
    blk = D.DecoderBlock.for_distance(3)
    s = D.sample_errors(blk, 0.05, 0.05, np.random.default_rng(seed))
    *_, corr = D.decode(s, blk)
    D.logical_failure(s, corr, blk)  # raises if the residual is not closed


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_pymatching_agrees_on_weight(seed):
    blk = D.DecoderBlock.for_distance(5)
    s = D.sample_errors(blk, 0.03, 0.0, np.random.default_rng(seed))
    syn = blk.syndrome_of(s.flips).astype(np.uint8)
    _, _, m, corr = D.decode(s, blk)
    assert not blk.syndrome_of(s.flips ^ corr).any()
    ref = D._pymatcher(blk).decode(syn, return_weight=True)[1]
    assert m.weight == round(ref)


# -- Monte Carlo -------------------------------------------------------------


def test_monte_carlo_reproducible_and_chunk_free():
    blk = D.DecoderBlock.for_distance(3)
    a = D.monte_carlo(blk, 0.05, 0.0, 3000, 11)
    b = D.monte_carlo(blk, 0.05, 0.0, 3000, 11, chunk=700)
    assert a == b and a.failures > 0


def test_fast_and_exact_paths_agree_statistically():
    blk = D.DecoderBlock.for_distance(3)
    fast = D.monte_carlo(blk, 0.04, 0.0, 2000, 3, method="fast")
    exact = D.monte_carlo(blk, 0.04, 0.0, 2000, 3, method="exact")
    # identical error draws; only tie-breaking can differ
    assert abs(fast.failures - exact.failures) <= 0.1 * max(fast.failures, exact.failures) + 5


def test_fast_path_rejects_losses():
    with pytest.raises(ValueError):
        D.monte_carlo(D.DecoderBlock.for_distance(3), 0.01, 0.1, 10, 0, method="fast")


def test_rate_grows_with_p():
    blk = D.DecoderBlock.for_distance(5)
    low = D.monte_carlo(blk, 0.002, 0.0, 5000, 1)
    high = D.monte_carlo(blk, 0.02, 0.0, 5000, 1)
    assert low.failures < high.failures


def test_wilson_interval():
    s = D.TrialStats(100, 10)
    lo, hi = s.interval
    assert lo == pytest.approx(0.05523, abs=1e-4) and hi == pytest.approx(0.17437, abs=1e-4)
    assert D.TrialStats(50, 0).ci_low == 0.0
    with pytest.raises(ValueError):
        D.TrialStats(5, 6)


def test_scan_csv_and_single_distance():
    scan = D.threshold_scan([3], [0.01, 0.03], 200, 4)
    assert scan.crossing is None and scan.crossings == []
    lines = scan.csv().splitlines()
    assert lines[0] == ",".join(D.CSV_COLUMNS) and len(lines) == 3


def test_crossing_point_interpolates():
    rows = [
        D.TrialStats(1000, 100, 3, 0.01),
        D.TrialStats(1000, 300, 3, 0.04),
        D.TrialStats(1000, 50, 5, 0.01),
        D.TrialStats(1000, 500, 5, 0.04),
    ]
    p = D.crossing_point(rows, 3, 5)
    assert 0.01 < p < 0.04


def test_fit_suppression_on_exact_power_law():
    rows = [D.TrialStats(10**9, round(10**9 * 50 * p**3), 5, p) for p in (0.001, 0.002, 0.004)]
    assert D.fit_suppression(rows, 5, 0.01) == pytest.approx(3.0, abs=1e-3)
    with pytest.raises(ValueError):
        D.fit_suppression(rows, 7, 0.01)


def test_debug_trial_matches_monte_carlo():
    blk = D.DecoderBlock.for_distance(3)
    total = sum(D.debug_trial(blk, 0.05, 0.0, 8, t)["failure"] for t in range(200))
    assert total == D.monte_carlo(blk, 0.05, 0.0, 200, 8, method="exact").failures


def test_dual_flavour_runs():
    blk = D.DecoderBlock.for_distance(3, D.DUAL)
    s = D.monte_carlo(blk, 0.02, 0.0, 500, 2)
    assert s.flavor == D.DUAL and s.d == 3


# -- chip failure ------------------------------------------------------------


def _stream(blk, probs, seed, n=20):
    return [D.extract_syndrome(D.sample_errors(blk, probs, 0.0, D.trial_rng(seed, t, blk)), blk) for t in range(n)]


def test_dead_patch_probabilities():
    blk = D.DecoderBlock.for_distance(5)
    probs = D.dead_region_probabilities(blk, 0.01, (2, 2), 1)
    assert set(np.unique(probs)) == {0.01, 0.5}
    # five cells in the column, six faces each, shared z faces counted once
    assert (probs == 0.5).sum() == 5 * 6 - 5


def test_detector_flags_dead_patch_only_when_present():
    blk = D.DecoderBlock.for_distance(5)
    dead = D.dead_region_probabilities(blk, 0.005, (1, 3), 1)
    assert (1, 3) in D.detect_faulty_chip(_stream(blk, dead, 1), blk, window=20)
    assert D.detect_faulty_chip(_stream(blk, 0.005, 2), blk, window=20) == []
    assert D.detect_faulty_chip([], blk, window=5) == []
    with pytest.raises(ValueError):
        D.detect_faulty_chip([], blk, window=0)
