"""Discrete-event model of the four-stage chip network that prepares the cluster.

Time is an integer count of the atom/photon interaction time ``T``.  Every
qubit site of the region is one photon.  A photon on transverse line
``(x, y)`` at height ``z`` leaves its source at ``2z - (x + y) + c0`` and
reaches stage ``s`` ``STAGE_DELAY[s]`` steps later, because each stage costs
one step (module passage, hold or delay line) and the links between stages
cost ``LINK_DELAY``.

Stages 1 and 2 measure the y-z plane checks, stages 3 and 4 the x-z plane
checks.  Each full-rate line owns one chip per stage.  A chip's parity-check
round occupies eight consecutive steps::

    H  I  R  U  C  B  L  M
    -4 -3 -2 -1  0 +1 +2 +3   (relative to the centre photon's arrival)

The hold slot passes the one full-rate photon per round that has no check in
this stage.  Half-rate photons reach the upper or lower port of a neighbouring
chip through a per-line router driven by a period-8 table.
"""

from __future__ import annotations

import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Mapping, NamedTuple, Sequence

import numpy as np

from .lattice import FULL, HALF, PauliOperator, Region, Site, plane_of, rate_class, target_stabilizer_group
from .pauli import X_PLUS, Z_PLUS, init_product_state, verify_target

log = logging.getLogger(__name__)

STAGE_DELAY = {1: 0, 2: 2, 3: 10, 4: 12}
LINK_DELAY = {1: 1, 2: 7, 3: 1}
STAGES = (1, 2, 3, 4)

BASE_PATTERN = ("U", "C", "B", "L", "M", "H", "I", "R")
ROUND = ("H", "I", "R", "U", "C", "B", "L", "M")
PHOTON_SYMBOLS = frozenset("HRUCBL")
ROLE_ORDER = ("L", "U", "C", "B", "R")

# Printed switching table; "^U"/"^B" marks the port routed through the bypass.
PRINTED_TABLE: dict[str, tuple[str, ...]] = {
    "1": ("U", "C", "B", "L", "M", "H", "I", "R", "U", "C", "B", "L", "M"),
    "1*": ("M", "H", "I", "R", "U", "C", "B", "L", "M", "H", "I", "R", "U"),
    "2": ("B", "L", "M", "H^U", "I", "R^B", "U", "C", "B", "L", "M", "H^U", "I"),
    "2*": ("I", "R^B", "U", "C", "B", "L", "M", "H^U", "I", "R^B", "U", "C", "B"),
    "3": ("B", "L", "M", "H", "I", "R", "U", "C", "B", "L", "M", "S", "I"),
    "3*": ("I", "R", "U", "C", "B", "L", "M", "H", "I", "L", "U", "C", "B"),
    "4": ("M", "H^U", "I", "R^B", "U", "C", "B", "L", "M", "H^U", "I", "R^B", "U"),
    "4*": ("U", "C", "B", "L", "M", "H^U", "I", "R^B", "U", "C", "B", "L", "M"),
}
ROW_OFFSETS = {"1": 0, "1*": 4, "2": 2, "2*": 6, "3": 2, "3*": 6, "4": 4, "4*": 0}
DECORATED_LAYERS = frozenset({"2", "4"})


class ProtocolViolation(RuntimeError):
    """Base class for network protocol violations."""

    def __init__(self, message: str, chip: "ChipId | None" = None, t: int | None = None):
        super().__init__(message)
        self.chip = chip
        self.t = t


class CollisionError(ProtocolViolation):
    """Two photons routed into one module in one step."""


class MeasuringModuleError(ProtocolViolation):
    """A photon reached a module that is being measured or initialised."""


class RoutingError(ProtocolViolation):
    """A photon arrived at a port that is not connected in that step."""


@dataclass(frozen=True)
class NetworkConfig:
    nx: int
    ny: int
    layers: int
    gamma: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("nx", "ny", "layers", "gamma"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    @property
    def region(self) -> Region:
        return Region.from_cells(self.nx, self.ny, self.layers)

    @property
    def c0(self) -> int:
        """Emission-time origin: non-negative times, aligned so row "1" starts at t=1."""
        lo = 2 * self.nx + 2 * self.ny
        return lo + (1 - lo) % 8


class ChipId(NamedTuple):
    stage: int
    copy: int
    row: int
    col: int

    @property
    def line(self) -> tuple[int, int]:
        """Transverse ``(x, y)`` of the full-rate line this chip serves."""
        if self.stage <= 2:
            return (self.col, self.row)
        return (self.row, self.col)


def chip_for(stage: int, line: tuple[int, int], copy: int = 0) -> ChipId:
    x, y = line
    if stage <= 2:
        return ChipId(stage, copy, y, x)
    return ChipId(stage, copy, x, y)


@dataclass(frozen=True)
class SwitchAction:
    symbol: str
    bypass: str | None = None

    def __post_init__(self) -> None:
        if self.symbol not in ROUND:
            raise ValueError(f"unknown switch symbol {self.symbol!r}")
        if self.bypass not in (None, "U", "B"):
            raise ValueError(f"bypass must be U or B, got {self.bypass!r}")
        if self.bypass is not None and self.symbol not in PHOTON_SYMBOLS:
            raise ValueError("bypass markers only decorate routing symbols")

    @classmethod
    def parse(cls, text: str) -> "SwitchAction":
        sym, _, bypass = text.partition("^")
        return cls(sym, bypass or None)

    @property
    def port(self) -> str | None:
        """Input port routed into the module, ``None`` for I and M."""
        if self.symbol in ("U", "B"):
            return self.symbol
        if self.symbol in ("C", "L", "R", "H"):
            return "C"
        return None

    def __str__(self) -> str:
        return self.symbol + (f"^{self.bypass}" if self.bypass else "")


@dataclass(frozen=True)
class ChipProgram:
    """Periodic switching program: ``action(t) = pattern[(t - 1 + offset) % period]``."""

    pattern: tuple[SwitchAction, ...]
    offset: int
    label: str | None = None

    @property
    def period(self) -> int:
        return len(self.pattern)

    @property
    def decorations(self) -> tuple[int, ...]:
        return tuple(i for i, a in enumerate(self.pattern) if a.bypass)

    def action(self, t: int) -> SwitchAction:
        return self.pattern[(t - 1 + self.offset) % self.period]

    def symbols(self, t0: int, t1: int) -> list[str]:
        return [str(self.action(t)) for t in range(t0, t1 + 1)]

    def mutated(self, t: int, action: SwitchAction | str) -> "ChipProgram":
        """Copy with the pattern slot used at time ``t`` replaced."""
        if isinstance(action, str):
            action = SwitchAction.parse(action)
        pattern = list(self.pattern)
        pattern[(t - 1 + self.offset) % self.period] = action
        return replace(self, pattern=tuple(pattern))

    def swapped(self, t_a: int, t_b: int) -> "ChipProgram":
        a, b = self.action(t_a), self.action(t_b)
        return self.mutated(t_a, b).mutated(t_b, a)


def _base_program(offset: int, decorated: bool) -> tuple[SwitchAction, ...]:
    acts = []
    for sym in BASE_PATTERN:
        bypass = None
        if decorated and sym == "H":
            bypass = "U"
        elif decorated and sym == "R":
            bypass = "B"
        acts.append(SwitchAction(sym, bypass))
    return tuple(acts)


def table_row(label: str, length: int = 13) -> tuple[str, ...]:
    """Row of the switching table regenerated from the period-8 pattern."""
    if label not in ROW_OFFSETS:
        raise KeyError(label)
    pattern = _base_program(ROW_OFFSETS[label], label.rstrip("*") in DECORATED_LAYERS)
    prog = ChipProgram(pattern, ROW_OFFSETS[label], label)
    return tuple(prog.symbols(1, length))


def table_divergences() -> list[dict]:
    """Entries where the printed table differs from the generative rule."""
    out = []
    for label, printed in PRINTED_TABLE.items():
        generated = table_row(label, len(printed))
        for pos, (p, g) in enumerate(zip(printed, generated), start=1):
            if p != g:
                out.append({"row": label, "position": pos, "printed": p, "generated": g})
    return out


def row_label(stage: int, offset: int) -> str:
    """Table label of a stage-1/2 program offset; stages 3-4 are read 2 steps earlier."""
    r = offset % 8 if stage <= 2 else (offset + 2) % 8
    first = stage in (1, 3)
    if first:
        return {0: "1", 4: "1*", 2: "2", 6: "2*"}[r]
    return {2: "3", 6: "3*", 4: "4", 0: "4*"}[r]


# -- geometry ---------------------------------------------------------------


def _stage_plane_axis(stage: int) -> int:
    """Transverse axis along which U/B neighbours sit: y for stages 1-2, x for 3-4."""
    return 1 if stage <= 2 else 0


def is_stage_centre(stage: int, x: int, y: int, z: int) -> bool:
    if rate_class(x, y) != FULL:
        return False
    a = y if stage <= 2 else x
    if (z - a) % 2:
        return False
    q = ((a + z) // 2) % 2
    return q == (stage - 1) % 2


def emission_time(site: Sequence[int], c0: int) -> int:
    x, y, z = site
    return 2 * z - (x + y) + c0


@dataclass(frozen=True)
class PhotonPulse:
    id: int
    line: tuple[int, int]
    emission: int
    site: Site
    basis: str


@dataclass(frozen=True)
class ChipInfo:
    chip: ChipId
    phase: int  # t_C mod 8 for every round of this chip's line
    rounds: tuple[int, ...]  # live round indices k with t_C = phase + 8k
    centres: tuple[int, ...]  # z of the centre in each live round


@dataclass
class NetworkLayout:
    config: NetworkConfig
    chips: dict[ChipId, ChipInfo]
    full_lines: tuple[tuple[int, int], ...]
    half_lines: tuple[tuple[int, int], ...]

    @property
    def formula_chips(self) -> int:
        c = self.config
        return c.gamma * (4 * c.nx * c.ny + 2 * (c.nx + c.ny))

    @property
    def layout_chips(self) -> int:
        return len(self.chips)


def build_network(config: NetworkConfig) -> NetworkLayout:
    """One chip per full-rate line, per stage, per replica."""
    region = config.region
    (x0, x1), (y0, y1), (z0, z1) = region.bounds
    full, half = [], []
    for x in range(x0, x1 + 1):
        for y in range(y0, y1 + 1):
            (full if rate_class(x, y) == FULL else half).append((x, y))
    chips = {}
    for stage in STAGES:
        for line in full:
            x, y = line
            zs = [z for z in range(z0, z1 + 1) if is_stage_centre(stage, x, y, z)]
            times = [emission_time((x, y, z), config.c0) + STAGE_DELAY[stage] for z in zs]
            # the phase is fixed by geometry even for a chip with no centre in the block
            z_ref = next(z for z in range(4) if is_stage_centre(stage, x, y, z))
            phase = (emission_time((x, y, z_ref), config.c0) + STAGE_DELAY[stage]) % 8
            ks = [(t - phase) // 8 for t in times]
            for copy in range(config.gamma):
                chip = chip_for(stage, line, copy)
                mine = [(k, z) for k, z in zip(ks, zs) if k % config.gamma == copy]
                chips[chip] = ChipInfo(chip, phase, tuple(k for k, _ in mine), tuple(z for _, z in mine))
    return NetworkLayout(config, dict(sorted(chips.items())), tuple(full), tuple(half))


def generate_programs(config: NetworkConfig, layout: NetworkLayout | None = None) -> dict[ChipId, ChipProgram]:
    layout = layout or build_network(config)
    g = config.gamma
    programs = {}
    for chip, info in layout.chips.items():
        if g == 1:
            offset = (2 - info.phase) % 8
            label = row_label(chip.stage, offset)
            pattern = _base_program(offset, label.rstrip("*") in DECORATED_LAYERS)
        else:
            # round k (k = copy mod g) starts its hold at t = phase + 8k - 4
            pattern = tuple(SwitchAction(s) for s in ROUND[:7]) + (SwitchAction("M"),) * (8 * g - 7)
            offset = (5 - info.phase - 8 * chip.copy) % (8 * g)
            label = None
        programs[chip] = ChipProgram(pattern, offset, label)
    return programs


# -- simulation -------------------------------------------------------------


@dataclass(frozen=True)
class TraceRecord:
    t: int
    chip: ChipId | None
    action: str
    photon: int | None = None
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "chip": list(self.chip) if self.chip is not None else None,
            "action": self.action,
            "photon_id": self.photon,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class RawProjection:
    t: int
    chip: ChipId
    roles: tuple[tuple[str, int], ...]


@dataclass
class ModuleState:
    state: str = "uninitialized-hold"
    seen: list[tuple[str, int]] = field(default_factory=list)


@dataclass
class EventTrace:
    config: NetworkConfig
    layout: NetworkLayout
    photons: dict[int, PhotonPulse]
    records: list[TraceRecord]
    raw_projections: list[RawProjection]
    chip_stages: dict[int, list[tuple[int, ChipId | None]]]
    utilization: dict[ChipId, float]
    occupancy: dict[ChipId, float]
    holds: list[tuple[int, ChipId, int]]
    dropped: int = 0

    @property
    def collisions(self) -> int:
        return 0  # a trace only exists for violation-free runs


def _router_target(stage: int, line: tuple[int, int], t: int, config: NetworkConfig, region: Region):
    """Half-rate router table entry for arrival time ``t``.

    Returns ``(line, port)``, ``"delay"`` for the boundary delay line, or
    ``None`` when the slot is not connected.  Photons are only expected on
    one step in four; in the remaining slots the switch keeps the setting of
    the last expected photon.
    """
    x, y = line
    twice_z = t - config.c0 - STAGE_DELAY[stage] + x + y
    z = twice_z // 2
    if (x + z) % 2 == 0:  # half-rate photons sit where x, y, z are not all of one parity
        z -= 1
    axis = _stage_plane_axis(stage)
    for step, port in ((-1, "U"), (1, "B")):
        nb = [x, y]
        nb[axis] += step
        if is_stage_centre(stage, nb[0], nb[1], z):
            if region.normalise((nb[0], nb[1], z)) is None:
                return "delay"
            return (tuple(nb), port)
    return None


def run(
    config: NetworkConfig,
    programs: Mapping[ChipId, ChipProgram] | None = None,
    record_trace: bool = True,
) -> EventTrace:
    """Step the network; raises a ``ProtocolViolation`` on the first fault."""
    region = config.region
    layout = build_network(config)
    if programs is None:
        programs = generate_programs(config, layout)
    g = config.gamma
    (z0, z1) = region.bounds[2]

    photons: dict[int, PhotonPulse] = {}
    arrivals: dict[int, list[tuple[int, int]]] = defaultdict(list)  # t -> [(photon, stage)]
    for pid, site in enumerate(region.sites):
        line = (site.x, site.y)
        basis = X_PLUS if rate_class(*line) == HALF else Z_PLUS
        ph = PhotonPulse(pid, line, emission_time(site, config.c0), site, basis)
        photons[pid] = ph
        arrivals[ph.emission + STAGE_DELAY[1]].append((pid, 1))

    modules = {chip: ModuleState() for chip in layout.chips}
    live = {chip: set(info.rounds) for chip, info in layout.chips.items()}
    phase = {chip: info.phase for chip, info in layout.chips.items()}
    line_phase = {(chip.stage, chip.line): info.phase for chip, info in layout.chips.items()}
    span = {}
    for chip, info in layout.chips.items():
        if info.rounds:
            span[chip] = (info.phase + 8 * info.rounds[0] - 4, info.phase + 8 * info.rounds[-1] + 3 + 8 * (g - 1))

    records: list[TraceRecord] = []
    raw: list[RawProjection] = []
    chip_stages: dict[int, list[tuple[int, ChipId | None]]] = defaultdict(list)
    holds: list[tuple[int, ChipId, int]] = []
    engaged = defaultdict(int)
    slots = defaultdict(int)
    filled = defaultdict(int)

    def rec(*args):
        if record_trace:
            records.append(TraceRecord(*args))

    t_end = max(
        [max(arrivals)] + [hi for _, hi in span.values()]
    ) + STAGE_DELAY[4] + 2
    t = min([min(arrivals)] + [lo for lo, _ in span.values()])
    while t <= t_end:
        at_chip: dict[ChipId, list[tuple[int, str]]] = defaultdict(list)
        for pid, stage in sorted(arrivals.pop(t, [])):
            ph = photons[pid]
            if rate_class(*ph.line) == FULL:
                target, port = ph.line, "C"
            else:
                entry = _router_target(stage, ph.line, t, config, region)
                if entry is None:
                    raise RoutingError(f"photon {pid} reached an unconnected router slot of line {ph.line} at t={t}", None, t)
                if entry == "delay":
                    rec(t, None, "delay", pid, f"stage {stage}")
                    chip_stages[pid].append((stage, None))
                    _forward(arrivals, pid, stage, t + 1)
                    continue
                target, port = entry
            k = (t - line_phase[(stage, target)] + 4) // 8
            chip = chip_for(stage, target, k % g)
            at_chip[chip].append((pid, port))

        for chip, prog in programs.items():
            act = prog.action(t)
            arriving = at_chip.pop(chip, [])
            state = modules[chip]
            in_span = chip in span and span[chip][0] <= t <= span[chip][1]
            k = (t - phase[chip] + 4) // 8
            if act.symbol in ("M", "I"):
                if arriving:
                    raise MeasuringModuleError(
                        f"photon {arriving[0][0]} arrived at {tuple(chip)} while it performs {act.symbol} at t={t}", chip, t
                    )
                if act.symbol == "I":
                    if k in live[chip]:
                        state.state, state.seen = "initialized", []
                        rec(t, chip, "I", None, "init")
                        engaged[chip] += in_span
                    else:
                        rec(t, chip, "I", None, "void")
                else:
                    if state.state == "initialized":
                        raw.append(RawProjection(t, chip, tuple(state.seen)))
                        rec(t, chip, "M", None, "measure")
                    state.state, state.seen = "uninitialized-hold", []
                    engaged[chip] += in_span
                continue

            if in_span:
                slots[chip] += 1
            bypassed = [(pid, p) for pid, p in arriving if act.bypass and p == act.bypass]
            inside = [(pid, p) for pid, p in arriving if not (act.bypass and p == act.bypass)]
            for pid, _ in bypassed:
                rec(t, chip, str(act), pid, "bypass")
                chip_stages[pid].append((chip.stage, chip))
                _forward(arrivals, pid, chip.stage, t)
            if len(inside) > 1:
                ids = [pid for pid, _ in inside]
                raise CollisionError(f"photons {ids} collide in module {tuple(chip)} at t={t}", chip, t)
            if not inside:
                continue
            pid, p = inside[0]
            if p != act.port:
                raise RoutingError(
                    f"photon {pid} arrived at port {p} of {tuple(chip)} at t={t} but the switch selects {act.port}", chip, t
                )
            chip_stages[pid].append((chip.stage, chip))
            if in_span:
                engaged[chip] += 1
                filled[chip] += 1
            if act.symbol == "H" or state.state != "initialized":
                detail = "hold" if act.symbol == "H" else "pass"
                if act.symbol == "H":
                    holds.append((t, chip, pid))
                rec(t, chip, str(act), pid, detail)
            else:
                if any(role == act.symbol for role, _ in state.seen):
                    raise CollisionError(f"module {tuple(chip)} saw two {act.symbol} photons in one round", chip, t)
                state.seen.append((act.symbol, pid))
                rec(t, chip, str(act), pid, "interact")
            _forward(arrivals, pid, chip.stage, t + 1)

        if at_chip:
            chip = next(iter(at_chip))
            raise RoutingError(f"photon routed to missing chip {tuple(chip)} at t={t}", chip, t)
        t += 1

    if arrivals:
        raise ProtocolViolation(f"{sum(map(len, arrivals.values()))} photons still in flight after t={t_end}")

    utilization, occupancy = {}, {}
    for chip in layout.chips:
        if chip in span:
            lo, hi = span[chip]
            # every step inside the active span carries a scheduled module action;
            # photon slots without a photon still count as engaged switching
            utilization[chip] = (engaged[chip] + (slots[chip] - filled[chip])) / (hi - lo + 1)
            occupancy[chip] = filled[chip] / slots[chip] if slots[chip] else 0.0
    dropped = sum(1 for s in modules.values() if s.state == "initialized" and s.seen)
    if dropped:
        log.warning("%d parity-check windows incomplete at trace end", dropped)
    return EventTrace(config, layout, photons, records, raw, dict(chip_stages), utilization, occupancy, holds, dropped)


def _forward(arrivals, pid: int, stage: int, t_exit: int) -> None:
    if stage < 4:
        arrivals[t_exit + LINK_DELAY[stage]].append((pid, stage + 1))


# -- projections ------------------------------------------------------------


@dataclass(frozen=True)
class ProjectionEvent:
    t: int
    chip: ChipId
    photons: tuple[int | None, ...]  # [left, upper, center, bottom, right]
    center: int
    sites: tuple[Site | None, ...]

    def operator(self, region: Region) -> PauliOperator:
        zs = frozenset(region.index(s) for role, s in zip(ROLE_ORDER, self.sites) if s is not None and role != "C")
        return PauliOperator(1, frozenset({region.index(self.sites[2])}), zs)

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "chip": list(self.chip),
            "photons": list(self.photons),
            "center": self.center,
            "sites": [list(s) if s is not None else None for s in self.sites],
        }


def photon_site(photon: PhotonPulse, c0: int) -> Site:
    """Lattice site of a photon from its source line and emission time."""
    x, y = photon.line
    return Site(x, y, (photon.emission - c0 + x + y) // 2)


def schedule_to_projections(trace: EventTrace) -> list[ProjectionEvent]:
    c0 = trace.config.c0
    events = []
    for rp in sorted(trace.raw_projections, key=lambda e: (e.t, e.chip)):
        roles = dict(rp.roles)
        if "C" not in roles:
            log.warning("window on %s at t=%d has no centre photon; dropped", rp.chip, rp.t)
            continue
        ids = tuple(roles.get(r) for r in ROLE_ORDER)
        sites = tuple(photon_site(trace.photons[i], c0) if i is not None else None for i in ids)
        events.append(ProjectionEvent(rp.t, rp.chip, ids, roles["C"], sites))
    return events


# -- end-to-end verification ------------------------------------------------


@dataclass
class VerificationReport:
    qubits: int
    projections: int
    satisfied: int
    frame_satisfied: int
    violated: int
    violations: list[dict]

    def to_json(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True, indent=2)


def verify_prepared_state(
    config: NetworkConfig,
    init: str = "eq2",
    programs: Mapping[ChipId, ChipProgram] | None = None,
    drop_projection: int | None = None,
) -> VerificationReport:
    """Run the network, apply its projections to a tableau and check the cluster.

    ``init="zero"`` starts every photon in ``|0>`` (negative control);
    ``drop_projection`` deletes one event from the schedule (mutation test).
    """
    region = config.region
    trace = run(config, programs, record_trace=False)
    events = schedule_to_projections(trace)
    if drop_projection is not None:
        events = events[:drop_projection] + events[drop_projection + 1 :]
    if init == "eq2":
        bases = [trace.photons[i].basis for i in range(region.n_qubits)]
    elif init == "zero":
        bases = [Z_PLUS] * region.n_qubits
    else:
        raise ValueError(f"unknown initialisation {init!r}")
    tab = init_product_state(bases)
    rng = np.random.Generator(np.random.Philox(key=config.seed))
    for ev in events:
        op = ev.operator(region)
        centre_z = PauliOperator(1, frozenset(), op.x_support)
        tab.measure(op, rng=rng, frame=centre_z)
    targets = target_stabilizer_group(region)
    report = verify_target(tab, targets)
    violations = []
    for i in report.violated:
        site = region.sites[i]
        violations.append({"site": list(site), "plane": plane_of(site), "operator": targets[i].label(region.n_qubits)})
    return VerificationReport(
        region.n_qubits, len(events), len(report.satisfied), len(report.frame_satisfied), len(report.violated), violations
    )


# -- exports ----------------------------------------------------------------


def write_trace_jsonl(trace: EventTrace, fh) -> None:
    for r in trace.records:
        fh.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")


def write_projections_jsonl(events: Iterable[ProjectionEvent], fh) -> None:
    for ev in events:
        fh.write(json.dumps(ev.to_dict(), sort_keys=True) + "\n")


def inject_fault(programs: Mapping[ChipId, ChipProgram], layout: NetworkLayout) -> dict[ChipId, ChipProgram]:
    """Swap the U and B slots of the first live stage-1 chip."""
    out = dict(programs)
    for chip, info in layout.chips.items():
        if chip.stage == 1 and info.rounds:
            t_c = info.phase + 8 * info.rounds[0]
            out[chip] = programs[chip].swapped(t_c - 1, t_c + 1)
            return out
    raise ValueError("network has no live stage-1 chip")
