"""Resource arithmetic: chip counts, code sizing, distillation and T-gate cost.

Distillation magnitudes reach 1e-35, so recursions and the T-gate failure
probability are evaluated with :mod:`mpmath` and only converted to ``float``
at the reporting boundary.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import mpmath

PRECISION = 60  # decimal digits for all mpmath evaluations
DEFAULT_P = 6.7e-5
DEFAULT_PTH = 6.7e-3
DEFAULT_TARGET = 1e-16


class NoProtectionError(ValueError):
    """Physical error rate at or above threshold: distance growth does not help."""


def chip_count(nx: int, ny: int, gamma: int = 1) -> int:
    """Chips needed for an ``nx x ny`` cross-section, replicated ``gamma`` times."""
    if min(nx, ny, gamma) < 1:
        raise ValueError("nx, ny and gamma must be >= 1")
    return gamma * (4 * nx * ny + 2 * (nx + ny))


@dataclass(frozen=True)
class ScalingModel:
    """Logical error falls by ``x = p_th / p`` for every increase of ``d`` by two."""

    p: float
    p_th: float = DEFAULT_PTH

    def __post_init__(self) -> None:
        if not 0 < self.p:
            raise ValueError("p must be positive")
        if self.p >= self.p_th:
            raise NoProtectionError(f"p={self.p} is not below threshold {self.p_th}")

    @property
    def x(self) -> float:
        return self.p_th / self.p


def required_distance(model: ScalingModel | float, target: float) -> int:
    """Smallest odd ``d`` with ``x ** (-(d - 1) / 2) <= target``."""
    x = model.x if isinstance(model, ScalingModel) else float(model)
    if x <= 1:
        raise NoProtectionError("suppression factor must exceed 1")
    if not 0 < target < 1:
        raise ValueError("target must lie in (0, 1)")
    # compare in log space with a small slack so exact powers (100**-8 vs 1e-16) land inclusively
    halves = math.log(target) / -math.log(x)
    k = max(1, math.ceil(halves - 1e-9))
    return 2 * k + 1


def max_correctable_chain(d: int) -> int:
    return (d - 1) // 2


@dataclass(frozen=True)
class CodeParams:
    """Defect geometry: separation ``s`` and cross-section ``c`` in unit cells."""

    d: int
    c: int
    s: int

    def __post_init__(self) -> None:
        if self.d != self.s + 1:
            raise ValueError("distance must equal separation + 1")
        if 4 * self.c < self.s:
            raise ValueError("defect circumference 4c must reach the separation")

    @classmethod
    def from_distance(cls, d: int) -> "CodeParams":
        """Separation ``d - 1`` and the smallest cross-section with ``4c >= s``."""
        s = d - 1
        return cls(d, -(-s // 4), s)

    @property
    def pitch(self) -> int:
        """Logical-cell edge length in unit cells."""
        return self.s + self.c


def logical_footprint(params: CodeParams) -> tuple[int, int]:
    """Cell array holding one logical qubit (a pair of defects)."""
    return (2 * params.s + 2 * params.c, params.s + params.c)


@dataclass(frozen=True)
class DistillationSpecies:
    name: str
    cube_coeff: int
    inputs: int
    volume_original: int
    volume_revised: int


SPECIES = {
    "A": DistillationSpecies("A", 35, 15, 336, 168),
    "Y": DistillationSpecies("Y", 7, 7, 120, 60),
}


def _species(s: DistillationSpecies | str) -> DistillationSpecies:
    return SPECIES[s] if isinstance(s, str) else s


def distill_error(p0, levels: int, species: DistillationSpecies | str) -> list:
    """Output error after each level, ``p_{l+1} = k p_l^3``, as mpmath numbers."""
    sp = _species(species)
    if not 0 < p0 < 1:
        raise ValueError("p0 must lie in (0, 1)")
    if levels < 0:
        raise ValueError("levels must be >= 0")
    with mpmath.workdps(PRECISION):
        out = [mpmath.mpf(p0)]
        for _ in range(levels):
            out.append(sp.cube_coeff * out[-1] ** 3)
        return out


def distill_success(p_prev, species: DistillationSpecies | str):
    """Success probability of one distillation circuit fed with error ``p_prev``."""
    sp = _species(species)
    with mpmath.workdps(PRECISION):
        p_prev = mpmath.mpf(p_prev)
        if not 0 < p_prev < mpmath.mpf(1) / sp.inputs:
            raise ValueError(f"p_prev must lie in (0, 1/{sp.inputs})")
        return 1 - sp.inputs * p_prev


def circuits_required(p0, levels: int, species: DistillationSpecies | str):
    """Expected circuits: level ``l`` runs ``n**(L-l)`` circuits, each repeated ``1/P_l`` times."""
    sp = _species(species)
    errs = distill_error(p0, levels, sp)
    with mpmath.workdps(PRECISION):
        total = mpmath.mpf(0)
        for level in range(1, levels + 1):
            total += mpmath.mpf(sp.inputs) ** (levels - level) / distill_success(errs[level - 1], sp)
        return total


@dataclass(frozen=True)
class GateVolumeTable:
    v2: int = 12
    v1z: int = 2
    v1x: int = 4
    va: int = 336
    vy: int = 120
    edition: str = "original"

    @classmethod
    def named(cls, edition: str) -> "GateVolumeTable":
        if edition == "original":
            return cls()
        if edition == "revised":
            return cls(v2=16, va=168, vy=60, edition="revised")
        raise ValueError(f"unknown table edition {edition!r}")


def t_gate_volume(table: GateVolumeTable, a_circuits: int = 16, y_circuits: int = 8) -> tuple[float, float, float]:
    """(distillation, teleportation, total) logical cells per T gate.

    The Y chain is needed for half of all T gates, so it enters with weight 1/2.
    """
    distill = a_circuits * table.va + 0.5 * y_circuits * table.vy
    teleport = table.v1z + 0.5 * table.v1x
    return (_int_if_whole(distill), _int_if_whole(teleport), _int_if_whole(distill + teleport))


def _int_if_whole(v: float):
    return int(v) if float(v).is_integer() else v


def t_gate_error(per_step_error, lam: int, total_cells) -> float:
    """``1 - (1 - eps) ** (lam * total)`` evaluated without cancellation."""
    if not 0 <= per_step_error < 1:
        raise ValueError("per-step error must lie in [0, 1)")
    with mpmath.workdps(PRECISION):
        omega = mpmath.mpf(lam) * mpmath.mpf(total_cells)
        return -mpmath.expm1(omega * mpmath.log1p(-mpmath.mpf(per_step_error)))


def logical_qubits_per_t(levels: int = 2) -> float:
    """Average logical qubits consumed by one T gate: full A tree plus half a Y tree."""
    return SPECIES["A"].inputs ** levels + SPECIES["Y"].inputs ** levels / 2


@dataclass
class ResourceReport:
    values: dict
    provenance: dict

    def to_json(self) -> str:
        return json.dumps({"values": self.values, "provenance": self.provenance}, sort_keys=True, indent=2) + "\n"


def _f(x) -> float:
    return float(mpmath.mpf(x)) if not isinstance(x, (int, float)) else x


def full_report(
    p: float = DEFAULT_P,
    p_th: float = DEFAULT_PTH,
    target: float = DEFAULT_TARGET,
    nx: int | None = None,
    ny: int | None = None,
    gamma: int = 1,
    edition: str = "original",
    p0: float | None = None,
    levels: int = 2,
) -> ResourceReport:
    """Every headline number from one set of inputs; ``p0`` defaults to ``p``."""
    model = ScalingModel(p, p_th)
    d = required_distance(model, target)
    params = CodeParams.from_distance(d)
    width, height = logical_footprint(params)
    nx = width if nx is None else nx
    ny = height if ny is None else ny
    p0 = p if p0 is None else p0
    table = GateVolumeTable.named(edition)

    vals: dict = {
        "p": p,
        "p_th": p_th,
        "suppression_factor": model.x,
        "target": target,
        "distance": d,
        "max_correctable_chain": max_correctable_chain(d),
        "defect_separation": params.s,
        "defect_cross_section": params.c,
        "pitch": params.pitch,
        "footprint": [width, height],
        "nx": nx,
        "ny": ny,
        "gamma": gamma,
        "chips": chip_count(nx, ny, gamma),
        "table_edition": edition,
    }
    for name in ("A", "Y"):
        errs = distill_error(p0, levels, name)
        succ = [distill_success(e, name) for e in errs[:-1]]
        circ = circuits_required(p0, levels, name)
        vals[f"distill_error_{name}"] = [_f(e) for e in errs]
        with mpmath.workdps(PRECISION):
            vals[f"distill_failure_{name}"] = [float(1 - s) for s in succ]
        vals[f"circuits_{name}"] = _f(circ)
        vals[f"circuits_{name}_rounded"] = int(mpmath.nint(circ))
    distill, teleport, total = t_gate_volume(table, vals["circuits_A_rounded"], vals["circuits_Y_rounded"])
    vals["volume_distill"] = distill
    vals["volume_teleport"] = teleport
    vals["volume_total"] = total
    vals["omega"] = _int_if_whole(params.pitch * total)
    vals["omega_with_5865"] = params.pitch * (5865 + teleport)
    vals["t_gate_error"] = _f(t_gate_error(target, params.pitch, total))
    vals["logical_qubits_per_t"] = logical_qubits_per_t(levels)
    vals["logical_qubits_per_t_rounded"] = round(logical_qubits_per_t(levels) / 10) * 10

    prov = {
        "suppression_factor": {"formula": "p_th / p", "anchor": "threshold scaling per distance-2 step"},
        "distance": {"formula": "smallest odd d with x^-((d-1)/2) <= target", "anchor": "minimum code distance 17"},
        "max_correctable_chain": {"formula": "(d-1)/2", "anchor": "chains up to 8 errors"},
        "footprint": {"formula": "(2s+2c, s+c), fitted to one layout", "anchor": "40x20 cell array"},
        "chips": {"formula": "gamma*(4*nx*ny + 2*(nx+ny))", "anchor": "4N^2+4N chips; 3320 chips"},
        "distill_error_A": {"formula": "p_{l+1} = 35 p_l^3", "anchor": "A-state recursion"},
        "distill_error_Y": {"formula": "p_{l+1} = 7 p_l^3", "anchor": "Y-state recursion"},
        "distill_failure_A": {"formula": "15 p_l", "anchor": "A-state success probability"},
        "distill_failure_Y": {"formula": "7 p_l", "anchor": "Y-state success probability"},
        "circuits_A": {"formula": "15/P_1 + 1/P_2", "anchor": "about 16 circuits (success-probability reading)"},
        "circuits_Y": {"formula": "7/P_1 + 1/P_2", "anchor": "about 8 circuits (success-probability reading)"},
        "volume_distill": {"formula": "16 V_A + (1/2) 8 V_Y", "anchor": "5856 logical cells"},
        "volume_teleport": {"formula": "V_1z + (1/2) V_1x", "anchor": "4 cells"},
        "omega": {"formula": "lambda * (distill + teleport)", "anchor": "elementary cells per T gate"},
        "omega_with_5865": {"formula": "lambda * (5865 + teleport)", "anchor": "quoted total, kept for comparison"},
        "t_gate_error": {"formula": "1 - (1 - target)^omega", "anchor": "O(1e-11) T-gate failure"},
        "logical_qubits_per_t": {"formula": "15^2 + 7^2/2", "anchor": "about 250 logical qubits"},
    }
    return ResourceReport(vals, prov)


def distillation_csv(p0: float = DEFAULT_P, levels: int = 2) -> str:
    """Per-level error and failure table for both species."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["species", "level", "error", "failure_probability"])
    for name in ("A", "Y"):
        errs = distill_error(p0, levels, name)
        for level, e in enumerate(errs):
            fail = "" if level == 0 else mpmath.nstr(1 - distill_success(errs[level - 1], name), 12)
            w.writerow([name, level, mpmath.nstr(e, 12), fail])
    return buf.getvalue()
