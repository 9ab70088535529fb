"""Stabilizer tableau simulation in the Aaronson-Gottesman (CHP) layout.

The tableau stores ``n`` destabilizer rows followed by ``n`` stabilizer rows
as ``uint8`` bit matrices.  A row with both bits set on a qubit denotes the
Hermitian ``Y``.  Byproduct operators implied by ``-1`` projection outcomes
are accumulated in a Pauli frame instead of being corrected.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .lattice import PauliOperator, Region

X_PLUS = "X+"
Z_PLUS = "Z+"


class ContradictionError(ValueError):
    """A forced outcome disagrees with a deterministic measurement."""


def _g(x1, z1, x2, z2) -> np.ndarray:
    """Vectorised phase exponent (powers of i) of ``P1 * P2`` per qubit."""
    x1 = x1.astype(np.int8)
    z1 = z1.astype(np.int8)
    x2 = x2.astype(np.int8)
    z2 = z2.astype(np.int8)
    y = x1 & z1
    only_x = x1 & (1 - z1)
    only_z = z1 & (1 - x1)
    return y * (z2 - x2) + only_x * z2 * (2 * x2 - 1) + only_z * x2 * (1 - 2 * z2)


@dataclass(frozen=True)
class MeasurementRecord:
    operator: PauliOperator
    outcome: int
    deterministic: bool
    frame: PauliOperator | None = None

    def to_json(self) -> str:
        def enc(op):
            if op is None:
                return None
            return {"sign": op.sign, "x": sorted(op.x_support), "z": sorted(op.z_support)}

        return json.dumps(
            {
                "operator": enc(self.operator),
                "outcome": self.outcome,
                "deterministic": self.deterministic,
                "frame": enc(self.frame),
            },
            sort_keys=True,
        )


@dataclass(frozen=True)
class Membership:
    in_group: bool
    sign: int | None = None


@dataclass
class TargetReport:
    satisfied: list[int] = field(default_factory=list)
    frame_satisfied: list[int] = field(default_factory=list)
    violated: list[int] = field(default_factory=list)

    @property
    def counts(self) -> dict[str, int]:
        return {
            "satisfied": len(self.satisfied),
            "frame_satisfied": len(self.frame_satisfied),
            "violated": len(self.violated),
        }


class StabilizerTableau:
    """Pure stabilizer state on ``n`` qubits."""

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("tableau needs at least one qubit")
        self.n = n
        self.x = np.zeros((2 * n, n), dtype=np.uint8)
        self.z = np.zeros((2 * n, n), dtype=np.uint8)
        self.r = np.zeros(2 * n, dtype=np.uint8)
        self.frame_x = np.zeros(n, dtype=np.uint8)
        self.frame_z = np.zeros(n, dtype=np.uint8)
        # computational basis |0...0>: destabilizers X_i, stabilizers Z_i
        idx = np.arange(n)
        self.x[idx, idx] = 1
        self.z[n + idx, idx] = 1

    def copy(self) -> "StabilizerTableau":
        out = StabilizerTableau.__new__(StabilizerTableau)
        out.n = self.n
        for name in ("x", "z", "r", "frame_x", "frame_z"):
            setattr(out, name, getattr(self, name).copy())
        return out

    # -- views ---------------------------------------------------------------
    def generators(self) -> list[PauliOperator]:
        ops = []
        for row in range(self.n, 2 * self.n):
            ops.append(self._row_op(row))
        return ops

    def _row_op(self, row: int) -> PauliOperator:
        return PauliOperator(
            -1 if self.r[row] else 1,
            frozenset(np.flatnonzero(self.x[row]).tolist()),
            frozenset(np.flatnonzero(self.z[row]).tolist()),
        )

    @property
    def pauli_frame(self) -> PauliOperator:
        return PauliOperator(
            1,
            frozenset(np.flatnonzero(self.frame_x).tolist()),
            frozenset(np.flatnonzero(self.frame_z).tolist()),
        )

    def dump(self) -> str:
        """One line per stabilizer: sign, X bits, Z bits."""
        lines = []
        for row in range(self.n, 2 * self.n):
            xs = "".join(map(str, self.x[row]))
            zs = "".join(map(str, self.z[row]))
            lines.append(f"{'-' if self.r[row] else '+'} {xs}|{zs}")
        return "\n".join(lines) + "\n"

    def check_invariants(self) -> bool:
        """Stabilizers commute pairwise and have full GF(2) rank."""
        from .lattice import gf2_rank, symplectic_products

        mat = np.concatenate([self.x[self.n :], self.z[self.n :]], axis=1)
        return not symplectic_products(mat).any() and gf2_rank(mat) == self.n

    # -- internals -----------------------------------------------------------
    def _bits(self, op: PauliOperator) -> tuple[np.ndarray, np.ndarray]:
        bad = [q for q in op.support if not 0 <= q < self.n]
        if bad:
            raise ValueError(f"operator acts on qubits outside the tableau: {sorted(bad)[:5]}")
        return op.to_bits(self.n)

    def _anticommuting(self, rows: slice, xb: np.ndarray, zb: np.ndarray) -> np.ndarray:
        xs = self.x[rows].astype(np.int64)
        zs = self.z[rows].astype(np.int64)
        return ((xs @ zb.astype(np.int64) + zs @ xb.astype(np.int64)) % 2).astype(bool)

    def _rowsum(self, targets: np.ndarray, src: int) -> None:
        """Replace each target row ``h`` by ``R_src * R_h``."""
        if targets.size == 0:
            return
        phase = _g(self.x[src][None, :], self.z[src][None, :], self.x[targets], self.z[targets]).sum(axis=1)
        phase = phase + 2 * self.r[targets].astype(np.int64) + 2 * int(self.r[src])
        self.r[targets] = (phase % 4 == 2).astype(np.uint8)
        self.x[targets] ^= self.x[src]
        self.z[targets] ^= self.z[src]

    def _product_sign(self, rows: np.ndarray) -> tuple[int, np.ndarray, np.ndarray]:
        """Sign and bits of the ordered product of stabilizer ``rows``."""
        if rows.size == 0:
            return 1, np.zeros(self.n, np.uint8), np.zeros(self.n, np.uint8)
        xs, zs = self.x[rows], self.z[rows]
        # prefix products: acc_k = R_k * acc_{k-1}; the phase of each step only
        # depends on the XOR-accumulated bits of the previous prefix
        px = np.cumsum(xs, axis=0, dtype=np.int64) % 2
        pz = np.cumsum(zs, axis=0, dtype=np.int64) % 2
        prev_x = np.vstack([np.zeros((1, self.n), np.int64), px[:-1]])
        prev_z = np.vstack([np.zeros((1, self.n), np.int64), pz[:-1]])
        phase = int(_g(xs, zs, prev_x, prev_z).sum()) + 2 * int(self.r[rows].sum())
        phase %= 4
        if phase not in (0, 2):
            raise AssertionError("stabilizer product acquired an imaginary phase")
        return (1 if phase == 0 else -1), px[-1].astype(np.uint8), pz[-1].astype(np.uint8)

    def _group_sign(self, xb: np.ndarray, zb: np.ndarray) -> int:
        hits = np.flatnonzero(self._anticommuting(slice(0, self.n), xb, zb)) + self.n
        sign, px, pz = self._product_sign(hits)
        if not (np.array_equal(px, xb) and np.array_equal(pz, zb)):
            raise AssertionError("operator commutes with the group but is not in it; tableau rank deficient")
        return sign

    # -- public operations ---------------------------------------------------
    def measure(
        self,
        op: PauliOperator,
        forced_outcome: int | None = None,
        rng: np.random.Generator | None = None,
        frame: PauliOperator | None = None,
    ) -> MeasurementRecord:
        """Projectively measure ``op`` in place.

        Random outcomes come from ``forced_outcome`` when given, else from
        ``rng``.  On a ``-1`` outcome the frame correction (``frame`` or, by
        default, the destabilizer paired with the new row) is XORed into the
        Pauli frame.
        """
        if forced_outcome not in (None, 1, -1):
            raise ValueError("forced outcome must be +1 or -1")
        xb, zb = self._bits(op)
        n = self.n
        anti = np.flatnonzero(self._anticommuting(slice(n, 2 * n), xb, zb))
        if anti.size == 0:
            outcome = self._group_sign(xb, zb) * op.sign
            if forced_outcome is not None and forced_outcome != outcome:
                raise ContradictionError(f"forced {forced_outcome} but measurement is fixed at {outcome}")
            return MeasurementRecord(op, outcome, True)

        p = n + int(anti[0])
        others = np.flatnonzero(self._anticommuting(slice(0, 2 * n), xb, zb))
        others = others[(others != p)]
        self._rowsum(others, p)
        # the old stabilizer row becomes the destabilizer of the new one
        self.x[p - n] = self.x[p]
        self.z[p - n] = self.z[p]
        self.r[p - n] = self.r[p]
        if forced_outcome is None:
            if rng is None:
                raise ValueError("random measurement needs an rng or a forced outcome")
            outcome = 1 if rng.random() < 0.5 else -1
        else:
            outcome = forced_outcome
        self.x[p] = xb
        self.z[p] = zb
        self.r[p] = 1 if op.sign * outcome < 0 else 0

        correction = None
        if outcome == -1:
            if frame is None:
                correction = self._row_op(p - n).unsigned()
            else:
                correction = frame.unsigned()
            fx, fz = self._bits(correction)
            self.frame_x ^= fx
            self.frame_z ^= fz
        return MeasurementRecord(op, outcome, False, correction)

    def contains(self, op: PauliOperator, apply_frame: bool = False) -> Membership:
        """Membership of ``op`` up to sign, with the sign it carries in the group.

        With ``apply_frame`` the sign is the one seen after the frame Paulis
        are applied as physical flips.
        """
        xb, zb = self._bits(op)
        if self._anticommuting(slice(self.n, 2 * self.n), xb, zb).any():
            return Membership(False)
        sign = self._group_sign(xb, zb)
        if apply_frame and not op.commutes_with(self.pauli_frame):
            sign = -sign
        return Membership(True, sign)


def init_product_state(assignment: Mapping[int, str] | Sequence[str], n: int | None = None) -> StabilizerTableau:
    """Product state with ``X+`` or ``Z+`` on each qubit index."""
    if isinstance(assignment, Mapping):
        if n is None:
            n = len(assignment)
        missing = [q for q in range(n) if q not in assignment]
        if missing:
            raise ValueError(f"unassigned qubits: {missing[:5]}")
        bases = [assignment[q] for q in range(n)]
    else:
        bases = list(assignment)
        n = len(bases)
    tab = StabilizerTableau(n)
    for q, basis in enumerate(bases):
        if basis == X_PLUS:
            tab.x[q, q], tab.z[q, q] = 0, 1
            tab.x[n + q, q], tab.z[n + q, q] = 1, 0
        elif basis != Z_PLUS:
            raise ValueError(f"qubit {q}: unknown basis {basis!r}")
    return tab


def region_assignment(region: Region, basis_of) -> list[str]:
    """Per-qubit bases for a region from a ``site -> basis`` callable."""
    return [basis_of(site) for site in region.sites]


def measure_pauli(
    tableau: StabilizerTableau,
    op: PauliOperator,
    forced_outcome: int | None = None,
    rng: np.random.Generator | None = None,
    frame: PauliOperator | None = None,
) -> tuple[MeasurementRecord, StabilizerTableau]:
    record = tableau.measure(op, forced_outcome, rng, frame)
    return record, tableau


def contains(tableau: StabilizerTableau, op: PauliOperator, apply_frame: bool = False) -> Membership:
    return tableau.contains(op, apply_frame)


def verify_target(tableau: StabilizerTableau, targets: Iterable[PauliOperator]) -> TargetReport:
    """Classify targets as satisfied, satisfied through the frame, or violated."""
    report = TargetReport()
    frame = tableau.pauli_frame
    for i, target in enumerate(targets):
        member = tableau.contains(target)
        if not member.in_group:
            report.violated.append(i)
            continue
        sign = member.sign * target.sign
        flips = not target.commutes_with(frame)
        if sign == 1 and not flips:
            report.satisfied.append(i)
        elif sign == -1 and flips:
            report.frame_satisfied.append(i)
        else:
            report.violated.append(i)
    return report


def apply_frame(tableau: StabilizerTableau) -> StabilizerTableau:
    """Copy of the state with the frame applied as physical Pauli flips."""
    out = tableau.copy()
    fx, fz = out.frame_x.astype(np.int64), out.frame_z.astype(np.int64)
    anti = ((out.x.astype(np.int64) @ fz + out.z.astype(np.int64) @ fx) % 2).astype(np.uint8)
    out.r ^= anti
    out.frame_x[:] = 0
    out.frame_z[:] = 0
    return out
