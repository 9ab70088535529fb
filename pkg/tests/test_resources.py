import csv
import io
import json
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given
from hypothesis import strategies as st

from clusterflow import resources as R


def frac_errors(p0, levels, k):
    """Exact rational oracle for the cubic recursion."""
    out = [Fraction(p0)]
    for _ in range(levels):
        out.append(k * out[-1] ** 3)
    return out


def frac_circuits(p0, levels, k, n):
    errs = frac_errors(p0, levels, k)
    return sum(Fraction(n) ** (levels - l) / (1 - n * errs[l - 1]) for l in range(1, levels + 1))


def close(a, b, rel=1e-12):
    return abs(Fraction(mpmath.nstr(a, 40)) - b) <= rel * abs(b)


@pytest.mark.parametrize("nx,ny,g,chips", [(5, 5, 1, 120), (40, 20, 1, 3320), (1, 1, 1, 8), (3, 2, 2, 68)])
def test_chip_count_examples(nx, ny, g, chips):
    assert R.chip_count(nx, ny, g) == chips


def test_chip_count_rejects_empty():
    with pytest.raises(ValueError):
        R.chip_count(0, 3)


@given(st.integers(1, 200), st.integers(1, 200), st.integers(1, 8))
def test_chip_count_linear_in_gamma(nx, ny, g):
    assert R.chip_count(nx, ny, g) == g * R.chip_count(nx, ny)
    assert R.chip_count(nx, ny) == R.chip_count(ny, nx)


def test_required_distance_examples():
    assert R.required_distance(100.0, 1e-16) == 17
    assert R.required_distance(R.ScalingModel(6.7e-5), 1e-16) == 17
    assert R.required_distance(10.0, 1e-3) == 7
    assert R.max_correctable_chain(17) == 8


def test_no_protection_above_threshold():
    with pytest.raises(R.NoProtectionError):
        R.ScalingModel(0.01, 0.0067)
    with pytest.raises(R.NoProtectionError):
        R.required_distance(1.0, 1e-3)
    with pytest.raises(ValueError):
        R.required_distance(10.0, 2.0)


@given(st.floats(1.5, 1e4), st.floats(1e-30, 0.5))
def test_required_distance_is_minimal(x, target):
    d = R.required_distance(x, target)
    assert d % 2 == 1 and d >= 3
    assert x ** (-(d - 1) / 2) <= target * (1 + 1e-6)
    if d > 3:
        assert x ** (-(d - 3) / 2) > target * (1 - 1e-6)


def test_code_params_and_footprint():
    params = R.CodeParams.from_distance(17)
    assert (params.s, params.c, params.pitch) == (16, 4, 20)
    assert R.logical_footprint(params) == (40, 20)
    with pytest.raises(ValueError):
        R.CodeParams(17, 4, 10)
    with pytest.raises(ValueError):
        R.CodeParams(17, 3, 16)


@given(st.integers(2, 400))
def test_code_params_invariants(d):
    params = R.CodeParams.from_distance(d)
    assert params.d == params.s + 1 and 4 * params.c >= params.s
    assert params.c == 0 or 4 * (params.c - 1) < params.s


def test_distillation_against_rational_oracle():
    for name, sp in R.SPECIES.items():
        got = R.distill_error(6.7e-5, 2, name)
        ref = frac_errors(6.7e-5, 2, sp.cube_coeff)
        assert all(close(g, r) for g, r in zip(got, ref))
        assert close(R.circuits_required(6.7e-5, 2, name), frac_circuits(6.7e-5, 2, sp.cube_coeff, sp.inputs))


def test_distillation_magnitudes():
    a = R.distill_error(6.7e-5, 2, "A")[2]
    y = R.distill_error(6.7e-5, 2, "Y")[2]
    assert 1e-32 <= a <= 1e-31
    assert 1e-35 <= y <= 1e-34
    assert int(mpmath.nint(R.circuits_required(6.7e-5, 2, "A"))) == 16
    assert int(mpmath.nint(R.circuits_required(6.7e-5, 2, "Y"))) == 8


def test_distillation_validation():
    with pytest.raises(ValueError):
        R.distill_error(0, 1, "A")
    with pytest.raises(ValueError):
        R.distill_error(0.1, -1, "A")
    with pytest.raises(ValueError):
        R.distill_success(0.1, "A")
    assert R.distill_error(0.01, 0, "Y") == [mpmath.mpf(0.01)]


@given(st.floats(1e-8, 1e-2), st.integers(0, 4))
def test_distillation_monotone_below_fixed_point(p0, levels):
    errs = R.distill_error(p0, levels, "A")
    # below 1/sqrt(35) each level improves
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_gate_volumes():
    orig = R.GateVolumeTable.named("original")
    assert R.t_gate_volume(orig) == (5856, 4, 5860)
    rev = R.GateVolumeTable.named("revised")
    assert R.t_gate_volume(rev)[0] == 16 * 168 + 4 * 60
    with pytest.raises(ValueError):
        R.GateVolumeTable.named("draft")


def test_t_gate_error_no_cancellation():
    err = R.t_gate_error(1e-16, 20, 5860)
    assert float(err) == pytest.approx(1.172e-11, rel=1e-6)
    exact = 1 - (1 - Fraction(1e-16)) ** 117200
    assert abs(Fraction(mpmath.nstr(err, 40)) - exact) < Fraction(1, 10**30)
    assert R.t_gate_error(0, 20, 5860) == 0


def test_logical_qubits_per_t():
    assert R.logical_qubits_per_t() == 249.5


def test_full_report_defaults():
    rep = R.full_report()
    v = rep.values
    assert v["distance"] == 17 and v["max_correctable_chain"] == 8
    assert v["footprint"] == [40, 20] and v["chips"] == 3320
    assert v["omega"] == 117200 and v["omega_with_5865"] == 117380
    assert v["t_gate_error"] == pytest.approx(1.17e-11, rel=0.01)
    assert v["logical_qubits_per_t_rounded"] == 250
    assert set(rep.provenance) <= set(v)
    assert all(set(p) == {"formula", "anchor"} for p in rep.provenance.values())
    data = json.loads(rep.to_json())
    assert data["values"]["distance"] == 17


def test_full_report_overrides():
    v = R.full_report(nx=5, ny=5, gamma=2, edition="revised").values
    assert v["chips"] == 240 and v["table_edition"] == "revised"
    with pytest.raises(R.NoProtectionError):
        R.full_report(p=0.01)


def test_distillation_csv():
    rows = list(csv.DictReader(io.StringIO(R.distillation_csv())))
    assert [(r["species"], r["level"]) for r in rows] == [("A", "0"), ("A", "1"), ("A", "2"), ("Y", "0"), ("Y", "1"), ("Y", "2")]
    assert rows[0]["failure_probability"] == ""
    assert float(rows[1]["failure_probability"]) == pytest.approx(15 * 6.7e-5)
