import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from doublewell.errors import DomainError
from doublewell.model import (
    CRITICAL_ENERGY,
    CSV_HEADER,
    Method,
    Parity,
    PotentialParams,
    Spectrum,
    assemble_spectrum,
    check_parity_alternation,
    derived_constants,
    potential,
)


def test_potential_values(params):
    assert potential(0.0, params) == 0.0
    assert potential(math.sqrt(5), params) == pytest.approx(-25.0, rel=1e-15)
    assert potential(3.0, params) == -9.0


def test_potential_vectorized(params):
    x = np.array([-3.0, 0.0, 3.0])
    np.testing.assert_array_equal(potential(x, params), [-9.0, 0.0, -9.0])


@given(st.floats(min_value=-1e3, max_value=1e3, allow_nan=False))
def test_potential_is_even(x):
    p = PotentialParams()
    assert potential(x, p) == potential(-x, p)


def test_extrema(params):
    c = derived_constants(params)
    assert potential(c["x_min"], params) == pytest.approx(c["V_min"], rel=1e-15)
    dv = lambda x: 2 * params.a * x + 4 * params.b * x**3
    for x in (0.0, c["x_min"], -c["x_min"]):
        assert dv(x) == pytest.approx(0.0, abs=1e-12)


def test_derived_constants(params):
    c = derived_constants(params)
    assert c["lambda"] == pytest.approx(4.47214, abs=1e-5)
    assert c["lambda"] ** 2 == pytest.approx(-2 * params.a, rel=1e-15)
    assert c["x_min"] == pytest.approx(math.sqrt(5), rel=1e-15)
    assert c["V_min"] == -25.0
    assert c["E_c"] == CRITICAL_ENERGY == 0.0
    assert derived_constants(PotentialParams(a=-2.0))["lambda"] == 2.0


@pytest.mark.parametrize("kw", [{"a": 0.0}, {"a": 1.0}, {"b": 0.0}, {"b": -1.0},
                                {"hbar": 0.0}, {"hbar": -1.0}, {"hbar": math.inf}, {"mass": 2.0}])
def test_invalid_params(kw):
    with pytest.raises(DomainError):
        PotentialParams(**kw)


def test_with_hbar_keeps_potential(params):
    p = params.with_hbar(0.01)
    assert (p.a, p.b, p.hbar) == (params.a, params.b, 0.01)


def _toy(params):
    return assemble_spectrum(params, [-3.0, -5.0, -3.0 + 1e-9, -5.0, 1.5],
                             [Parity.ODD, Parity.EVEN, Parity.EVEN, Parity.ODD, Parity.UNKNOWN],
                             Method.SINC, basis_size=11, metadata={"scale": 0.5}, tie_tol=1e-8)


def test_assemble_sorts_and_numbers(params):
    s = _toy(params)
    assert [lv.n for lv in s.levels] == list(range(5))
    assert np.all(np.diff(s.energies) >= 0)
    # exact tie: even first
    assert s.parities[:2] == [Parity.EVEN, Parity.ODD]


def test_assemble_tie_tolerance_puts_even_first(params):
    e = [-1.0 + 1e-14, -1.0]
    s = assemble_spectrum(params, e, [Parity.EVEN, Parity.ODD], Method.SINC, tie_tol=1e-12)
    assert s.parities == [Parity.EVEN, Parity.ODD]
    s = assemble_spectrum(params, e, [Parity.EVEN, Parity.ODD], Method.SINC, tie_tol=0.0)
    assert s.parities == [Parity.ODD, Parity.EVEN]


def test_parity_alternation(params):
    good = _toy(params)
    assert check_parity_alternation(good.levels) is None
    bad = assemble_spectrum(params, [-5.0, -4.0, -3.0], [Parity.EVEN, Parity.EVEN, Parity.ODD], Method.SINC)
    assert check_parity_alternation(bad.levels) == 1


def test_csv_round_trip(params):
    s = _toy(params)
    text = s.to_csv("provenance line")
    lines = text.splitlines()
    assert lines[0] == "# provenance line"
    assert lines[1] == ",".join(CSV_HEADER)
    back = Spectrum.from_csv(text, params)
    np.testing.assert_array_equal(back.energies, s.energies)
    assert back.parities == s.parities
    assert back.method is Method.SINC


def test_csv_uses_15_significant_digits(params):
    s = assemble_spectrum(params, [-21.889658283412345678], [Parity.EVEN], Method.HERMITE)
    assert "-21.8896582834123," in s.to_csv()


def test_json_mirror(params):
    doc = json.loads(_toy(params).to_json())
    assert doc["method"] == "sinc"
    assert doc["metadata"]["scale"] == 0.5
    assert [lv["parity"] for lv in doc["levels"]][:2] == ["even", "odd"]


def test_below_and_count(params):
    s = _toy(params)
    assert s.count_below() == 4
    assert len(s.below(-4.0)) == 2
