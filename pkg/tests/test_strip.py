import math

import numpy as np
import pytest

from ctrg.core import TruncationPolicy
from ctrg.errors import NumericError
from ctrg.ising import T_CRITICAL, onsager_free_energy_density, strip_free_energy_exact
from ctrg.strip import StripSpec, ctrg_strip, power_iteration, strip_free_energy, trg_strip

from conftest import T_GRID

EXACT = TruncationPolicy.exact_mode()


def test_power_iteration_examples():
    assert power_iteration(np.eye(5)) == pytest.approx(1.0, rel=1e-13)
    assert power_iteration(np.array([[2.0, 1.0], [1.0, 2.0]])) == pytest.approx(3.0, rel=1e-13)
    b = 0.8
    m = np.array([[math.exp(b), math.exp(-b)], [math.exp(-b), math.exp(b)]])
    assert power_iteration(m) == pytest.approx(2 * math.cosh(b), rel=1e-13)


def test_power_iteration_near_degenerate():
    # second eigenvalue 2 sinh(b) sits within 4e-9 of 2 cosh(b), as in a deeply ordered strip
    b = 10.0
    m = np.array([[math.exp(b), math.exp(-b)], [math.exp(-b), math.exp(b)]])
    m = np.kron(m, np.array([[1.0, 0.5], [0.5, 1.0]]))
    assert power_iteration(m) == pytest.approx(2 * math.cosh(b) * 1.5, rel=1e-12)


def test_power_iteration_failure():
    with pytest.raises(NumericError) as info:
        power_iteration(np.array([[2.0, 1.0], [1.0, 1.9]]), max_iters=1)
    assert info.value.estimate == pytest.approx(3.0, rel=0.1)
    with pytest.raises(ValueError):
        power_iteration(np.ones((2, 3)))


def test_spec_validation():
    with pytest.raises(ValueError):
        StripSpec(0, 1.0)
    with pytest.raises(ValueError):
        StripSpec(2, -1.0)
    with pytest.raises(ValueError):
        StripSpec(2, 1.0, "twisted")
    assert StripSpec(3, 1.0).spins_per_row == 7
    assert StripSpec(3, 1.0, "periodic").spins_per_row == 6
    with pytest.raises(ValueError):
        trg_strip(StripSpec(4, 1.0, "open"), TruncationPolicy(8))
    with pytest.raises(ValueError):
        trg_strip(StripSpec(6, 1.0, "periodic"), TruncationPolicy(8))
    with pytest.raises(ValueError):
        strip_free_energy("hotrg", StripSpec(2, 1.0), TruncationPolicy(8))


def test_width_one_analytic():
    b = 1.0
    open_f = -math.log((2 * math.cosh(2 * b)) ** 2 + 4) / 3
    periodic_f = -math.log(2 * math.cosh(2 * b))
    assert ctrg_strip(StripSpec(1, 1.0, "open"), EXACT).free_energy == pytest.approx(
        open_f, rel=1e-12)
    assert ctrg_strip(StripSpec(1, 1.0, "periodic"), EXACT).free_energy == pytest.approx(
        periodic_f, rel=1e-12)
    assert trg_strip(StripSpec(1, 1.0, "periodic"), EXACT).free_energy == pytest.approx(
        periodic_f, rel=1e-12)


@pytest.mark.parametrize("boundary", ["open", "periodic"])
@pytest.mark.parametrize("temperature", T_GRID)
def test_ctrg_exact_mode_matches_dense(boundary, temperature):
    for width in range(1, 7):
        dense = strip_free_energy_exact(temperature, width, boundary)
        res = ctrg_strip(StripSpec(width, temperature, boundary), EXACT)
        assert res.free_energy == pytest.approx(dense, rel=1e-10), width
        assert math.isfinite(res.log_lambda)


@pytest.mark.parametrize("temperature", T_GRID)
def test_trg_exact_mode_matches_dense(temperature):
    for width in (1, 2, 4):
        dense = strip_free_energy_exact(temperature, width, "periodic")
        res = trg_strip(StripSpec(width, temperature, "periodic"), EXACT)
        assert res.free_energy == pytest.approx(dense, rel=1e-10), width


def test_width_four_at_tc_open():
    dense = strip_free_energy_exact(T_CRITICAL, 4, "open")
    assert strip_free_energy("ctrg", StripSpec(4, T_CRITICAL), EXACT) == pytest.approx(
        dense, rel=1e-10)


def test_wide_periodic_strip_reaches_onsager():
    t = 2 * T_CRITICAL
    f = ctrg_strip(StripSpec(16, t, "periodic"), TruncationPolicy(24)).free_energy
    ref = onsager_free_energy_density(t)
    assert abs(f - ref) / abs(ref) < 1e-6


@pytest.mark.parametrize("boundary", ["open", "periodic"])
@pytest.mark.parametrize("temperature", [0.7 * T_CRITICAL, 1.5 * T_CRITICAL])
def test_monotone_in_width(boundary, temperature):
    ref = onsager_free_energy_density(temperature)
    gaps = [
        abs(ctrg_strip(StripSpec(w, temperature, boundary), TruncationPolicy(24)).free_energy
            - ref)
        for w in (2, 4, 8, 16)
    ]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))


def test_trg_and_ctrg_agree_on_truncated_strip():
    spec = StripSpec(16, T_CRITICAL, "periodic")
    f_ctrg = ctrg_strip(spec, TruncationPolicy(16)).free_energy
    f_trg = trg_strip(spec, TruncationPolicy(16)).free_energy
    assert abs(f_ctrg - f_trg) / abs(f_ctrg) < 1e-4
