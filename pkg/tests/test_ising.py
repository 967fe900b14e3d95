import itertools
import math

import numpy as np
import pytest

from ctrg.errors import CapacityError
from ctrg.ising import (
    T_CRITICAL,
    LatticeSpec,
    ModelSpec,
    boltzmann_plaquette_tensor,
    brute_force_logZ,
    network_logZ,
    onsager_free_energy_density,
    onsager_internal_energy_density,
    spin_torus_bonds,
    strip_free_energy_exact,
    tensor_torus_bonds,
    transfer_matrix_logZ,
)

from conftest import T_GRID

# frozen from the quadrature oracle; cross-checked against the closed form -sqrt(2)
U_AT_TC = -1.4142135623730951


def test_critical_temperature():
    assert T_CRITICAL == pytest.approx(2.0 / math.log(1.0 + math.sqrt(2.0)), rel=1e-15)
    assert T_CRITICAL == pytest.approx(2.269185, abs=1e-6)


def test_specs_validate():
    with pytest.raises(ValueError):
        ModelSpec(0.0)
    with pytest.raises(ValueError):
        ModelSpec(math.inf)
    with pytest.raises(ValueError):
        LatticeSpec(0)
    assert LatticeSpec(3).n_spins == 18


def test_plaquette_tensor_values():
    np.testing.assert_array_equal(boltzmann_plaquette_tensor(0.0), np.ones((2, 2, 2, 2)))
    a = boltzmann_plaquette_tensor(0.7)
    assert a[0, 0, 0, 0] == pytest.approx(math.exp(4 * 0.7))
    assert a[0, 1, 0, 1] == pytest.approx(math.exp(-4 * 0.7))
    assert a[0, 0, 1, 1] == pytest.approx(1.0)


def test_plaquette_tensor_symmetries():
    a = boltzmann_plaquette_tensor(1.0 / T_CRITICAL)
    for i, j, k, l in itertools.product(range(2), repeat=4):
        assert a[i, j, k, l] == a[j, k, l, i] == a[k, l, i, j] == a[l, i, j, k]
        assert a[i, j, k, l] == a[1 - i, 1 - j, 1 - k, 1 - l]


def test_brute_force_examples():
    n, bonds = spin_torus_bonds(2, 2)
    assert brute_force_logZ(0.0, n, bonds) == pytest.approx(n * math.log(2.0))
    # 2x2 spin torus: each neighbour pair is bonded twice through the wrap
    weights = []
    for s in itertools.product((1, -1), repeat=4):
        e = sum(s[i] * s[j] for i, j in bonds)
        weights.append(math.exp(e))
    assert brute_force_logZ(1.0, n, bonds) == pytest.approx(math.log(sum(weights)), rel=1e-14)
    with pytest.raises(CapacityError):
        brute_force_logZ(1.0, 40, np.zeros((0, 2)))


def test_brute_force_flip_symmetry():
    n, bonds = tensor_torus_bonds(2)
    assert len(bonds) == 4 * 4  # four bonds per plaquette tensor
    assert n == 8


@pytest.mark.parametrize("size", [2, 3])
@pytest.mark.parametrize("temperature", T_GRID)
def test_network_matches_enumeration(size, temperature):
    beta = 1.0 / temperature
    exact = brute_force_logZ(beta, *tensor_torus_bonds(size))
    net = network_logZ(boltzmann_plaquette_tensor(beta), size)
    assert net == pytest.approx(exact, rel=1e-10)


@pytest.mark.parametrize("temperature", T_GRID)
def test_transfer_matrix_matches_enumeration(temperature):
    beta = 1.0 / temperature
    for size in (2, 3):
        exact = brute_force_logZ(beta, *tensor_torus_bonds(size))
        assert transfer_matrix_logZ(beta, size) == pytest.approx(exact, rel=1e-12)


def test_transfer_matrix_capacity():
    with pytest.raises(CapacityError):
        transfer_matrix_logZ(0.5, 11)


def test_onsager_high_temperature():
    # f + T ln 2 -> -1/T (two bonds per spin, <e^{b s s'}> ~ 1 + b^2/2)
    t = 100.0
    assert onsager_free_energy_density(t) + t * math.log(2.0) == pytest.approx(-1.0 / t, rel=1e-3)
    assert abs(onsager_internal_energy_density(50.0)) < 0.05


def test_onsager_internal_energy_at_tc():
    assert onsager_internal_energy_density(T_CRITICAL) == pytest.approx(U_AT_TC, rel=1e-12)
    assert U_AT_TC == pytest.approx(-math.sqrt(2.0), rel=1e-15)


def test_onsager_u_is_derivative_of_f():
    for t in (1.5, 2.0, 3.0):
        b, db = 1.0 / t, 1e-4
        bf = lambda beta: beta * onsager_free_energy_density(1.0 / beta)
        u_num = (bf(b + db) - bf(b - db)) / (2 * db)
        assert onsager_internal_energy_density(t) == pytest.approx(u_num, abs=1e-7)


def test_onsager_shapes():
    temps = np.linspace(0.5, 5.0, 25)
    f = np.array([onsager_free_energy_density(t) for t in temps])
    u = np.array([onsager_internal_energy_density(t) for t in temps])
    assert np.all(np.diff(f) < 0)
    assert np.all(np.diff(f, 2) < 0)  # concave
    assert np.all(np.diff(u) > 0)


def test_strip_exact_width_one():
    t = 1.0
    b = 1.0 / t
    open_f = -t * math.log((2 * math.cosh(2 * b)) ** 2 + 4) / 3
    # per row: sum over h of exp(2b h (u + d)) gives lambda = (2 cosh 2b)^2 for 2 spins
    periodic_f = -t * math.log(2 * math.cosh(2 * b))
    assert strip_free_energy_exact(t, 1, "open") == pytest.approx(open_f, rel=1e-14)
    assert strip_free_energy_exact(t, 1, "periodic") == pytest.approx(periodic_f, rel=1e-14)
