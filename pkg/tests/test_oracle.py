import numpy as np
import pytest

from relpimc.model import ModelParams
from relpimc.oracle import (GridSpec, nr_ground_state, nr_hamiltonian, rayleigh_quotient,
                            rel_ground_state, rel_hamiltonian)

# converged value of the relativistic ground state (rest mass included);
# the n = 1024 / 2048 / 4096 grids at L = 20 agree to better than 1e-5
REL_E0_M1_A1_A01 = -4.209759


def test_grid():
    g = GridSpec(8, 2.0)
    assert g.spacing == 0.5
    assert np.allclose(g.points, [-2, -1.5, -1, -0.5, 0, 0.5, 1, 1.5])
    assert g.coarser() == GridSpec(4, 2.0)
    with pytest.raises(ValueError):
        GridSpec(2, 1.0)
    with pytest.raises(ValueError):
        GridSpec(16, 0.0)


def test_free_ground_states():
    g = GridSpec(256, 10.0)
    with pytest.warns(UserWarning):
        nr = nr_ground_state(ModelParams(1.0, 0.0, 0.01), g)
    assert abs(nr.ground_energy) < 1e-10
    rel = rel_ground_state(ModelParams(1.0, 0.0, 0.1), g)
    assert rel.ground_energy == pytest.approx(1.0, abs=1e-10)


def test_harmonic_self_test():
    g = GridSpec(1024, 10.0)
    res = nr_ground_state(ModelParams(1.0, 0.0, 0.1), g, potential=lambda q: 0.5 * q * q)
    assert res.ground_energy == pytest.approx(0.5, abs=1e-4)
    assert res.q2_expectation == pytest.approx(0.5, abs=1e-3)


def test_relativistic_harmonic_nonrelativistic_limit():
    g = GridSpec(512, 4.0)
    m = 400.0
    res = rel_ground_state(ModelParams(m, 0.0, 0.1), g, potential=lambda q: 0.5 * m * q * q)
    assert res.ground_energy - m == pytest.approx(0.5, abs=2e-3)


def test_hermiticity():
    model = ModelParams(1.0, 1.0, 0.1)
    g = GridSpec(256, 5.0)
    h_nr = nr_hamiltonian(model, g).toarray()
    h_rel = rel_hamiltonian(model, g)
    assert np.max(np.abs(h_nr - h_nr.T)) < 1e-12
    assert np.max(np.abs(h_rel - h_rel.T)) < 1e-12


def test_variational_bound():
    model = ModelParams(1.0, 1.0, 0.1)
    g = GridSpec(512, 10.0)
    e0 = rel_ground_state(model, g).ground_energy
    h = rel_hamiltonian(model, g)
    for width in (0.05, 0.2, 1.0, 3.0):
        trial = np.exp(-g.points ** 2 / (2 * width ** 2))
        assert e0 <= rayleigh_quotient(h, trial) + 1e-12


def test_regression_value_and_convergence():
    model = ModelParams(1.0, 1.0, 0.1)
    res = rel_ground_state(model, GridSpec(2048, 20.0))
    assert res.converged
    assert res.ground_energy == pytest.approx(REL_E0_M1_A1_A01, abs=2e-6)
    assert res.q2_expectation < 20.0 ** 2 / 100


def test_nr_second_order_convergence():
    model = ModelParams(1.0, 1.0, 0.1)
    e = [nr_ground_state(model, GridSpec(n, 10.0)).ground_energy for n in (1024, 2048, 4096)]
    assert abs(e[2] - e[1]) * 3.0 < abs(e[1] - e[0])


def test_rel_spectral_convergence_at_least_as_fast():
    model = ModelParams(1.0, 1.0, 0.1)
    e = [rel_ground_state(model, GridSpec(n, 10.0), solver="dense").ground_energy for n in (512, 1024, 2048)]
    assert abs(e[2] - e[1]) * 4.0 <= abs(e[1] - e[0]) + 1e-12


def test_dense_and_iterative_agree():
    model = ModelParams(1.0, 1.0, 0.1)
    g = GridSpec(1024, 10.0)
    dense = rel_ground_state(model, g, solver="dense").ground_energy
    it = rel_ground_state(model, g, solver="iterative").ground_energy
    assert dense == pytest.approx(it, abs=1e-8)
    nd = nr_ground_state(model, g, solver="dense").ground_energy
    ni = nr_ground_state(model, g, solver="iterative").ground_energy
    assert nd == pytest.approx(ni, abs=1e-8)


def test_heavy_particle_matches_nonrelativistic():
    model = ModelParams(100.0, 1.0, 0.1)
    g = GridSpec(2048, 5.0)
    rel = rel_ground_state(model, g).ground_energy - 100.0
    nr = nr_ground_state(model, g).ground_energy
    assert rel == pytest.approx(nr, abs=1e-2)


def test_massless_box_scaling():
    # weak coupling: the UR state spreads with the box; strong coupling: it stays put
    def q2(alpha, half_width):
        g = GridSpec(int(64 * half_width), half_width)
        return rel_ground_state(ModelParams(0.0, alpha, 0.1), g).q2_expectation
    weak = [q2(0.02, L) for L in (8.0, 16.0)]
    strong = [q2(1.0, L) for L in (8.0, 16.0)]
    assert weak[1] > 2.0 * weak[0]
    assert strong[1] == pytest.approx(strong[0], rel=0.05)
