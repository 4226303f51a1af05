import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from repdim import geometry, maps, transfer
from repdim.errors import EmptyPreimage, NumericError
from repdim.transfer import Grid, GridFunction

LOG2, LOG3 = math.log(2.0), math.log(3.0)


def test_apply_ifs_constant(cantor_ifs, ifs_grid):
    phi = GridFunction.ones(ifs_grid)
    for s in (0.0, 0.5, 1.3):
        out = transfer.apply_operator(s, cantor_ifs, phi)
        assert out.values.ravel()[0] == pytest.approx(2.0 * 3.0 ** (-s), rel=1e-14)


def test_apply_z2_degree_count(std_domains, z2_map):
    _, K = std_domains
    grid = Grid.from_annulus(K, 64, 64)
    out = transfer.apply_operator(0.0, z2_map, GridFunction.ones(grid))
    assert out.min() == pytest.approx(2.0, abs=1e-12)
    assert out.max() == pytest.approx(2.0, abs=1e-12)


def smooth_positive_field(grid, rng):
    u = grid.radial_coords()[:, None]
    th = grid.angular_coords()[None, :]
    a, b, p = rng.uniform(-1.0, 1.0, 3)
    vals = np.exp(a * np.cos(th + p) * np.cos(u) + b * np.sin(2 * th) * u)
    return GridFunction(grid, np.broadcast_to(vals, grid.shape).copy())


def test_apply_positivity_and_offgrid_oracle(std_domains):
    # oracle: direct preimage summation at off-grid points vs the interpolated
    # output field; agreement within the bilinear interpolation budget
    U, K = std_domains
    rng = np.random.default_rng(12)
    m = maps.power_plus_c(1, 0.07 + 0.04j, U)
    grid = Grid.from_annulus(K, 128, 128)
    phi = smooth_positive_field(grid, rng)
    s = 0.9
    out = transfer.apply_operator(s, m, phi)
    assert out.min() > 0.0
    L = K.log_radius
    for _ in range(10):
        z = np.exp(rng.uniform(-0.8 * L, 0.8 * L) + 1j * rng.uniform(0, 2 * np.pi))
        ps = maps.preimages(m, z, K)
        direct = sum(df ** (-s) * transfer.interpolate(phi, x)
                     for x, df in zip(ps.points, ps.derivatives))
        assert transfer.interpolate(out, z) == pytest.approx(direct, rel=5e-3)


def test_interpolation_exact_at_nodes(std_domains):
    _, K = std_domains
    rng = np.random.default_rng(1)
    grid = Grid.from_annulus(K, 32, 48)
    phi = GridFunction.random_positive(grid, rng)
    nodes = grid.nodes()
    for i, j in ((0, 0), (5, 7), (31, 47), (16, 0)):
        assert transfer.interpolate(phi, nodes[i, j]) == pytest.approx(
            phi.values[i, j], rel=1e-14)


def test_iterate_ifs_closed_forms(cantor_ifs, ifs_grid):
    seq = transfer.materialize([cantor_ifs], 5)
    _, tr = transfer.iterate_sequence(0.0, seq, grid=ifs_grid)
    assert math.exp(tr.log_m[-1]) == pytest.approx(32.0, rel=1e-13)
    assert math.exp(tr.log_M[-1]) == pytest.approx(32.0, rel=1e-13)
    # at the closed-form critical parameter the fields are identically 1
    s_crit = LOG2 / LOG3
    _, tr = transfer.iterate_sequence(s_crit, transfer.materialize([cantor_ifs], 9),
                                      grid=ifs_grid)
    assert tr.log_m[-1] == pytest.approx(0.0, abs=1e-12)
    assert tr.log_M[-1] == pytest.approx(0.0, abs=1e-12)


def test_iterate_overflow_control(cantor_ifs, ifs_grid):
    # 2^600 overflows float64; the log-space trace must not
    seq = transfer.materialize([cantor_ifs], 600)
    _, tr = transfer.iterate_sequence(0.0, seq, grid=ifs_grid)
    assert tr.log_m[-1] == pytest.approx(600 * LOG2, rel=1e-12)


def test_z2_bracket_contains_closed_form(std_domains, z2_map):
    # closed form for the c = 0 pressure: (1 - s) log 2
    _, K = std_domains
    grid = Grid.from_annulus(K, 128, 128)
    for s in (0.5, 1.0, 1.5):
        est = transfer.pressure_bracket(s, [z2_map], 8, grid)
        exact = (1.0 - s) * LOG2
        assert est.lower - 1e-3 <= exact <= est.upper + 1e-3
        assert est.lower <= est.upper


def test_z2_cocycle_matches_closed_form(std_domains, z2_map):
    _, K = std_domains
    grid = Grid.from_annulus(K, 128, 128)
    for s in (0.6, 1.0):
        v, _ = transfer.cocycle_pressure(s, [z2_map], 48, grid)
        assert v == pytest.approx((1.0 - s) * LOG2, abs=2e-4)


def test_bracket_monotone_in_s(std_domains, z2_plus01):
    _, K = std_domains
    grid = Grid.from_annulus(K, 96, 96)
    e1 = transfer.pressure_bracket(0.9, [z2_plus01], 6, grid)
    e2 = transfer.pressure_bracket(1.0, [z2_plus01], 6, grid)
    assert e2.lower < e1.lower
    assert e2.upper < e1.upper


def test_sub_super_multiplicativity(std_domains, z2_plus01):
    _, K = std_domains
    grid = Grid.from_annulus(K, 128, 128)
    s = 1.0
    _, tr = transfer.iterate_sequence(s, transfer.materialize([z2_plus01], 6), grid=grid)
    slack = math.log(1.0 + 1e-6)
    for k, n in ((2, 4), (3, 6)):
        assert tr.log_m[k - 1] + tr.log_m[n - k - 1] <= tr.log_m[n - 1] + slack
        assert tr.log_M[n - 1] <= tr.log_M[k - 1] + tr.log_M[n - k - 1] + slack


def test_bracket_width_nonincreasing(std_domains, z2_plus01):
    _, K = std_domains
    grid = Grid.from_annulus(K, 96, 96)
    s = 1.0
    _, tr = transfer.iterate_sequence(s, transfer.materialize([z2_plus01], 8), grid=grid)
    w4 = (tr.log_M[3] - tr.log_m[3]) / 4.0
    w8 = (tr.log_M[7] - tr.log_m[7]) / 8.0
    assert w8 <= w4 * (1.0 + 1e-6)


def test_bracket_validity_cocycle_inside(std_domains, z2_plus01):
    _, K = std_domains
    grid = Grid.from_annulus(K, 96, 96)
    for s in (0.8, 1.0, 1.2):
        coc, _ = transfer.cocycle_pressure(s, [z2_plus01], 48, grid)
        for n in (4, 6, 8):
            est = transfer.pressure_bracket(s, [z2_plus01], n, grid)
            assert est.lower - 2e-3 <= coc <= est.upper + 2e-3


def test_normalized_iterate_ifs_cocycle(cantor_ifs, ifs_grid):
    s = 0.7
    _, log_p = transfer.normalized_iterate(s, [cantor_ifs], grid=ifs_grid, steps=12)
    for lp in log_p:
        assert lp == pytest.approx(LOG2 - s * LOG3, rel=1e-12)


def test_normalized_iterate_memory_loss(std_domains, z2_plus01):
    # two random positive starts collapse to the same section
    _, K = std_domains
    grid = Grid.from_annulus(K, 96, 96)
    rng = np.random.default_rng(8)
    seq = transfer.materialize([z2_plus01], 60)
    h1, _ = transfer.normalized_iterate(1.0, seq, GridFunction.random_positive(grid, rng))
    h2, _ = transfer.normalized_iterate(1.0, seq, GridFunction.random_positive(grid, rng))
    assert np.max(np.abs(h1.values - h2.values)) < 1e-7


def test_normalized_iterate_converges(std_domains, z2_plus01):
    _, K = std_domains
    grid = Grid.from_annulus(K, 96, 96)
    seq = transfer.materialize([z2_plus01], 40)
    h_prev, _ = transfer.normalized_iterate(1.0, seq, grid=grid)
    h_next, _ = transfer.normalized_iterate(1.0, seq + [z2_plus01], grid=grid)
    assert np.max(np.abs(h_next.values - h_prev.values)) < 1e-8


def test_contraction_rate_ifs_collapses(cantor_ifs, ifs_grid):
    assert transfer.contraction_rate(0.7, [cantor_ifs], trials=2, grid=ifs_grid) == 0.0


def test_contraction_rate_z2(std_domains, z2_plus01):
    _, K = std_domains
    eta96 = transfer.contraction_rate(1.0, [z2_plus01], trials=2,
                                      grid=Grid.from_annulus(K, 96, 96))
    assert 0.0 < eta96 < 1.0
    eta192 = transfer.contraction_rate(1.0, [z2_plus01], trials=2,
                                       grid=Grid.from_annulus(K, 192, 192))
    assert abs(eta96 - eta192) <= 0.05


def test_resolution_convergence(std_domains, z2_plus01):
    # acceptance-grade invariant: brackets at 128^2 and 256^2 within 2e-3
    _, K = std_domains
    for s in (0.9, 1.0):
        e1 = transfer.pressure_bracket(s, [z2_plus01], 6, Grid.from_annulus(K, 128, 128))
        e2 = transfer.pressure_bracket(s, [z2_plus01], 6, Grid.from_annulus(K, 256, 256))
        assert abs(e1.lower - e2.lower) <= 2e-3
        assert abs(e1.upper - e2.upper) <= 2e-3


def test_mixing_diagnostic(std_domains, std_constants, z2_map):
    _, K = std_domains
    grid = Grid.from_annulus(K, 96, 96)
    n0 = geometry.mixing_time(std_constants)
    _, sup_df = maps.derivative_range(z2_map, K, resolution=(64, 64))
    res = transfer.mixing_diagnostic(1.0, z2_map, 4, std_constants, n0, grid, sup_df)
    assert res["ok"]


def test_operator_errors(std_domains, z2_map):
    _, K = std_domains
    grid = Grid.from_annulus(K, 32, 32)
    bad = GridFunction(grid, np.zeros(grid.shape))
    with pytest.raises(NumericError):
        transfer.apply_operator(1.0, z2_map, bad)
    # a large shift pulls the roots of inner-edge targets out of K's band,
    # leaving those nodes with no admissible preimage
    shifted = maps.power_plus_c(0, 0.6, std_domains[0])
    thin = Grid.from_annulus(geometry.HyperbolicAnnulus(0.7), 32, 32)
    with pytest.raises(EmptyPreimage):
        transfer.apply_operator(1.0, shifted, GridFunction.ones(thin))


def test_negative_s_flagged(std_domains, z2_map):
    _, K = std_domains
    grid = Grid.from_annulus(K, 32, 32)
    with pytest.warns(UserWarning):
        transfer.apply_operator(-0.5, z2_map, GridFunction.ones(grid))


@settings(max_examples=25, deadline=None)
@given(s=st.floats(0.1, 1.8), seed=st.integers(0, 10 ** 6))
def test_positivity_preserved_random_maps(std_domains, s, seed):
    U, K = std_domains
    rng = np.random.default_rng(seed)
    m = maps.power_plus_c(int(rng.integers(0, 3)),
                          0.1 * rng.uniform() * np.exp(2j * np.pi * rng.uniform()), U)
    grid = Grid.from_annulus(K, 48, 48)
    phi = GridFunction.random_positive(grid, rng)
    out = transfer.apply_operator(s, m, phi)
    assert out.min() > 0.0
