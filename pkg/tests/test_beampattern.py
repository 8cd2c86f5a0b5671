"""Array factor, beampatterns, interference components, closed-form averages."""

import csv
import math

import numpy as np
import pytest

import oracles
import beamselect as bs
from beamselect.beampattern import (ActiveCluster, average_beampattern,
                                    average_beampattern_peaks,
                                    average_total_inr, array_factor,
                                    default_angle_grid,
                                    expected_average_pattern,
                                    group_interference,
                                    phase_difference_components,
                                    sample_beampattern, synchronize,
                                    total_received_inr, write_beampattern_csv)
from beamselect.core import RngStreams


def _net(seed=2, m=48, d=2):
    dirs = tuple(math.radians(x) for x in (65.0, -50.0, 170.0))[:d]
    scen = bs.Scenario(seed=seed, num_candidates=m, num_selected=m // 2,
                       group_size=4, disk_radius_wavelengths=2.0,
                       intended_direction=0.0, unintended_directions=dirs,
                       inr_threshold=10.0, target_snr=10.0, noise_power=0.05,
                       lognormal_mean=0.0, lognormal_var=0.2)
    return bs.sample_network(scen)


def test_synchronize_formula():
    net = _net()
    nodes = [0, 5, 11]
    ph = synchronize(net, nodes, 0.3)
    for k, r in enumerate(nodes):
        want = oracles.sync_phase(float(net.rho[r]), float(net.psi[r]), 0.3)
        assert float(ph.initial_phases[k]) == pytest.approx(want, rel=1e-15)
    assert ph.target_direction == 0.3
    with pytest.raises(ValueError):
        synchronize(net, [], 0.3)


def test_array_factor_matches_brute_force():
    net = _net(seed=5, m=32)
    nodes = list(range(0, 32, 3))
    ph = synchronize(net, nodes, 0.2)
    for phi in (-3.0, -0.7, 0.2, 1.9):
        got = array_factor(net, nodes, ph, 0.125, phi)
        want = oracles.brute_array_factor(net, nodes, 0.125, phi, target=0.2)
        assert got == pytest.approx(want, rel=1e-12)


def test_array_factor_peak_is_exact():
    # at the sync target every phasor is exp(0j): AF = sqrt(P)*n, BP = n^2*P, bit exact
    net = _net(seed=9, m=40)
    nodes = list(range(17))
    p = 0.31
    ph = synchronize(net, nodes, -1.1)
    af = array_factor(net, nodes, ph, p, -1.1)
    assert af.real == math.sqrt(p) * 17.0
    assert af.imag == 0.0
    bp = sample_beampattern(net, nodes, ph, p, np.array([-1.1]))
    assert float(bp.power[0]) == 17.0 * 17.0 * p


def test_array_factor_input_validation():
    net = _net()
    ph = synchronize(net, [0, 1], 0.0)
    with pytest.raises(ValueError):
        array_factor(net, [0, 1, 2], ph, 1.0, 0.5)
    with pytest.raises(ValueError):
        array_factor(net, [0, 1], ph, 0.0, 0.5)


def test_beampattern_global_phase_invariance():
    from beamselect.beampattern import PhaseAssignment

    net = _net(seed=4)
    nodes = list(range(12))
    grid = default_angle_grid(721)
    ph = synchronize(net, nodes, 0.0)
    shifted = PhaseAssignment(ph.initial_phases + 2.137, ph.target_direction)
    a = sample_beampattern(net, nodes, ph, 1.0, grid).power
    b = sample_beampattern(net, nodes, shifted, 1.0, grid).power
    assert np.allclose(a, b, rtol=1e-9, atol=1e-9)


def test_beampattern_scales_linearly_with_power():
    net = _net(seed=4)
    nodes = list(range(12))
    grid = default_angle_grid(181)
    ph = synchronize(net, nodes, 0.0)
    a = sample_beampattern(net, nodes, ph, 1.0, grid).power
    b = sample_beampattern(net, nodes, ph, 2.5, grid).power
    assert np.allclose(2.5 * a, b, rtol=1e-12)


def test_beampattern_angle_average_floor():
    # circular mean of |sum of unit phasors|^2 is >= n (cross terms integrate
    # toward zero); with a dense grid the mean sits near n * (1 + O(1/sqrt))
    net = _net(seed=13, m=64)
    nodes = list(range(64))
    grid = default_angle_grid(3601)
    ph = synchronize(net, nodes, 0.0)
    bp = sample_beampattern(net, nodes, ph, 1.0, grid)
    mean = float(bp.power[:-1].mean())    # drop duplicated endpoint
    assert mean >= 0.95 * 64.0


def test_default_angle_grid():
    grid = default_angle_grid()
    assert grid.size == 3601
    assert grid[0] == -math.pi and grid[-1] == math.pi
    step = np.diff(grid)
    assert np.allclose(step, math.radians(0.1), rtol=1e-9)


def test_phase_difference_components_match_oracle():
    net = _net(seed=6, m=20, d=2)
    scen = net.scenario
    cmat, smat = phase_difference_components(
        net, scen.intended_direction, scen.unintended_directions)
    assert cmat.shape == smat.shape == (20, 2)
    for r in (0, 7, 19):
        for d, victim in enumerate(scen.unintended_directions):
            rho, psi = float(net.rho[r]), float(net.psi[r])
            delta = (oracles.sync_phase(rho, psi, scen.intended_direction)
                     - oracles.sync_phase(rho, psi, victim))
            assert float(cmat[r, d]) == pytest.approx(math.cos(delta), rel=1e-12, abs=1e-12)
            assert float(smat[r, d]) == pytest.approx(-math.sin(delta), rel=1e-12, abs=1e-12)


def test_group_interference_matches_brute_force():
    net = _net(seed=8, m=36, d=3)
    scen = net.scenario
    group = [1, 4, 9, 16, 25]
    for vcol in (1, 2, 3):
        got = group_interference(net, group, 0, vcol, 0.4)
        x, y = oracles.brute_group_components(
            net, group, scen.intended_direction, scen.directions[vcol], vcol, 0.4)
        assert got.x == pytest.approx(x, rel=1e-12, abs=1e-12)
        assert got.y == pytest.approx(y, rel=1e-12, abs=1e-12)
        assert got.power == pytest.approx(x * x + y * y, rel=1e-12)


def test_group_interference_validation():
    net = _net()
    with pytest.raises(ValueError):
        group_interference(net, [], 0, 1, 1.0)
    with pytest.raises(ValueError):
        group_interference(net, [0], 1, 1, 1.0)


def test_total_received_inr_matches_brute_force():
    net = _net(seed=3, m=30, d=2)
    scen = net.scenario
    victim = scen.unintended_directions[0]
    clusters = [ActiveCluster(net, (0, 1, 2, 3), scen.intended_direction),
                ActiveCluster(net, (4, 5, 6, 7), scen.intended_direction)]
    symbols = [complex(math.cos(0.4), math.sin(0.4)), 1.0 + 0.0j]
    got = total_received_inr(clusters, victim, scen.num_selected,
                             scen.target_snr, scen.noise_power, symbols=symbols)
    amp = math.sqrt(scen.noise_power * scen.target_snr / scen.num_selected)
    want = oracles.brute_total_inr(
        [(net, (0, 1, 2, 3), scen.intended_direction, 1),
         (net, (4, 5, 6, 7), scen.intended_direction, 1)],
        victim, symbols, scen.noise_power, amp)
    assert got == pytest.approx(want, rel=1e-12)


def test_average_total_inr_matches_brute_force():
    net = _net(seed=3, m=30, d=2)
    scen = net.scenario
    victim = scen.unintended_directions[1]
    clusters = [ActiveCluster(net, (0, 1, 2), scen.intended_direction),
                ActiveCluster(net, (3, 4, 5), scen.intended_direction)]
    got = average_total_inr(clusters, victim, scen.num_selected,
                            scen.target_snr, scen.noise_power)
    amp = math.sqrt(scen.noise_power * scen.target_snr / scen.num_selected)
    want = oracles.brute_average_inr(
        [(net, (0, 1, 2), scen.intended_direction, 2),
         (net, (3, 4, 5), scen.intended_direction, 2)],
        victim, scen.noise_power, amp)
    assert got == pytest.approx(want, rel=1e-12)


def test_average_inr_is_symbol_average():
    # averaging the instantaneous INR over many random symbol draws converges
    # to the closed sum of per-cluster powers
    net = _net(seed=10, m=24, d=1)
    scen = net.scenario
    victim = scen.unintended_directions[0]
    clusters = [ActiveCluster(net, (0, 1, 2, 3), scen.intended_direction),
                ActiveCluster(net, (8, 9, 10, 11), scen.intended_direction)]
    avg = average_total_inr(clusters, victim, scen.num_selected,
                            scen.target_snr, scen.noise_power)
    gen = RngStreams(0).symbols
    draws = [total_received_inr(clusters, victim, scen.num_selected,
                                scen.target_snr, scen.noise_power, stream=gen)
             for _ in range(4000)]
    assert np.mean(draws) == pytest.approx(avg, rel=0.1)


def test_total_inr_validation():
    net = _net(seed=3, m=30, d=2)
    scen = net.scenario
    victim = scen.unintended_directions[0]
    overlapping = [ActiveCluster(net, (0, 1), scen.intended_direction),
                   ActiveCluster(net, (1, 2), scen.intended_direction)]
    with pytest.raises(ValueError):
        average_total_inr(overlapping, victim, 4, 1.0, 1.0)
    ok = [ActiveCluster(net, (0, 1), scen.intended_direction)]
    with pytest.raises(ValueError):
        total_received_inr(ok, victim, 4, 1.0, 1.0)   # no symbols, no stream
    with pytest.raises(ValueError):
        total_received_inr(ok, victim, 4, 1.0, 1.0, symbols=[1.0, 1.0])
    with pytest.raises(ValueError):
        average_total_inr(ok, 0.1234, 4, 1.0, 1.0)    # not a BS direction
    assert total_received_inr([], victim, 4, 1.0, 1.0, symbols=[]) == 0.0


def test_expected_average_pattern_frozen_values():
    for table, (r, n) in [(oracles.AVG_PATTERN_R5_N64, (5.0, 64)),
                          (oracles.AVG_PATTERN_R2_N256, (2.0, 256))]:
        offs = np.radians(sorted(table))
        got = expected_average_pattern(n, r, offs)
        want = [table[k] for k in sorted(table)]
        assert np.allclose(got, want, rtol=1e-10)


def test_average_beampattern_matches_closed_form():
    scen = bs.Scenario(seed=21, num_candidates=64, num_selected=64,
                       group_size=8, disk_radius_wavelengths=5.0,
                       intended_direction=0.0,
                       unintended_directions=(math.radians(65.0),),
                       inr_threshold=10.0, target_snr=10.0, noise_power=0.05,
                       lognormal_mean=0.0, lognormal_var=0.2)
    grid = default_angle_grid(241)
    sample = average_beampattern(scen, grid, 400, RngStreams(21))
    n = scen.num_selected
    peak = n * n * sample.per_node_power
    want = expected_average_pattern(n, 5.0, grid - scen.intended_direction)
    got = sample.power / peak
    # mainlobe exact, sidelobe floor within Monte Carlo scatter
    assert float(got[np.argmin(np.abs(grid))]) == pytest.approx(1.0, rel=1e-12)
    mask = np.abs(grid) > math.radians(8.0)
    rel = np.abs(got[mask] - want[mask]) / want[mask]
    assert float(np.median(rel)) < 0.12
    assert float(rel.mean()) < 0.2


def test_average_beampattern_deterministic():
    scen = bs.Scenario(seed=21, num_candidates=16, num_selected=8,
                       group_size=4, disk_radius_wavelengths=2.0,
                       intended_direction=0.0,
                       unintended_directions=(1.0,), inr_threshold=10.0,
                       target_snr=10.0, noise_power=0.05)
    grid = default_angle_grid(61)
    a = average_beampattern(scen, grid, 5, RngStreams(21), node_count=8)
    b = average_beampattern(scen, grid, 5, RngStreams(21))
    assert np.array_equal(a.power, b.power)
    assert a.per_node_power == scen.noise_power * scen.target_snr / 8


def test_average_beampattern_peaks_frozen():
    got = [math.degrees(x) for x in average_beampattern_peaks(2.0, count=4)]
    assert got == pytest.approx(oracles.PEAK_OFFSETS_DEG_R2, rel=1e-10)
    # R=0.5: only the first J2 zero (5.14) fits inside z_max = 2 pi
    assert len(average_beampattern_peaks(0.5, count=6)) == 1


def test_average_beampattern_peaks_match_curve():
    # numeric argmax of the closed-form curve agrees with the Bessel zeros;
    # the window starts past the first null (~17.5 deg) so the mainlobe
    # shoulder cannot outvote the first sidelobe peak
    offs = np.linspace(math.radians(18.0), math.radians(30.0), 20001)
    vals = expected_average_pattern(256, 2.0, offs)
    num = math.degrees(float(offs[np.argmax(vals)]))
    assert num == pytest.approx(oracles.PEAK_OFFSETS_DEG_R2[0], abs=2e-3)


def test_write_beampattern_csv(tmp_path):
    net = _net(seed=2, m=20)
    nodes = list(range(6))
    ph = synchronize(net, nodes, 0.0)
    sample = sample_beampattern(net, nodes, ph, 1.0, default_angle_grid(11))
    path = tmp_path / "bp.csv"
    write_beampattern_csv(sample, str(path))
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["angle_deg", "power_db"]
    assert len(rows) == 12
    assert float(rows[1][0]) == pytest.approx(-180.0)
    # value round-trips through repr
    assert float(rows[6][1]) == pytest.approx(
        10.0 * math.log10(float(sample.power[5])), rel=1e-12)
