import numpy as np
import pytest

from mmwbackhaul.channel import (
    AntennaPattern,
    ChannelModel,
    PathLossParams,
    RadioConfig,
    average_rate,
    expected_interference_w,
    link_gain,
    path_loss_db,
    realization_from_json,
    realization_to_json,
    sample_realization,
    subchannel_rate,
    subchannel_rates_for_link,
)
from mmwbackhaul.topology import generate_topology

from helpers import flat_realization, make_topology

DEFAULTS = PathLossParams()


# Frozen from direct evaluation of the free-space-referenced formula:
# 20*log10(4*pi*d0/lambda) = 69.714 dB at 73 GHz, d0 = 1 m.
@pytest.mark.parametrize(
    "dist,los,expected",
    [(1.0, True, 69.71), (10.0, True, 89.71), (10.0, False, 104.71)],
)
def test_path_loss_reference_points(dist, los, expected):
    assert path_loss_db(DEFAULTS, dist, los) == pytest.approx(expected, abs=0.1)


def test_path_loss_below_reference_distance_rejected():
    with pytest.raises(ValueError):
        path_loss_db(DEFAULTS, 0.5, True)


def test_shadowing_shifts_loss_additively():
    base = path_loss_db(DEFAULTS, 25.0, False)
    assert path_loss_db(DEFAULTS, 25.0, False, shadowing_db=6.0) == pytest.approx(base + 6.0)


def test_noise_power_matches_parameter_table():
    radio = RadioConfig()
    assert radio.noise_dbm == pytest.approx(-94.0, abs=1e-9)
    assert radio.subchannel_bw_hz == pytest.approx(1e8)


def test_subchannel_rate_reference_point():
    # SBS tx at 30 dBm over 50 channels, 10 m LoS, unit fading, no
    # interference: 13.0 dBm per channel, -40.7 dBm received, -94 dBm noise.
    # Frozen from direct evaluation: 1.7705 Gbps.
    topo = make_topology([(10.0, 0.0)], [0], n_mnos=1)
    model = ChannelModel()
    real = flat_realization(topo, model, los=True, fading=1.0)
    rate = subchannel_rate(model, topo, real, tx=1, rx=0, k=0, los=True)
    assert rate == pytest.approx(1.7705e9, rel=0.02)


def test_zero_fading_gives_zero_rate():
    topo = make_topology([(10.0, 0.0)], [0], n_mnos=1)
    model = ChannelModel()
    real = flat_realization(topo, model, fading=0.0)
    assert subchannel_rate(model, topo, real, 1, 0, 0) == 0.0


def test_interference_strictly_decreases_rate():
    topo = make_topology([(10.0, 0.0), (50.0, 0.0)], [0, 0], n_mnos=1)
    model = ChannelModel()
    real = flat_realization(topo, model, los=True, interference_gain=1.0)
    clean = subchannel_rate(model, topo, real, 0, 1, 0)
    disturbed = subchannel_rate(model, topo, real, 0, 1, 0, interferers={2})
    assert disturbed < clean


def test_los_rate_dominates_nlos_with_same_draws():
    topo = make_topology([(40.0, 0.0)], [0], n_mnos=1)
    model = ChannelModel()
    real = flat_realization(topo, model)
    r_los = subchannel_rate(model, topo, real, 0, 1, 0, los=True)
    r_nlos = subchannel_rate(model, topo, real, 0, 1, 0, los=False)
    assert r_los >= r_nlos


def test_average_rate_is_blockage_convex_combination():
    topo = make_topology([(60.0, 0.0)], [0], n_mnos=1)
    model = ChannelModel(radio=RadioConfig(n_subchannels=8, rho=0.5))
    real = sample_realization(topo, model, seed=4)
    r_los = average_rate(model, topo, real, 0, 1, rho=1.0)
    r_nlos = average_rate(model, topo, real, 0, 1, rho=0.0)
    mixed = average_rate(model, topo, real, 0, 1, rho=0.5)
    assert mixed == pytest.approx(0.5 * r_los + 0.5 * r_nlos, rel=1e-12)
    assert r_nlos <= mixed <= r_los


def test_average_rate_forced_values():
    # rho = 0.5 mixing a 2 Gbps LoS sum with a 0.4 Gbps NLoS sum -> 1.2 Gbps
    assert 0.5 * 2e9 + 0.5 * 0.4e9 == pytest.approx(1.2e9)


def test_average_rate_respects_mask():
    topo = make_topology([(60.0, 0.0)], [0], n_mnos=1)
    model = ChannelModel(radio=RadioConfig(n_subchannels=4, rho=1.0))
    real = sample_realization(topo, model, seed=6)
    mask = np.array([True, False, True, False])
    full = subchannel_rates_for_link(model, topo, real, 0, 1, los=True)
    assert average_rate(model, topo, real, 0, 1, mask=mask) == pytest.approx(full[mask].sum())


def test_realization_symmetry_and_determinism():
    topo = generate_topology(seed=2, m_sbs=6, n_mnos=2, d_max=400, d=200)
    model = ChannelModel(radio=RadioConfig(n_subchannels=5, rho=0.4))
    a = sample_realization(topo, model, seed=10)
    b = sample_realization(topo, model, seed=10)
    assert np.array_equal(a.los, b.los)
    assert np.array_equal(a.fading, b.fading)
    assert np.array_equal(a.los, a.los.T)
    assert np.array_equal(a.shadow_normal, a.shadow_normal.T)


def test_raising_rho_only_adds_los_links():
    topo = generate_topology(seed=2, m_sbs=8, n_mnos=2, d_max=400, d=200)
    low = sample_realization(topo, ChannelModel(radio=RadioConfig(rho=0.3)), seed=5)
    high = sample_realization(topo, ChannelModel(radio=RadioConfig(rho=0.9)), seed=5)
    assert np.all(high.los[low.los])


def test_los_fraction_and_fading_mean_statistics():
    # 3-standard-error agreement over >= 10^4 samples
    topo = generate_topology(seed=1, m_sbs=2, n_mnos=1, d_max=400, d=200)
    rho = 0.35
    model = ChannelModel(radio=RadioConfig(n_subchannels=4, rho=rho))
    states, fadings = [], []
    for seed in range(4000):
        real = sample_realization(topo, model, seed=seed)
        states.extend([real.los[0, 1], real.los[0, 2], real.los[1, 2]])
        fadings.append(real.fading[0, 1, :])
    states = np.asarray(states, dtype=float)
    se = np.sqrt(rho * (1 - rho) / states.size)
    assert abs(states.mean() - rho) <= 3 * se

    h = np.concatenate(fadings)
    se_h = h.std(ddof=1) / np.sqrt(h.size)
    assert abs(h.mean() - 1.0) <= 3 * se_h


def test_expected_interference_empty_set_is_zero():
    topo = make_topology([(100.0, 0.0)], [0], n_mnos=1)
    model = ChannelModel()
    assert expected_interference_w(model, topo, 1, []) == 0.0


def test_expected_interference_full_beamwidth_is_deterministic_main_lobe():
    # 360-degree beams always point at the victim: E[gain] = g_max^2 exactly
    ant = AntennaPattern(theta_m_deg=360.0)
    assert ant.mean_interference_gain == pytest.approx(ant.intended_gain)


def test_expected_interference_against_alignment_enumeration_oracle():
    # Oracle: enumerate the discrete (tx lobe, rx lobe) alignment law and the
    # Bernoulli link state exactly; estimate the unit-mean fading factor by
    # Monte Carlo. Within 1% at 10^5 draws.
    topo = make_topology([(0.0, 1.0), (100.0, 1.0)], [0, 0], n_mnos=1)
    model = ChannelModel()
    ant, plp, rho = model.antenna, model.path_loss, model.radio.rho
    value = expected_interference_w(model, topo, 1, [2])

    q = ant.alignment_prob
    ends = [(ant.g_max, q), (ant.g_min, 1 - q)]
    mean_psi = sum(ga * gb * pa * pb for ga, pa in ends for gb, pb in ends)
    dist = topo.distance(1, 2)
    mean_gain = rho * link_gain(plp, dist, True) + (1 - rho) * link_gain(plp, dist, False)
    h_mean = np.random.default_rng(42).exponential(size=100_000).mean()
    oracle = model.radio.subchannel_power_w(2) * mean_psi * mean_gain * h_mean
    assert value == pytest.approx(oracle, rel=0.01)


def test_expected_interference_against_monte_carlo_oracle():
    # Pure Monte-Carlo oracle in a moderate-variance regime (wide beams,
    # always line of sight), 4x10^5 draws, frozen seed, 1% agreement.
    topo = make_topology([(0.0, 1.0), (100.0, 1.0)], [0, 0], n_mnos=1)
    model = ChannelModel(radio=RadioConfig(rho=1.0), antenna=AntennaPattern(theta_m_deg=180.0))
    value = expected_interference_w(model, topo, 1, [2])

    rng = np.random.default_rng(3)
    n = 400_000
    ant = model.antenna
    tx_lobe = np.where(rng.uniform(size=n) < 0.5, ant.g_max, ant.g_min)
    rx_lobe = np.where(rng.uniform(size=n) < 0.5, ant.g_max, ant.g_min)
    h = rng.exponential(size=n)
    gain = link_gain(model.path_loss, topo.distance(1, 2), True)
    samples = model.radio.subchannel_power_w(2) * tx_lobe * rx_lobe * gain * h
    assert value == pytest.approx(samples.mean(), rel=0.01)


def test_realization_json_round_trip():
    topo = generate_topology(seed=8, m_sbs=4, n_mnos=2, d_max=400, d=200)
    model = ChannelModel(radio=RadioConfig(n_subchannels=3))
    real = sample_realization(topo, model, seed=12)
    restored = realization_from_json(realization_to_json(real, model.path_loss), model.path_loss)
    assert np.array_equal(restored.los, real.los)
    assert np.allclose(restored.shadow_normal, real.shadow_normal)
    assert np.allclose(restored.fading, real.fading)
    assert np.allclose(restored.interference_gain, real.interference_gain)
