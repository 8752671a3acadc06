"""Millimeter-wave channel model: path loss, blockage, fading, link rates.

Every backhaul link is line-of-sight (LoS) or blocked (NLoS) for the whole
coherence-time snapshot; the state is Bernoulli with a global LoS probability
``rho``. Large-scale loss is free-space-referenced with a state-dependent
exponent and log-normal shadowing, small-scale fading is unit-mean
exponential per (directed link, sub-channel), and antennas are sectorized:
the intended link always sees the squared main-lobe gain while interfering
links see a random product of per-end lobe gains.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .topology import MBS, Topology

SPEED_OF_LIGHT = 299_792_458.0
LN2 = float(np.log(2.0))


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class PathLossParams:
    fc_hz: float = 73e9
    d0_m: float = 1.0
    alpha_los: float = 2.0
    alpha_nlos: float = 3.5
    xi_los_db: float = 4.2
    xi_nlos_db: float = 7.9

    def __post_init__(self) -> None:
        if self.d0_m <= 0:
            raise ValueError("reference distance must be positive")
        if self.alpha_los < 1 or self.alpha_nlos < 1:
            raise ValueError("path loss exponents must be >= 1")

    def alpha(self, los: bool) -> float:
        return self.alpha_los if los else self.alpha_nlos

    def xi_db(self, los: bool) -> float:
        return self.xi_los_db if los else self.xi_nlos_db


@dataclass(frozen=True)
class AntennaPattern:
    g_max_db: float = 18.0
    g_min_db: float = -2.0
    theta_m_deg: float = 10.0

    def __post_init__(self) -> None:
        if self.g_max_db <= self.g_min_db:
            raise ValueError("main lobe gain must exceed side lobe gain")
        if not 0 < self.theta_m_deg <= 360:
            raise ValueError("beamwidth must be in (0, 360] degrees")

    @property
    def g_max(self) -> float:
        return db_to_linear(self.g_max_db)

    @property
    def g_min(self) -> float:
        return db_to_linear(self.g_min_db)

    @property
    def intended_gain(self) -> float:
        """Combined tx/rx gain of an aligned (intended) link."""
        return self.g_max**2

    @property
    def alignment_prob(self) -> float:
        """Probability that one end's main lobe covers the victim."""
        return self.theta_m_deg / 360.0

    @property
    def mean_interference_gain(self) -> float:
        """E[product of two independently pointed per-end gains], linear."""
        mean_end = self.alignment_prob * self.g_max + (1 - self.alignment_prob) * self.g_min
        return mean_end**2


@dataclass(frozen=True)
class RadioConfig:
    n_subchannels: int = 50
    bandwidth_hz: float = 5e9
    p_mbs_dbm: float = 40.0
    p_sbs_dbm: float = 30.0
    noise_psd_dbm_hz: float = -174.0
    rho: float = 0.5

    def __post_init__(self) -> None:
        if self.n_subchannels < 1:
            raise ValueError("need at least one sub-channel")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must be a probability")

    @property
    def subchannel_bw_hz(self) -> float:
        return self.bandwidth_hz / self.n_subchannels

    @property
    def noise_dbm(self) -> float:
        """Per-sub-channel noise power in dBm."""
        return self.noise_psd_dbm_hz + 10.0 * np.log10(self.subchannel_bw_hz)

    @property
    def noise_w(self) -> float:
        return dbm_to_watts(self.noise_dbm)

    def tx_power_dbm(self, node: int) -> float:
        return self.p_mbs_dbm if node == MBS else self.p_sbs_dbm

    def subchannel_power_w(self, node: int) -> float:
        """Uniform split of the total transmit power over the sub-channels."""
        return dbm_to_watts(self.tx_power_dbm(node)) / self.n_subchannels


def path_loss_db(plp: PathLossParams, dist_m: float, los: bool, shadowing_db: float = 0.0) -> float:
    """Large-scale loss in dB at ``dist_m`` meters; valid for dist >= d0."""
    if dist_m < plp.d0_m:
        raise ValueError(f"distance {dist_m} m below reference distance {plp.d0_m} m")
    wavelength = SPEED_OF_LIGHT / plp.fc_hz
    fixed = 20.0 * np.log10(4.0 * np.pi * plp.d0_m / wavelength)
    return float(fixed + 10.0 * plp.alpha(los) * np.log10(dist_m / plp.d0_m) + shadowing_db)


def link_gain(plp: PathLossParams, dist_m: float, los: bool, shadowing_db: float = 0.0) -> float:
    """Linear power gain of the large-scale channel (the inverse path loss)."""
    return db_to_linear(-path_loss_db(plp, dist_m, los, shadowing_db))


@dataclass(frozen=True)
class ChannelModel:
    """Bundle of the static radio-layer parameters."""

    radio: RadioConfig = field(default_factory=RadioConfig)
    path_loss: PathLossParams = field(default_factory=PathLossParams)
    antenna: AntennaPattern = field(default_factory=AntennaPattern)


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """One coherence-time draw of every random channel quantity.

    ``los`` and ``shadow_normal`` are symmetric per node pair (blockage and
    shadowing do not depend on link direction); ``fading[t, r, k]`` is the
    squared small-scale envelope of the directed link t->r on sub-channel k;
    ``interference_gain[t, r]`` is the sampled antenna-gain product seen when
    t's transmission leaks onto a receiver r it is not serving.
    """

    los: np.ndarray  # (n, n) bool, symmetric
    shadow_normal: np.ndarray  # (n, n) float, symmetric, standard normal
    fading: np.ndarray  # (n, n, K) float, unit mean
    interference_gain: np.ndarray  # (n, n) float, linear

    @property
    def n_nodes(self) -> int:
        return self.los.shape[0]

    @property
    def n_subchannels(self) -> int:
        return self.fading.shape[2]

    def shadowing_db(self, plp: PathLossParams, i: int, j: int, los: bool) -> float:
        """Shadowing draw of the pair, scaled to the given link state."""
        return float(self.shadow_normal[i, j] * plp.xi_db(los))


def sample_realization(
    topo: Topology, model: ChannelModel, seed: int | np.random.SeedSequence
) -> ChannelRealization:
    """Draw a channel realization; deterministic for a fixed seed.

    The LoS coin of each pair is the comparison ``u <= rho`` of a
    rho-independent uniform, so realizations drawn with the same seed but
    different ``rho`` are couple-monotone: raising rho can only turn NLoS
    pairs into LoS ones.
    """
    n = topo.n_nodes
    k = model.radio.n_subchannels
    rng = np.random.default_rng(seed)

    u = rng.uniform(size=(n, n))
    upper = np.triu(np.ones((n, n), dtype=bool), 1)
    u_sym = np.where(upper, u, u.T)
    los = u_sym <= model.radio.rho
    np.fill_diagonal(los, True)

    z = rng.standard_normal(size=(n, n))
    shadow = np.where(upper, z, z.T)
    np.fill_diagonal(shadow, 0.0)

    fading = rng.exponential(scale=1.0, size=(n, n, k))

    p_align = model.antenna.alignment_prob
    tx_end = np.where(rng.uniform(size=(n, n)) < p_align, model.antenna.g_max, model.antenna.g_min)
    rx_end = np.where(rng.uniform(size=(n, n)) < p_align, model.antenna.g_max, model.antenna.g_min)
    interference_gain = tx_end * rx_end

    return ChannelRealization(
        los=los, shadow_normal=shadow, fading=fading, interference_gain=interference_gain
    )


def realized_link_gain(
    model: ChannelModel, topo: Topology, real: ChannelRealization, tx: int, rx: int,
    los: bool | None = None,
) -> float:
    """Large-scale gain of the tx->rx link under its sampled (or forced) state."""
    state = bool(real.los[tx, rx]) if los is None else los
    dist = max(topo.distance(tx, rx), model.path_loss.d0_m)
    return link_gain(model.path_loss, dist, state, real.shadowing_db(model.path_loss, tx, rx, state))


def subchannel_rate(
    model: ChannelModel,
    topo: Topology,
    real: ChannelRealization,
    tx: int,
    rx: int,
    k: int,
    los: bool | None = None,
    interferers: tuple[int, ...] | list[int] | set[int] = (),
    extra_interference_w: float = 0.0,
) -> float:
    """Achievable rate of one sub-channel in bits/s.

    ``interferers`` are nodes transmitting on the same sub-channel; their
    received power uses the sampled per-pair antenna-gain product and the
    pair's realized link state. ``extra_interference_w`` adds a constant
    term (used for expected-interference rate estimates).
    """
    if tx == rx:
        raise ValueError("transmitter and receiver must differ")
    signal = (
        model.radio.subchannel_power_w(tx)
        * model.antenna.intended_gain
        * realized_link_gain(model, topo, real, tx, rx, los)
        * real.fading[tx, rx, k]
    )
    interference = extra_interference_w
    for m2 in interferers:
        if m2 in (tx, rx):
            continue
        interference += (
            model.radio.subchannel_power_w(m2)
            * real.interference_gain[m2, rx]
            * realized_link_gain(model, topo, real, m2, rx)
            * real.fading[m2, rx, k]
        )
    sinr = signal / (interference + model.radio.noise_w)
    return model.radio.subchannel_bw_hz * float(np.log1p(sinr)) / LN2


def expected_interference_w(
    model: ChannelModel,
    topo: Topology,
    rx: int,
    interferers: set[int] | list[int] | tuple[int, ...],
    rho: float | None = None,
) -> float:
    """Mean co-channel interference power at ``rx`` from potential transmitters.

    Expectation over the antenna alignment law, the Bernoulli link state, and
    the unit-mean fading, with shadowing held at its 0 dB median. Independent
    of the sub-channel index because power is split uniformly.
    """
    rho = model.radio.rho if rho is None else rho
    mean_gain = model.antenna.mean_interference_gain
    total = 0.0
    for m2 in interferers:
        if m2 == rx:
            continue
        dist = max(topo.distance(m2, rx), model.path_loss.d0_m)
        g_state = rho * link_gain(model.path_loss, dist, True) + (1 - rho) * link_gain(
            model.path_loss, dist, False
        )
        total += model.radio.subchannel_power_w(m2) * mean_gain * g_state
    return total


def subchannel_rates_for_link(
    model: ChannelModel,
    topo: Topology,
    real: ChannelRealization,
    tx: int,
    rx: int,
    los: bool | None = None,
    interference_w: float = 0.0,
) -> np.ndarray:
    """Per-sub-channel rates of tx->rx under a constant interference power."""
    signal = (
        model.radio.subchannel_power_w(tx)
        * model.antenna.intended_gain
        * realized_link_gain(model, topo, real, tx, rx, los)
        * real.fading[tx, rx, :]
    )
    sinr = signal / (interference_w + model.radio.noise_w)
    return model.radio.subchannel_bw_hz * np.log1p(sinr) / LN2


def average_rate(
    model: ChannelModel,
    topo: Topology,
    real: ChannelRealization,
    tx: int,
    rx: int,
    mask: np.ndarray | None = None,
    interference_w: float = 0.0,
    rho: float | None = None,
) -> float:
    """Blockage-averaged rate over the masked sub-channels in bits/s.

    Convex combination rho * (LoS sum) + (1 - rho) * (NLoS sum), each branch
    evaluated with the branch-consistent shadowing scale and the same fading
    draw.
    """
    rho = model.radio.rho if rho is None else rho
    r_los = subchannel_rates_for_link(model, topo, real, tx, rx, True, interference_w)
    r_nlos = subchannel_rates_for_link(model, topo, real, tx, rx, False, interference_w)
    if mask is not None:
        r_los = r_los[mask]
        r_nlos = r_nlos[mask]
    return float(rho * r_los.sum() + (1.0 - rho) * r_nlos.sum())


def realization_to_json(real: ChannelRealization, plp: PathLossParams) -> str:
    """Dump the realization to a replayable JSON trace.

    Pair records carry the realized-state shadowing in dB; the standard
    normal draw is recovered on load by dividing out the state's deviation.
    """
    import json

    n = real.n_nodes
    pairs = []
    for i in range(n):
        for j in range(i + 1, n):
            state = bool(real.los[i, j])
            pairs.append(
                {
                    "i": i,
                    "j": j,
                    "los": state,
                    "shadowing_db": real.shadowing_db(plp, i, j, state),
                }
            )
    doc = {
        "pairs": pairs,
        "fading": real.fading.tolist(),
        "interference_gain": real.interference_gain.tolist(),
    }
    return json.dumps(doc)


def realization_from_json(text: str, plp: PathLossParams) -> ChannelRealization:
    import json

    doc = json.loads(text)
    fading = np.array(doc["fading"], dtype=float)
    n = fading.shape[0]
    los = np.zeros((n, n), dtype=bool)
    np.fill_diagonal(los, True)
    shadow = np.zeros((n, n))
    for rec in doc["pairs"]:
        i, j, state = rec["i"], rec["j"], bool(rec["los"])
        los[i, j] = los[j, i] = state
        z = rec["shadowing_db"] / plp.xi_db(state)
        shadow[i, j] = shadow[j, i] = z
    return ChannelRealization(
        los=los,
        shadow_normal=shadow,
        fading=fading,
        interference_gain=np.array(doc["interference_gain"], dtype=float),
    )
