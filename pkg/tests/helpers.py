"""Shared builders for hand-constructed topologies and channel draws."""

from __future__ import annotations

import numpy as np

from mmwbackhaul.channel import ChannelModel, ChannelRealization
from mmwbackhaul.topology import SHARED_OWNER, Topology


def make_topology(
    sbs_positions, owners, n_mnos: int, d: float = 200.0, d_max: float = 400.0
) -> Topology:
    """Topology with the MBS at the origin and SBSs at explicit positions."""
    positions = np.vstack([[0.0, 0.0], np.asarray(sbs_positions, dtype=float)])
    owner = np.array([SHARED_OWNER] + list(owners), dtype=int)
    return Topology(positions=positions, owner=owner, n_mnos=n_mnos, d_max=d_max, d=d)


def flat_realization(
    topo: Topology,
    model: ChannelModel,
    los: bool = True,
    fading: float = 1.0,
    interference_gain: float = 0.0,
) -> ChannelRealization:
    """Deterministic realization: uniform link state, no shadowing, constant
    fading, constant interference gains."""
    n = topo.n_nodes
    k = model.radio.n_subchannels
    states = np.full((n, n), los, dtype=bool)
    np.fill_diagonal(states, True)
    return ChannelRealization(
        los=states,
        shadow_normal=np.zeros((n, n)),
        fading=np.full((n, n, k), fading, dtype=float),
        interference_gain=np.full((n, n), interference_gain, dtype=float),
    )
