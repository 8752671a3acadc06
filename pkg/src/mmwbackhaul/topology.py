"""Geometric and ownership structure of the backhaul network.

A network consists of one fiber-connected macro base station (MBS, node 0)
at the origin and M small base stations (SBSs, nodes 1..M) dropped uniformly
on a disk of radius ``d_max``. Each SBS belongs to exactly one of N mobile
network operators (MNOs); the MBS is shared by all of them. Two nodes can
form a backhaul link only when they are within communication range ``d``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

MBS = 0
SHARED_OWNER = -1


@dataclass(frozen=True, eq=False)
class Topology:
    """Immutable node layout. ``positions[0]`` is the MBS at the origin.

    ``owner[i]`` is the MNO index of SBS i, with ``owner[0] == SHARED_OWNER``
    marking the MBS as shared infrastructure.
    """

    positions: np.ndarray  # (M+1, 2) meters
    owner: np.ndarray  # (M+1,) int, SHARED_OWNER for the MBS
    n_mnos: int
    d_max: float
    d: float

    @property
    def n_nodes(self) -> int:
        return self.positions.shape[0]

    @property
    def n_sbs(self) -> int:
        return self.n_nodes - 1

    @property
    def sbs_ids(self) -> range:
        return range(1, self.n_nodes)

    def check_node(self, m: int) -> None:
        if not 0 <= m < self.n_nodes:
            raise KeyError(f"unknown node id {m}")

    def distance(self, m: int, m2: int) -> float:
        self.check_node(m)
        self.check_node(m2)
        return float(np.linalg.norm(self.positions[m] - self.positions[m2]))

    def mno_members(self, n: int) -> list[int]:
        return [int(i) for i in np.nonzero(self.owner == n)[0]]


def generate_topology(seed: int, m_sbs: int, n_mnos: int, d_max: float, d: float) -> Topology:
    """Drop ``m_sbs`` SBSs uniformly on the disk of radius ``d_max``.

    SBS i is owned by MNO (i-1) mod ``n_mnos``, which splits ownership as
    evenly as the counts allow. Deterministic for a fixed seed.
    """
    if m_sbs < 1:
        raise ValueError(f"need at least one SBS, got {m_sbs}")
    if n_mnos < 1:
        raise ValueError(f"need at least one MNO, got {n_mnos}")
    if d_max <= 0 or d <= 0:
        raise ValueError(f"radii must be positive, got d_max={d_max}, d={d}")

    rng = np.random.default_rng(seed)
    radius = d_max * np.sqrt(rng.uniform(size=m_sbs))  # area-uniform
    angle = rng.uniform(0.0, 2.0 * np.pi, size=m_sbs)
    positions = np.zeros((m_sbs + 1, 2))
    positions[1:, 0] = radius * np.cos(angle)
    positions[1:, 1] = radius * np.sin(angle)

    owner = np.empty(m_sbs + 1, dtype=int)
    owner[0] = SHARED_OWNER
    owner[1:] = (np.arange(m_sbs)) % n_mnos

    return Topology(positions=positions, owner=owner, n_mnos=n_mnos, d_max=d_max, d=d)


def comm_set(topo: Topology, m: int) -> set[int]:
    """Nodes within communication range of ``m``, excluding ``m`` itself."""
    topo.check_node(m)
    dists = np.linalg.norm(topo.positions - topo.positions[m], axis=1)
    near = np.nonzero(dists <= topo.d)[0]
    return {int(i) for i in near if i != m}


def same_mno(topo: Topology, m: int, m2: int) -> bool:
    """True when no cross-operator payment applies to a link between m and m2.

    The MBS counts as belonging to every MNO, so any pair involving it is
    treated as same-operator.
    """
    topo.check_node(m)
    topo.check_node(m2)
    if m == MBS or m2 == MBS:
        return True
    return bool(topo.owner[m] == topo.owner[m2])


def cross_mno_indicator(topo: Topology, m: int, m2: int) -> int:
    """1 when the pair spans two MNOs (payment applies), else 0."""
    return 0 if same_mno(topo, m, m2) else 1


def topology_to_json(topo: Topology) -> str:
    nodes = [
        {
            "id": int(i),
            "x": float(topo.positions[i, 0]),
            "y": float(topo.positions[i, 1]),
            "owner": None if topo.owner[i] == SHARED_OWNER else int(topo.owner[i]),
        }
        for i in range(topo.n_nodes)
    ]
    doc = {"n_mnos": topo.n_mnos, "d_max": topo.d_max, "d": topo.d, "nodes": nodes}
    return json.dumps(doc, indent=2)


def topology_from_json(text: str) -> Topology:
    doc = json.loads(text)
    nodes = sorted(doc["nodes"], key=lambda n: n["id"])
    positions = np.array([[n["x"], n["y"]] for n in nodes], dtype=float)
    owner = np.array(
        [SHARED_OWNER if n["owner"] is None else int(n["owner"]) for n in nodes], dtype=int
    )
    return Topology(
        positions=positions,
        owner=owner,
        n_mnos=int(doc["n_mnos"]),
        d_max=float(doc["d_max"]),
        d=float(doc["d"]),
    )
