"""Link sets and interference neighborhoods.

The working link set keeps, for each UE, the strongest few APs by link gain;
everything outside it is treated as neither a serving nor an interfering
link.  From the link set we derive three views: the APs audible at a UE, the
UEs an AP can serve, and each AP's interference neighborhood (itself plus
every AP that interferes with it at some UE it serves).  Consistency triples
enumerate the cross-neighborhood bandwidth-accounting equalities needed by
the segmented solver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Pattern, Scenario

DEFAULT_NEIGHBORHOOD_CAP = 12


class NeighborhoodTooLargeError(ValueError):
    """Raised when an interference neighborhood exceeds the pattern-enumeration cap."""


@dataclass(frozen=True)
class Neighborhoods:
    """Derived link structure of a scenario.

    links: sorted (ap, ue) pairs kept after per-UE truncation.
    ue_nbhd[j]: APs audible at UE j (as a Pattern).
    ap_ues[i]: UEs servable by AP i, ascending.
    ap_nbhd[i]: AP i's interference neighborhood (empty if it serves nobody).
    """

    links: tuple[tuple[int, int], ...]
    ue_nbhd: tuple[Pattern, ...]
    ap_ues: tuple[tuple[int, ...], ...]
    ap_nbhd: tuple[Pattern, ...]


@dataclass(frozen=True)
class ConsistencyTriple:
    """One overlap pattern C shared by the neighborhoods of APs i < m.

    Bandwidth booked by i's neighborhood on local patterns whose trace on m's
    neighborhood equals C must match the mirror amount booked by m.
    """

    i: int
    m: int
    overlap: Pattern


def build_neighborhoods(s: Scenario, max_aps_per_ue: int = 4) -> Neighborhoods:
    """Keep the ``max_aps_per_ue`` strongest positive-gain APs per UE and
    derive all neighborhood sets.  Gain ties break toward the lower AP index."""
    if max_aps_per_ue < 1:
        raise ValueError("max_aps_per_ue must be >= 1")
    links: list[tuple[int, int]] = []
    ue_nbhd: list[Pattern] = []
    for j in range(s.k):
        col = s.gain[:, j]
        candidates = [i for i in range(s.n) if col[i] > 0]
        # stable sort on -gain keeps the lower index first among equals
        candidates.sort(key=lambda i: (-col[i], i))
        kept = sorted(candidates[:max_aps_per_ue])
        ue_nbhd.append(Pattern.from_indices(kept))
        links.extend((i, j) for i in kept)
    links.sort()
    ap_ues: list[tuple[int, ...]] = []
    ap_nbhd: list[Pattern] = []
    for i in range(s.n):
        ues = tuple(j for j in range(s.k) if i in ue_nbhd[j])
        ap_ues.append(ues)
        nb = Pattern()
        for j in ues:
            nb = nb | ue_nbhd[j]
        ap_nbhd.append(nb)
    return Neighborhoods(
        links=tuple(links),
        ue_nbhd=tuple(ue_nbhd),
        ap_ues=tuple(ap_ues),
        ap_nbhd=tuple(ap_nbhd),
    )


def masked_scenario(s: Scenario, nb: Neighborhoods) -> Scenario:
    """Scenario copy whose gains are exactly zero outside the link set.

    On the masked scenario the spectral efficiency of any link depends only
    on the active APs inside the UE's own neighborhood, so local and global
    pattern evaluations coincide.
    """
    gain = np.zeros_like(s.gain)
    for i, j in nb.links:
        gain[i, j] = s.gain[i, j]
    return s.with_gain(gain)


def subset_patterns_ascending(members: tuple[int, ...]) -> list[Pattern]:
    """All subsets of the given sorted member indices, ascending by global bitmask."""
    bits = [1 << i for i in members]
    out = []
    for c in range(1 << len(members)):
        mask = 0
        cc = c
        t = 0
        while cc:
            if cc & 1:
                mask |= bits[t]
            cc >>= 1
            t += 1
        out.append(Pattern(mask))
    return out


def local_patterns(nb: Neighborhoods, i: int, cap: int = DEFAULT_NEIGHBORHOOD_CAP) -> list[Pattern]:
    """Every subset of AP i's interference neighborhood, including the empty one,
    ascending by bitmask.  AP i must serve at least one UE."""
    if not nb.ap_ues[i]:
        raise ValueError(f"AP {i} serves no UEs; it has no local patterns")
    members = nb.ap_nbhd[i].members
    if len(members) > cap:
        raise NeighborhoodTooLargeError(
            f"neighborhood too large: AP {i} has {len(members)} members (cap {cap}); "
            "reduce max_aps_per_ue"
        )
    return subset_patterns_ascending(members)


def consistency_triples(nb: Neighborhoods) -> list[ConsistencyTriple]:
    """Every (i, m, C) with i < m and C a nonempty subset of the intersection
    of the two interference neighborhoods, each exactly once."""
    n = len(nb.ap_nbhd)
    triples: list[ConsistencyTriple] = []
    for i in range(n):
        for m in range(i + 1, n):
            common = nb.ap_nbhd[i] & nb.ap_nbhd[m]
            if not common:
                continue
            for c in subset_patterns_ascending(common.members):
                if c:
                    triples.append(ConsistencyTriple(i, m, c))
    return triples


def spectral_efficiency_table(
    s: Scenario, nb: Neighborhoods
) -> dict[tuple[int, int], dict[int, float]]:
    """Precompute link spectral efficiencies for every relevant local pattern.

    For each link (i, j) the inner dict maps the bitmask of C (a subset of
    UE j's neighborhood containing i) to the link rate when exactly the APs
    in C transmit.  Interference sums only over in-neighborhood APs, which is
    exact on the masked scenario.
    """
    table: dict[tuple[int, int], dict[int, float]] = {}
    factor = s.rate_factor
    for i, j in nb.links:
        members = nb.ue_nbhd[j].members
        others = [o for o in members if o != i]
        sig = s.tx_psd[i] * s.gain[i, j]
        noise = s.noise_psd[j]
        entry: dict[int, float] = {}
        base = 1 << i
        for c in range(1 << len(others)):
            mask = base
            interf = 0.0
            cc = c
            t = 0
            while cc:
                if cc & 1:
                    o = others[t]
                    mask |= 1 << o
                    interf += s.tx_psd[o] * s.gain[o, j]
                cc >>= 1
                t += 1
            entry[mask] = factor * np.log2(1.0 + sig / (interf + noise))
        table[(i, j)] = entry
    return table
