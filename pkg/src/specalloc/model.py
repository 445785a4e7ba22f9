"""Core network types and the physical-layer / traffic math.

A static network instance is a :class:`Scenario`: AP and UE positions, link
power gains, transmit and noise power spectral densities, traffic arrival
rates, total bandwidth and average packet length.  Spectrum is shared by
*patterns*: subsets of simultaneously transmitting APs, represented as
bitmasks by :class:`Pattern`.

Rates are measured in packets/sec throughout (the bandwidth/packet-length
factor converts spectral efficiency to a service rate).  The network utility
is the negative total queueing delay under M/M/1 assumptions; infeasible
rate vectors map to the ``-inf`` sentinel rather than raising.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Iterator

import numpy as np

if TYPE_CHECKING:  # pragma: no cover
    from .global_solver import GlobalAllocation

NEG_INF = float("-inf")


@dataclass(frozen=True)
class Pattern:
    """A subset of AP indices stored as an integer bitmask.

    Iteration yields member indices in ascending order, so every consumer
    sees the same deterministic ordering.
    """

    mask: int = 0

    @classmethod
    def from_indices(cls, indices: Iterable[int]) -> "Pattern":
        m = 0
        for i in indices:
            if i < 0:
                raise ValueError(f"negative AP index {i}")
            m |= 1 << i
        return cls(m)

    @property
    def members(self) -> tuple[int, ...]:
        return tuple(self)

    def __contains__(self, i: int) -> bool:
        return bool((self.mask >> i) & 1)

    def __iter__(self) -> Iterator[int]:
        m = self.mask
        while m:
            low = m & -m
            yield low.bit_length() - 1
            m ^= low

    def __len__(self) -> int:
        return self.mask.bit_count()

    def __bool__(self) -> bool:
        return self.mask != 0

    def __and__(self, other: "Pattern") -> "Pattern":
        return Pattern(self.mask & other.mask)

    def __or__(self, other: "Pattern") -> "Pattern":
        return Pattern(self.mask | other.mask)

    def issubset(self, other: "Pattern") -> bool:
        return self.mask & ~other.mask == 0

    def isdisjoint(self, other: "Pattern") -> bool:
        return self.mask & other.mask == 0

    def add(self, i: int) -> "Pattern":
        return Pattern(self.mask | (1 << i))

    def remove(self, i: int) -> "Pattern":
        return Pattern(self.mask & ~(1 << i))

    def __repr__(self) -> str:
        return "{" + ",".join(str(i) for i in self) + "}"


# Rates are plain float arrays indexed by UE; a dedicated wrapper would only
# add friction around numpy code.
RateVector = np.ndarray


@dataclass(frozen=True)
class Scenario:
    """Immutable static network instance.

    ``gain`` is the dimensionless linear power gain matrix, shape (n, k),
    row i giving AP i's gain to every UE.  ``tx_psd`` and ``noise_psd`` are
    in µW/Hz.  ``arrival_rates`` are Poisson packet rates per UE.
    """

    n: int
    k: int
    ap_positions: np.ndarray
    ue_positions: np.ndarray
    gain: np.ndarray
    tx_psd: np.ndarray
    noise_psd: np.ndarray
    arrival_rates: np.ndarray
    bandwidth_hz: float = 20e6
    packet_len_bits: float = 1e6

    def __post_init__(self):
        conv = {
            "ap_positions": np.asarray(self.ap_positions, dtype=float).reshape(self.n, 2),
            "ue_positions": np.asarray(self.ue_positions, dtype=float).reshape(self.k, 2),
            "gain": np.asarray(self.gain, dtype=float),
            "tx_psd": np.asarray(self.tx_psd, dtype=float).reshape(self.n),
            "noise_psd": np.asarray(self.noise_psd, dtype=float).reshape(self.k),
            "arrival_rates": np.asarray(self.arrival_rates, dtype=float).reshape(self.k),
        }
        for name, arr in conv.items():
            object.__setattr__(self, name, arr)
        if self.n < 1 or self.k < 1:
            raise ValueError("need at least one AP and one UE")
        if self.gain.shape != (self.n, self.k):
            raise ValueError(f"gain matrix shape {self.gain.shape} != ({self.n}, {self.k})")
        if np.any(self.gain < 0) or not np.all(np.isfinite(self.gain)):
            raise ValueError("gains must be finite and >= 0")
        if np.any(self.tx_psd <= 0):
            raise ValueError("tx_psd must be > 0")
        if np.any(self.noise_psd <= 0):
            raise ValueError("noise_psd must be > 0")
        if np.any(self.arrival_rates < 0):
            raise ValueError("arrival_rates must be >= 0")
        if self.bandwidth_hz <= 0 or self.packet_len_bits <= 0:
            raise ValueError("bandwidth_hz and packet_len_bits must be > 0")

    @property
    def rate_factor(self) -> float:
        """Bandwidth over packet length: converts bits/s/Hz to packets/s."""
        return self.bandwidth_hz / self.packet_len_bits

    def with_arrival_rates(self, rates: np.ndarray) -> "Scenario":
        """Copy of this scenario with a different traffic vector."""
        return Scenario(
            n=self.n,
            k=self.k,
            ap_positions=self.ap_positions,
            ue_positions=self.ue_positions,
            gain=self.gain,
            tx_psd=self.tx_psd,
            noise_psd=self.noise_psd,
            arrival_rates=np.asarray(rates, dtype=float),
            bandwidth_hz=self.bandwidth_hz,
            packet_len_bits=self.packet_len_bits,
        )

    def with_gain(self, gain: np.ndarray) -> "Scenario":
        return Scenario(
            n=self.n,
            k=self.k,
            ap_positions=self.ap_positions,
            ue_positions=self.ue_positions,
            gain=np.asarray(gain, dtype=float),
            tx_psd=self.tx_psd,
            noise_psd=self.noise_psd,
            arrival_rates=self.arrival_rates,
            bandwidth_hz=self.bandwidth_hz,
            packet_len_bits=self.packet_len_bits,
        )


def spectral_efficiency(s: Scenario, i: int, j: int, active: Pattern) -> float:
    """Service rate (packets/sec) of link i->j when the APs in ``active`` transmit.

    Zero if AP i itself is silent.  Interference is the received PSD from
    every other active AP at UE j, treated as always-on (backlogged) noise.
    """
    if i not in active:
        return 0.0
    interference = 0.0
    for other in active:
        if other != i:
            interference += s.tx_psd[other] * s.gain[other, j]
    sinr = s.tx_psd[i] * s.gain[i, j] / (interference + s.noise_psd[j])
    return s.rate_factor * math.log2(1.0 + sinr)


def rate_global(s: Scenario, alloc: "GlobalAllocation") -> RateVector:
    """Total per-UE rate of a pattern-keyed allocation: sum of s * x over all
    (pattern, AP, UE) bandwidth assignments."""
    rates = np.zeros(s.k)
    for (pattern, i, j), x in alloc.x.items():
        if x != 0.0:
            rates[j] += spectral_efficiency(s, i, j, pattern) * x
    return rates


def utility_delay(arrival_rates: np.ndarray, rates: RateVector) -> float:
    """Negative total M/M/1 delay load, -sum_j lambda_j / (r_j - lambda_j).

    Returns the ``-inf`` sentinel whenever some UE with traffic has a rate at
    or below its arrival rate; UEs with zero traffic contribute nothing.
    """
    lam = np.asarray(arrival_rates, dtype=float)
    r = np.asarray(rates, dtype=float)
    if lam.shape != r.shape:
        raise ValueError("length mismatch between arrival rates and rates")
    served = lam > 0
    if not np.any(served):
        return 0.0
    slack = r[served] - lam[served]
    if np.any(slack <= 0):
        return NEG_INF
    return -float(np.sum(lam[served] / slack))


def utility_gradient(arrival_rates: np.ndarray, rates: RateVector) -> np.ndarray:
    """Per-UE derivative of the delay utility, lambda_j / (r_j - lambda_j)^2.

    Valid only on the utility's domain; a rate at or below its load is a
    caller bug, not an infeasibility signal.
    """
    lam = np.asarray(arrival_rates, dtype=float)
    r = np.asarray(rates, dtype=float)
    if lam.shape != r.shape:
        raise ValueError("length mismatch between arrival rates and rates")
    grad = np.zeros_like(lam)
    served = lam > 0
    slack = r[served] - lam[served]
    if np.any(slack <= 0):
        bad = np.flatnonzero(served)[np.argmin(slack)]
        raise ValueError(f"rate at or below load for UE {bad}")
    grad[served] = lam[served] / slack**2
    return grad
