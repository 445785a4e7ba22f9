"""Deterministic scenario generation and file round-tripping.

Drops one macro AP at the center of a square area and the remaining pico APs
uniformly at random; UEs sit on a rectangular lattice.  Link gains follow a
power-law pathloss with log-normal shadowing, then all gains are rescaled by
one common factor so the 10th-percentile best-AP SNR over UEs hits a target
(default 20 dB), which pins the SINR regime independently of the arbitrary
area scale.  Everything is a pure function of the config, including its seed.

Scenario files are JSON; results are CSV rows keyed by (scheme, load, seed).
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .model import Scenario

log = logging.getLogger(__name__)

RESULTS_HEADER = [
    "scheme", "seed", "n", "k", "segments", "load_scale", "total_arrival_pps",
    "utility", "avg_delay_s", "max_supported", "active_patterns", "solve_ms",
]


class ScenarioFormatError(ValueError):
    """A scenario file is malformed or missing required fields."""


@dataclass(frozen=True)
class GeneratorConfig:
    """Knobs of the synthetic drop; defaults follow the usual heterogeneous
    macro/pico setup (pathloss exponent 3, 3 dB shadowing, 5 and 1 uW/Hz
    transmit PSDs, 1e-7 uW/Hz noise, 20 MHz band, 1 Mb packets)."""

    n: int
    k: int
    seed: int = 0
    area_m: float = 500.0
    pathloss_exp: float = 3.0
    shadow_sigma_db: float = 3.0
    macro_psd: float = 5.0
    pico_psd: float = 1.0
    noise_psd: float = 1e-7
    bandwidth_hz: float = 20e6
    packet_len_bits: float = 1e6
    arrival_rate_max: float = 100.0
    edge_snr_db: float = 20.0
    min_link_distance_m: float = 1.0

    def __post_init__(self):
        if self.n < 1 or self.k < 1:
            raise ValueError("n and k must be >= 1")
        for name in ("area_m", "macro_psd", "pico_psd", "noise_psd",
                     "bandwidth_hz", "packet_len_bits", "arrival_rate_max",
                     "min_link_distance_m"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")


def ue_lattice(k: int, area_m: float) -> np.ndarray:
    """First k cell centers of the tightest rectangular grid covering the square."""
    cols = math.ceil(math.sqrt(k))
    rows = math.ceil(k / cols)
    pts = []
    for idx in range(k):
        r, c = divmod(idx, cols)
        pts.append(((c + 0.5) * area_m / cols, (r + 0.5) * area_m / rows))
    return np.array(pts)


def generate(cfg: GeneratorConfig) -> Scenario:
    """Draw a scenario; same config (and seed) always yields identical bytes."""
    rng = np.random.default_rng(cfg.seed)
    ap_pos = np.empty((cfg.n, 2))
    ap_pos[0] = (cfg.area_m / 2.0, cfg.area_m / 2.0)
    if cfg.n > 1:
        ap_pos[1:] = rng.uniform(0.0, cfg.area_m, size=(cfg.n - 1, 2))
    ue_pos = ue_lattice(cfg.k, cfg.area_m)

    diff = ap_pos[:, None, :] - ue_pos[None, :, :]
    dist = np.maximum(np.sqrt((diff**2).sum(axis=2)), cfg.min_link_distance_m)
    shadow_db = rng.normal(0.0, cfg.shadow_sigma_db, size=(cfg.n, cfg.k))
    gain = dist ** (-cfg.pathloss_exp) * 10.0 ** (shadow_db / 10.0)

    tx_psd = np.full(cfg.n, cfg.pico_psd)
    tx_psd[0] = cfg.macro_psd

    # normalize the SINR regime: 10th-percentile best-AP SNR -> target
    best_snr = (tx_psd[:, None] * gain).max(axis=0) / cfg.noise_psd
    edge = float(np.percentile(best_snr, 10.0))
    target = 10.0 ** (cfg.edge_snr_db / 10.0)
    gain = gain * (target / edge)
    log.info("generated drop n=%d k=%d seed=%d: edge SNR %.1f dB before scaling, "
             "scale factor %.3e", cfg.n, cfg.k, cfg.seed,
             10.0 * math.log10(edge), target / edge)

    arrival = rng.uniform(0.0, cfg.arrival_rate_max, size=cfg.k)
    return Scenario(
        n=cfg.n, k=cfg.k, ap_positions=ap_pos, ue_positions=ue_pos, gain=gain,
        tx_psd=tx_psd, noise_psd=np.full(cfg.k, cfg.noise_psd),
        arrival_rates=arrival, bandwidth_hz=cfg.bandwidth_hz,
        packet_len_bits=cfg.packet_len_bits)


_SCENARIO_FIELDS = [
    "n", "k", "ap_positions", "ue_positions", "gain", "tx_psd", "noise_psd",
    "bandwidth_hz", "packet_len_bits", "arrival_rates",
]


def save_scenario(path: str | Path, s: Scenario) -> None:
    payload = {
        "n": s.n,
        "k": s.k,
        "ap_positions": s.ap_positions.tolist(),
        "ue_positions": s.ue_positions.tolist(),
        "gain": s.gain.tolist(),
        "tx_psd": s.tx_psd.tolist(),
        "noise_psd": s.noise_psd.tolist(),
        "bandwidth_hz": s.bandwidth_hz,
        "packet_len_bits": s.packet_len_bits,
        "arrival_rates": s.arrival_rates.tolist(),
    }
    Path(path).write_text(json.dumps(payload, indent=1) + "\n")


def load_scenario(path: str | Path) -> Scenario:
    text = Path(path).read_text()
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioFormatError(
            f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(payload, dict):
        raise ScenarioFormatError(f"{path}: top-level JSON value must be an object")
    missing = [f for f in _SCENARIO_FIELDS if f not in payload]
    if missing:
        raise ScenarioFormatError(f"{path}: missing field '{missing[0]}'")
    try:
        return Scenario(
            n=int(payload["n"]), k=int(payload["k"]),
            ap_positions=np.array(payload["ap_positions"], dtype=float),
            ue_positions=np.array(payload["ue_positions"], dtype=float),
            gain=np.array(payload["gain"], dtype=float),
            tx_psd=np.array(payload["tx_psd"], dtype=float),
            noise_psd=np.array(payload["noise_psd"], dtype=float),
            arrival_rates=np.array(payload["arrival_rates"], dtype=float),
            bandwidth_hz=float(payload["bandwidth_hz"]),
            packet_len_bits=float(payload["packet_len_bits"]),
        )
    except (TypeError, ValueError) as exc:
        raise ScenarioFormatError(f"{path}: {exc}") from exc


def format_number(x) -> str:
    """Stable short decimal form for CSV cells ('' for missing)."""
    if x is None or x == "":
        return ""
    if isinstance(x, float):
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        return format(x, ".12g")
    return str(x)


def write_results(path: str | Path, rows: list[dict], append: bool = False) -> None:
    """Write result rows under the fixed header; unknown keys are rejected."""
    mode = "a" if append and Path(path).exists() else "w"
    with open(path, mode, newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=RESULTS_HEADER)
        if mode == "w":
            writer.writeheader()
        for row in rows:
            unknown = set(row) - set(RESULTS_HEADER)
            if unknown:
                raise ValueError(f"unknown result fields: {sorted(unknown)}")
            writer.writerow({key: format_number(row.get(key)) for key in RESULTS_HEADER})


def read_results(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
