"""Synthetic energy traces seen by an LTE-U base station during its OFF periods.

Each sample is the received RF power (dBm) at 192 Hz.  Wi-Fi APs are modelled
as full-buffer transmitters whose per-sample airtime follows a two-state
busy/idle Markov chain, with beacons forced every 102.4 ms.  Source power at
the receiver comes from free-space path loss at 5.825 GHz plus slow shadowing
and fast fading; sources are combined by taking the strongest one and adding
the noise floor in the linear (mW) domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

LOS = "LOS"
NLOS = "NLOS"
SIGHTS = (LOS, NLOS)
TRAFFIC_MODES = ("FullBuffer",)

CARRIER_HZ = 5.825e9
TX_POWER_DBM = 23.0
SYSTEM_LOSS_DB = 1.5
NLOS_EXTRA_LOSS_DB = 8.0
FEET_TO_M = 0.3048

BEACON_INTERVAL_S = 0.1024
DEFAULT_SAMPLE_RATE = 192.0
MIN_DBM, MAX_DBM = -100.0, 0.0

# Window-average power of an AP during an "idle" sample: the AP still holds
# the medium for part of the window, so power drops rather than vanishing.
IDLE_DROP_DB = 9.0

# Slow per-AP shadowing and fast per-sample fading, soft-bounded to +-VARIATION_BOUND_DB.
SHADOW_SIGMA_DB = 2.0
SHADOW_TAU_S = 1.5
FADING_SIGMA_DB = 1.5
VARIATION_BOUND_DB = 3.0

# Slow drift of the receiver's power indicator, common to all sources and noise.
DRIFT_SIGMA_DB = 3.0
DRIFT_TAU_S = 20.0
DRIFT_BOUND_DB = 4.0

NOISE_FLOOR_DBM = -95.0
NOISE_JITTER_DB = 2.0
# Floor of the base station's RF-power indicator in the width-sweep scenario:
# the no-Wi-Fi class reads inside the Wi-Fi power range, so one sample alone
# cannot tell 0, 1 and 2 APs apart.
INDICATOR_FLOOR_DBM = -28.0


@dataclass(frozen=True)
class Placement:
    distance_ft: float
    sight: str = LOS

    def __post_init__(self):
        if not self.distance_ft > 0:
            raise ValueError(f"placement distance must be positive, got {self.distance_ft}")
        if self.sight not in SIGHTS:
            raise ValueError(f"sight must be one of {SIGHTS}, got {self.sight!r}")


@dataclass(frozen=True)
class ScenarioConfig:
    """One measurement scenario: which APs are on, where, and for how long.

    ``noise_floor_dbm`` is the floor reported by the receiver's power
    indicator when no Wi-Fi is present.
    """

    ap_count: int
    placements: tuple[Placement, ...]
    duration: float
    sample_rate: float = DEFAULT_SAMPLE_RATE
    seed: int = 0
    traffic: str = "FullBuffer"
    noise_floor_dbm: float = NOISE_FLOOR_DBM

    def __post_init__(self):
        object.__setattr__(self, "placements", tuple(self.placements))
        if self.ap_count not in (0, 1, 2):
            raise ValueError(f"ap_count must be 0, 1 or 2, got {self.ap_count}")
        if len(self.placements) != self.ap_count:
            raise ValueError(
                f"{len(self.placements)} placements given for ap_count={self.ap_count}")
        if not (self.sample_rate > 0 and math.isfinite(self.sample_rate)):
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if not (self.duration > 0 and math.isfinite(self.duration)):
            raise ValueError(f"duration must be positive, got {self.duration}")
        if self.n_samples < 1:
            raise ValueError(
                f"duration*sample_rate must be >= 1 (got {self.duration}*{self.sample_rate})")
        if self.traffic not in TRAFFIC_MODES:
            raise ValueError(f"unsupported traffic mode {self.traffic!r}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    @property
    def n_samples(self) -> int:
        return int(round(self.duration * self.sample_rate))

    @classmethod
    def standard(cls, ap_count: int, duration: float, seed: int = 0,
                 distance_ft: float = 6.0, sight: str = LOS, **kw) -> "ScenarioConfig":
        """All APs at the same distance and sight (opposite sides of the BS)."""
        placements = tuple(Placement(distance_ft, sight) for _ in range(ap_count))
        return cls(ap_count=ap_count, placements=placements, duration=duration,
                   seed=seed, **kw)


@dataclass
class EnergyTrace:
    values: np.ndarray
    sample_rate: float
    label: int
    scenario: ScenarioConfig | None = None
    seed: int = field(default=0)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise ValueError("trace values must be one-dimensional")

    def __len__(self):
        return len(self.values)


# -- occupancy -------------------------------------------------------------

@dataclass(frozen=True)
class OccupancyParams:
    """Per-AP busy/idle chain and beacon schedule."""

    p_enter: float  # idle -> busy
    p_leave: float  # busy -> idle
    sample_rate: float = DEFAULT_SAMPLE_RATE
    beacon_interval_s: float | None = BEACON_INTERVAL_S
    beacon_phase_s: float = 0.0

    @property
    def stationary_busy(self) -> float:
        total = self.p_enter + self.p_leave
        return 0.0 if total == 0 else self.p_enter / total

    def is_beacon(self, step: int) -> bool:
        if self.beacon_interval_s is None or step < 1:
            return False
        k0 = int((step / self.sample_rate - self.beacon_phase_s) / self.beacon_interval_s)
        for k in (k0 - 1, k0, k0 + 1, k0 + 2):
            if k >= 1 and math.floor(
                    (self.beacon_phase_s + k * self.beacon_interval_s) * self.sample_rate) == step:
                return True
        return False


@dataclass(frozen=True)
class OccupancyState:
    busy: bool = False
    step: int = 0


# (busy fraction per AP, mean busy dwell in samples) by number of contending APs
_CONTENTION = {
    1: (0.65, 6.0),
    2: (0.80, 3.0),
}


def occupancy_params(ap_count: int, sample_rate: float = DEFAULT_SAMPLE_RATE,
                     beacon_phase_s: float = 0.0) -> OccupancyParams:
    """Chain parameters for one AP when ``ap_count`` APs share the channel."""
    if ap_count == 0:
        return OccupancyParams(0.0, 1.0, sample_rate, beacon_interval_s=None)
    try:
        busy, dwell = _CONTENTION[ap_count]
    except KeyError:
        raise ValueError(f"no contention model for ap_count={ap_count}") from None
    p_leave = 1.0 / dwell
    p_enter = p_leave * busy / (1.0 - busy)
    return OccupancyParams(p_enter, p_leave, sample_rate, BEACON_INTERVAL_S, beacon_phase_s)


def stationary_busy_fraction(ap_count: int) -> float:
    """Fraction of samples in which at least one AP's chain is busy (beacons excluded)."""
    if ap_count == 0:
        return 0.0
    pi = occupancy_params(ap_count).stationary_busy
    return 1.0 - (1.0 - pi) ** ap_count


def beacon_indices(n_samples: int, sample_rate: float,
                   interval_s: float = BEACON_INTERVAL_S, phase_s: float = 0.0) -> np.ndarray:
    """Sample indices floor((phase + k*interval)*rate) for k = 1, 2, ... below n_samples."""
    k_max = int((n_samples / sample_rate - phase_s) / interval_s) + 2
    k = np.arange(1, k_max + 1)
    idx = np.floor((phase_s + k * interval_s) * sample_rate).astype(np.int64)
    return idx[(idx >= 0) & (idx < n_samples)]


def occupancy_model(state: OccupancyState, u: float,
                    params: OccupancyParams) -> tuple[OccupancyState, bool]:
    """Advance one AP's busy/idle chain by one sample.

    ``u`` is a uniform draw in [0, 1).  The returned flag is the chain state
    OR'ed with a beacon at the new step.
    """
    if state.busy:
        busy = u >= params.p_leave
    else:
        busy = u < params.p_enter
    step = state.step + 1
    return OccupancyState(busy, step), busy or params.is_beacon(step)


def chain_path(u: np.ndarray, params: OccupancyParams, busy0: bool = False) -> np.ndarray:
    """Busy flags for steps 1..len(u); same result as iterating occupancy_model."""
    n = len(u)
    out = np.empty(n, dtype=bool)
    busy = busy0
    p_enter, p_leave = params.p_enter, params.p_leave
    for i, ui in enumerate(u.tolist()):
        busy = (ui >= p_leave) if busy else (ui < p_enter)
        out[i] = busy
    if params.beacon_interval_s is not None:
        # steps are 1-based; out[i] holds step i+1
        idx = beacon_indices(n + 1, params.sample_rate, params.beacon_interval_s,
                             params.beacon_phase_s) - 1
        out[idx[idx >= 0]] = True
    return out


# -- power model -------------------------------------------------------------

def mean_rx_power_dbm(placement: Placement) -> float:
    """Mean received power of a full-power AP at the given placement."""
    d_m = placement.distance_ft * FEET_TO_M
    fspl = 20 * math.log10(4 * math.pi * d_m * CARRIER_HZ / 299_792_458.0)
    loss = fspl + SYSTEM_LOSS_DB + (NLOS_EXTRA_LOSS_DB if placement.sight == NLOS else 0.0)
    return TX_POWER_DBM - loss


def _ar1(rng: np.random.Generator, n: int, sigma: float, tau_samples: float) -> np.ndarray:
    """Stationary Gaussian AR(1) with the given marginal sigma and time constant."""
    rho = math.exp(-1.0 / tau_samples)
    white = rng.standard_normal(n)
    white[0] /= math.sqrt(1 - rho * rho)  # start in the stationary distribution
    return sigma * lfilter([math.sqrt(1 - rho * rho)], [1.0, -rho], white)


def _soft_bound(x: np.ndarray, bound: float) -> np.ndarray:
    return bound * np.tanh(x / bound)


def _streams(seed: int, n: int) -> list[np.random.Generator]:
    ss = np.random.SeedSequence(seed)
    return [np.random.Generator(np.random.PCG64(s)) for s in ss.spawn(n)]


def simulate_trace(config: ScenarioConfig) -> EnergyTrace:
    """Generate a labeled dBm trace for ``config``; deterministic in the seed."""
    n = config.n_samples
    rate = config.sample_rate
    # stream 0: receiver (noise + drift); streams 1, 2: one per AP slot
    rx_rng, *ap_rngs = _streams(config.seed, 3)

    noise_dbm = config.noise_floor_dbm + NOISE_JITTER_DB * rx_rng.standard_normal(n)
    drift = _soft_bound(_ar1(rx_rng, n, DRIFT_SIGMA_DB, DRIFT_TAU_S * rate), DRIFT_BOUND_DB)

    strongest = np.full(n, -np.inf)
    for slot, placement in enumerate(config.placements):
        rng = ap_rngs[slot]
        phase = rng.uniform(0.0, BEACON_INTERVAL_S)
        params = occupancy_params(config.ap_count, rate, beacon_phase_s=phase)
        busy = chain_path(rng.random(n), params, busy0=bool(rng.random() < params.stationary_busy))
        variation = (_ar1(rng, n, SHADOW_SIGMA_DB, SHADOW_TAU_S * rate)
                     + FADING_SIGMA_DB * rng.standard_normal(n))
        level = (mean_rx_power_dbm(placement) + _soft_bound(variation, VARIATION_BOUND_DB)
                 - np.where(busy, 0.0, IDLE_DROP_DB))
        np.maximum(strongest, level, out=strongest)

    total_mw = 10.0 ** (noise_dbm / 10.0)
    if config.ap_count:
        total_mw = total_mw + 10.0 ** (strongest / 10.0)
    values = 10.0 * np.log10(total_mw) + drift
    values = np.clip(values, MIN_DBM, MAX_DBM)
    return EnergyTrace(values, rate, config.ap_count, config, config.seed)


# -- trace files ---------------------------------------------------------------

def write_trace(trace: EnergyTrace, path) -> None:
    """CSV with a ``# rate=..,label=..,seed=..`` header and one 6-decimal value per line."""
    path = Path(path)
    lines = [f"# rate={trace.sample_rate!r},label={trace.label},seed={trace.seed}"]
    lines.extend(f"{v:.6f}" for v in trace.values)
    path.write_text("\n".join(lines) + "\n")


def read_trace(path) -> EnergyTrace:
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip()
        if not header.startswith("#"):
            raise ValueError(f"{path}:1: missing '# rate=...' header")
        meta = {}
        for item in header[1:].split(","):
            key, sep, val = item.strip().partition("=")
            if not sep:
                raise ValueError(f"{path}:1: malformed header field {item!r}")
            meta[key] = val
        try:
            rate = float(meta["rate"])
            label = int(meta["label"])
            seed = int(meta.get("seed", 0))
        except (KeyError, ValueError) as exc:
            raise ValueError(f"{path}:1: bad header {header!r}") from exc
        values = []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            try:
                values.append(float(line))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: not a number: {line!r}") from None
    return EnergyTrace(np.array(values), rate, label, None, seed)


def quantize(trace: EnergyTrace) -> EnergyTrace:
    """Round values to the 6-decimal file resolution (what a file round-trip yields)."""
    vals = np.array([float(f"{v:.6f}") for v in trace.values])
    return EnergyTrace(vals, trace.sample_rate, trace.label, trace.scenario, trace.seed)
