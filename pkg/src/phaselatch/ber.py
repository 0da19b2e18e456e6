"""Bit-error probability of level vs phase encoding under fixed-amplitude noise.

Noise has a fixed amplitude ``n`` and a random sign (LEVEL) or a uniformly
random phase (PHASE).  A phase-encoded bit only errs when the noise phasor
pushes the sum past +-90 degrees, i.e. when ``s + n cos(theta) < 0``.
"""
from __future__ import annotations

import csv
import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigInvalid

CHUNK = 1 << 20


class Encoding(enum.Enum):
    LEVEL = "LEVEL"
    PHASE = "PHASE"


@dataclass(frozen=True)
class NoiseScenario:
    signal_amplitude: float
    noise_amplitude: float
    encoding: Encoding
    trials: int = 1_000_000
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "encoding", Encoding(self.encoding))
        object.__setattr__(self, "trials", int(self.trials))
        if not self.signal_amplitude > 0:
            raise ConfigInvalid("signal amplitude must be positive")
        if not self.noise_amplitude >= 0:
            raise ConfigInvalid("noise amplitude must be nonnegative")
        if self.trials < 1:
            raise ConfigInvalid("trials must be >= 1")


@dataclass(frozen=True)
class BerResult:
    analytic_ber: float
    empirical_ber: float
    trials: int
    half_width_95: float
    errors: int = 0
    seed: int = 0


def analytic_ber(sc: NoiseScenario) -> float:
    s, n = sc.signal_amplitude, sc.noise_amplitude
    if sc.encoding is Encoding.LEVEL:
        if n < s:
            return 0.0
        return 0.25 if n == s else 0.5
    if n <= s:
        return 0.0
    return math.acos(s / n) / math.pi


def _count_errors(sc: NoiseScenario, seed_seq: np.random.SeedSequence, size: int) -> int:
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    s, n = sc.signal_amplitude, sc.noise_amplitude
    if sc.encoding is Encoding.LEVEL:
        noise = np.where(rng.integers(0, 2, size, dtype=np.int8) == 1, n, -n)
        total = s + noise
        # exact cancellation: the decoder guesses
        ties = total == 0
        n_ties = int(ties.sum())
        coin = int(rng.integers(0, 2, n_ties).sum()) if n_ties else 0
        return int((total < 0).sum()) + coin
    theta = rng.uniform(0.0, 2.0 * math.pi, size)
    return int((s + n * np.cos(theta) < 0).sum())


def monte_carlo_ber(sc: NoiseScenario, workers: int = 1) -> BerResult:
    """Empirical error rate.

    Trials are cut into fixed-size chunks, each with its own substream spawned
    from the scenario seed, so the count does not depend on ``workers``.
    """
    sizes = [CHUNK] * (sc.trials // CHUNK)
    if sc.trials % CHUNK:
        sizes.append(sc.trials % CHUNK)
    streams = np.random.SeedSequence(sc.rng_seed).spawn(len(sizes))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            counts = list(pool.map(lambda a: _count_errors(sc, *a), zip(streams, sizes)))
    else:
        counts = [_count_errors(sc, ss, size) for ss, size in zip(streams, sizes)]
    errors = sum(counts)
    p = errors / sc.trials
    hw = 1.96 * math.sqrt(p * (1 - p) / sc.trials)
    return BerResult(analytic_ber(sc), p, sc.trials, hw, errors, sc.rng_seed)


@dataclass(frozen=True)
class SweepRow:
    encoding: str
    n_over_s: float
    analytic: float
    empirical: float
    trials: int
    half_width: float


def ber_sweep(encodings, ratios, trials: int = 1_000_000, seed: int = 0,
              workers: int = 1) -> list[SweepRow]:
    """One Monte Carlo cell per (encoding, n/s), signal amplitude fixed at 1."""
    ratios = [float(r) for r in ratios]
    if not ratios or any(r < 0 for r in ratios):
        raise ConfigInvalid("ratio grid must be nonempty and nonnegative")
    # one child seed per cell keeps cells independent and order-stable
    children = np.random.SeedSequence(seed).spawn(len(encodings) * len(ratios))
    rows = []
    k = 0
    for enc in encodings:
        enc = Encoding(enc)
        for r in ratios:
            cell_seed = int(children[k].generate_state(1, np.uint64)[0])
            k += 1
            res = monte_carlo_ber(NoiseScenario(1.0, r, enc, trials, cell_seed), workers)
            rows.append(SweepRow(enc.value, r, res.analytic_ber, res.empirical_ber, trials,
                                 res.half_width_95))
    return rows


def write_sweep_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["encoding", "n_over_s", "analytic", "empirical", "trials", "half_width"])
        for r in rows:
            w.writerow([r.encoding, repr(r.n_over_s), f"{r.analytic:.17g}", f"{r.empirical:.17g}",
                        r.trials, f"{r.half_width:.17g}"])


def sweep_to_dicts(rows) -> list[dict]:
    return [asdict(r) for r in rows]
