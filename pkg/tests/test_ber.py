import numpy as np
import pytest

from phaselatch.ber import (
    Encoding,
    NoiseScenario,
    analytic_ber,
    ber_sweep,
    monte_carlo_ber,
    write_sweep_csv,
)
from phaselatch.errors import ConfigInvalid


def phase_oracle(s, n, m=200_000):
    # midpoint rule over the uniform noise phase
    theta = (np.arange(m) + 0.5) * 2 * np.pi / m
    return float(np.mean(s + n * np.cos(theta) < 0))


@pytest.mark.parametrize("r", [0.0, 0.5, 1.0, 1.2, 2.0, 5.0])
def test_phase_analytic_matches_quadrature(r):
    assert analytic_ber(NoiseScenario(1.0, r, "PHASE")) == pytest.approx(phase_oracle(1.0, r), abs=1e-5)


def test_named_values():
    assert analytic_ber(NoiseScenario(1.0, 2.0, "PHASE")) == pytest.approx(1 / 3)
    assert analytic_ber(NoiseScenario(1.0, 0.5, "LEVEL")) == 0.0
    assert analytic_ber(NoiseScenario(1.0, 1.0, "LEVEL")) == 0.25
    assert analytic_ber(NoiseScenario(1.0, 3.0, "LEVEL")) == 0.5


def test_phase_large_noise_limit():
    assert analytic_ber(NoiseScenario(1.0, 1e6, "PHASE")) == pytest.approx(0.5, abs=1e-6)


@pytest.mark.parametrize("enc, r", [("PHASE", 2.0), ("PHASE", 1.3), ("LEVEL", 2.0), ("LEVEL", 1.0)])
def test_monte_carlo_within_interval(enc, r):
    res = monte_carlo_ber(NoiseScenario(1.0, r, enc, trials=400_000, rng_seed=7))
    assert abs(res.empirical_ber - res.analytic_ber) <= max(2 * res.half_width_95, 1e-3)


def test_zero_noise_is_error_free():
    for enc in Encoding:
        assert monte_carlo_ber(NoiseScenario(1.0, 0.0, enc, trials=1000)).errors == 0


def test_determinism_independent_of_workers():
    sc = NoiseScenario(1.0, 1.5, "PHASE", trials=(1 << 20) * 2 + 123, rng_seed=3)
    a = monte_carlo_ber(sc, workers=1)
    b = monte_carlo_ber(sc, workers=3)
    assert a == b
    c = monte_carlo_ber(NoiseScenario(1.0, 1.5, "PHASE", trials=sc.trials, rng_seed=4))
    assert c.errors != a.errors


def test_sweep_csv_is_reproducible(tmp_path):
    paths = []
    for k in range(2):
        rows = ber_sweep(["LEVEL", "PHASE"], [0.5, 1.0, 2.0], trials=20_000, seed=11)
        p = tmp_path / f"s{k}.csv"
        write_sweep_csv(rows, p)
        paths.append(p)
    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert len(rows) == 6 and rows[0].encoding == "LEVEL"


@pytest.mark.parametrize("kw", [dict(signal_amplitude=0.0), dict(noise_amplitude=-1.0),
                                dict(trials=0)])
def test_scenario_validation(kw):
    base = dict(signal_amplitude=1.0, noise_amplitude=1.0, encoding="PHASE")
    with pytest.raises(ConfigInvalid):
        NoiseScenario(**{**base, **kw})
    with pytest.raises(ConfigInvalid):
        ber_sweep(["PHASE"], [], trials=10)
