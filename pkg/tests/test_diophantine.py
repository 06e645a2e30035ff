import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skewthermo.diophantine import (
    DEFAULT_T_GRID,
    birkhoff_lyapunov,
    cf_expand,
    dl_cdf,
    dl_experiment,
    load_chain,
    lyapunov_from_convergents,
    mu_s_chain,
    mu_s_digit_sampler,
    natural_extension_orbit,
    orbit_integrals,
    rectangle_frequency,
    save_chain,
    theta_pair_frequency,
    theta_pair_scaling,
    theta_series,
)
from skewthermo.dimension import hd_equilibrium_fiber
from skewthermo.systems import GaussIFS

GOLD = (math.sqrt(5) - 1) / 2
CHI_GAUSS = math.pi ** 2 / (6 * math.log(2))


def test_cf_expand_examples():
    g = cf_expand(GOLD, 30)
    assert set(g.digits) == {1} and len(g) == 30
    fib = [1, 1]
    while len(fib) < 32:
        fib.append(fib[-1] + fib[-2])
    assert [g.convergent(k) for k in range(1, 10)] == [Fraction(fib[k - 1], fib[k]) for k in range(1, 10)]
    r = cf_expand(Fraction(2, 5), 10)
    assert r.digits == (2, 2) and r.terminated
    with pytest.raises(ValueError):
        cf_expand(1.5, 3)


@given(st.fractions(min_value=Fraction(1, 10**9), max_value=Fraction(10**9 - 1, 10**9)))
def test_rational_expansions_terminate_exactly(x):
    e = cf_expand(x, 200)
    assert e.terminated and e.convergent(len(e)) == x


def test_theta_limits():
    mpmath.mp.dps = 60
    try:
        golden = theta_series((mpmath.sqrt(5) - 1) / 2, 50)
        silver = theta_series(mpmath.sqrt(2) - 1, 50)
    finally:
        mpmath.mp.dps = 15
    assert abs(golden.theta[-1] - 1 / math.sqrt(5)) < 1e-6
    assert abs(silver.theta[-1] - 1 / (2 * math.sqrt(2))) < 1e-6
    assert np.all(golden.theta < 1) and np.all(silver.theta < 1)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 2**64 - 1))
def test_theta_identities_exact(num):
    x = Fraction(num, 2**64)
    ser = theta_series(x, 40)
    assert ser.exact or ser.n == 0  # 2^-64 has a single digit and no coefficients before it
    assert ser.residual < 1e-12 and ser.v_residual < 1e-12
    assert np.all(ser.theta < 1)


def test_theta_float_input_is_exact_dyadic():
    ser = theta_series(0.1234567, 30)
    assert ser.exact and ser.residual < 1e-12


def test_dl_cdf_values():
    assert dl_cdf(0.5) == pytest.approx(0.5 / math.log(2))
    assert dl_cdf(1.0) == pytest.approx(1.0)
    assert dl_cdf(0.0) == 0.0
    with pytest.raises(ValueError):
        dl_cdf(1.2)


@given(st.floats(0, 1), st.floats(0, 1))
def test_dl_cdf_is_monotone_and_continuous(a, b):
    a, b = sorted((a, b))
    assert dl_cdf(a) <= dl_cdf(b) + 1e-15
    assert dl_cdf(b) - dl_cdf(a) <= (b - a) / math.log(2) + 1e-12


def test_dl_experiment_small_is_deterministic():
    a = dl_experiment(8, 20_000, seed=4, workers=1)
    b = dl_experiment(8, 20_000, seed=4, workers=4)
    assert np.array_equal(a.counts, b.counts)
    assert a.at(1.0) == 1.0
    assert a.max_deviation < 0.01
    assert len(a.rows()) == len(DEFAULT_T_GRID)
    with pytest.raises(KeyError):
        a.at(0.123)


def test_dl_experiment_paper_points():
    res = dl_experiment(20, 200_000, seed=9, ts=[0.25, 0.5, 1.0])
    assert res.at(0.5) == pytest.approx(0.7213, abs=0.005)
    assert res.at(0.25) == pytest.approx(0.3607, abs=0.005)
    assert res.at(1.0) == 1.0


def test_birkhoff_lyapunov():
    b = birkhoff_lyapunov(2_000_000, seed=3)
    assert b.value == pytest.approx(CHI_GAUSS, rel=0.01)
    assert abs(b.value - CHI_GAUSS) < 5 * b.stderr
    with pytest.raises(ValueError):
        birkhoff_lyapunov(10, seed=0, orbits=1)


@pytest.fixture(scope="module")
def gauss_stream():
    return mu_s_digit_sampler(1.0, 3, 200, seed=21, n=1_000_064)


def test_stream_digit_one_frequency(gauss_stream):
    assert gauss_stream.digits.min() >= 1 and gauss_stream.digits.max() <= 200
    assert np.mean(gauss_stream.digits == 1) == pytest.approx(math.log2(4 / 3), rel=0.02)
    ones = [np.mean(mu_s_digit_sampler(s, 2, 50, seed=1, n=100_000).digits == 1) for s in (1.0, 2.0, 3.0, 5.0)]
    assert ones == sorted(ones) and ones[-1] > 0.95
    heavy = mu_s_digit_sampler(3.0, 2, 50, seed=1, n=1000)
    assert heavy.mass_deficit < gauss_stream.mass_deficit


def test_stream_is_reproducible():
    a = mu_s_digit_sampler(0.8, 2, 40, seed=2, n=5000)
    b = mu_s_digit_sampler(0.8, 2, 40, seed=2, n=5000)
    assert np.array_equal(a.digits, b.digits)
    with pytest.raises(ValueError):
        mu_s_chain(0.5, 2, 10)


def test_chain_cache_round_trip(tmp_path):
    mu = mu_s_chain(0.9, 2, 30)
    save_chain(mu, tmp_path / "c.npz")
    back = load_chain(tmp_path / "c.npz")
    assert np.array_equal(back.pi, mu.pi) and (back.P != mu.P).nnz == 0
    cached = mu_s_chain(0.9, 2, 31, cache_dir=tmp_path)
    assert len(list(tmp_path.glob("*.npz"))) == 2
    assert np.array_equal(mu_s_chain(0.9, 2, 31, cache_dir=tmp_path).pi, cached.pi)


def test_rectangle_frequency(gauss_stream):
    n = 1_000_000
    full = rectangle_frequency(gauss_stream, 1000, ((0, 1), (0, 1)))
    assert full.frequency == 1.0
    rect = ((0, 0.5), (0, 0.5))
    stream = rectangle_frequency(gauss_stream, n, rect)
    lebesgue = rectangle_frequency(0.5772156649015329, n, rect)
    assert abs(stream.frequency - lebesgue.frequency) < 0.005
    assert stream.seed == 21
    golden = rectangle_frequency(np.ones(600, dtype=np.int64), 500, rect)  # x = [1, 1, 1, ...]
    assert golden.frequency == 0.0 and lebesgue.frequency > 0.3  # the fixed point (0.618, 0.618) is atypical
    with pytest.raises(ValueError):
        rectangle_frequency(gauss_stream, 10, ((0.5, 0.2), (0, 1)))


def test_natural_extension_orbit_matches_exact_steps():
    x = Fraction(31415926535897932384626433832795028841, 10**38)
    T, V, digits = natural_extension_orbit(x, 8)
    t, v = x, Fraction(0)
    for k in range(8):
        inv = 1 / t
        t, v = inv - math.floor(inv), 1 / (math.floor(inv) + v)
        assert T[k] == pytest.approx(float(t), abs=1e-15) and V[k] == pytest.approx(float(v), abs=1e-15)


def test_theta_pairs_at_one(gauss_stream):
    radii = [2.0 ** -j for j in range(3, 8)]
    summary = theta_pair_scaling(gauss_stream, 1_000_000, radii, pairs=16, seed=0)
    assert summary.slope == pytest.approx(2.0, rel=0.10)
    assert summary.sandwiched


def test_theta_pair_frequency_stabilizes():
    radii = [0.05]
    z, zp = 0.35, 0.45
    a = [mu_s_digit_sampler(1.0, 2, 200, seed=s, n=300_064) for s in (1, 2)]
    fa = [theta_pair_frequency(d, 300_000, z, zp, radii) for d in a]
    se = math.sqrt(sum(f.frequencies[0] * (1 - f.frequencies[0]) / 300_000 for f in fa))
    assert abs(fa[0].frequencies[0] - fa[1].frequencies[0]) < 3 * se * 3  # orbit correlation inflates the naive SE
    assert fa[0].lower[0] <= fa[0].frequencies[0] <= fa[0].upper[0]
    with pytest.raises(ValueError):
        theta_pair_frequency(a[0], 1000, 0.0, 0.5, radii)


def test_lyapunov_from_convergents():
    g = lyapunov_from_convergents(np.ones(200, dtype=np.int64), 100)
    assert g.magnitude == pytest.approx(2 * math.log((1 + math.sqrt(5)) / 2), rel=0.01)
    r = lyapunov_from_convergents(0.2718281828459045, 100_000)
    assert r.magnitude == pytest.approx(CHI_GAUSS, rel=0.01)
    assert r.value < 0


def test_convergent_rate_at_three_quarters():
    stream = mu_s_digit_sampler(0.75, 2, 200, seed=8, n=400_064)
    chi = hd_equilibrium_fiber(0.75, GaussIFS(200)).inputs["chi"]
    assert lyapunov_from_convergents(stream, 400_000).magnitude == pytest.approx(chi, rel=0.03)
    orbit = orbit_integrals(stream, 400_000)
    assert orbit.chi == pytest.approx(chi, rel=0.03)
