import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skewthermo.dimension import (
    DimensionReport,
    MassDeficitError,
    PressureCurve,
    beta_fiber_dimension,
    beta_global_dimension,
    bowen_parameter,
    box_counting_dimension,
    conditional_fiber_sample,
    cylinder_cover,
    entropy_over_lyapunov,
    global_dimension,
    hd_equilibrium_fiber,
    hd_hat_mu_s,
    local_dimension_estimate,
    lyapunov,
    partition_frequencies,
    sample_pressure_curve,
)
from skewthermo.diophantine import mu_s_chain, mu_s_digit_sampler, orbit_integrals
from skewthermo.systems import GOLDEN, AffineIFS, BetaSystem, GaussIFS, ParabolicSystem, gls_partition_from_beta
from skewthermo.thermo import GibbsMarkov

LOG23 = math.log(2) / math.log(3)
CHI_GAUSS = math.pi ** 2 / (6 * math.log(2))


def test_report_validation():
    with pytest.raises(ValueError):
        DimensionReport(1.0, "guess")
    with pytest.raises(ValueError):
        DimensionReport(-0.1, "bowen-root")
    nested = global_dimension(DimensionReport(0.4, "h-over-chi"), DimensionReport(0.6, "h-over-chi"))
    assert nested.value == pytest.approx(1.0)
    assert nested.to_dict()["inputs"]["fiber"]["value"] == 0.4


def test_bowen_examples():
    rep = bowen_parameter(AffineIFS.cantor())
    assert rep.value == pytest.approx(LOG23, abs=1e-9)
    assert rep.inputs["bracket"][0] <= LOG23 <= rep.inputs["bracket"][1]
    assert bowen_parameter(AffineIFS([0.4], [0.0])).value == 0.0
    e2 = bowen_parameter(GaussIFS([1, 2]))
    assert e2.value == pytest.approx(0.5313, abs=5e-3)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(0.05, 0.45), min_size=2, max_size=4))
def test_bowen_root_solves_moran_equation(ratios):
    offsets = np.cumsum([0.0] + ratios[:-1])
    if offsets[-1] + ratios[-1] > 1:
        return
    t = bowen_parameter(AffineIFS(ratios, offsets)).value
    assert sum(r ** t for r in ratios) == pytest.approx(1.0, abs=1e-9)


def test_bowen_no_zero_diagnostic():
    # heavily overlapping branches: 2 * 0.9^t = 1 only at t = 6.58
    overlap = AffineIFS([0.9, 0.9], [0.0, 0.1])
    rep = bowen_parameter(overlap, t_max=4.0)
    assert rep.value == 4.0 and math.isinf(rep.uncertainty) and rep.diagnostics
    assert bowen_parameter(overlap).value == pytest.approx(math.log(2) / -math.log(0.9), abs=1e-9)


def test_pressure_curves_are_decreasing_and_convex():
    for ifs, ts in [
        (AffineIFS.cantor(), np.linspace(0, 3, 13)),
        (GaussIFS(500), np.linspace(0.55, 3, 15)),
        (ParabolicSystem(1.0, 300), np.linspace(0.55, 3, 12)),
    ]:
        curve = sample_pressure_curve(ifs, ts, workers=2)
        assert curve.strictly_decreasing(0.0)
        assert curve.convex(-1e-8)
        assert curve.bracket() is not None
        assert len(curve.rows()) == len(ts)


def test_pressure_curve_summable_mask():
    c = PressureCurve(np.array([0.4, 0.6, 1.0]), np.array([5.0, 1.0, 0.0]), 10, np.zeros(3), 0.5)
    assert list(c.summable) == [False, True, True]
    assert c.strictly_decreasing()


def test_lyapunov_examples():
    mu = GibbsMarkov.bernoulli([0.5, 0.5])
    chi = lyapunov(mu, AffineIFS.cantor())
    assert chi.value == pytest.approx(math.log(3)) and chi.error == pytest.approx(0.0, abs=1e-12)
    gls = gls_partition_from_beta(BetaSystem(GOLDEN), 2)
    m = 0.3
    chi = lyapunov(GibbsMarkov.bernoulli([1 - m, m]), gls.ifs())
    assert chi.value == pytest.approx(math.log(GOLDEN) * (1 + m))


def test_gauss_chain_lyapunov():
    mu = mu_s_chain(1.0, 2, 1000)
    chi = lyapunov(mu, GaussIFS(1000))
    assert chi.value == pytest.approx(CHI_GAUSS, rel=0.01)
    rep = entropy_over_lyapunov(mu, GaussIFS(1000))
    assert rep.value == pytest.approx(1.0, abs=0.01)


def test_equilibrium_fiber_examples():
    rep = hd_equilibrium_fiber(1.0, GaussIFS(1000))
    assert rep.value == pytest.approx(1.0, abs=0.01)
    assert rep.inputs["chi"] == pytest.approx(CHI_GAUSS, rel=0.01)
    assert abs(rep.value - 1.0) <= rep.uncertainty + 1e-3
    cantor = AffineIFS.cantor()
    for s in (LOG23, 1.0, 8.0):  # equal ratios: every equilibrium state is the uniform one
        assert hd_equilibrium_fiber(s, cantor).value == pytest.approx(LOG23, abs=1e-7)
    uneven = AffineIFS([0.2, 0.5], [0.0, 0.5])
    mu_weights = np.array([0.2, 0.5]) ** 3.0
    mu = GibbsMarkov.bernoulli(mu_weights / mu_weights.sum())
    assert hd_equilibrium_fiber(3.0, uneven).value == pytest.approx(entropy_over_lyapunov(mu, uneven).value, abs=1e-7)


def test_equilibrium_from_curve_and_ill_conditioning():
    curve = sample_pressure_curve(AffineIFS.cantor(), [0.5, 1.0])
    assert hd_equilibrium_fiber(1.0, curve).value == pytest.approx(LOG23, abs=1e-7)
    with pytest.raises(ValueError):
        hd_equilibrium_fiber(0.5, GaussIFS(100))  # the difference stencil crosses the summability boundary


def test_global_dimension_of_gauss_extension():
    fiber = hd_equilibrium_fiber(1.0, GaussIFS(1000))
    assert global_dimension(fiber, fiber).value == pytest.approx(2.0, abs=0.02)
    with pytest.raises(ValueError):
        global_dimension(DimensionReport(math.inf, "h-over-chi"), fiber)


@pytest.fixture(scope="module")
def streams():
    return {s: mu_s_digit_sampler(s, 2, 200, seed=5, n=400_064) for s in (1.0, 0.75)}


def test_hd_hat_at_one(streams):
    fiber = hd_equilibrium_fiber(1.0, GaussIFS(200))
    orbit = orbit_integrals(streams[1.0], 400_000)
    rep = hd_hat_mu_s(1.0, orbit, fiber)
    assert rep.value == pytest.approx(2.0, rel=0.02)
    assert orbit.mean_log_fiber == pytest.approx(fiber.inputs["chi"] / 2, rel=0.02)


def test_hd_hat_below_one(streams):
    fiber = hd_equilibrium_fiber(0.75, GaussIFS(200))
    rep = hd_hat_mu_s(0.75, orbit_integrals(streams[0.75], 400_000), fiber)
    assert 0 < rep.value < 2
    at_one = hd_hat_mu_s(1.0, orbit_integrals(streams[1.0], 400_000), hd_equilibrium_fiber(1.0, GaussIFS(200)))
    assert rep.value < at_one.value


def test_beta_dimension_examples():
    golden = BetaSystem(GOLDEN)
    m = 0.35
    rep = beta_fiber_dimension([1 - m, m], golden, h=0.5)
    assert rep.inputs["denominator"] == pytest.approx(math.log(GOLDEN) * (1 + m))
    assert beta_fiber_dimension([1.0, 0.0], golden, h=0.5).inputs["denominator"] == pytest.approx(math.log(GOLDEN))
    dyadic = beta_fiber_dimension([0.5, 0.5], BetaSystem(2.0), h=math.log(2))
    assert dyadic.inputs["denominator"] == pytest.approx(math.log(2)) and dyadic.value == pytest.approx(1.0)
    assert beta_global_dimension([0.5, 0.5], BetaSystem(2.0), h=math.log(2)).value == pytest.approx(2.0)


def test_beta_dimension_mass_checks():
    with pytest.raises(MassDeficitError):
        beta_fiber_dimension([0.5, 0.3], BetaSystem(GOLDEN), h=0.5)
    with pytest.raises(ValueError):
        beta_fiber_dimension([0.7, 0.7], BetaSystem(GOLDEN), h=0.5)
    with pytest.raises(ValueError):
        beta_fiber_dimension([1.0, 0.0, 0.0], BetaSystem(GOLDEN), h=0.5)  # only two intervals exist
    small = beta_fiber_dimension([0.6, 0.3999995], BetaSystem(GOLDEN), h=0.5)
    assert small.inputs["mass_deficit"] == pytest.approx(5e-7)


def test_partition_frequencies_of_lebesgue(rng):
    gls = gls_partition_from_beta(BetaSystem(GOLDEN), 2)
    freq = partition_frequencies(gls, rng.random(200_000))
    assert freq == pytest.approx([1 / GOLDEN, GOLDEN ** -2], abs=5e-3)


def test_local_dimension_uniform_and_cantor(rng):
    u = local_dimension_estimate(rng.random(10_000))
    assert u.value == pytest.approx(1.0, abs=0.02)
    addr = rng.integers(0, 2, (10_000, 40))
    pts = (2 * addr * 3.0 ** -np.arange(1, 41)).sum(axis=1)
    c = local_dimension_estimate(pts)
    assert c.value == pytest.approx(LOG23, abs=0.02)
    assert c.uncertainty > 0 and c.formula == "empirical-slope"


def test_local_dimension_rejects_tiny_samples():
    with pytest.raises(ValueError):
        local_dimension_estimate(np.array([0.1, 0.2]))


def test_conditional_fiber_sample_in_unit_interval(rng):
    mu = mu_s_chain(0.75, 2, 50)
    pts = conditional_fiber_sample(mu, 500, rng)
    assert pts.shape == (500,) and np.all((pts > 0) & (pts < 1))
    # a forward symbol pins the fiber; points are continued fractions [d_1, d_2, ...] of the past
    same = conditional_fiber_sample(mu, 500, np.random.default_rng(1), forward=3)
    again = conditional_fiber_sample(mu, 500, np.random.default_rng(1), forward=3)
    assert np.array_equal(same, again)


def test_cylinder_cover_and_box_counting():
    lo, hi = cylinder_cover(AffineIFS.cantor(), 6)
    assert len(lo) == 64 and np.all(hi - lo == pytest.approx(3.0 ** -6))
    rep = box_counting_dimension(AffineIFS.cantor(), depth=12, k_lo=4, k_hi=14)
    assert rep.value == pytest.approx(LOG23, abs=0.02)
