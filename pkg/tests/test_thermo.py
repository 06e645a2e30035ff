import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skewthermo.shift import (
    ConstantPotential,
    IncidenceSpec,
    KStepPotential,
    TruncatedSubshift,
    TwoSidedPotential,
    enumerate_cylinders,
)
from skewthermo.systems import AffineIFS, GaussIFS, GeometricPotential, gauss_geometric_potential
from skewthermo.thermo import (
    ConvergenceError,
    GeometricFamily,
    GibbsMarkov,
    LinearFamily,
    ReducibleError,
    conditional_cylinder_mass,
    discretize,
    equilibrium_markov,
    gibbs_ratio_check,
    past_independent_reduce,
    perron,
    pressure_definition_sequence,
    pressure_derivative,
    pressure_geometric,
    pressure_spectral,
    pressure_sup,
    two_sided_definition_sequence,
)

LOG_GOLDEN = math.log((1 + math.sqrt(5)) / 2)
FULL2 = TruncatedSubshift.full(2)
GOLDEN = TruncatedSubshift.golden_mean()


def test_definition_sequence_full_shift():
    assert pressure_definition_sequence(FULL2, ConstantPotential(0.0), 6) == pytest.approx([math.log(2)] * 6)
    c = -0.3
    assert pressure_definition_sequence(FULL2, ConstantPotential(c), 4) == pytest.approx([math.log(2) + c] * 4)


def test_definition_sequence_golden_converges_to_spectral():
    seq = pressure_definition_sequence(GOLDEN, ConstantPotential(0.0), 200)
    counts = [len(enumerate_cylinders(GOLDEN, n)) for n in range(1, 8)]
    assert seq[:7] == pytest.approx([math.log(c) / n for c, n in zip(counts, range(1, 8))])
    spectral = pressure_spectral(GOLDEN, ConstantPotential(0.0)).value
    assert spectral == pytest.approx(LOG_GOLDEN, abs=1e-12)
    assert abs(seq[-1] - spectral) < 5e-3


def test_spectral_pressure_examples():
    assert pressure_spectral(FULL2, ConstantPotential(0.0)).value == pytest.approx(math.log(2), abs=1e-13)
    cantor = AffineIFS.cantor()
    t = math.log(2) / math.log(3)
    est = pressure_geometric(cantor, t)
    assert abs(est.value) < 1e-12
    pot = GeometricPotential(cantor, t)
    assert abs(pressure_spectral(cantor.subshift(), pot).value) < 1e-12


def test_gauss_truncation_pressure_and_tail():
    p50 = pressure_geometric(GaussIFS(50), 1.0)
    p200 = pressure_geometric(GaussIFS(200), 1.0)
    assert -0.03 < p50.value < p200.value < 0
    assert p50.value + p50.tail_bound >= 0  # the bound covers the gap to the full system


def test_pressure_sup_schedule():
    est = pressure_sup(gauss_geometric_potential(1.0), [50, 200, 1000])
    assert est.sequence == sorted(est.sequence)
    assert est.sequence[-1] < 0 and abs(est.sequence[-1]) < 2e-3
    assert not est.possibly_infinite
    assert pressure_sup(gauss_geometric_potential(0.4), [50, 200]).possibly_infinite
    finite = pressure_sup(GeometricPotential(AffineIFS.cantor(), 1.0), [2])
    assert finite.value == pytest.approx(math.log(2) - math.log(3), abs=1e-13)
    with pytest.raises(ValueError):
        pressure_sup(gauss_geometric_potential(1.0), [200, 50])


def test_reducible_truncation_is_rejected():
    sub = TruncatedSubshift((0, 1), IncidenceSpec.from_pairs((0, 1), [(0, 0), (0, 1), (1, 1)]))
    with pytest.raises(ReducibleError):
        pressure_spectral(sub, ConstantPotential(0.0))


def test_perron_nonconvergence():
    import scipy.sparse as sp
    perm = sp.csr_matrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
    lam, v = perron(perm)  # the shift trick handles periodic matrices
    assert lam == pytest.approx(1.0)
    # nearly degenerate spectral gap: three sweeps cannot settle
    slow = sp.csr_matrix(np.array([[1.0, 1e-3], [1e-3, 0.999]]))
    with pytest.raises(ConvergenceError):
        perron(slow, max_iter=3, patience=2, tol=1e-15)
    with pytest.raises(ConvergenceError):
        perron(sp.csr_matrix(np.zeros((2, 2))))


def test_equilibrium_examples():
    mu = equilibrium_markov(FULL2, ConstantPotential(0.0))
    assert mu.pi == pytest.approx([0.5, 0.5])
    assert mu.entropy == pytest.approx(math.log(2))
    parry = equilibrium_markov(GOLDEN, ConstantPotential(0.0))
    g = (1 + math.sqrt(5)) / 2
    # Parry chain of [[1,1],[1,0]]: P(0,0) = 1/g, stationary (g^2, 1)/(1+g^2)
    assert parry.transition_dense()[0, 0] == pytest.approx(1 / g)
    assert parry.pi == pytest.approx([g * g / (1 + g * g), 1 / (1 + g * g)])
    assert parry.entropy == pytest.approx(LOG_GOLDEN)


def test_gauss_equilibrium_digit_one_mass():
    ifs = GaussIFS(50)
    pot = discretize(GeometricPotential(ifs, 1.0), ifs.subshift(), 2)
    mu = equilibrium_markov(ifs.subshift(), pot)
    assert mu.cylinder_mass((1,)) == pytest.approx(math.log2(4 / 3), rel=0.1)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=4, max_size=4))
def test_equilibrium_is_variational(values):
    """The chain attains h + int psi = P and its rows are stochastic."""
    table = {(a, b): values[2 * a + b] for a in range(2) for b in range(2)}
    pot = KStepPotential.from_table(table)
    mu = equilibrium_markov(FULL2, pot)
    assert mu.entropy + mu.integral == pytest.approx(mu.pressure, abs=1e-10)
    assert np.asarray(mu.P.sum(axis=1)).ravel() == pytest.approx([1.0, 1.0])
    assert mu.pi @ mu.transition_dense() == pytest.approx(mu.pi, abs=1e-12)


def test_gibbs_ratio_bernoulli_and_parry():
    mu = GibbsMarkov.bernoulli([0.5, 0.5])
    words = [w.symbols for n in (1, 3, 6) for w in enumerate_cylinders(FULL2, n)]
    band = gibbs_ratio_check(mu, ConstantPotential(math.log(0.5)), words, FULL2)
    assert band.min_ratio == pytest.approx(1.0) and band.max_ratio == pytest.approx(1.0)
    parry = equilibrium_markov(GOLDEN, ConstantPotential(0.0))
    widths = []
    for n in (2, 6, 10, 14):
        words = [w.symbols for w in enumerate_cylinders(GOLDEN, n)]
        widths.append(gibbs_ratio_check(parry, ConstantPotential(0.0), words, GOLDEN).width)
    # the band is the Perron-vector oscillation; it is reached by n = 3 and never grows
    g = (1 + math.sqrt(5)) / 2
    assert widths[1:] == pytest.approx([g * g] * 3, abs=1e-9)
    assert widths[0] <= g * g


def test_pressure_derivative_examples():
    sub = FULL2
    fam = LinearFamily(sub, ConstantPotential(0.0), ConstantPotential(math.log(0.5)))
    d = pressure_derivative(fam, 0.0, 1.0)
    assert d.dt == pytest.approx(math.log(0.5), abs=1e-9)
    assert d.agreement < d.tolerance
    t = math.log(2) / math.log(3)
    c = pressure_derivative(GeometricFamily(AffineIFS.cantor()), 0.0, t)
    assert c.dt == pytest.approx(-math.log(3), abs=1e-8)
    g = pressure_derivative(GeometricFamily(GaussIFS(1000)), 0.0, 1.0)
    assert -g.dt == pytest.approx(math.pi ** 2 / (6 * math.log(2)), rel=0.01)
    with pytest.raises(ValueError):
        pressure_derivative(GeometricFamily(GaussIFS(50)), 0.0, 0.5 + 1e-5, h=1e-4)
    with pytest.raises(ValueError):
        pressure_derivative(fam, 0.0, 1.0, h=1e-12)


def test_past_independent_reduce():
    one = KStepPotential.from_symbol_values({0: 0.1, 1: -0.4})
    assert past_independent_reduce(one) is one
    a, b = {0: 0.3, 1: -0.2}, {0: -0.5, 1: 0.7}
    two = TwoSidedPotential(-1, 0, lambda w: np.array([a[r[0]] + b[r[1]] for r in w]))
    red = past_independent_reduce(two)
    assert red.kstep == 2
    p = pressure_spectral(FULL2, red).value
    weights = np.array([[math.exp(a[i] + b[j]) for j in range(2)] for i in range(2)])
    assert p == pytest.approx(math.log(max(abs(np.linalg.eigvals(weights)))), abs=1e-12)
    brute = two_sided_definition_sequence(FULL2, two, 8)
    assert abs(brute[-1] - p) < 0.2  # O(1/n) convergence of the cylinder sums
    only_past = TwoSidedPotential(-1, -1, lambda w: np.array([a[r[0]] for r in w]))
    assert pressure_spectral(FULL2, past_independent_reduce(only_past)).value == pytest.approx(
        math.log(math.exp(a[0]) + math.exp(a[1])))


def test_conditional_cylinder_mass():
    mu = GibbsMarkov.bernoulli([0.3, 0.7])
    assert conditional_cylinder_mass(mu, (1, 0, 1), (0,)) == pytest.approx(0.3)
    parry = equilibrium_markov(GOLDEN, ConstantPotential(0.0))
    assert conditional_cylinder_mass(parry, (1, 0), (1,)) == 0.0
    P = np.array([[0.2, 0.8], [0.6, 0.4]])
    chain = GibbsMarkov.from_transition(P)
    assert conditional_cylinder_mass(chain, (0,), (0, 1)) == pytest.approx(P[0, 1] * P[1, 0] * chain.pi[0]
                                                                            / chain.pi[0])


def test_discretize_periodic_error_and_modes():
    ifs = GaussIFS(20)
    pot = GeometricPotential(ifs, 1.0)
    d2 = discretize(pot, ifs.subshift(), 2)
    sup2 = discretize(pot, ifs.subshift(), 2, mode="sup")
    w = np.array([[1, 1], [3, 7]])
    assert np.all(d2.value(w) <= sup2.value(w) + 1e-15)
    assert d2.error == pytest.approx(pot.hoelder[0] * math.exp(-2 * pot.hoelder[1]))
    with pytest.raises(ValueError):
        discretize(pot, ifs.subshift(), 2, mode="mid")
