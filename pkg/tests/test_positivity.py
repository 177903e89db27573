import numpy as np
import pytest

from adslab.bumps import BoundaryTestFunction
from adslab.errors import ValidationError
from adslab.kernels import spectral_params
from adslab.lattice import LatticeSpec, build_model
from adslab.positivity import (gaussian_functional, gram_reflection,
                               gram_stochastic, perturbed_rp_gram,
                               reflection_scan, renorm_negative_witness,
                               unitarity_witness)


@pytest.fixture(scope="module")
def psd_params():
    # sin(pi nu) < 0 here, so the continued "+" form is positive definite
    return spectral_params(2, 1.25)


def family2(width=0.2):
    return [
        BoundaryTestFunction.single((1.0, 0.0), width, 1.0),
        BoundaryTestFunction.single((2.5, 0.5), width, -0.7),
    ]


def test_stochastic_gram_free_functional_psd(psd_params):
    func = gaussian_functional(psd_params, "+", scale=psd_params.c)
    rep = gram_stochastic(func, family2())
    assert rep.psd
    assert rep.gram.shape == (2, 2)
    assert np.allclose(rep.gram, rep.gram.T)
    assert rep.min_eigenvalue > 0
    d = rep.to_dict()
    assert d["psd"] is True and len(d["family"]) == 2


def test_stochastic_gram_verdict_stable_under_rescaling(psd_params):
    func = gaussian_functional(psd_params, "+", scale=psd_params.c)
    a = gram_stochastic(func, family2())
    b = gram_stochastic(func, [0.5 * f for f in family2()])
    assert a.psd == b.psd


def test_family_size_validation(psd_params):
    func = gaussian_functional(psd_params, "+")
    with pytest.raises(ValidationError):
        gram_stochastic(func, [])
    with pytest.raises(ValidationError):
        gram_stochastic(func, family2() * 4)


def test_reflection_gram_psd_below_threshold():
    # nu < 1: reflection positivity holds for the "-" functional
    # nu = 0.3: positive coefficient and a completely monotone kernel,
    # so the reflected Gram is PSD for any amplitudes
    p = spectral_params(1, -0.16)
    func = gaussian_functional(p, "-")
    fam = [
        BoundaryTestFunction.single(1.0, 0.2, 1.0),
        BoundaryTestFunction.single(2.5, 0.2, -0.7),
    ]
    rep = gram_reflection(func, fam)
    assert rep.psd


def test_reflection_gram_requires_positive_side_supports():
    p = spectral_params(1, 0.0)
    func = gaussian_functional(p, "-")
    bad = [BoundaryTestFunction.single(0.1, 0.2, 1.0)]
    with pytest.raises(ValidationError):
        gram_reflection(func, bad)


def test_reflection_scan_changes_sign_at_unit_nu():
    mins = reflection_scan([0.9, 1.1], d=1)
    assert mins[0] > 0 > mins[1]


def test_unitarity_witness_negative():
    rep = unitarity_witness()
    assert not rep.psd
    assert rep.min_eigenvalue < 0


def test_perturbed_rp_gram_exact_and_stochastic():
    model = build_model(
        LatticeSpec(z0=0.2, A=5.0, l=4.0, d=1, n_z=16, n_x=16, m2=6.25)
    )
    side = np.array([s.x[0] > 0 for s in model.sites])
    rng = np.random.default_rng(1)
    fam = []
    for _ in range(2):
        g = np.zeros(model.n_sites)
        g[side] = 0.3 * rng.normal(size=int(side.sum()))
        fam.append(g)
    free = perturbed_rp_gram(model, 0.0, fam, n=0, seed=0)
    assert free.psd
    assert free.stat_tol == 0.0
    pert = perturbed_rp_gram(model, 0.1, fam, n=4000, seed=7)
    assert pert.psd
    assert pert.stat_tol > 0.0
    again = perturbed_rp_gram(model, 0.1, fam, n=4000, seed=7)
    assert np.array_equal(pert.gram, again.gram)
    # coefficients on the wrong side are rejected
    bad = [np.ones(model.n_sites)]
    with pytest.raises(ValidationError):
        perturbed_rp_gram(model, 0.0, bad, n=0, seed=0)


def test_perturbed_rp_gram_needs_even_grid():
    model = build_model(
        LatticeSpec(z0=0.3, A=3.0, l=2.0, d=1, n_z=8, n_x=7, m2=6.25)
    )
    g = np.zeros(model.n_sites)
    with pytest.raises(ValidationError):
        perturbed_rp_gram(model, 0.0, [g], n=0, seed=0)


def test_renorm_negative_witness_finds_violation():
    p = spectral_params(1, 6.25)
    rep = renorm_negative_witness(p, lam=1.0)
    assert not rep.psd
    assert rep.min_eigenvalue < 0
    # the free (lam = 0) functional stays PSD where the continued form
    # is positive definite (sin pi nu < 0): the search finds nothing
    from adslab.errors import NumericalError
    with pytest.raises(NumericalError):
        renorm_negative_witness(spectral_params(2, 1.25), lam=0.0)
