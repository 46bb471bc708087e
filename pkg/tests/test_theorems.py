import numpy as np
import pytest

from charlab.charfn import GridSpec
from charlab.distributions import GaussianDist, ScalarFamily, point_mass, sample, ProductDist, Pushforward
from charlab.errors import PreconditionError
from charlab.theorems import (CONSISTENT, INCONCLUSIVE, VIOLATION, ExperimentSpec, adjudicate, gaussianity_check,
                              run, run_heyde, run_sample_mean_residue, run_skitovich_darmois, run_theorem3)

I2 = np.eye(2)


def gauss(d=1, mean=0.0):
    return GaussianDist(np.full(d, mean), np.eye(d))


def test_sd_gaussian_d2():
    spec = ExperimentSpec("sd", (gauss(2), gauss(2)), A=(I2, I2), B=(I2, I2), replays=2)
    v = run_skitovich_darmois(spec)
    assert v.conclusion == CONSISTENT and v.preconditions_ok
    c = v.certificate("lemma1")
    assert c.verdict == "polynomial" and c.D == 2
    assert all(g.gaussian for g in v.gaussianity)
    assert v.elimination["ok"]


def test_sd_uniform_contrapositive():
    u = ScalarFamily("uniform", {}, 1)
    v = run_skitovich_darmois(ExperimentSpec("sd", (u, u), A=(1, 1), B=(1, -1), replays=1))
    assert v.conclusion == CONSISTENT
    assert v.certificate("lemma1").verdict == "not_polynomial"
    assert all(g.gaussian is False for g in v.gaussianity)


def test_sd_coupled_gaussian():
    spec = ExperimentSpec("sd", (gauss(), gauss()), A=(1, 1), B=(1, -1), coupling={(0, 1): np.array([[0.3]])},
                          replays=1)
    v = run_skitovich_darmois(spec)
    assert v.conclusion == CONSISTENT
    c = v.certificate("lemma1")
    assert c.verdict == "polynomial" and c.D <= 2
    q = v.certificate("q_input")
    assert q.verdict == "polynomial" and q.D == 2


def test_sd_singular_operator_named():
    spec = ExperimentSpec("sd", (gauss(), gauss()), A=(0, 1), B=(1, -1))
    with pytest.raises(PreconditionError, match="A_1"):
        run_skitovich_darmois(spec)


def test_sd_reduction_invariance():
    lap, ex = ScalarFamily("laplace", {}, 1), ScalarFamily("exponential", {}, 1)
    A, B = (2.0, 0.5), (1.0, -1.5)
    a = run_skitovich_darmois(ExperimentSpec("sd", (lap, ex), A=A, B=B, replays=1))
    pushed = tuple(Pushforward(m, np.array([[a]])) for m, a in zip((lap, ex), A))
    b = run_skitovich_darmois(ExperimentSpec("sd", pushed, A=(1, 1), B=tuple(y / x for x, y in zip(A, B)),
                                             replays=1))
    # substituting xi'_j = A_j xi_j by hand must not change a single certificate
    assert a.conclusion == b.conclusion
    assert [c.to_dict() for c in a.certificates] == [c.to_dict() for c in b.certificates]


def test_heyde_gaussian():
    v = run_heyde(ExperimentSpec("heyde", (gauss(), gauss()), A=(1, 1), B=(1, 2), replays=2))
    assert v.conclusion == CONSISTENT and v.elimination["ok"]


def test_heyde_laplace():
    lap = ScalarFamily("laplace", {}, 1)
    v = run_heyde(ExperimentSpec("heyde", (lap, lap), A=(1, 1), B=(1, 2), replays=1))
    assert v.conclusion == CONSISTENT
    assert v.certificate("lemma4").verdict == "not_polynomial"


def test_heyde_rejected_is_inconclusive():
    v = run_heyde(ExperimentSpec("heyde", (gauss(), gauss()), A=(1, 1), B=(1, -1)))
    assert v.conclusion == INCONCLUSIVE and not v.preconditions_ok
    assert any("pair (1, 2)" in d for d in v.diagnostics)


def test_theorem3_diag():
    spec = ExperimentSpec("thm3", (gauss(2), gauss(2)), C=np.diag([2.0, 3.0]), replays=1)
    v = run_theorem3(spec)
    assert v.conclusion == CONSISTENT


def test_theorem3_scalar():
    assert run_theorem3(ExperimentSpec("thm3", (gauss(), gauss()), C=2.0, replays=1)).conclusion == CONSISTENT


def test_theorem3_minus_identity():
    with pytest.raises(PreconditionError, match="I \\+ C"):
        run_theorem3(ExperimentSpec("thm3", (gauss(), gauss()), C=-1.0))


@pytest.mark.parametrize("n", [2, 3])
def test_sample_mean_gaussian(n):
    v = run_sample_mean_residue(ExperimentSpec("sample_mean", (gauss(),) * n, replays=1))
    assert v.conclusion == CONSISTENT
    c = v.certificate("lemma6")
    assert c.verdict == "polynomial" and c.D == 0
    if n == 2:
        assert any(c.equation == "lemma1" for c in v.certificates)


def test_sample_mean_exponential():
    ex = ScalarFamily("exponential", {}, 1)
    v = run_sample_mean_residue(ExperimentSpec("sample_mean", (ex,) * 3, replays=1))
    assert v.conclusion == CONSISTENT
    assert v.certificate("lemma6").verdict == "not_polynomial"


def test_sample_mean_floor_starvation():
    u = ScalarFamily("uniform", {}, 1)
    v = run_sample_mean_residue(ExperimentSpec("sample_mean", (u,) * 3, grid=GridSpec(floor=0.999), replays=1))
    assert v.conclusion in (CONSISTENT, INCONCLUSIVE)


def test_run_dispatch_and_dict():
    v = run(ExperimentSpec("sd", (gauss(), gauss()), A=(1, 1), B=(1, 1), replays=1, seed=9))
    d = v.to_dict()
    assert d["seed"] == 9 and d["conclusion"] == CONSISTENT
    assert set(d) >= {"theorem", "preconditions", "certificates", "gaussianity", "elimination", "timing_ms"}


def test_empirical_gaussian_sd():
    spec = ExperimentSpec("sd", (gauss(), gauss()), A=(1, 1), B=(1, -1), source="empirical", N=50_000,
                          bootstrap=100, seed=3)
    assert run(spec).conclusion == CONSISTENT


def test_verdicts_deterministic():
    u = ScalarFamily("uniform", {}, 1)
    spec = ExperimentSpec("sd", (u, u), A=(1, 1), B=(1, -1), source="empirical", N=20_000, bootstrap=50, seed=5)
    a, b = run(spec).to_dict(), run(spec).to_dict()
    a.pop("timing_ms"), b.pop("timing_ms")
    assert a == b


def test_adjudicate_rules():
    class C:
        def __init__(self, verdict, equation="r"):
            self.verdict, self.equation = verdict, equation

    class G:
        def __init__(self, gaussian):
            self.gaussian = gaussian

    poly, notp, inc = C("polynomial"), C("not_polynomial"), C("inconclusive")
    side = C("not_polynomial", "side")
    ok = [G(True)]
    assert adjudicate(True, True, [poly], ["r"], ok, True) == CONSISTENT
    assert adjudicate(True, True, [notp], ["r"], ok, True) == VIOLATION
    assert adjudicate(True, True, [poly], ["r"], [G(False)], True) == VIOLATION
    assert adjudicate(True, True, [poly], ["r"], ok, False) == VIOLATION
    assert adjudicate(True, False, [poly], ["r"], [G(None)], None) == INCONCLUSIVE
    assert adjudicate(False, True, [poly], ["r"], [G(False)], None) == VIOLATION
    assert adjudicate(False, False, [poly], ["r"], [G(False)], None) == INCONCLUSIVE
    assert adjudicate(False, False, [notp, C("polynomial", "side")], ["r"], [G(False)], None) == CONSISTENT
    assert adjudicate(False, False, [inc, side], ["r"], [G(None)], None) == INCONCLUSIVE


def test_gaussianity_exact_gaussian():
    R = np.array([[2.0, 0.5, 0], [0.5, 1.0, 0.2], [0, 0.2, 0.7]])
    rep = gaussianity_check(GaussianDist(np.array([0.1, -1, 2]), R))
    assert rep.gaussian and rep.max_deviation <= 1e-10


def test_gaussianity_point_mass():
    rep = gaussianity_check(point_mass(np.array([1.0, -2.0])))
    assert rep.gaussian


def test_gaussianity_exact_laplace():
    rep = gaussianity_check(ScalarFamily("laplace", {}, 1))
    assert rep.gaussian is False


def test_gaussianity_bimodal_samples():
    mix = ScalarFamily("mixture", {"w": 0.8, "m1": -5.0, "m2": 5.0, "sigma": 0.5}, 1)
    x = sample(ProductDist((mix,)), 100_000, seed=0)
    rep = gaussianity_check(x)
    assert rep.gaussian is False and rep.rejected_fraction >= 0.9


def test_gaussianity_gaussian_samples():
    x = sample(ProductDist((gauss(2),)), 100_000, seed=0)
    rep = gaussianity_check(x, symmetric=True)
    assert rep.gaussian
