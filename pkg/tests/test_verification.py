import json

import numpy as np
import pytest

import gbdt.verification as verification
from gbdt.darboux import TransformedHamiltonians
from gbdt.engine import GbdtTriple, HamiltonianFamily, closed_form_example2, evolve
from gbdt.errors import ShapeError
from gbdt.generators import (
    half_plane_matrix,
    random_complex,
    random_family,
    random_triple,
)
from gbdt.scenario import make_scenario
from gbdt.verification import (
    BoxDomain,
    Tolerances,
    check_conservation,
    check_energy_box,
    check_identity,
    check_monotonicity,
    check_pde,
    check_pde_c8,
    check_positivity,
    check_spectrum,
    check_unitarity,
    probe_indices,
    probe_zetas,
    run_suite,
)

TOL = Tolerances()


@pytest.fixture(scope="module")
def scalar_traj():
    from gbdt.generators import scalar_desk

    triple, family = scalar_desk()
    return triple, family, evolve(triple, family, 1.0, 1000)


@pytest.fixture(scope="module")
def example2():
    rng = np.random.default_rng(11)
    a = half_plane_matrix(rng, 4)
    q, _ = np.linalg.qr(random_complex(rng, 2, 2))
    cf, triple = closed_form_example2(a, 0.5 * random_complex(rng, 4, 2), q, [-0.5, 0.5])
    return triple, cf.family, evolve(triple, cf.family, 1.0, 1000)


def in_band(ratio):
    return ratio is not None and TOL.ratio_low <= ratio <= TOL.ratio_high


def test_probe_indices_interior():
    from gbdt.engine import Trajectory

    traj = Trajectory([None] * 201, 0.005)
    idx = probe_indices(traj)
    assert idx == [33, 67, 100, 133, 167]
    with pytest.raises(ValueError):
        probe_indices(Trajectory([None] * 8, 0.1))


def test_probe_zetas_seeded():
    assert np.array_equal(probe_zetas(2, 5), probe_zetas(2, 5))
    assert np.all(np.abs(probe_zetas(3, 1)) <= 1)


def test_tolerance_override():
    tol = TOL.override(pde=1e-4)
    assert tol.pde == 1e-4 and TOL.pde == 1e-3
    with pytest.raises(KeyError):
        TOL.override(bogus=1.0)


def test_box_validation():
    with pytest.raises(ShapeError):
        BoxDomain([(1.0, 0.0)], [10])
    with pytest.raises(ShapeError):
        BoxDomain([(0.0, 1.0)], [1])
    with pytest.raises(ShapeError):
        BoxDomain([(0.0, 1.0)], [4, 4])
    assert BoxDomain([(0, 1), (0, 2)], [5, 3]).refined().grid == (9, 5)


# -- individual checks ------------------------------------------------------------

def test_identity_check(scalar_traj, example2):
    for triple, _, traj in (scalar_traj, example2):
        res = check_identity(traj, triple)
        assert res.verdict == "pass" and res.residual <= 1e-10


def test_unitarity_and_spectrum(example2):
    triple, family, traj = example2
    assert check_unitarity(traj, triple).verdict == "pass"
    assert check_spectrum(traj, triple, family).verdict == "pass"


def test_pde_scalar_second_order(scalar_traj):
    triple, family, traj = scalar_traj
    res = check_pde(traj, triple, family, [[0.0], [1.0]])
    assert res.verdict == "pass" and in_band(res.convergence_ratio)
    assert res.detail["coarse_residual"] > res.residual > 0


def test_pde_zero_eigenfunction_is_exact(stationary):
    triple, family = stationary
    traj = evolve(triple, family, 1.0, 100)
    res = check_pde(traj, triple, family, [[0.5]])
    assert res.residual == 0.0 and res.convergence_ratio is None and res.verdict == "pass"


def test_pde_example2(example2):
    triple, family, traj = example2
    res = check_pde(traj, triple, family, probe_zetas(2, 0))
    assert res.verdict == "pass" and in_band(res.convergence_ratio)
    res = check_pde_c8(traj, triple, family)
    assert res.verdict == "pass" and in_band(res.convergence_ratio)


def test_pde_catches_untransformed_hamiltonians(example2, monkeypatch):
    # guard: feeding H instead of H~ must fail, so the residual is not trivially small
    triple, family, traj = example2

    def untransformed(state, triple, family, max_cond=None):
        return TransformedHamiltonians(state.t, family.evaluate(state.t))

    monkeypatch.setattr(verification, "transform_hamiltonians", untransformed)
    assert check_pde(traj, triple, family, probe_zetas(2, 0)).verdict == "fail"
    assert check_conservation(traj, triple, family).verdict == "fail"


def test_conservation_scalar_exact(scalar_traj):
    triple, family, traj = scalar_traj
    res = check_conservation(traj, triple, family)
    assert res.verdict == "pass" and res.convergence_ratio is None
    assert res.residual <= 1e-12


def test_conservation_second_order():
    rng = np.random.default_rng(3)
    triple = random_triple(rng, 4, 2, 2)
    fam = random_family(rng, "ConstantHermitian", 2, 2)
    traj = evolve(triple, fam, 1.0, 200)
    res = check_conservation(traj, triple, fam)
    assert res.verdict == "pass" and in_band(res.convergence_ratio)


def test_energy_box_scalar_matches_closed_form(scalar_traj):
    triple, family, traj = scalar_traj
    res = check_energy_box(traj, triple, family, BoxDomain([(0, 1)], [64]))
    assert res.verdict == "pass" and in_band(res.convergence_ratio)
    for row in res.detail["samples"]:
        target = 4 * np.exp(2 * row["t"]) * (np.e**2 - 1)
        assert abs(row["flux_1"] - target) <= 1e-3 * target
        assert abs(row["lhs_1"] - target) <= 1e-3 * target


def test_energy_box_two_axes():
    rng = np.random.default_rng(5)
    triple = random_triple(rng, 3, 2, 2)
    fam = random_family(rng, "ConstantHermitian", 2, 2)
    traj = evolve(triple, fam, 1.0, 200)
    res = check_energy_box(traj, triple, fam, BoxDomain([(0, 1), (-0.5, 0.5)], [16, 16]),
                           hvec=[1.0, 1j, 0.5])
    assert res.verdict == "pass" and in_band(res.convergence_ratio)


def test_energy_box_zero_eigenfunction(stationary):
    triple, family = stationary
    traj = evolve(triple, family, 1.0, 100)
    res = check_energy_box(traj, triple, family, BoxDomain([(0, 1)], [16]))
    assert res.residual == 0.0 and res.verdict == "pass"


def test_energy_box_shape_checks(scalar_traj):
    triple, family, traj = scalar_traj
    with pytest.raises(ShapeError):
        check_energy_box(traj, triple, family, BoxDomain([(0, 1), (0, 1)], [8, 8]))
    with pytest.raises(ShapeError):
        check_energy_box(traj, triple, family, BoxDomain([(0, 1)], [8]), hvec=[1.0, 0.0])


def test_monotonicity_psd_families():
    rng = np.random.default_rng(9)
    triple = random_triple(rng, 4, 3, 3)
    for fam in (HamiltonianFamily.constant_signature(3, 0, 3),
                HamiltonianFamily.ortho_projectors(np.linalg.qr(random_complex(rng, 3, 3))[0])):
        traj = evolve(triple, fam, 1.0, 100)
        res = check_monotonicity(traj, triple, fam)
        assert res.verdict == "pass" and res.residual <= 1e-12


def test_monotonicity_negative_definite_start():
    rng = np.random.default_rng(2)
    triple = random_triple(rng, 4, 2, 2, definite=-1)
    fam = random_family(rng, "ConstantHermitian", 2, 2, psd=True)
    traj = evolve(triple, fam, 1.0, 100)
    res = check_monotonicity(traj, triple, fam)
    assert res.verdict == "pass" and res.detail["max_eig_S"] < 0


def test_monotonicity_not_applicable_for_indefinite():
    rng = np.random.default_rng(2)
    triple = random_triple(rng, 3, 2, 1)
    fam = HamiltonianFamily.constant_signature(1, 1, 1)
    traj = evolve(triple, fam, 1.0, 50)
    assert check_monotonicity(traj, triple, fam).verdict == "n/a"
    assert check_positivity(traj, triple, fam).verdict == "n/a"


def test_positivity(example2):
    triple, family, traj = example2
    res = check_positivity(traj, triple, family)
    assert res.verdict == "pass"


# -- aggregate report ---------------------------------------------------------------

def test_run_suite_scalar(scalar):
    scen = make_scenario(*scalar, t_end=1.0, steps=1000)
    report = run_suite(scen)
    assert report.passed
    names = [c.name for c in report.checks]
    assert names == sorted(names) and len(names) == 10
    assert report.get("conservation").convergence_ratio is None
    assert in_band(report.get("pde").convergence_ratio)
    json.dumps(report.to_dict())


def test_run_suite_deterministic():
    rng = np.random.default_rng(4)
    triple = random_triple(rng, 3, 2, 2)
    scen = make_scenario(triple, random_family(rng, "PolynomialHermitian", 2, 2), steps=1000,
                         seed=7)
    a, b = run_suite(scen).to_dict(), run_suite(scen).to_dict()
    assert json.dumps(a, sort_keys=True, default=str) == json.dumps(b, sort_keys=True, default=str)
    assert a["verdict"] == "pass"


def test_run_suite_reports_invalid_triple():
    triple = GbdtTriple([[1j]], [[0.5]], [[1.0]], [0.0, 0.0])
    fam = HamiltonianFamily.constant_hermitian([[[1.0]], [[1.0]]])
    report = run_suite(make_scenario(triple, fam, steps=20))
    assert not report.passed
    assert [c.name for c in report.checks] == ["validation:distinct"]


def test_run_suite_tolerance_override_can_fail(scalar):
    scen = make_scenario(*scalar, steps=200, tolerances={"pde": 1e-12})
    report = run_suite(scen)
    assert not report.passed and report.get("pde").verdict == "fail"
