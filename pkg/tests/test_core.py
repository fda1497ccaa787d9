import json
import math

import numpy as np
import pytest

from behavdist.core import (
    DiscountSpec,
    DiscreteDistribution,
    DistributionError,
    Model,
    ModelError,
    ModelParseError,
    PseudometricError,
    PseudometricTable,
    ThetaPolynomial,
    kernel_at,
    load_model,
    model_from_dict,
    obs_metric,
    triangle_violation,
)
from behavdist.models import constant_obs_model, toy_model

DATA = __import__("pathlib").Path(__file__).parent / "data"


def test_theta_polynomial_evaluates_in_increasing_powers():
    p = ThetaPolynomial((0.5, -0.5, 0.25))
    assert p(0.0) == 0.5
    assert p(2.0) == pytest.approx(0.5 - 1.0 + 1.0)
    assert p.degree == 2
    assert ThetaPolynomial((0.0, 0.0)).is_zero()
    assert not p.is_zero()


def test_distribution_validation():
    DiscreteDistribution((0, 2), [0.25, 0.75])
    with pytest.raises(DistributionError):
        DiscreteDistribution((0, 1), [0.5, 0.6])
    with pytest.raises(DistributionError):
        DiscreteDistribution((0, 0), [0.5, 0.5])
    with pytest.raises(DistributionError):
        DiscreteDistribution((0, 1), [1.5, -0.5])
    with pytest.raises(DistributionError):
        DiscreteDistribution((), [])
    assert DiscreteDistribution.point_mass(3).as_dict() == {3: 1.0}


def test_pseudometric_table_validation():
    ok = np.array([[0, 0.2, 0.3], [0.2, 0, 0.1], [0.3, 0.1, 0]])
    PseudometricTable(ok)
    bad_diag = ok.copy()
    bad_diag[0, 0] = 1e-3
    with pytest.raises(PseudometricError, match="diagonal"):
        PseudometricTable(bad_diag)
    asym = ok.copy()
    asym[0, 1] = 0.25
    with pytest.raises(PseudometricError, match="symmetric"):
        PseudometricTable(asym)
    with pytest.raises(PseudometricError, match=r"\[0, 1\]"):
        PseudometricTable(ok * 4)
    tri = np.array([[0, 0.9, 0.1], [0.9, 0, 0.1], [0.1, 0.1, 0]])
    with pytest.raises(PseudometricError, match="triangle"):
        PseudometricTable(tri)
    assert triangle_violation(tri) == pytest.approx(0.7)
    PseudometricTable(tri, check_triangle=False)


def test_table_from_matrix_symmetrises_and_clamps():
    t = PseudometricTable.from_matrix([[0.3, 0.2], [0.4, 0.0]])
    assert t.entries.tolist() == [[0.0, pytest.approx(0.3)], [pytest.approx(0.3), 0.0]]
    assert t.pairs() == [(0, 1)]
    assert PseudometricTable.zeros(3).size == 3


def test_discount_weight_matches_c_to_the_t():
    disc = DiscountSpec(0.9, 2.0)
    for t in (0.0, 0.3, 1.7, 12.0):
        assert disc.weight(math.exp(-2.0 * t)) == pytest.approx(0.9**t, rel=1e-12)
    assert DiscountSpec.default_for(toy_model(0.5)).beta == pytest.approx(1.0)
    with pytest.raises(ValueError):
        DiscountSpec(1.0, 1.0)
    with pytest.raises(ValueError):
        DiscountSpec(0.5, 0.0)


def test_toy_model_kernel():
    m = toy_model(0.5)
    assert m.names == ("0", "x", "y", "z", "dead")
    P = kernel_at(m, m.index("z"), 0.5)
    assert P.as_dict() == {0: 0.25, 4: 0.25, 3: 0.5}
    # at t = 0 the zero-weight targets are dropped
    assert kernel_at(m, m.index("x"), 1.0).as_dict() == {1: 1.0}
    K = m.kernel_matrix(0.3)
    assert np.allclose(K.sum(axis=1), 1.0)
    with pytest.raises(ValueError):
        kernel_at(m, 0, 0.0)


def _toy_dict():
    return json.loads((DATA / "toy_r05.json").read_text())


def test_load_model_roundtrip():
    m = load_model(DATA / "toy_r05.json")
    ref = toy_model(0.5)
    assert m.names == ref.names
    assert np.array_equal(m.obs, ref.obs)
    assert np.allclose(m.kernel_matrix(0.4), ref.kernel_matrix(0.4))
    assert model_from_dict(m.to_dict()).to_dict() == m.to_dict()


def test_honesty_violation_names_the_row():
    d = _toy_dict()
    d["kernel"]["z"][0][1] = [0.4, -0.4]
    with pytest.raises(ModelError, match="honesty.*'z'"):
        model_from_dict(d)


def test_obs_range_violation():
    d = _toy_dict()
    d["obs"][1] = 1.2
    with pytest.raises(ModelError, match="obs range"):
        model_from_dict(d)


def test_identity_at_zero_violation():
    d = _toy_dict()
    d["kernel"]["x"] = [["0", [0.5]], ["x", [0.5]]]
    with pytest.raises(ModelError, match="identity"):
        model_from_dict(d)
    d["identity_at_zero"] = False
    assert model_from_dict(d).identity_at_zero is False


def test_negative_kernel_entry_detected():
    d = _toy_dict()
    d["kernel"]["x"] = [["0", [-0.5, 1.5]], ["x", [1.5, -1.5]], ["y", [0.0]]]
    with pytest.raises(ModelError, match="leaves"):
        model_from_dict(d)


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: d.pop("obs"),
        lambda d: d["kernel"].update({"ghost": []}),
        lambda d: d["kernel"]["x"].append(["nowhere", [0.0]]),
        lambda d: d["kernel"].pop("y"),
        lambda d: d["kernel"]["x"].append(["y"]),
    ],
)
def test_malformed_models_raise_parse_errors(mutate):
    d = _toy_dict()
    mutate(d)
    with pytest.raises(ModelParseError):
        model_from_dict(d)


def test_load_model_rejects_bad_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ModelParseError):
        load_model(p)


def test_obs_metric():
    m = toy_model(0.2)
    d = obs_metric(m)
    assert d[0, 4] == 1.0
    assert d[1, 2] == 0.0
    assert d[0, 1] == pytest.approx(0.8)
    assert np.all(obs_metric(constant_obs_model()).entries == 0.0)


def test_model_index_errors():
    m = toy_model(0.5)
    assert m.index("dead") == 4
    assert m.index(2) == 2
    with pytest.raises(ModelError):
        m.index("w")
    with pytest.raises(ModelError):
        m.index(9)
    with pytest.raises(ModelError):
        Model(("a", "a"), np.zeros(2), 1.0, (((0, ThetaPolynomial((1.0,))),),) * 2)
