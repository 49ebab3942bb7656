import pytest
from hypothesis import given
from hypothesis import strategies as st

from mixdistill import closedform as cf
from mixdistill.closedform import FormulaId, evaluate
from mixdistill.protocols import ProtocolParams


def test_examples():
    assert cf.bitflip_fidelity(0.75) == pytest.approx(0.9, abs=1e-15)
    assert cf.bitflip_prob(0.75, 0.25) == pytest.approx(0.234375, abs=1e-15)
    assert cf.bitflip_prob(0.75, 0.5) == pytest.approx(0.3125, abs=1e-15)
    assert cf.spdc_fidelity(0.75) == pytest.approx(2.5625 / 2.625, abs=1e-15)
    assert cf.phaseflip_stage1_weights(0.5) == (0.5, 0.5)
    assert cf.phaseflip_stage1_weights(0.75) == pytest.approx((0.625, 0.375))
    assert cf.phaseflip_stage1_prob(0.25) == pytest.approx(0.375)
    # 0.625^2 / (0.625^2 + 0.375^2)
    assert cf.phaseflip_full_fidelity(0.75) == pytest.approx(0.7352941176470589, abs=1e-12)
    assert cf.input_concurrence(1.0, 1 / 16) == pytest.approx(0.4841229182759271, abs=1e-12)
    assert cf.eta_concurrence(0.25) == pytest.approx(0.21650635094610965, abs=1e-15)
    assert cf.spdc_fidelity(0.5) == pytest.approx(0.9)


@pytest.mark.parametrize("bad", [-0.1, 1.1])
def test_domain_errors(bad):
    with pytest.raises(ValueError):
        cf.bitflip_fidelity(bad)
    with pytest.raises(ValueError):
        cf.bitflip_prob(0.75, bad)


def test_evaluate_covers_every_formula():
    p = ProtocolParams(0.8, 0.3)
    for fid in FormulaId:
        assert evaluate(fid, p) == evaluate(fid.value, p)
    assert evaluate("bitflip_fidelity", p) == cf.bitflip_fidelity(0.8)
    with pytest.raises(ValueError):
        evaluate("nonsense", p)


open_half = st.floats(0.5, 1.0, exclude_min=True, exclude_max=True)
# near F = 1 both curves round to 1.0, so strict ordering is checked below that
inner_half = st.floats(0.5, 0.999, exclude_min=True)


@given(open_half)
def test_purification_gain(F):
    assert cf.bitflip_fidelity(F) > F


@given(inner_half)
def test_spdc_curve_dominates(F):
    assert cf.spdc_fidelity(F) > cf.bitflip_fidelity(F)


@given(st.floats(0.0, 1.0))
def test_stage1_weights_sum_to_one(F):
    w = cf.phaseflip_stage1_weights(F)
    assert w[0] + w[1] == pytest.approx(1.0, abs=1e-15)


@given(open_half, open_half)
def test_bitflip_fidelity_monotone(F1, F2):
    if F1 < F2:
        assert cf.bitflip_fidelity(F1) < cf.bitflip_fidelity(F2)
