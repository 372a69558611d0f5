import pytest

from sptparse import GradCheckReport, ModelConfig, grad_check


@pytest.fixture(scope="module")
def reports():
    return grad_check()


def test_both_losses_pass_gradient_check(reports):
    assert [r.loss_name for r in reports] == ["mlm", "autoregressive"]
    for report in reports:
        assert report.passed, report.failing_tensors
        assert report.max_rel_err < 1e-3
        assert report.per_tensor  # one worst-case entry per parameter tensor


def test_every_parameter_tensor_is_covered(reports):
    names = set(reports[0].per_tensor)
    assert any("tok_embed" in n for n in names)
    assert any("out_proj" in n for n in names)
    assert any("blocks.1" in n for n in names)
    assert names == set(reports[1].per_tensor)


def test_mutated_gradient_is_caught():
    mutated = grad_check(mutate="out_proj.weight")
    for report in mutated:
        assert not report.passed
        assert "out_proj.weight" in report.failing_tensors
        assert report.max_rel_err >= report.tolerance


def test_grad_check_refuses_production_dimensions():
    with pytest.raises(ValueError, match="desk dims"):
        grad_check(config=ModelConfig(vocab_size=24, model_dim=128, heads=2))
    with pytest.raises(ValueError, match="no parameter named"):
        grad_check(mutate="not_a_tensor")


def test_report_properties():
    r = GradCheckReport(loss_name="mlm", per_tensor={"a": 1e-5, "b": 2e-3}, tolerance=1e-3)
    assert r.max_rel_err == 2e-3
    assert r.failing_tensors == ("b",)
    assert not r.passed
