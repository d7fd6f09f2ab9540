import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from condips.errors import InvalidKernelError, OutOfRangeError
from condips.kernels import (
    Family,
    RateKernel,
    certify_sublinearity,
    evaluate,
    kernel_from_config,
    load_table,
    rate,
)


def test_formula_examples():
    assert evaluate(RateKernel.independent(), 3, 7) == 3
    assert evaluate(RateKernel.zero_range(4), 2, 9) == 3
    assert evaluate(RateKernel.inclusion(1), 2, 3) == 8


@pytest.mark.parametrize("k", [RateKernel.independent(), RateKernel.zero_range(4),
                               RateKernel.inclusion(0.5),
                               RateKernel.from_table([[0, 0], [1, 2]])])
def test_empty_departure_site_has_rate_zero(k):
    assert evaluate(k, 0, 5 if k.family != Family.TABLE else 1) == 0


def test_declared_constants():
    assert RateKernel.independent().C == 1
    assert RateKernel.zero_range(4).C == 5
    assert RateKernel.inclusion(0.5).C == 1
    assert RateKernel.inclusion(3).C == 3


@settings(max_examples=200, deadline=None)
@given(k=st.integers(1, 500), l=st.integers(0, 500),
       b=st.floats(0, 50), d=st.floats(0.01, 50))
def test_positive_and_bilinear_bound(k, l, b, d):
    for kern in (RateKernel.independent(), RateKernel.zero_range(b), RateKernel.inclusion(d)):
        c = evaluate(kern, k, l)
        assert c > 0
        assert c <= kern.C * k * (1 + l) * (1 + 1e-12)


def test_compiled_rate_matches_python():
    for kern in (RateKernel.independent(), RateKernel.zero_range(2.5), RateKernel.inclusion(0.7),
                 RateKernel.from_table(np.array([[0, 0, 0], [1, 2, 3], [2, 2, 9]]))):
        for k in range(3):
            for l in range(3):
                assert rate(*kern.jit_args, k, l) == evaluate(kern, k, l)


def test_matrix_agrees_with_evaluate(kernel):
    m = kernel.matrix(6, 4)
    assert m.shape == (7, 5)
    for k in range(7):
        for l in range(5):
            assert m[k, l] == pytest.approx(evaluate(kernel, k, l))


def test_certificates():
    assert certify_sublinearity(RateKernel.independent(), 100, 100).C_min == 1
    assert certify_sublinearity(RateKernel.inclusion(1), 100, 100).C_min == 1
    cert = certify_sublinearity(RateKernel.zero_range(4), 100, 100)
    assert cert.C_min == 5 and cert.ok
    tab = np.zeros((3, 2))
    tab[1] = [1, 1]
    tab[2, 0] = 8
    cert = certify_sublinearity(RateKernel.from_table(tab), 100, 100)
    assert cert.C_min == 4 and cert.ok


def test_certificate_reports_violation():
    tab = np.zeros((3, 2))
    tab[2, 0] = 8
    kern = RateKernel(Family.TABLE, 0.0, 1.0, tab)  # declared C deliberately too small
    cert = certify_sublinearity(kern, 5, 5)
    assert not cert.ok and cert.violation == (2, 0)


def test_table_validation_and_range():
    with pytest.raises(InvalidKernelError):
        RateKernel.from_table([[1, 0], [1, 1]])
    with pytest.raises(InvalidKernelError):
        RateKernel.from_table([[0, 0], [-1, 1]])
    with pytest.raises(InvalidKernelError):
        RateKernel.from_table([[0, 0], [0, 0], [8, 0]], C=1.0)
    kern = RateKernel.from_table([[0, 0], [1, 1]])
    with pytest.raises(OutOfRangeError):
        evaluate(kern, 2, 0)
    with pytest.raises(OutOfRangeError):
        kern.matrix(3)


def test_bad_parameters():
    with pytest.raises(InvalidKernelError):
        RateKernel.zero_range(-1)
    with pytest.raises(InvalidKernelError):
        RateKernel.inclusion(0)


def test_config_sections(tmp_path):
    assert kernel_from_config({"model": "independent"}).family == Family.INDEPENDENT
    assert kernel_from_config({"model": "zero-range", "b": "4"}).param == 4
    assert kernel_from_config({"model": "inclusion", "d": "2"}).C == 2
    path = tmp_path / "t.csv"
    path.write_text("0,0,0\n1,1,1\n2,2,2\n")
    kern = kernel_from_config({"model": "table", "table": str(path)})
    assert kern.family == Family.TABLE
    np.testing.assert_array_equal(load_table(path), kern.table)
    with pytest.raises(InvalidKernelError):
        kernel_from_config({"model": "zero-range"})
    with pytest.raises(InvalidKernelError):
        kernel_from_config({"model": "explosive"})


def test_evaluate_is_pure():
    kern = RateKernel.zero_range(3)
    assert [evaluate(kern, 3, 1) for _ in range(3)] == [2.0] * 3
