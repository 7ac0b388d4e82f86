from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from src.fields import (
    ONE,
    RHO_POSITIVE,
    T,
    X,
    Y,
    Z,
    ZBAR,
    ZERO,
    OneForm,
    ScalarField,
    VectorField,
    bracket,
    evaluate,
    evaluate_jets,
    exp,
    is_zero,
    jet_order_limit,
    max_jet_order,
    step,
)
from src.config import settings
from src.utils import DomainError, JetOrderError, Memo

PTS = np.array([[0.3, -0.2, 0.5], [1.1, 0.4, -0.9], [-0.6, 0.8, 0.2]])


def test_coordinate_fields():
    z, zbar, t = evaluate([Z, ZBAR, T], PTS)
    np.testing.assert_allclose(z, PTS[:, 0] + 1j * PTS[:, 1])
    np.testing.assert_allclose(zbar, np.conj(z))
    np.testing.assert_allclose(t, PTS[:, 2])


def test_wirtinger_derivatives():
    f = Z * Z * ZBAR + T
    dz, dzbar, dt = evaluate([f.dz(), f.dzbar(), f.dt()], PTS)
    z = PTS[:, 0] + 1j * PTS[:, 1]
    np.testing.assert_allclose(dz, 2 * z * np.conj(z), atol=1e-14)
    np.testing.assert_allclose(dzbar, z * z, atol=1e-14)
    np.testing.assert_allclose(dt, 1.0)


def test_constants_fold():
    assert is_zero(ZERO * X)
    assert (ONE + 2.0).const == 3.0
    assert is_zero(ScalarField.constant(5.0).dx())


def test_domain_is_enforced():
    f = (1.0 / (X * X + Y * Y + T * T)).restrict(RHO_POSITIVE)
    with pytest.raises(DomainError):
        evaluate([f], [[0.0, 0.0, 0.0]])


def test_jet_order_limit():
    f = X
    for _ in range(5):
        f = f * X
    deep = f.dx().dx().dx().dx().dx()
    with pytest.raises(JetOrderError):
        evaluate_jets([deep], PTS, order=0)


def test_jet_order_limit_is_scoped():
    f = X
    for _ in range(5):
        f = f * X
    deep = f.dx().dx().dx().dx().dx()
    with jet_order_limit(6):
        assert max_jet_order() == 6
        values, = evaluate([deep], PTS)
    np.testing.assert_allclose(values.real, 720.0 * PTS[:, 0], rtol=1e-12)
    assert max_jet_order() == settings.JET_ORDER
    with pytest.raises(JetOrderError):
        evaluate([deep], PTS)


def test_jet_order_limit_does_not_leak_into_other_threads():
    with jet_order_limit(2):
        with ThreadPoolExecutor(max_workers=2) as pool:
            seen = list(pool.map(lambda _: max_jet_order(), range(4)))
        assert max_jet_order() == 2
    assert seen == [settings.JET_ORDER] * 4


def test_memo_tables_are_bounded():
    v = VectorField(1.0, 0.0, 0.0)
    fields = [X * float(k + 2) for k in range(v._applied.maxsize + 10)]
    for f in fields:
        v(f)
    assert len(v._applied) == v._applied.maxsize
    again = v(fields[-1])
    assert again is v(fields[-1])


def test_memo_keeps_the_first_value():
    memo = Memo(4)
    first = memo.put("k", object())
    assert memo.put("k", object()) is first
    for key in range(10):
        memo[key] = key
    assert len(memo) == 4
    assert memo.get("k") is None


def test_step_field():
    s = step(X)
    values = evaluate([s], [[-1.0, 0, 0], [2.0, 0, 0]])[0]
    np.testing.assert_allclose(values.real, [0.0, 1.0])


def test_bracket_of_coordinate_fields():
    a = VectorField(0.0, 0.0, Z)  # z d/dt
    b = VectorField(1.0, 0.0, 0.0)  # d/dz
    c = bracket(a, b)
    vz, vzbar, vt = evaluate(list(c.components), PTS)
    np.testing.assert_allclose(vz, 0.0)
    np.testing.assert_allclose(vt, -1.0)


def test_exterior_derivative_of_exact_form():
    f = exp(X * T) + Z * ZBAR
    df = OneForm(f.dz(), f.dzbar(), f.dt())
    for comp in evaluate(list(df.d().components), PTS):
        np.testing.assert_allclose(comp, 0.0, atol=1e-12)
