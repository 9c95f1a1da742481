import numpy as np
import pytest

from semchan import _backend, _pysim

compiled = pytest.mark.skipif(_backend.COMPILED is None, reason="extension not built")


def _setup(seed=0, q=6, n=5, m=7, trials=3000):
    rng = np.random.default_rng(seed)
    w = rng.random((q, q)) ** 3
    w /= w.sum(axis=1, keepdims=True)
    cdf = np.cumsum(w, axis=1)
    cdf[:, -1] = 1.0
    with np.errstate(divide="ignore"):
        logw = np.log(w)
    book = rng.integers(0, q, size=(m, n)).astype(np.int64)
    u = rng.random((trials, n))
    return u, book, np.ascontiguousarray(cdf), np.ascontiguousarray(logw)


@compiled
@pytest.mark.parametrize("seed", range(5))
def test_backends_agree(seed):
    u, book, cdf, logw = _setup(seed)
    c = _backend.get("cython")
    for k in range(book.shape[0]):
        y_py = _pysim.sample_outputs(u, book[k], cdf)
        y_cy = c.sample_outputs(u, book[k], cdf)
        assert np.array_equal(y_py, y_cy)
        assert np.array_equal(_pysim.ml_decode(y_py, book, logw), c.ml_decode(y_cy, book, logw))


@compiled
def test_tie_break_first():
    logw = np.log(np.full((3, 3), 1 / 3))
    book = np.array([[0, 1], [2, 2], [1, 0]], dtype=np.int64)
    y = np.array([[0, 0], [2, 1]], dtype=np.int64)
    for be in (_backend.get("numpy"), _backend.get("cython")):
        assert be.ml_decode(y, book, logw).tolist() == [0, 0]


def test_zero_probability_symbols():
    w = np.array([[1.0, 0.0], [0.0, 1.0]])
    with np.errstate(divide="ignore"):
        logw = np.log(w)
    book = np.array([[0, 0], [1, 1]], dtype=np.int64)
    y = np.array([[1, 1], [0, 0]], dtype=np.int64)
    assert _pysim.ml_decode(y, book, logw).tolist() == [1, 0]
    if _backend.COMPILED is not None:
        assert _backend.get("cython").ml_decode(y, book, logw).tolist() == [1, 0]


def test_sampling_frequencies():
    cdf = np.array([[0.2, 0.7, 1.0]])
    u = np.random.default_rng(0).random((200_000, 1))
    y = _backend.get().sample_outputs(u, np.array([0], dtype=np.int64), cdf)
    freq = np.bincount(y[:, 0], minlength=3) / len(y)
    assert np.allclose(freq, [0.2, 0.5, 0.3], atol=5e-3)


def test_get_unknown():
    with pytest.raises(ValueError):
        _backend.get("fortran")


def test_shape_errors():
    with pytest.raises(ValueError):
        _pysim.sample_outputs(np.zeros((2, 3)), np.zeros(2, dtype=np.int64), np.ones((1, 1)))
