import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from means_lab import kernels

gini_nb = kernels._numba_entry(kernels.gini_rows_numba)
holder_nb = kernels._numba_entry(kernels.holder_rows_numba)

exps = st.sampled_from([-3.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0, 3.0])


@settings(max_examples=150, deadline=None)
@given(q=exps, r=exps, n=st.integers(1, 8), seed=st.integers(0, 2**32 - 1), spread=st.floats(0, 6))
def test_numpy_and_numba_agree(q, r, n, seed, spread):
    X = np.exp(np.random.default_rng(seed).uniform(-spread, spread, (16, n)))
    np.testing.assert_allclose(gini_nb(X, q, r), kernels.gini_rows_numpy(X, q, r), rtol=1e-12)
    np.testing.assert_allclose(holder_nb(X, q), kernels.holder_rows_numpy(X, q), rtol=1e-12)


def test_log_space_branch():
    # q*log(1e300) is far past the exp overflow threshold
    X = np.array([[1e-300, 1e300], [1e300, 1e300], [2.0, 8.0]])
    for kern in (gini_nb, kernels.gini_rows_numpy):
        out = kern(X, 5.0, 4.0)
        assert np.all(np.isfinite(out))
        assert out[0] == pytest.approx(1e300, rel=1e-12) and out[1] == 1e300
        assert out[2] == pytest.approx((32 + 8**5) / (16 + 8**4), rel=1e-14)
    for kern in (holder_nb, kernels.holder_rows_numpy):
        assert kern(np.array([[1e-200, 1.0]]), -4.0)[0] == pytest.approx(1e-200 * 2**0.25, rel=1e-12)


def test_equal_exponent_and_zero_cases():
    X = np.array([[1.0, 2.0], [3.0, 3.0]])
    want = np.exp(4 * np.log(2) / 5)
    for kern in (gini_nb, kernels.gini_rows_numpy):
        out = kern(X, 2.0, 2.0)
        assert out[0] == pytest.approx(want, rel=1e-14) and out[1] == 3.0
        assert kern(X, 0.0, 0.0)[0] == pytest.approx(np.sqrt(2), rel=1e-14)
    for kern in (holder_nb, kernels.holder_rows_numpy):
        assert kern(X, 0.0)[0] == pytest.approx(np.sqrt(2), rel=1e-14)


def test_results_stay_inside_row_bounds():
    X = np.exp(np.random.default_rng(1).uniform(-30, 30, (200, 5)))
    for out in (gini_nb(X, 3.0, -2.0), kernels.gini_rows_numpy(X, 3.0, -2.0), holder_nb(X, -3.0)):
        assert np.all(out >= X.min(axis=1)) and np.all(out <= X.max(axis=1))


@pytest.mark.parametrize("flag, backend", [("0", "numpy"), ("1", "numba")])
def test_env_flag_selects_backend(flag, backend):
    env = dict(os.environ, MEANS_LAB_NUMBA=flag)
    code = "from means_lab import kernels; print(kernels.BACKEND, kernels.gini_rows.__name__)"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    name, func = out.stdout.split()
    assert name == backend and func.endswith(backend)
