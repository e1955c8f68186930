"""Both kernel backends must agree bit for bit."""

import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from drastoch import kernels
from drastoch.kernels import _numba, _numpy
from drastoch.sim import reference_policy, reference_world

seeds = st.integers(0, 2 ** 32 - 1)
lams = st.sampled_from([0.0, 0.2, 0.7, 1.0, 3.0])


def setup(seed, m=64):
    rng = np.random.default_rng(seed)
    w, p = reference_world(), reference_policy()
    base, wts, s_log, u_log = p.arrays(w)
    docs = w.doc_matrix()
    beliefs = (rng.random((m, w.n_findings)) < rng.random()).astype(np.uint8)
    return rng, w, p, base, wts, s_log, u_log, docs, beliefs


@given(st.integers(2, 30), st.integers(1, 8), seeds)
def test_pair_sqdists(n, d, seed):
    x = np.random.default_rng(seed).random((n, d))
    a, b = _numpy.pair_sqdists(x), _numba.pair_sqdists(x)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-14)


@given(seeds, lams)
def test_query_logits(seed, lam):
    rng, w, p, base, wts, _, _, docs, b = setup(seed)
    assert np.array_equal(_numpy.query_logits(b, base, wts, docs, -2.0),
                          _numba.query_logits(b, base, wts, docs, -2.0))


@given(seeds, lams, st.integers(1, 4), st.integers(1, 5))
def test_query_stage(seed, lam, n_ens, k):
    rng, w, p, base, wts, _, _, docs, b = setup(seed)
    u = rng.random((b.shape[0], n_ens * k))
    a = _numpy.query_stage(b, base, wts, docs, -2.0, lam, u, n_ens, k)
    c = _numba.query_stage(b, base, wts, docs, -2.0, lam, u, n_ens, k)
    assert np.array_equal(a, c)


@given(seeds, lams)
def test_summary_and_update(seed, lam):
    rng, w, p, base, wts, s_log, u_log, docs, b = setup(seed)
    acts = rng.integers(0, w.n_queries, b.shape[0])
    u = rng.random(b.shape)
    assert np.array_equal(_numpy.summary_stage(acts, docs, s_log, lam, u),
                          _numba.summary_stage(acts, docs, s_log, lam, u))
    h = (rng.random(b.shape) < 0.5).astype(np.uint8)
    assert np.array_equal(_numpy.update_stage(b, h, u_log, lam, u),
                          _numba.update_stage(b, h, u_log, lam, u))


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=8), lams, st.floats(0, 1, exclude_max=True))
def test_tempered_index(logits, lam, u):
    x = np.array(logits)
    assert _numpy.tempered_index(x, lam, u) == _numba.tempered_index(x, lam, u)


def test_single_proposal_is_first_draw():
    rng, w, p, base, wts, _, _, docs, b = setup(3)
    u = rng.random((b.shape[0], 5 * 3))
    single = kernels.query_stage(b, base, wts, docs, -2.0, 1.0, u[:, :5], 1, 5)
    first = kernels.query_stage(b, base, wts, docs, -2.0, 1.0, u[:, :1], 1, 1)
    assert np.array_equal(single, first)


def test_backend_flag():
    code = "import drastoch.kernels as k; print(k.BACKEND)"
    env = dict(os.environ, DRASTOCH_PURE_NUMPY="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
    env["DRASTOCH_PURE_NUMPY"] = "0"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numba"


@pytest.mark.parametrize("flag", ["0", "1"])
def test_simulation_identical_across_backends(flag, tmp_path):
    code = (
        "from drastoch import sim;"
        "w=sim.reference_world();p=sim.reference_policy().with_temperatures({'query':[1]*3,'sum':[1]*3,'update':[1]*3});"
        "b=sim.simulate_ensemble(w,p,20,5,[3,2,1],0.5);"
        "import hashlib;print(hashlib.sha256(b.beliefs.tobytes()+b.actions.tobytes()).hexdigest())"
    )
    env = dict(os.environ, DRASTOCH_PURE_NUMPY=flag)
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    (tmp_path / "h").write_text(out.stdout)
    assert out.stdout.strip() == DIGEST


DIGEST = None  # filled below from the in-process backend


def _digest():
    import hashlib

    from drastoch import sim

    w = sim.reference_world()
    p = sim.reference_policy().with_temperatures({"query": [1] * 3, "sum": [1] * 3, "update": [1] * 3})
    b = sim.simulate_ensemble(w, p, 20, 5, [3, 2, 1], 0.5)
    return hashlib.sha256(b.beliefs.tobytes() + b.actions.tobytes()).hexdigest()


DIGEST = _digest()
