from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from randhold.errors import ContractError, ParameterError
from randhold.paths import brownian_path, make_mesh, stack, zero_path
from randhold.renewal import Exponential, sample_grid


def test_mesh_contains_grid_and_pitch():
    g = sample_grid(Exponential(1.0), 20, 1.0, seed=3)
    m = make_mesh(1.0, 2**-6, g)
    assert np.all(np.isin(g.times, m.points))
    assert np.array_equal(m.points[m.anchor], g.times)
    assert m.steps.max() <= 2**-6 + 1e-15
    assert m.points[0] == 0.0 and m.T == 1.0
    m.check_grid(g)


def test_mesh_rejects_foreign_grid():
    g = sample_grid(Exponential(1.0), 20, 1.0, seed=3)
    other = sample_grid(Exponential(1.0), 20, 1.0, seed=4)
    with pytest.raises(ContractError):
        make_mesh(1.0, 0.1, g).check_grid(other)
    with pytest.raises(ContractError):
        make_mesh(2.0, 0.1, g)
    with pytest.raises(ParameterError):
        make_mesh(1.0, 0.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 50), st.integers(0, 3), st.integers(0, 1000))
def test_refine_keeps_anchors(n, k, seed):
    g = sample_grid(Exponential(1.0), n, 1.0, seed)
    m = make_mesh(1.0, 0.125, g)
    r = m.refine(k)
    assert len(r) - 1 == (len(m) - 1) * 2**k
    assert np.array_equal(r.points[:: 2**k], m.points)
    r.check_grid(g)
    assert np.all(np.diff(r.points) > 0)


def test_brownian_increment_statistics():
    m = make_mesh(1.0, 2**-4)
    incs = np.stack([brownian_path(m, 2, seed=1, replication=r).increments for r in range(4000)])
    z = incs / np.sqrt(m.steps)[None, :, None]
    assert abs(z.mean()) < 0.02
    assert z.var() == pytest.approx(1.0, abs=0.02)


def test_bridge_sub_increments_sum_and_variance():
    m = make_mesh(1.0, 2**-3)
    W = brownian_path(m, 1, seed=2, substeps=8)
    assert np.allclose(W.sub_increments.sum(axis=1), W.increments, atol=1e-14)
    subs = np.concatenate([brownian_path(m, 1, seed=2, replication=r).sub_increments.ravel() for r in range(3000)])
    assert subs.var() == pytest.approx(2**-3 / 8, rel=0.03)


def test_increments_do_not_depend_on_substeps():
    m = make_mesh(1.0, 2**-5)
    a = brownian_path(m, 3, seed=9, replication=2, substeps=1)
    b = brownian_path(m, 3, seed=9, replication=2, substeps=16)
    assert np.array_equal(a.increments, b.increments)
    with pytest.raises(ParameterError):
        brownian_path(m, 1, seed=0, substeps=6)


def test_values_and_zero_path():
    m = make_mesh(1.0, 0.25)
    W = brownian_path(m, 1, seed=0)
    assert W.values()[0, 0] == 0.0
    assert np.allclose(np.diff(W.values(), axis=0), W.increments)
    Z = zero_path(m, 2)
    assert not Z.increments.any() and Z.sub_increments.shape == (4, 8, 2)


def test_path_mesh_mismatch():
    W = brownian_path(make_mesh(1.0, 0.25), 1, seed=0)
    with pytest.raises(ContractError):
        W.check_mesh(make_mesh(1.0, 0.2))


def test_stack_pads_with_zero_steps():
    a, b = make_mesh(1.0, 0.25), make_mesh(1.0, 0.1)
    st_ = stack([a, b], [brownian_path(a, 1, 0), brownian_path(b, 1, 1)])
    assert st_.dt.shape == (2, 10)
    assert np.all(st_.dt[0, 4:] == 0) and np.all(st_.dW[0, 4:] == 0)
    assert np.all(st_.times[0, 4:] == 1.0)
    assert list(st_.lengths) == [4, 10]
