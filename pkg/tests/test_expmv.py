import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from scipy.stats import poisson as poisson_dist

from pnp_etd.expmv import ExpmvConfig, expmv, poisson_truncation_order
from pnp_etd.grid import Field, GridSpec, mass
from pnp_etd.operator import build, max_diag_magnitude

from oracles import expm_taylor, column_table_matrix


def test_taylor_oracle_agrees_with_scipy():
    g = GridSpec(6, 1.0)
    A = -column_table_matrix(np.random.default_rng(0).normal(size=g.shape), g.h)
    E1, E2 = expm_taylor(0.01 * A), scipy.linalg.expm(0.01 * A)
    assert np.abs(E1 - E2).max() <= 1e-12


@pytest.mark.parametrize("lam", [0.5, 3.0, 40.0, 499.0])
@pytest.mark.parametrize("tol", [1e-8, 1e-14])
def test_truncation_order_is_minimal(lam, tol):
    K = poisson_truncation_order(lam, tol)
    assert poisson_dist.sf(K, lam) <= tol * 1.01
    assert poisson_dist.sf(K - 1, lam) > tol * 0.99


def test_truncation_order_edge_cases():
    assert poisson_truncation_order(0.0, 1e-14) == 0
    with pytest.raises(ValueError):
        poisson_truncation_order(-1.0, 1e-14)
    with pytest.raises(ValueError):
        ExpmvConfig(tail_tolerance=0.0)


@pytest.mark.parametrize("t", [1e-5, 1e-3, 0.05, 1.0])
@pytest.mark.parametrize("sign", [1, -1])
def test_matches_dense_exponential(t, sign):
    g = GridSpec(8, 1.0)
    rng = np.random.default_rng(int(t * 1e5) + sign)
    phi = Field(g, 2 * rng.normal(size=g.shape))
    v = Field(g, rng.random(g.shape))
    op = build(phi, sign)
    ref = expm_taylor(t * op.to_dense()) @ v.values.ravel()
    out = expmv(op, v, t).values.ravel()
    assert np.abs(out - ref).max() <= 1e-10 * np.abs(ref).max()


def test_large_time_reaches_equilibrium_with_substeps():
    g = GridSpec(8, 1.0)
    phi = Field(g, np.random.default_rng(5).normal(size=g.shape))
    op = build(phi, -1)
    v = Field.constant(g, 1.0)
    t = 50.0
    assert t * max_diag_magnitude(op) > 500
    out = expmv(op, v, t)
    eq = np.exp(op.potential.values)
    eq *= mass(v) / (g.h**2 * eq.sum())
    np.testing.assert_allclose(out.values, eq, rtol=1e-10)


def test_zero_time_and_input_validation():
    g = GridSpec(4)
    op = build(Field.constant(g, 0.0), 1)
    v = Field.constant(g, 1.0)
    assert expmv(op, v, 0.0) is v
    with pytest.raises(ValueError):
        expmv(op, v, -1.0)
    with pytest.raises(ValueError):
        expmv(op, Field.constant(g, -1.0), 1.0)
    with pytest.raises(ValueError):
        expmv(op, Field.constant(GridSpec(8), 1.0), 1.0)


def test_signed_input_when_allowed():
    g = GridSpec(6, 1.0)
    rng = np.random.default_rng(9)
    op = build(Field(g, rng.normal(size=g.shape)), 1)
    v = Field(g, rng.normal(size=g.shape))
    ref = scipy.linalg.expm(0.01 * op.to_dense()) @ v.values.ravel()
    out = expmv(op, v, 0.01, ExpmvConfig(renormalize_mass=False), allow_signed=True)
    np.testing.assert_allclose(out.values.ravel(), ref, atol=1e-11)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (6, 6), elements=st.floats(-20, 20)),
       arrays(np.float64, (6, 6), elements=st.floats(0, 1)),
       st.floats(1e-6, 10.0), st.sampled_from([1, -1]))
def test_positivity_and_mass(phi, v, t, sign):
    g = GridSpec(6, 1.0)
    vf = Field(g, v)
    out = expmv(build(Field(g, phi), sign), vf, t)
    assert out.min() >= 0
    m0 = mass(vf)
    assert abs(mass(out) - m0) <= 1e-12 * max(m0, 1e-300) + 1e-300


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (6, 6), elements=st.floats(-3, 3)),
       arrays(np.float64, (6, 6), elements=st.floats(0, 1)),
       st.floats(1e-4, 0.1))
def test_semigroup_property(phi, v, t):
    g = GridSpec(6, 1.0)
    op, vf = build(Field(g, phi), -1), Field(g, v)
    whole = expmv(op, vf, 2 * t).values
    halves = expmv(op, expmv(op, vf, t), t).values
    assert np.abs(whole - halves).max() <= 1e-10 * max(1.0, v.max())


def test_strictly_positive_after_diffusion():
    g = GridSpec(8, 1.0)
    v = np.zeros(g.shape)
    v[0, 0] = 1.0
    out = expmv(build(Field.constant(g, 0.0), 1), Field(g, v), 0.01)
    assert out.min() > 0
