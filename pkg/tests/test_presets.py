import numpy as np
import pytest

from pnp_etd.grid import GridSpec, mass
from pnp_etd.poisson import check_compatibility
from pnp_etd.presets import PRESET_DEFAULTS, PresetSpec, build_preset, default_spec, nearest_column

ALL = list(PRESET_DEFAULTS)


@pytest.mark.parametrize("name,n", [(name, 256) for name in ALL]
                         + [(name, 32) for name in ALL if name != "discontinuous"])
def test_every_preset_is_compatible_and_nonnegative(name, n):
    p0, n0, rho_f, params = build_preset(default_spec(name, n_per_axis=n))
    assert abs(check_compatibility(p0, n0, rho_f)) <= 1e-10
    assert p0.min() >= 0 and n0.min() >= 0
    assert params.grid == GridSpec(n, 1.0, (-0.5, -0.5))


@pytest.mark.parametrize("n", [16, 64, 256])
def test_convergence_masses(n):
    p0, n0, rho_f, params = build_preset(default_spec("convergence", n_per_axis=n))
    assert mass(p0) == pytest.approx(0.5, abs=1e-12)
    assert mass(n0) == pytest.approx(0.5, abs=1e-12)
    assert rho_f.sup_norm() == 0
    assert params.epsilon == 1.0 and params.t_final == 0.01


def test_convergence_species_are_reflections():
    p0, n0, _, _ = build_preset(default_spec("convergence", n_per_axis=32))
    # y -> -y maps node j to -j (mod N) on the centred grid
    reflected = np.roll(p0.values[:, ::-1], 1, axis=1)
    np.testing.assert_allclose(reflected, n0.values, atol=1e-15)


def test_quadrupole_charge_shape():
    _, _, rho, _ = build_preset(default_spec("gaussian_quadrupole", n_per_axis=64))
    assert abs(mass(rho)) <= 1e-10
    g = rho.spec
    i = nearest_column(g, 0.25)
    j = nearest_column(g, 0.25)
    assert rho.values[i, j] > 150  # centred on (+0.25, +0.25) with eps_x = eps_y = -1
    assert rho.values[nearest_column(g, -0.25), j] < -150
    # y-dependence: the second exponent uses y
    assert np.ptp(rho.values[i, :]) > 100
    # odd under x -> -x
    flipped = np.roll(rho.values[::-1, :], 1, axis=0)
    np.testing.assert_allclose(flipped, -rho.values, atol=1e-10)


def test_discontinuous_box_counts_balance_only_on_matching_grids():
    # 52^2 unit nodes against 26^2 nodes of charge 4 at h = 1/256; 7^2 against 4^2 at h = 1/32
    p0, n0, rho, _ = build_preset(default_spec("discontinuous", n_per_axis=32))
    assert check_compatibility(p0, n0, rho) == pytest.approx((-49 + 4 * 16) / 32**2, rel=1e-14)


def test_discontinuous_data():
    p0, n0, rho, params = build_preset(default_spec("discontinuous"))
    assert set(np.unique(p0.values)) == {0.0, 1.0}
    np.testing.assert_array_equal(n0.values, 2 * p0.values)
    assert rho.max() == 4.0
    assert params.tau == 0.01
    assert mass(p0) == pytest.approx(52 * 52 / 256**2, rel=1e-14)


def test_saline_determinism_and_line_charges():
    spec = default_spec("saline", rho0=10.0)
    a = build_preset(spec)
    b = build_preset(spec)
    for fa, fb in zip(a[:3], b[:3]):
        assert np.array_equal(fa.values, fb.values)
    rho = a[2].values
    cols = np.nonzero(np.abs(rho).sum(axis=1))[0]
    assert list(cols) == [nearest_column(spec.grid, -0.25), nearest_column(spec.grid, 0.25)]
    assert rho.max() == 10.0 and rho.min() == -10.0
    other = build_preset(spec.with_(seed=1))
    assert not np.array_equal(other[0].values, a[0].values)


def test_saline_mean_concentration():
    p0, n0, _, _ = build_preset(default_spec("saline"))
    assert mass(p0) == pytest.approx(0.5, abs=0.01)
    assert mass(n0) == pytest.approx(0.5, abs=0.01)


def test_nearest_column_snaps_off_grid_lines():
    g = GridSpec(6, 1.0, (-0.5, -0.5))
    assert nearest_column(g, 0.25) in (4, 5)
    assert nearest_column(GridSpec(8, 1.0, (-0.5, -0.5)), 0.25) == 6
    assert nearest_column(GridSpec(8, 1.0, (-0.5, -0.5)), -0.25) == 2


def test_spec_validation():
    with pytest.raises(ValueError):
        PresetSpec(name="saline", rho0=1.0)
    with pytest.raises(ValueError):
        PresetSpec(name="saline", seed=3)
    with pytest.raises(ValueError):
        PresetSpec(name="convergence", seed=3)
    with pytest.raises(ValueError):
        default_spec("nope")
