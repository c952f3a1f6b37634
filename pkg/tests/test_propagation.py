import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from oracles import C, naive_received_dbm
from rfmap.errors import ContractError
from rfmap.pointprocess import PointSet, Region, sample_ppp
from rfmap.propagation import (NO_SHADOWING, PathLossModel, ShadowingModel, SourceField,
                               dbm_to_mw, far_field_distance, free_space_k, mw_to_dbm,
                               path_loss_db, received_power_dbm, thermal_floor_dbm)

# (1/(2 pi))^2 (c / 2 GHz)^3, evaluated with mpmath at 40 digits
K_1GHZ_ALPHA3 = 8.531244428094821375e-05


def _field(points, p_dbm=30.0):
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    return SourceField(PointSet(pts, 0.0, Region(-10, 10, -10, 10), 0), p_dbm)


def test_free_space_k_1ghz():
    assert free_space_k(1e9, alpha=3.0) == pytest.approx(K_1GHZ_ALPHA3, rel=1e-14)
    assert free_space_k(1e9, far_field_distance(1e9), 3.0) == pytest.approx(K_1GHZ_ALPHA3, rel=1e-14)


@pytest.mark.parametrize("f", [1e8, 9e8, 2.4e9])
@pytest.mark.parametrize("r0", [0.1, 1.0, 7.5])
def test_alpha_two_is_friis(f, r0):
    assert free_space_k(f, r0, 2.0) == pytest.approx((C / (4 * math.pi * f)) ** 2, rel=1e-13)


@pytest.mark.parametrize("alpha", [2.0, 2.7, 3.0, 4.0])
def test_doubling_frequency_scales_k(alpha):
    # with r0 = c/(2f), K = (2 pi)^-2 (c/2f)^alpha, so K(2f)/K(f) = 2^-alpha
    ratio = free_space_k(2e9, alpha=alpha) / free_space_k(1e9, alpha=alpha)
    assert ratio == pytest.approx(2.0 ** -alpha, rel=1e-13)


@pytest.mark.parametrize("bad", [dict(f_hz=0.0), dict(f_hz=-1.0), dict(f_hz=1e9, r0_m=0.0)])
def test_free_space_k_rejects_nonpositive(bad):
    with pytest.raises(ContractError):
        free_space_k(**bad)


def test_path_loss_examples():
    assert path_loss_db(PathLossModel(2.0, 1.0), 10.0) == pytest.approx(-20.0, abs=1e-12)
    assert path_loss_db(PathLossModel(3.0, 1.0), 1.0) == 0.0


def test_path_loss_minus_90_radius():
    model = PathLossModel(3.0, K_1GHZ_ALPHA3)
    r = brentq(lambda r: path_loss_db(model, r) + 90.0, 1.0, 1000.0, xtol=1e-12)
    assert r == pytest.approx((K_1GHZ_ALPHA3 * 1e9) ** (1 / 3), rel=1e-10)
    assert r == pytest.approx(44.02210395608559, rel=1e-10)


def test_path_loss_singular_at_zero():
    with pytest.raises(ContractError):
        path_loss_db(PathLossModel(3.0, 1.0), 0.0)


def test_path_loss_monotone():
    r = np.geomspace(0.1, 1e4, 200)
    assert np.all(np.diff(path_loss_db(PathLossModel(3.0, 1e-4), r)) < 0)


def test_alpha_validation():
    with pytest.raises(ContractError):
        PathLossModel(0.0, 1.0)
    with pytest.raises(ContractError):
        PathLossModel(3.0, -1.0)
    with pytest.warns(UserWarning):
        PathLossModel(5.0, 1.0)


def test_single_source_example():
    model = PathLossModel(2.0, 1.0)
    got = received_power_dbm(_field([[0.0, 0.0]]), model, (0.010, 0.0))
    assert got == pytest.approx(10.0, abs=1e-12)


def test_two_equal_sources_add_3db():
    model = PathLossModel(2.0, 1.0)
    one = received_power_dbm(_field([[0.0, 0.0]]), model, (0.010, 0.0))
    two = received_power_dbm(_field([[0.0, 0.0], [0.020, 0.0]]), model, (0.010, 0.0))
    assert two - one == pytest.approx(10 * math.log10(2), abs=1e-12)


def test_scenario_points_match_naive_sum():
    model = PathLossModel.free_space(1e9, 3.0)
    src = sample_ppp(Region.square(), 3.0, seed=2024)
    assert len(src) > 0
    fld = SourceField(src, 30.0)
    pts = np.random.default_rng(1).random((100, 2))
    floor = thermal_floor_dbm(2e6)
    got = received_power_dbm(fld, model, pts, noise_floor_dbm=floor)
    want = [naive_received_dbm(src.points, p, 30.0, model.k, 3.0, model.r0_m, floor) for p in pts]
    np.testing.assert_allclose(got, want, rtol=0, atol=1e-9)


def test_empty_sources_give_floor():
    model = PathLossModel(3.0, 1e-4)
    got = received_power_dbm(_field(np.empty((0, 2))), model, (0.5, 0.5), noise_floor_dbm=-111.0)
    assert got == pytest.approx(-111.0, abs=1e-12)


def test_near_field_clamp():
    model = PathLossModel.free_space(1e9, 3.0)
    at_source = received_power_dbm(_field([[0.3, 0.3]]), model, (0.3, 0.3))
    at_r0 = 30.0 + path_loss_db(model, model.r0_m)
    assert at_source == pytest.approx(at_r0, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_superposition(seed):
    rng = np.random.default_rng(seed)
    s1, s2 = rng.random((3, 2)), rng.random((4, 2))
    pts = rng.random((20, 2))
    model = PathLossModel(3.0, 1e-4)
    a = dbm_to_mw(received_power_dbm(_field(s1), model, pts))
    b = dbm_to_mw(received_power_dbm(_field(s2), model, pts))
    ab = dbm_to_mw(received_power_dbm(_field(np.vstack([s1, s2])), model, pts))
    np.testing.assert_allclose(ab, a + b, rtol=1e-12)


def test_monotone_in_distance():
    model = PathLossModel.free_space(1e9, 3.0)
    d = np.linspace(0.001, 2.0, 500)
    vals = received_power_dbm(_field([[0.0, 0.0]]), model, np.column_stack([d, 0 * d]))
    assert np.all(np.diff(vals) < 0)


def test_shadowing_statistics():
    model = PathLossModel(3.0, 1e-4)
    shadow = ShadowingModel(mu_db=1.5, sigma_db=6.0, enabled=True)
    n = 100_000
    theta = np.linspace(0, 2 * np.pi, n, endpoint=False)
    pts = 0.2 * np.column_stack([np.cos(theta), np.sin(theta)])
    got = received_power_dbm(_field([[0.0, 0.0]]), model, pts, shadow, seed=3)
    deficit = 30.0 + path_loss_db(model, 200.0) - got
    assert abs(deficit.mean() - 1.5) < 0.05
    assert deficit.std() == pytest.approx(6.0, rel=0.02)


def test_unshadowed_is_default():
    model = PathLossModel(3.0, 1e-4)
    a = received_power_dbm(_field([[0, 0]]), model, (0.1, 0.1), NO_SHADOWING, seed=1)
    b = received_power_dbm(_field([[0, 0]]), model, (0.1, 0.1), NO_SHADOWING, seed=2)
    assert a == b


@given(st.floats(-200, 80))
def test_unit_round_trip(dbm):
    assert float(mw_to_dbm(dbm_to_mw(dbm))) == pytest.approx(dbm, rel=1e-12, abs=1e-12)


def test_shadowing_rejects_negative_sigma():
    with pytest.raises(ContractError):
        ShadowingModel(0.0, -1.0, True)
