import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dpwdual.dpw import FrameGrid, GridSpec, NormalizedPotential, frames_from_potential, refinement_ratio
from dpwdual.loopalg import WindowOverflow
from dpwdual.symspace import willmore_space
from dpwdual.uniton import extended_solution, uhlenbeck_residual, uniton_number

from twisted import p_nilpotent

SPEC = willmore_space()
GRID = GridSpec(0.1 + 0.1j, 0.02, 11, 11, base=0.0)


def nilpotent_frames(seed, target):
    C = p_nilpotent(np.random.default_rng(seed), SPEC, scale=1.0)
    return frames_from_potential(NormalizedPotential.constant(C, SPEC), GRID, target)


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["compact", "noncompact"]))
def test_nilpotent_potential_has_finite_type(seed, target):
    F = nilpotent_frames(seed, target)
    rep = uniton_number(F, SPEC, uhlenbeck=False)
    assert rep.finite and rep.tail_mass < 1e-8
    assert rep.frame_window == (-1, 1) and rep.ad_degree == 2
    # subsampling to 2h does not change the verdict
    coarse = uniton_number(F.subsampled(2), SPEC, uhlenbeck=False)
    assert coarse.ad_degree == rep.ad_degree


def test_identity_frames_have_degree_zero():
    rep = uniton_number(FrameGrid.identity(GRID, 8), SPEC)
    assert rep.ad_degree == 0 and rep.frame_window == (0, 0)
    assert rep.uhlenbeck_residual == 0.0


def test_window_cap_is_enforced():
    F = FrameGrid.identity(GridSpec(0, 0.1, 2, 2), 8)
    c = np.zeros((2, 2, 4, 8, 8), complex)
    c[..., 0, :, :] = np.eye(8)
    c[..., 3, :, :] = 1e-3 * np.eye(8)
    wide = FrameGrid(F.grid, 0, c, F.mask)
    with pytest.raises(WindowOverflow):
        uniton_number(wide, SPEC, window_cap=3)


def test_extended_solution_normalized():
    F = nilpotent_frames(1, "compact")
    E = extended_solution(F)
    assert np.abs(E.Phi.evaluate(1.0) - np.eye(8)).max() < 1e-12
    assert np.isfinite(E.A_z).all()


def test_uhlenbeck_second_order():
    F = nilpotent_frames(2, "compact")
    coarse, fine, ratio = refinement_ratio(F, lambda G: uhlenbeck_residual(extended_solution(G)).per_point)
    assert fine > 0 and 3.2 <= ratio <= 4.8
