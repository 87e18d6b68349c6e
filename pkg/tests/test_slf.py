import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from offgrid_p2h.errors import NoAdjustableUnit, WarmUp
from offgrid_p2h.plant import AEParams, AEUnit, ae_step
from offgrid_p2h.slf import (
    SlfController,
    SlfParams,
    SlfState,
    allocate,
    compose_reference,
    fast_forecast,
    rectified_correction,
)

AE = AEParams(standby_mw=0.1, capacity_mw=5.0)


def state_with(samples, prev=None, q=4):
    s = SlfState(q=q, prev_forecast=prev)
    for x in samples:
        s.observe(x)
    return s


class TestForecast:
    def test_fixed_point(self):
        assert fast_forecast(state_with([10.0] * 4, 10.0), SlfParams()) == 10.0

    def test_moving_average(self):
        assert fast_forecast(state_with([8, 10, 12, 14], 99.0), SlfParams(alpha=0.0)) == pytest.approx(11.0)

    def test_alpha_one_keeps_previous(self):
        assert fast_forecast(state_with([1, 2, 3, 4], 7.5), SlfParams(alpha=1.0)) == 7.5

    def test_warm_up(self):
        with pytest.raises(WarmUp):
            fast_forecast(state_with([1.0, 2.0]), SlfParams())

    @given(st.floats(-50, 50), st.lists(st.floats(0, 30), min_size=1, max_size=8))
    def test_last_sample_when_q_is_one(self, _, samples):
        assert fast_forecast(state_with(samples, 3.0, q=1), SlfParams(alpha=0.0, q=1)) == samples[-1]

    @given(st.lists(st.floats(0, 30), min_size=4, max_size=4), st.floats(0, 30), st.floats(-10, 10),
           st.floats(0, 1))
    def test_translation_equivariant(self, samples, prev, c, alpha):
        p = SlfParams(alpha=alpha)
        a = fast_forecast(state_with(samples, prev), p)
        b = fast_forecast(state_with([x + c for x in samples], prev + c), p)
        assert b == pytest.approx(a + c, abs=1e-9)


class TestCorrection:
    def test_zero_error_gives_offset(self):
        assert rectified_correction(5.0, 5.0, 0.5, SlfState(), SlfParams()) == pytest.approx(0.0286)

    def test_proportional_only(self):
        p = SlfParams(k_soc=1.0, k_p=1.0, k_i=0.0, beta=0.0)
        assert rectified_correction(2.0, 0.0, 0.5, SlfState(), p) == 2.0

    def test_integral_accumulates(self):
        p = SlfParams(k_soc=1.0, k_p=0.0, k_i=0.1, beta=0.0, step_s=5.0)
        s = SlfState()
        rectified_correction(1.0, 0.0, 0.5, s, p)
        assert rectified_correction(1.0, 0.0, 0.5, s, p) == pytest.approx(1.0)

    def test_integral_clamped(self):
        p = SlfParams(k_soc=1.0, k_p=0.0, k_i=1.0, beta=0.0)
        s = SlfState()
        for _ in range(10):
            out = rectified_correction(100.0, 0.0, 0.5, s, p, integral_limit=3.0)
        assert out == pytest.approx(3.0)

    def test_soc_dependent_slope(self):
        p = SlfParams(k_p=1.0, k_i=0.0, beta=0.0, k_soc_fn=lambda soc: 2.0 * soc)
        assert rectified_correction(1.0, 0.0, 0.25, SlfState(), p) == pytest.approx(0.5)


class TestAllocate:
    fleet = [AEUnit.started(AE, 2.0), AEUnit.started(AE, 3.0)]

    def test_upward(self):
        assert allocate(1.0, self.fleet) == pytest.approx([0.6, 0.4])

    def test_downward(self):
        assert allocate(-1.0, self.fleet) == pytest.approx([-0.4, -0.6])

    def test_singleton(self):
        assert allocate(0.7, [AEUnit.standby(AE), AEUnit.started(AE, 1.0)]).tolist() == [0.0, 0.7]

    def test_no_started_unit(self):
        with pytest.raises(NoAdjustableUnit):
            allocate(1.0, [AEUnit.standby(AE)])

    @given(st.lists(st.floats(0.5, 4.9), min_size=1, max_size=6), st.floats(-5, 5).filter(lambda x: abs(x) > 1e-6))
    def test_shares_sum_to_correction(self, powers, corr):
        shares = allocate(corr, [AEUnit.started(AE, p) for p in powers])
        assert (shares / corr >= 0).all()
        assert (shares / corr).sum() == pytest.approx(1.0, abs=1e-12)


class TestCompose:
    def test_identity(self):
        fleet = [AEUnit.started(AE, 2.0), AEUnit.started(AE, 3.0)]
        ref, resid = compose_reference([2.0, 3.0], [0.0, 0.0], fleet)
        assert ref.tolist() == [2.0, 3.0] and resid.tolist() == [0.0, 0.0]

    def test_clamp(self):
        ae = AEParams(0.1, capacity_mw=5.0, r_max=1.2)
        ref, resid = compose_reference([5.0], [1.5], [AEUnit.started(ae, 5.0)])
        assert ref[0] == pytest.approx(6.0) and resid[0] == pytest.approx(0.5)

    def test_standby(self):
        ref, _ = compose_reference([0.1], [2.0], [AEUnit.standby(AE)])
        assert ref[0] == 0.1


def test_warm_up_passes_baseline_through():
    c = SlfController(SlfParams())
    fleet = [AEUnit.started(AE, 2.0)]
    for _ in range(3):
        ref, _, corr = c.step(9.0, 2.0, 0.5, [2.0], fleet)
        assert ref[0] == 2.0 and corr == 0.0
    _, _, corr = c.step(9.0, 2.0, 0.5, [2.0], fleet)
    assert corr > 0


@given(st.floats(7.0, 13.0))
def test_closed_loop_converges(renewable):
    """Four AEs at 2.5 MW each track a constant supply to 1e-3 MW."""
    params = SlfParams(beta=0.0)
    c = SlfController(params)
    fleet = [AEUnit.started(AE, 2.5) for _ in range(4)]
    base = np.full(4, 2.5)
    prev_cmd = None
    errors = []
    for _ in range(params.q - 1 + 50):
        power = np.array([u.current_power for u in fleet])
        shortfall = 0.0 if prev_cmd is None else float(np.sum(prev_cmd - power))
        ref, _, _ = c.step(renewable, power.sum(), 0.5, base, fleet, shortfall=shortfall)
        prev_cmd = ref
        if c.state.warm:
            errors.append(abs(c.last_forecast - power.sum()))
        fleet = [ae_step(u, r, dt=params.step_s)[0] for u, r in zip(fleet, ref)]
    assert errors[-1] < 1e-3
