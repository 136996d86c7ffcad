import pytest

from hybridoc import Dynamics, Model, PiPulse
from hybridoc.errors import ConfigError
from hybridoc.Liouville import ControlSystem


@pytest.fixture(scope='module')
def plan(set1):
    return PiPulse.nominal_plan(set1, Model.derive_frame(set1))


def test_nominal_plan(plan, set1):
    assert plan.t1 == pytest.approx(1 / (2 * set1.R_max))
    assert plan.t2 == pytest.approx(0.02)
    assert plan.t3 == pytest.approx(0.208333, rel=1e-5)
    assert plan.amp == set1.R_max
    assert plan.detunings == pytest.approx((0.0, 500.0, 0.0))


def test_nominal_plan_amplitude(set1):
    frame = Model.derive_frame(set1)
    assert PiPulse.nominal_plan(set1, frame, amp=16.0).t1 == pytest.approx(1 / 32.0)
    for amp in (0.0, -5.0):
        with pytest.raises(ConfigError):
            PiPulse.nominal_plan(set1, frame, amp=amp)


def test_hop_detuning(set1):
    frame = Model.derive_frame(set1)
    plan = PiPulse.nominal_plan(set1, frame, hop_detuning=-1000.0)
    assert plan.detunings[2] == -1000.0
    assert plan.t3 == pytest.approx(0.208333, rel=1e-5)


def test_segment_shorter_than_slot(plan):
    with pytest.raises(ConfigError) as err:
        PiPulse.segment_slots(plan, 0.05)
    assert err.value.field == 'excite'


def test_build_sequence(plan, set1):
    bounds = Dynamics.default_bounds(set1)
    seq, rounding = PiPulse.build_pi_sequence(plan, 0.001, bounds=bounds)
    assert [r['slots'] for r in rounding] == [16, 20, 208]
    assert seq.n_slots == 244
    assert tuple(seq.u[0]) == (0.0, set1.R_max, 0.0)
    assert seq.u[16] == pytest.approx([500.0, 0.0, 0.0])
    assert tuple(seq.u[-1]) == (0.0, 0.0, 0.0)
    assert rounding[0]['error_us'] == pytest.approx(0.016 - 0.015625)


def test_build_sequence_padding(plan):
    seq, _ = PiPulse.build_pi_sequence(plan, 0.001, n_slots=300)
    assert seq.n_slots == 300
    assert all(tuple(row) == (-1000.0, 0.0, 0.0) for row in seq.u[244:])
    with pytest.raises(ConfigError):
        PiPulse.build_pi_sequence(plan, 0.001, n_slots=200)


def test_golden_section_max():
    assert PiPulse.golden_section_max(lambda m: -(m - 37) ** 2, 10, 90) == 37
    assert PiPulse.golden_section_max(lambda m: -abs(m - 10), 10, 14) == 10
    assert PiPulse.golden_section_max(lambda m: m, 3, 4) == 4


def test_tune_segment_unimodal():
    fallbacks = []
    assert PiPulse._tune_segment(lambda m: -(m - 23) ** 2, 20, fallbacks, 'swap') == 23
    assert fallbacks == []


def test_tune_segment_falls_back_to_grid():
    fallbacks = []
    assert PiPulse._tune_segment(lambda m: (m - 20) ** 2, 20, fallbacks, 'hop') == 10
    assert fallbacks[0]['segment'] == 'hop'
    assert fallbacks[0]['bracket'] == [10, 30]


def test_later_sweep_is_centred_on_earlier_pick():
    assert PiPulse._bracket(20) == (10, 30)
    assert PiPulse._bracket(20, centre=22) == (17, 27)
    assert PiPulse._bracket(20, centre=29) == (24, 30)
    assert PiPulse._tune_segment(lambda m: -(m - 23) ** 2, 20, [], 'swap', centre=22) == 23
    fallbacks = []
    assert PiPulse._tune_segment(lambda m: (m - 20) ** 2, 20, fallbacks, 'hop', centre=20) == 15
    assert fallbacks[0]['bracket'] == [15, 25]


def test_evaluate_baseline(plan, system, steady):
    seq, _ = PiPulse.build_pi_sequence(plan, 0.005)
    assert seq.n_slots == 49
    traj, metrics = PiPulse.evaluate_baseline(seq, system, steady)
    assert len(traj) == 50
    assert 0.0 <= metrics['fidelity'] <= 1.0
    assert metrics['mana'] == max(metrics['mana_raw'], 0.0)
    assert 0.0 < metrics['cavity_peak'] <= 1.0
    assert 0.0 <= metrics['cavity_peak_time_us'] <= metrics['total_time_us']
    assert metrics['total_time_us'] == pytest.approx(0.245)


def test_tuned_pi_pulse(plan, system, steady, set1):
    result = PiPulse.tune_pi_sequence(plan, system, steady,
                                      bounds=Dynamics.default_bounds(set1))
    _, metrics = PiPulse.evaluate_baseline(result.sequence, system, steady)
    assert metrics['fidelity'] == pytest.approx(0.5030, abs=0.010)
    assert metrics['cavity_peak'] == pytest.approx(0.84, abs=0.03)
    assert metrics['mana'] < 0.002
    for tuned, nominal in zip(result.plan.durations, plan.durations):
        assert abs(tuned - nominal) <= 0.5 * nominal + 0.001
    assert 1 <= result.sweeps <= 2
    assert result.summary()['slots'] == result.slots


def test_tuned_pi_pulse_set2(space):
    params = Model.SET2
    system = ControlSystem(params, space)
    steady = Dynamics.steady_state(system)
    plan = PiPulse.nominal_plan(params, system.frame)
    result = PiPulse.tune_pi_sequence(plan, system, steady,
                                      bounds=Dynamics.default_bounds(params))
    _, metrics = PiPulse.evaluate_baseline(result.sequence, system, steady)
    assert metrics['fidelity'] == pytest.approx(0.5230, abs=0.010)
    assert metrics['mana'] == pytest.approx(0.0007, abs=0.0005)
