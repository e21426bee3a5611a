import math

import numpy as np
import pytest

from dpdlab import (
    AdaptationTrace,
    FeedbackImpairment,
    ModelStructure,
    Schedule,
    UpdateConfig,
    apply_feedback_impairment,
    bits_to_snr_db,
    convergence_time,
    degradation_db,
    gen_ofdm_surrogate,
    nmse_db,
    normalize_rms,
    plan_windows,
    reference_pa,
    run_adaptation,
    steady_state_nmse,
    step_excursion_db,
)
from dpdlab.testbed import (
    StepRecord,
    gain_normalized_nmse_db,
    mean_nmse_db,
    measured_snr_db,
    quantize,
    running_median,
    windowed_vs_streaming_nmse,
)
from conftest import crandn

FS = 30.72e6
SMALL = Schedule(2048, 512, 1536)
MP = ModelStructure("MP", 5, 2)


@pytest.fixture(scope="module")
def short_ofdm():
    u = normalize_rms(gen_ofdm_surrogate(FS, 18e6, 6, seed=3), 0.15)
    init = normalize_rms(gen_ofdm_surrogate(FS, 18e6, 2, seed=4), 0.15)
    return u, init


def make_trace(nmse, dt=1.0, meta=None):
    steps = [StepRecord(i, i * dt, None, float(v), math.inf) for i, v in enumerate(nmse)]
    return AdaptationTrace(steps, meta or {})


# ---- windows -------------------------------------------------------------

def test_plan_windows_small_example():
    ws = plan_windows(10, Schedule(4, 2, 2))
    assert [tuple(w) for w in ws] == [(0, 4, 2, 4), (2, 6, 4, 6), (4, 8, 6, 8), (6, 10, 8, 10)]


def test_plan_windows_drops_remainder():
    ws = plan_windows(11, Schedule(4, 2, 2))
    assert len(ws) == 4 and ws[-1].analysis_end == 10


def test_plan_windows_default_length():
    sched = Schedule(120_000, 4096, 115_904)
    ws = plan_windows(115_904 + 1_200_000, sched)
    # Analysis blocks tile the data after the initialization without gaps.
    assert len(ws) == 1_200_000 // 4096
    assert all(w.window_end - w.window_start == 120_000 for w in ws)
    assert all(b.analysis_start == a.analysis_end for a, b in zip(ws, ws[1:]))
    assert len(plan_windows(1_200_000, sched)) == (1_200_000 - 115_904) // 4096 == 264


def test_plan_windows_with_padding_example():
    ws = plan_windows(1_200_000, Schedule(120_000, 1024, 119_000))
    assert len(ws) == (1_200_000 - 119_000) // 1024 == 1055


def test_plan_windows_rejects_bad_schedules():
    with pytest.raises(ValueError, match="step_len"):
        plan_windows(100, Schedule(10, 20, 10))
    with pytest.raises(ValueError, match="init_len"):
        plan_windows(100, Schedule(10, 2, 3))
    with pytest.raises(ValueError):
        plan_windows(5, Schedule(10, 2, 8))


def test_with_overlap_defaults():
    assert Schedule.with_overlap(512, 1536) == Schedule(2048, 512, 1536)
    assert Schedule.with_overlap(512, 0) == Schedule(512, 512, 512)


# ---- impairments and metrics ---------------------------------------------

def test_no_impairment_is_identity(rng):
    y = crandn(rng, 1000)
    for imp in (FeedbackImpairment(), FeedbackImpairment.awgn(math.inf)):
        assert np.array_equal(apply_feedback_impairment(y, imp), y)


@pytest.mark.parametrize("snr", [0.0, 10.0, 25.0, 40.0])
def test_awgn_hits_requested_snr(rng, snr):
    y = crandn(rng, 200_000)
    out = apply_feedback_impairment(y, FeedbackImpairment.awgn(snr, seed=5))
    assert abs(measured_snr_db(y, out) - snr) < 0.2


def test_awgn_is_seeded(rng):
    y = crandn(rng, 100)
    a = apply_feedback_impairment(y, FeedbackImpairment.awgn(10, seed=1))
    b = apply_feedback_impairment(y, FeedbackImpairment.awgn(10, seed=1))
    c = apply_feedback_impairment(y, FeedbackImpairment.awgn(10, seed=2))
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_quantizer_levels_and_snr(rng):
    y = crandn(rng, 100_000)
    q = quantize(y, 3)
    assert len(np.unique(q.real)) <= 8 and len(np.unique(q.imag)) <= 8
    snrs = [measured_snr_db(y, quantize(y, b)) for b in range(2, 11)]
    assert np.all(np.diff(snrs) > 0)
    # In the granular regime each bit buys close to 6 dB; at high resolution
    # overload at the +-4 sigma loading takes over.
    assert 5.5 < snrs[4] - snrs[3] < 6.5
    assert np.array_equal(quantize(np.zeros(4, complex), 4), np.zeros(4))


def test_impairment_validation():
    with pytest.raises(ValueError, match="bits"):
        apply_feedback_impairment(np.ones(4, complex), FeedbackImpairment.quantizer(0))
    with pytest.raises(ValueError, match="kind"):
        apply_feedback_impairment(np.ones(4, complex), FeedbackImpairment("clip"))
    with pytest.raises(ValueError, match="snr_db"):
        apply_feedback_impairment(np.ones(4, complex), FeedbackImpairment.awgn(float("nan")))


def test_bits_to_snr_examples():
    assert bits_to_snr_db(0) == 0
    assert math.isclose(bits_to_snr_db(1), 6.02)
    assert math.isclose(bits_to_snr_db(8), 48.16)
    with pytest.raises(ValueError):
        bits_to_snr_db(-1)


def test_nmse_examples(rng):
    x = crandn(rng, 1000)
    assert nmse_db(x, x) == -300.0
    assert math.isclose(nmse_db(x, 1.1 * x), -20.0, abs_tol=1e-9)
    assert math.isclose(nmse_db(x, np.zeros_like(x)), 0.0, abs_tol=1e-12)
    with pytest.raises(ValueError):
        nmse_db(np.zeros(3), np.ones(3))
    with pytest.raises(ValueError):
        nmse_db(x, x[:-1])
    # A complex gain error disappears after gain normalization.
    assert gain_normalized_nmse_db(x, (2 - 1j) * x) < -250


# ---- closed loop ---------------------------------------------------------

def test_trace_shape_and_times(short_ofdm):
    u, init = short_ofdm
    tr = run_adaptation(u, init, MP, UpdateConfig(0.5), reference_pa(), SMALL,
                        init="cold", seed=1)
    assert len(tr) == len(u) // 512
    assert tr.times[0] == 0.0
    np.testing.assert_allclose(np.diff(tr.times), 512 / FS)
    assert [r.step_index for r in tr.steps] == list(range(len(tr)))


def test_frozen_perfect_inverse_is_accurate(short_ofdm):
    u, init = short_ofdm
    pa = reference_pa().noiseless().time_invariant()
    tr = run_adaptation(u, init, ModelStructure("MP", 7, 4), UpdateConfig(0.5), pa, SMALL,
                        mode="frozen", seed=1)
    assert np.max(tr.nmse) < -50


def test_mu_zero_keeps_parameters(short_ofdm):
    u, init = short_ofdm
    tr = run_adaptation(u, init, MP, UpdateConfig(0.0), reference_pa(), SMALL,
                        init="cold", seed=1)
    for th in tr.thetas:
        assert np.array_equal(th, tr.thetas[0])


def test_first_update_is_affine_in_mu(short_ofdm):
    u, init = short_ofdm
    run = lambda mu: run_adaptation(u, init, MP, UpdateConfig(mu), reference_pa(), SMALL,
                                    init="cold", seed=1).thetas
    t_half, t_one = run(0.5), run(1.0)
    np.testing.assert_array_equal(t_half[0], t_one[0])
    np.testing.assert_allclose(t_half[1] - t_half[0], 0.5 * (t_one[1] - t_one[0]),
                               rtol=1e-9, atol=1e-12)


def test_impairment_only_reaches_the_update(short_ofdm):
    u, init = short_ofdm
    pa = reference_pa()
    run = lambda imp, mode: run_adaptation(u, init, MP, UpdateConfig(0.5), pa, SMALL, imp,
                                           mode=mode, init="cold", seed=1)
    clean = run(None, "frozen")
    dirty = run(FeedbackImpairment.quantizer(3), "frozen")
    np.testing.assert_array_equal(clean.nmse, dirty.nmse)
    assert np.all(np.isinf([r.feedback_snr_db for r in clean.steps]))
    assert np.all(np.array([r.feedback_snr_db for r in dirty.steps]) < 25)
    # With adaptation the first block is still measured before any update.
    a = run(None, "reactive")
    b = run(FeedbackImpairment.quantizer(3), "reactive")
    assert a.nmse[0] == b.nmse[0] and a.nmse[-1] != b.nmse[-1]


def test_adaptation_is_deterministic(short_ofdm):
    u, init = short_ofdm
    run = lambda: run_adaptation(u, init, MP, UpdateConfig(0.5, algorithm="robust"),
                                 reference_pa(), SMALL, FeedbackImpairment.awgn(30, seed=2),
                                 init="cold", seed=9)
    a, b = run(), run()
    assert np.array_equal(a.nmse, b.nmse)
    assert all(np.array_equal(x, y) for x, y in zip(a.thetas, b.thetas))


def test_reactive_adaptation_improves(short_ofdm):
    u, init = short_ofdm
    tr = run_adaptation(u, init, MP, UpdateConfig(0.7), reference_pa(), SMALL,
                        init="cold", seed=1)
    assert steady_state_nmse(tr) < tr.nmse[0] - 10


def test_run_adaptation_argument_checks(short_ofdm):
    u, init = short_ofdm
    with pytest.raises(ValueError, match="mode"):
        run_adaptation(u, init, MP, None, reference_pa(), SMALL, mode="psychic")
    with pytest.raises(ValueError, match="init"):
        run_adaptation(u, init, MP, None, reference_pa(), SMALL, init="warm")
    with pytest.raises(ValueError, match="init_data"):
        run_adaptation(u, init[:100], MP, None, reference_pa(), SMALL)


def test_windowed_matches_streaming_with_long_overlap(rng):
    x = 0.15 * crandn(rng, 40_000)
    pa = reference_pa()
    short = windowed_vs_streaming_nmse(x, pa, Schedule.with_overlap(1024, 0))
    long = windowed_vs_streaming_nmse(x, pa, Schedule.with_overlap(1024, 16 * 1024))
    assert np.max(long) < np.max(short)
    tiny = windowed_vs_streaming_nmse(x, pa.time_invariant(), Schedule.with_overlap(1024, 4))
    assert np.max(tiny) == -300.0


# ---- trace metrics -------------------------------------------------------

def test_steady_state_and_mean():
    tr = make_trace([0.0] * 18 + [-10.0, -20.0])
    assert steady_state_nmse(tr) == -15.0
    assert math.isclose(mean_nmse_db(make_trace([-10.0, -10.0])), -10.0)
    assert math.isclose(mean_nmse_db(make_trace([-10.0, -20.0])), 10 * math.log10(0.055))
    with pytest.raises(ValueError):
        steady_state_nmse(make_trace([]))


def test_convergence_time_examples():
    assert convergence_time(make_trace([0, -5, -9, -10, -10, -10, -10, -10, -10, -10])) == 2.0
    # Convergence time is the first step after the last excursion.
    tr = make_trace([0, -10, -10, -3, -10, -10, -10, -10, -10, -10])
    assert convergence_time(tr) == 4.0
    assert convergence_time(tr, smooth=3) == 1.0
    assert convergence_time(make_trace([-10.0] * 5)) == 0.0
    assert convergence_time(tr, tolerance_db=20) == 0.0


def test_convergence_time_never_settles():
    drift = make_trace([0, -1, -2, -3, -4, -5, -6, -7, -8, -9])
    assert convergence_time(drift, tolerance_db=0.5) == 9.0
    # The last step lies above the band set by the last two steps.
    tr = make_trace([-20.0] * 18 + [-10.0, 0.0])
    assert math.isinf(convergence_time(tr, tolerance_db=0.5))


def test_running_median_edges():
    np.testing.assert_array_equal(running_median([1, 9, 2, 8, 3], 3), [5, 2, 8, 3, 5.5])
    np.testing.assert_array_equal(running_median([4, 1], 1), [4, 1])


def test_degradation():
    a = make_trace([-10.0] * 10)
    b = make_trace([-30.0] * 10)
    assert degradation_db(a, b) == 20.0
    with pytest.raises(ValueError, match="schedule"):
        degradation_db(a, make_trace([-30.0] * 9))


def test_step_excursion():
    meta = dict(step_len=1, sample_rate_hz=1.0)
    nm = [-40.0] * 10 + [-20.0, -35.0, -40.0, -40.0] + [-40.0] * 6
    tr = make_trace(nm, meta=meta)
    assert step_excursion_db(tr, 10.0, window_s=3, baseline_s=3) == 20.0
    # A block straddling the step counts as after it.
    assert step_excursion_db(tr, 10.5, window_s=3, baseline_s=3) == 20.0
    with pytest.raises(ValueError):
        step_excursion_db(tr, 100.0)


def test_trace_csv_round_trip(tmp_path, short_ofdm):
    u, init = short_ofdm
    tr = run_adaptation(u, init, MP, UpdateConfig(0.5), reference_pa(), SMALL,
                        FeedbackImpairment.awgn(20, seed=1), init="cold", seed=1)
    path = tmp_path / "trace.csv"
    tr.to_csv(path, theta_dir=tmp_path / "theta", structure=MP)
    back = AdaptationTrace.from_csv(path)
    np.testing.assert_array_equal(back.nmse, tr.nmse)
    np.testing.assert_array_equal(back.times, tr.times)
    assert [r.feedback_snr_db for r in back.steps] == [r.feedback_snr_db for r in tr.steps]
    assert len(list((tmp_path / "theta").iterdir())) == len(tr)
