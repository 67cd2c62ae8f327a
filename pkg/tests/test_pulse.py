import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ftnlab.pulse import IsiTaps, PulseConfig, isi_taps, rc_value

# High-precision oracle values computed with mpmath (40 digits) from the
# closed form sinc(t)*cos(pi*beta*t)/(1-(2*beta*t)^2); frozen here.
RC_HALF_03 = 0.62333227539211934993
RC_08_03 = 0.22152492826495696408
RC_16_03 = -0.15153553407212221642
RC_LIMIT_53_03 = -0.12990381056766579701  # (pi/4)*sinc(5/3) at t = 1/(2*0.3)


def mp_rc(t, beta):
    """Independent high-precision evaluation of the raised cosine."""
    import mpmath as mp

    mp.mp.dps = 40
    t = mp.mpf(repr(t))
    beta = mp.mpf(repr(beta))
    if t == 0:
        return 1.0
    sinc = mp.sin(mp.pi * t) / (mp.pi * t) if t != 0 else mp.mpf(1)
    return float(sinc * mp.cos(mp.pi * beta * t) / (1 - (2 * beta * t) ** 2))


def test_peak_is_unit_energy():
    assert rc_value(0.0, 0.3) == 1.0
    assert rc_value(0.0, 0.0) == 1.0
    assert rc_value(0.0, 1.0) == 1.0


@pytest.mark.parametrize("k", [-5, -2, -1, 1, 2, 3, 7, 11])
def test_nyquist_zero_crossings(k):
    assert rc_value(k, 0.3) == pytest.approx(0.0, abs=1e-15)


def test_half_symbol_value_against_oracle():
    assert rc_value(0.5, 0.3) == pytest.approx(RC_HALF_03, abs=1e-15)
    assert rc_value(0.5, 0.3) == pytest.approx(mp_rc(0.5, 0.3), abs=1e-14)


@pytest.mark.parametrize("t,beta,frozen", [
    (0.8, 0.3, RC_08_03),
    (1.6, 0.3, RC_16_03),
])
def test_sample_points_against_oracle(t, beta, frozen):
    assert rc_value(t, beta) == pytest.approx(frozen, abs=1e-15)
    assert rc_value(t, beta) == pytest.approx(mp_rc(t, beta), abs=1e-14)


def test_singularity_evaluates_to_limit():
    t_sing = 1.0 / (2.0 * 0.3)
    assert rc_value(t_sing, 0.3) == pytest.approx(RC_LIMIT_53_03, abs=1e-12)
    assert rc_value(-t_sing, 0.3) == pytest.approx(RC_LIMIT_53_03, abs=1e-12)
    # continuity across the guarded window
    for offset in (2e-8, 1e-7, 1e-6):
        assert rc_value(t_sing + offset, 0.3) == pytest.approx(
            RC_LIMIT_53_03, abs=1e-5)
        assert rc_value(t_sing - offset, 0.3) == pytest.approx(
            RC_LIMIT_53_03, abs=1e-5)


def test_vectorized_matches_scalar():
    ts = np.linspace(-4, 4, 57)
    vec = rc_value(ts, 0.3)
    assert vec.shape == ts.shape
    assert vec == pytest.approx([rc_value(float(t), 0.3) for t in ts])


@settings(max_examples=80, deadline=None)
@given(t=st.floats(-50, 50, allow_nan=False), beta=st.floats(0, 1))
def test_total_function_even_and_bounded(t, beta):
    value = rc_value(t, beta)
    assert np.isfinite(value)
    assert abs(value) <= 1.0 + 1e-12
    assert value == rc_value(-t, beta)


def test_beta_zero_is_sinc():
    ts = np.linspace(-3, 3, 31)
    assert rc_value(ts, 0.0) == pytest.approx(np.sinc(ts))


def test_rejects_bad_beta():
    with pytest.raises(ValueError):
        rc_value(0.5, -0.1)
    with pytest.raises(ValueError):
        rc_value(0.5, 1.1)


class TestIsiTaps:
    def test_nyquist_has_no_isi(self):
        taps = isi_taps(PulseConfig(beta=0.3), 1.0)
        assert taps.L == 1
        assert taps.g == pytest.approx([1.0])

    @pytest.mark.parametrize("beta", [0.1, 0.3, 0.5, 1.0])
    def test_nyquist_sidelobes_below_1e12(self, beta):
        config = PulseConfig(beta=beta, tap_threshold=0.0, max_half_span=30)
        taps = isi_taps(config, 1.0)
        assert np.max(np.abs(taps.one_sided[1:])) < 1e-12

    def test_tau_08_first_tap(self):
        taps = isi_taps(PulseConfig(beta=0.3), 0.8)
        assert taps.one_sided[0] == 1.0
        assert taps.one_sided[1] == pytest.approx(RC_08_03, abs=1e-15)
        assert taps.one_sided[2] == pytest.approx(RC_16_03, abs=1e-15)

    def test_tau_05_matches_half_symbol_oracle(self):
        taps = isi_taps(PulseConfig(beta=0.3), 0.5)
        assert taps.one_sided[1] == pytest.approx(RC_HALF_03, abs=1e-15)

    def test_symmetry_exact(self):
        taps = isi_taps(PulseConfig(beta=0.3), 0.7)
        assert np.array_equal(taps.g, taps.g[::-1])
        assert taps.value(3) == taps.value(-3)
        assert taps.value(taps.L + 5) == 0.0

    def test_rejects_tau_outside_unit_interval(self):
        for tau in (0.0, -0.5, 1.01):
            with pytest.raises(ValueError):
                isi_taps(PulseConfig(), tau)

    def test_monotone_isi_severity(self):
        config = PulseConfig(beta=0.3)
        severity = [np.abs(isi_taps(config, tau).one_sided[1:]).sum()
                    for tau in (0.6, 0.7, 0.8, 0.9)]
        assert severity == sorted(severity, reverse=True)

    def test_threshold_controls_support(self):
        coarse = isi_taps(PulseConfig(beta=0.3, tap_threshold=1e-2), 0.8)
        fine = isi_taps(PulseConfig(beta=0.3, tap_threshold=1e-5), 0.8)
        assert fine.L >= coarse.L
        assert np.abs(coarse.one_sided[coarse.L - 1]) >= 1e-2

    def test_max_half_span_caps_length(self):
        taps = isi_taps(PulseConfig(beta=0.3, tap_threshold=0.0,
                                    max_half_span=12), 0.7)
        assert taps.L == 13

    def test_config_validation(self):
        with pytest.raises(ValueError):
            PulseConfig(beta=1.5)
        with pytest.raises(ValueError):
            PulseConfig(tap_threshold=-1e-9)
        with pytest.raises(ValueError):
            PulseConfig(max_half_span=-1)
