import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from repeater_rate.distill import (
    DistillationUnreachable,
    DistillSchedule,
    chain_key_rate,
    compute_breakpoints,
    dejmps_map,
    distill_success_prob,
    distilled_key_rate,
    round_survival,
    threshold_bracket,
    werner_replace,
)
from repeater_rate.keyrate import ChainParams, chain_werner_param, raw_rate_scan
from repeater_rate.link import LinkParams
from repeater_rate.oracle import dejmps_oracle
from repeater_rate.states import BellDiagonalState, werner_state

PURE = BellDiagonalState((0.0, 0.0, 1.0, 0.0))
MIXED = werner_state(0.0)


@st.composite
def bell_states(draw):
    w = np.array([draw(st.floats(0.0, 1.0)) for _ in range(4)])
    if w.sum() <= 1e-6:
        w = np.ones(4)
    return BellDiagonalState.from_unnormalized(w)


class TestMap:
    def test_pure(self):
        out, success = dejmps_map(PURE, PURE)
        assert success == 1.0
        assert out.weights == (0.0, 0.0, 1.0, 0.0)

    def test_threshold_werner(self):
        w = werner_state(0.69)
        out, success = dejmps_map(w, w)
        assert success == pytest.approx(0.845**2 + 0.155**2, abs=1e-14)
        assert round(success, 3) == 0.738
        assert werner_replace(out) == pytest.approx(0.74, abs=0.01)

    @settings(max_examples=300)
    @given(bell_states(), bell_states())
    def test_output_is_distribution(self, a, b):
        out, success = dejmps_map(a, b)
        assert 0 < success <= 1 + 1e-12
        assert math.fsum(out.weights) == pytest.approx(1.0, abs=1e-12)
        assert min(out.weights) >= 0

    @settings(max_examples=300)
    @given(bell_states())
    def test_success_formula(self, s):
        assert dejmps_map(s, s)[1] == pytest.approx(distill_success_prob(s), abs=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(bell_states(), bell_states())
    def test_matches_oracle(self, a, b):
        assume((a.weights[0] + a.weights[3]) * (b.weights[0] + b.weights[3]) + (a.weights[1] + a.weights[2]) * (b.weights[1] + b.weights[2]) > 1e-9)
        m, pm = dejmps_map(a, b)
        o, po = dejmps_oracle(a, b)
        assert pm == pytest.approx(po, abs=1e-10)
        assert np.allclose(m.as_array(), o.as_array(), atol=1e-10)

    def test_zero_success_rejected(self):
        a = BellDiagonalState((0.0, 0.0, 0.0, 1.0))
        b = BellDiagonalState((0.0, 0.0, 1.0, 0.0))
        with pytest.raises(ValueError):
            dejmps_map(a, b)
        with pytest.raises(ValueError):
            dejmps_oracle(a, b)

    def test_fidelity_gain_above_fixed_point(self):
        # fidelity 1/2 (x = 1/3) is the Werner fixed point; x = 0 is the other
        for x in np.linspace(0.34, 0.999, 200):
            w = werner_state(x)
            assert dejmps_map(w, w)[0].fidelity > w.fidelity
        for x in np.linspace(0.001, 0.33, 100):
            w = werner_state(x)
            assert dejmps_map(w, w)[0].fidelity < w.fidelity
        out, _ = dejmps_map(MIXED, MIXED)
        assert out.fidelity == pytest.approx(0.25, abs=1e-15)
        w = werner_state(1 / 3)
        assert dejmps_map(w, w)[0].fidelity == pytest.approx(0.5, abs=1e-15)


class TestSuccessProb:
    def test_examples(self):
        assert distill_success_prob(PURE) == 1.0
        assert distill_success_prob(MIXED) == 0.5
        assert distill_success_prob(werner_state(0.69)) == pytest.approx(0.73805, abs=1e-12)

    def test_survival(self):
        assert round_survival() == pytest.approx(0.369025, abs=1e-12)
        assert round(round_survival(), 2) == 0.37
        assert round_survival(rounded_survival=True) == 0.37


class TestWernerReplace:
    def test_examples(self):
        assert werner_replace(PURE) == 1.0
        assert werner_replace(MIXED) == 0.0

    def test_clamped_below_quarter(self):
        assert werner_replace(BellDiagonalState((0.5, 0.4, 0.1, 0.0))) == 0.0

    @given(st.floats(0.0, 1.0))
    def test_round_trip(self, x):
        assert werner_replace(werner_state(x)) == pytest.approx(x, abs=1e-12)


def ideal_gate_chain(x_ga):
    return ChainParams(link=LinkParams(dark_rate=0.0), x_ga=x_ga, x_mm=1.0, tau_d=math.inf)


class TestBreakpoints:
    def test_gate_limited(self):
        s = compute_breakpoints(ideal_gate_chain(0.99))
        # closed-form logs: 0.99^(n-1) >= 0.69 and 0.99^m >= 0.93
        assert s.n_L == math.floor(math.log(0.69) / math.log(0.99)) + 1 == 37
        assert s.n_S == math.floor(math.log(0.93) / math.log(0.99)) == 7

    def test_not_needed(self):
        s = compute_breakpoints(ideal_gate_chain(1.0))
        assert not s.needed and s.n_L is None
        assert s.rounds(10_000) == 0

    def test_unreachable(self):
        with pytest.raises(DistillationUnreachable):
            compute_breakpoints(replace(ideal_gate_chain(1.0), x_mm=0.6))

    @pytest.mark.parametrize("x_ga", [0.95, 0.99, 0.997])
    @pytest.mark.parametrize("L0", [10.0, 25.0, 50.0])
    def test_matches_linear_scan(self, x_ga, L0):
        p = ChainParams(link=LinkParams(L0=L0), x_ga=x_ga)
        s = compute_breakpoints(p)
        xs = [chain_werner_param(p.with_n(n)) for n in range(1, s.n_L + 3)]
        assert all(b <= a for a, b in zip(xs, xs[1:]))
        assert xs[s.n_L - 1] >= 0.69 > xs[s.n_L]
        blocks = [chain_werner_param(p.with_n(m)) * x_ga for m in range(1, s.n_S + 2)]
        assert blocks[s.n_S - 1] >= 0.93 > blocks[s.n_S]
        assert s.n_L >= s.n_S

    def test_rounds(self):
        s = DistillSchedule(37, 7, 0.369)
        assert s.rounds(36) == 0
        assert s.rounds(37) == 1
        assert s.rounds(37 + 6) == 1
        assert s.rounds(37 + 7) == 2
        prev = 0
        for n in range(37, 400):
            r = s.rounds(n)
            assert r == math.ceil((n - 37 + 1) / 7)
            assert r - prev in (0, 1)
            if (n - 37) % 7 == 0:
                assert r == prev + 1
            prev = r


class TestDistilledRate:
    def test_one_and_two_rounds(self):
        p = replace(ideal_gate_chain(0.99), entropy_base=math.e)
        s = compute_breakpoints(p)
        one = distilled_key_rate(p, s.n_L)
        two = distilled_key_rate(p, s.n_L + s.n_S)
        assert one.rounds == 1 and two.rounds == 2
        raw1 = raw_rate_scan(p.with_n(s.n_L))[2].max()
        assert one.K == pytest.approx(raw1 * round_survival() * threshold_bracket(math.e), rel=1e-13)
        raw2 = raw_rate_scan(p.with_n(s.n_L + s.n_S))[2].max()
        assert two.K == pytest.approx(raw2 * round_survival() ** 2 * threshold_bracket(math.e), rel=1e-13)

    def test_literal_bracket_negative_in_bits(self):
        p = ideal_gate_chain(0.99)
        r = distilled_key_rate(p, 40)
        assert r.bracket_literal == pytest.approx(1 - 2 * 0.6222126380063133, abs=1e-12)
        assert r.bracket_literal < 0 and r.K_literal < 0
        assert r.bracket == 0.0 and r.K == 0.0

    def test_rounded_survival_flag(self):
        p = replace(ideal_gate_chain(0.99), rounded_survival=True, entropy_base=math.e)
        assert distilled_key_rate(p, 37).survival == 0.37

    def test_below_threshold_rejected(self):
        with pytest.raises(ValueError):
            distilled_key_rate(ideal_gate_chain(0.99), 10)

    @pytest.mark.parametrize("x_ga", [0.95, 0.99])
    def test_non_increasing_in_n(self, x_ga):
        p = ChainParams(x_ga=x_ga, entropy_base=math.e)
        s = compute_breakpoints(p)
        ks = [distilled_key_rate(p, n, s).K for n in range(s.n_L, s.n_L + 60)]
        assert all(b <= a for a, b in zip(ks, ks[1:]))

    def test_chain_key_rate_switches(self):
        p = ChainParams(x_ga=0.99, entropy_base=math.e)
        s = compute_breakpoints(p)
        K, detail = chain_key_rate(p.with_n(s.n_L - 1), distill=True)
        assert not hasattr(detail, "rounds")
        K, detail = chain_key_rate(p.with_n(s.n_L), distill=True)
        assert detail.rounds == 1
