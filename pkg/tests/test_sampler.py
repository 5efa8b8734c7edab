"""Proposal construction, Metropolis decisions, swap functions, replica stepping."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drexel import (
    ChainParams,
    RunConfig,
    SwapConfig,
    binary_flip_probs,
    dls_step,
    make_ising_chain,
    proposal_logits,
    run_sampler,
    swap_probability,
)
from drexel.domains import DomainSpec
from drexel.energies import QuadraticEnergy
from drexel.errors import DomainError, NumericError
from drexel.rng import SALT_LOW, substream
from drexel.sampler import chain_step, make_replica_pair, replica_step


def zero_gradient_model(domain):
    d = domain.dim
    return QuadraticEnergy(domain=domain, J=np.zeros((d, d)), b=np.zeros(d), w=1.0)


def softmax(logits):
    z = np.exp(logits - logits.max())
    return z / z.sum()


class TestProposalLogits:
    def test_ordinal_three_levels_stay_probability(self):
        dom = DomainSpec.ordinal_grid(1, levels=3, lo=-1.0, hi=1.0)
        model = zero_gradient_model(dom)
        logits = proposal_logits(model, np.array([1]), ChainParams(alpha=2.0, tau=1.0), coord=0)
        assert np.allclose(logits, [-0.25, 0.0, -0.25])
        assert softmax(logits)[1] == pytest.approx(1 / (1 + 2 * np.exp(-0.25)), abs=1e-12)

    def test_binary_flip_probability_with_gradient(self):
        dom = DomainSpec.binary01(1)
        model = QuadraticEnergy(domain=dom, J=np.zeros((1, 1)), b=np.array([2.0]), w=1.0)
        logits = proposal_logits(model, np.array([0]), ChainParams(alpha=1.0, tau=1.0), coord=0)
        p = softmax(logits)
        assert p[1] == pytest.approx(1 / (1 + np.exp(-0.5)), abs=1e-12)  # sigma(0.5) ~ 0.62246

    def test_spin_flip_distance_two(self):
        dom = DomainSpec.spin_pm1(1)
        model = zero_gradient_model(dom)
        logits = proposal_logits(model, np.array([0]), ChainParams(alpha=2.0, tau=1.0), coord=0)
        assert logits[1] - logits[0] == pytest.approx(-1.0, abs=1e-12)
        assert softmax(logits)[1] == pytest.approx(1 / (1 + np.e), abs=1e-12)  # sigma(-1) ~ 0.26894

    def test_coordinate_out_of_range(self):
        dom = DomainSpec.binary01(2)
        with pytest.raises(DomainError):
            proposal_logits(zero_gradient_model(dom), np.array([0, 0]), ChainParams(alpha=1.0), coord=2)

    @given(st.integers(0, 10_000))
    @settings(max_examples=30)
    def test_softmax_normalizes(self, seed):
        rng = np.random.default_rng(seed)
        dom = DomainSpec.ordinal_grid(3, levels=7, lo=-2, hi=2)
        J = np.zeros((3, 3))
        model = QuadraticEnergy(domain=dom, J=J, b=rng.normal(size=3), w=1.0)
        state = rng.integers(0, 7, size=3)
        for coord in range(3):
            p = softmax(proposal_logits(model, state, ChainParams(alpha=0.5), coord))
            assert abs(p.sum() - 1.0) <= 1e-12


class TestBinaryFlipProbs:
    def test_zero_gradient_closed_form(self):
        dom = DomainSpec.binary01(4)
        p = binary_flip_probs(zero_gradient_model(dom), np.zeros(4, dtype=int), ChainParams(alpha=1.0))
        assert np.allclose(p, 1 / (1 + np.exp(0.5)), atol=1e-15)  # sigma(-1/2) ~ 0.37754

    def test_huge_step_size_limits_to_half(self):
        dom = DomainSpec.spin_pm1(3)
        p = binary_flip_probs(zero_gradient_model(dom), np.zeros(3, dtype=int), ChainParams(alpha=1e12))
        assert np.allclose(p, 0.5, atol=1e-11)

    @pytest.mark.parametrize("kind", ["binary01", "spin_pm1"])
    def test_agrees_with_categorical_softmax(self, kind):
        """Closed form vs the generic two-category softmax, 1000 random states."""
        rng = np.random.default_rng(23)
        dom = DomainSpec.binary01(8) if kind == "binary01" else DomainSpec.spin_pm1(8)
        J = rng.integers(0, 2, size=(8, 8)).astype(float)
        J = np.triu(J, 1)
        J = J + J.T
        model = QuadraticEnergy(domain=dom, J=J, b=rng.normal(size=8), w=0.2)
        params = ChainParams(alpha=0.7, tau=1.3)
        worst = 0.0
        for _ in range(1000):
            state = rng.integers(0, 2, size=8)
            closed = binary_flip_probs(model, state, params)
            for d in range(8):
                p = softmax(proposal_logits(model, state, params, d))
                worst = max(worst, abs(p[1 - state[d]] - closed[d]))
        assert worst <= 1e-12

    def test_ordinal_domain_rejected(self):
        dom = DomainSpec.ordinal_grid(2, levels=5, lo=0, hi=1)
        with pytest.raises(DomainError):
            binary_flip_probs(zero_gradient_model(dom), np.zeros(2, dtype=int), ChainParams(alpha=1.0))


class TestDlsStep:
    def test_tiny_step_stays_put(self):
        dom = DomainSpec.ordinal_grid(2, levels=9, lo=-2, hi=2)
        model = zero_gradient_model(dom)
        params = ChainParams(alpha=1e-9)
        state = np.array([4, 4])
        for coord in range(2):
            p = softmax(proposal_logits(model, state, params, coord))
            assert p[state[coord]] >= 1 - 1e-6
        rng = substream(0, SALT_LOW)
        for _ in range(100):
            out = dls_step(model, state, params, rng)
            assert np.array_equal(out.proposal, state)

    def test_zero_gradient_flip_frequency(self):
        """Empirical flips vs sigma(-0.5) = 0.37754 over 1e5 coordinate draws."""
        dom = DomainSpec.binary01(100)
        model = zero_gradient_model(dom)
        rng = substream(1, SALT_LOW)
        state = np.zeros(100, dtype=np.int64)
        flips = 0
        for _ in range(1000):
            out = dls_step(model, state, ChainParams(alpha=1.0), rng)
            flips += int(out.proposal.sum())
        freq = flips / 100_000
        assert freq == pytest.approx(1 / (1 + np.exp(0.5)), abs=0.005)

    def test_same_seed_same_proposal(self):
        dom = DomainSpec.ordinal_grid(3, levels=11, lo=-2, hi=2)
        rng = np.random.default_rng(9)
        model = QuadraticEnergy(domain=dom, J=np.zeros((3, 3)), b=rng.normal(size=3), w=1.0)
        state = np.array([5, 2, 8])
        out1 = dls_step(model, state, ChainParams(alpha=0.3), substream(42, SALT_LOW))
        out2 = dls_step(model, state, ChainParams(alpha=0.3), substream(42, SALT_LOW))
        assert np.array_equal(out1.proposal, out2.proposal)
        assert out1.forward_logq == out2.forward_logq

    def test_forward_logq_matches_manual(self):
        dom = DomainSpec.spin_pm1(2)
        model = make_ising_chain(2, 0.15, np.zeros(2))
        params = ChainParams(alpha=0.4, tau=1.0, mh_enabled=True)
        state = np.array([0, 1])
        out = dls_step(model, state, params, substream(3, SALT_LOW))
        expected = 0.0
        for d in range(2):
            p = softmax(proposal_logits(model, state, params, d))
            expected += np.log(p[out.proposal[d]])
        assert out.forward_logq == pytest.approx(expected, abs=1e-12)
        rev = 0.0
        for d in range(2):
            p = softmax(proposal_logits(model, out.proposal, params, d))
            rev += np.log(p[state[d]])
        assert out.reverse_logq == pytest.approx(rev, abs=1e-12)


class TestMhAccept:
    def test_identity_proposal_always_accepted(self, two_spin_ising):
        params = ChainParams(alpha=1e-9, tau=1.0, mh_enabled=True)
        rng = substream(7, SALT_LOW)
        state = np.array([0, 1])
        for _ in range(50):
            out = chain_step(two_spin_ising, state, params, rng)
            assert out.accepted
            assert np.array_equal(out.state, state)

    def test_acceptance_formula_on_energy_increase(self, two_spin_ising):
        """With a symmetric proposal the acceptance is exactly exp(dU / tau)."""
        params = ChainParams(alpha=0.5, tau=2.0, mh_enabled=True)
        state = np.array([0, 1])  # U = -0.3
        proposal = np.array([1, 1])  # U = +0.3 -> downhill in -U, accepted always
        fwd = rev = 0.0
        for d in range(2):
            p_f = softmax(proposal_logits(two_spin_ising, state, params, d))
            p_r = softmax(proposal_logits(two_spin_ising, proposal, params, d))
            fwd += np.log(p_f[proposal[d]])
            rev += np.log(p_r[state[d]])
        log_a = (0.3 - (-0.3)) / params.tau + rev - fwd
        # reverse direction: energy decreases, acceptance < 1
        log_a_rev = ((-0.3) - 0.3) / params.tau + fwd - rev
        assert np.exp(min(0.0, log_a)) + np.exp(min(0.0, log_a_rev)) > 1.0  # one side is certain
        assert np.exp(log_a) * np.exp(log_a_rev) == pytest.approx(1.0, abs=1e-12)

    def test_missing_reverse_logq_fails_loudly(self, two_spin_ising):
        from drexel import mh_accept

        out = dls_step(two_spin_ising, np.array([0, 1]), ChainParams(alpha=0.4), substream(0, SALT_LOW))
        with pytest.raises(DomainError):
            mh_accept(two_spin_ising, ChainParams(alpha=0.4, mh_enabled=True), out, np.array([0, 1]), substream(1, SALT_LOW))


class TestSwapProbability:
    def test_equal_energies_history(self):
        cfg = SwapConfig(variant="history", rho=1.0)
        assert swap_probability(cfg, 1.0, 2.0, -5.0, -5.0, -5.0, -5.0) == 1.0

    def test_history_hand_value(self):
        cfg = SwapConfig(variant="history", rho=1.0)
        p = swap_probability(cfg, 1.0, 2.0, -1.0, -3.0, -1.0, -3.0)
        assert p == pytest.approx(np.exp(-2.0), abs=1e-12)

    def test_naive_hand_value(self):
        cfg = SwapConfig(variant="naive", rho=1.0)
        p = swap_probability(cfg, 1.0, 2.0, -1.0, -3.0, 0.0, 0.0)
        assert p == pytest.approx(np.exp(-1.0), abs=1e-12)

    def test_bias_corrected_reduces_to_naive_at_zero_sigma(self):
        naive = SwapConfig(variant="naive", rho=0.7)
        bias = SwapConfig(variant="bias_corrected", rho=0.7, sigma2=0.0)
        args = (1.0, 3.0, -2.0, -1.0, 0.5, 0.25)
        assert swap_probability(naive, *args) == swap_probability(bias, *args)

    def test_bias_correction_shifts_exponent(self):
        cfg = SwapConfig(variant="bias_corrected", rho=1.0, sigma2=2.0)
        beta = 1.0 / 2.0 - 1.0 / 1.0
        expected = min(1.0, np.exp(beta * (1.0 - beta * 2.0)))
        assert swap_probability(cfg, 1.0, 2.0, 1.0, 0.0, 0.0, 0.0) == pytest.approx(expected, abs=1e-14)

    @given(
        st.floats(0.1, 5), st.floats(0.1, 5),
        st.floats(-20, 20), st.floats(-20, 20), st.floats(-20, 20), st.floats(-20, 20),
    )
    @settings(max_examples=200)
    def test_history_time_reversal_symmetry(self, t1, t2, un1, un2, up1, up2):
        """Exchanging next and previous energies leaves the probability unchanged, exactly."""
        cfg = SwapConfig(variant="history", rho=0.9)
        a = swap_probability(cfg, t1, t2, un1, un2, up1, up2)
        b = swap_probability(cfg, t1, t2, up1, up2, un1, un2)
        assert a == b

    def test_non_finite_energy_rejected(self):
        cfg = SwapConfig(variant="naive", rho=1.0)
        with pytest.raises(NumericError):
            swap_probability(cfg, 1.0, 2.0, np.inf, 0.0, 0.0, 0.0)

    def test_range(self):
        cfg = SwapConfig(variant="history", rho=0.25)
        p = swap_probability(cfg, 1.0, 2.0, 5.0, -5.0, 5.0, -5.0)
        assert 0.0 <= p <= 0.25


class TestReplica:
    def test_rho_zero_matches_standalone_low_chain(self, two_spin_ising):
        replica = RunConfig(
            sampler="drexel", iterations=400, seed=12, alpha=0.2, tau=1.0,
            alpha_high=0.4, tau_high=2.0, rho=0.0,
        )
        single = RunConfig(sampler="dula", iterations=400, seed=12, alpha=0.2, tau=1.0)
        tr_pair = run_sampler(two_spin_ising, replica)
        tr_single = run_sampler(two_spin_ising, single)
        assert np.array_equal(tr_pair.states, tr_single.states)
        assert np.array_equal(tr_pair.energy_low, tr_single.energy_low)
        assert tr_pair.swap_successes == 0

    def test_identical_chains_always_swap(self, two_spin_ising):
        with pytest.warns(UserWarning):
            cfg = RunConfig(
                sampler="drexel", iterations=200, seed=4, alpha=0.3, tau=1.0,
                alpha_high=0.3, tau_high=1.0, rho=1.0,
            )
            trace = run_sampler(two_spin_ising, cfg)
        assert trace.swap_successes == trace.iterations

    def test_prev_energy_cache_consistency(self, two_spin_ising):
        from drexel import energy_value

        params_low = ChainParams(alpha=0.2, tau=1.0)
        params_high = ChainParams(alpha=0.4, tau=2.0)
        pair = make_replica_pair(
            np.array([0, 0]), np.array([1, 0]), params_low, params_high,
            SwapConfig(variant="history", rho=1.0), two_spin_ising,
        )
        rngs = [substream(1, SALT_LOW), substream(2, SALT_LOW), substream(3, SALT_LOW)]
        for _ in range(50):
            pair, _ = replica_step(pair, two_spin_ising, *rngs)
            assert pair.prev_energy_low == energy_value(two_spin_ising, pair.low)
            assert pair.prev_energy_high == energy_value(two_spin_ising, pair.high)

    def test_run_is_seed_deterministic(self, three_spin_ising):
        cfg = RunConfig(
            sampler="dream", iterations=300, seed=77, alpha=0.2, tau=1.0,
            alpha_high=0.5, tau_high=3.0,
        )
        a = run_sampler(three_spin_ising, cfg)
        b = run_sampler(three_spin_ising, cfg)
        assert np.array_equal(a.states, b.states)
        assert np.array_equal(a.energy_low, b.energy_low)
        assert np.array_equal(a.swapped, b.swapped)

    def test_single_iteration_trace_length(self, two_spin_ising):
        cfg = RunConfig(sampler="dula", iterations=1, seed=0, alpha=0.2)
        trace = run_sampler(two_spin_ising, cfg)
        assert trace.states.shape == (1, 2)

    def test_thinning_keeps_every_kth_state(self, two_spin_ising):
        full = run_sampler(two_spin_ising, RunConfig(sampler="dula", iterations=300, seed=5, alpha=0.4))
        thinned = run_sampler(two_spin_ising, RunConfig(sampler="dula", iterations=300, seed=5, alpha=0.4, thin=5))
        assert thinned.states.shape == (60, 2)
        assert np.array_equal(thinned.states, full.states[::5])
        assert np.array_equal(thinned.energy_low, full.energy_low)  # stats stay per-iteration

    def test_config_validation(self):
        with pytest.raises(DomainError):
            RunConfig(sampler="dream", iterations=10, seed=0, alpha=0.1)  # missing high chain
        with pytest.raises(DomainError):
            RunConfig(sampler="nope", iterations=10, seed=0, alpha=0.1)
        with pytest.raises(DomainError):
            ChainParams(alpha=-1.0)
        with pytest.raises(DomainError):
            SwapConfig(variant="history", rho=1.5)


class TestLongRunConvergence:
    """Unadjusted bias and empirical convergence on a tiny binary Ising chain.

    The bias claims are checked exactly through the kernels' stationary
    distributions; the long empirical runs then only need to clear the
    sampling-noise floor (about 0.015 total variation at 1e6 iterations for
    this instance, which is why the adjusted chain's budget is not tighter
    than the unadjusted one's).
    """

    @pytest.fixture
    def binary_chain(self):
        J = np.array([[0.0, 1, 0], [1, 0, 1], [0, 1, 0]])
        return QuadraticEnergy(domain=DomainSpec.binary01(3), J=J, b=np.zeros(3), w=0.15)

    def test_exact_stationary_bias(self, binary_chain):
        from drexel.oracle import enumerate_target, exact_single_kernel

        pi = enumerate_target(binary_chain).p
        biases = {}
        for with_mh in (False, True):
            params = ChainParams(alpha=0.1, tau=1.0, mh_enabled=with_mh)
            K = exact_single_kernel(binary_chain, params, with_mh=with_mh).matrix
            evals, evecs = np.linalg.eig(K.T)
            st = np.real(evecs[:, np.argmin(np.abs(evals - 1))])
            st /= st.sum()
            biases[with_mh] = 0.5 * np.abs(st - pi).sum()
        assert 0.0 < biases[False] <= 0.02  # unadjusted bias, small but real
        assert biases[True] <= 1e-12  # the Metropolis correction removes it

    @pytest.mark.slow
    @pytest.mark.parametrize("sampler,budget", [("dula", 0.02), ("dmala", 0.03)])
    def test_empirical_tv_after_many_iterations(self, binary_chain, sampler, budget):
        from drexel.metrics import EmpiricalHist
        from drexel.oracle import enumerate_target

        pi = enumerate_target(binary_chain)
        cfg = RunConfig(sampler=sampler, iterations=1_000_000, seed=3, alpha=0.1)
        trace = run_sampler(binary_chain, cfg)
        hist = EmpiricalHist.from_states(trace.states, binary_chain.domain)
        tv = 0.5 * np.abs(hist.counts / hist.total - pi.p).sum()
        assert tv <= budget


class TestEmpiricalKernelMatchesOracle:
    """The running sampler and the enumerated joint kernel must be the same chain."""

    @pytest.mark.slow
    def test_drexel_joint_kernel_within_three_standard_errors(self, two_spin_ising):
        from drexel.domains import state_index
        from drexel.oracle import exact_joint_kernel

        params_low = ChainParams(alpha=0.2, tau=1.0)
        params_high = ChainParams(alpha=0.4, tau=2.0)
        swap = SwapConfig(variant="history", rho=1.0)
        exact = exact_joint_kernel(two_spin_ising, params_low, params_high, swap).matrix

        iters = 1_000_000
        pair = make_replica_pair(
            np.array([0, 0]), np.array([1, 1]), params_low, params_high, swap, two_spin_ising,
        )
        rng_low = substream(100, SALT_LOW)
        rng_high = substream(101, SALT_LOW)
        rng_swap = substream(102, SALT_LOW)
        counts = np.zeros((16, 16))
        prev = state_index(pair.low, two_spin_ising.domain) * 4 + state_index(pair.high, two_spin_ising.domain)
        for _ in range(iters):
            pair, _ = replica_step(pair, two_spin_ising, rng_low, rng_high, rng_swap)
            cur = state_index(pair.low, two_spin_ising.domain) * 4 + state_index(pair.high, two_spin_ising.domain)
            counts[prev, cur] += 1
            prev = cur
        row_n = counts.sum(axis=1)
        assert row_n.min() > 1000  # every pair state visited
        emp = counts / row_n[:, None]
        se = np.sqrt(np.maximum(exact * (1 - exact), 1e-12) / row_n[:, None])
        z = np.abs(emp - exact) / se
        # 256 simultaneous entries: a handful beyond 3 SE is expected even for
        # a perfect kernel, none should stray past a Bonferroni-level 4 SE
        assert z.max() <= 4.0
        assert np.mean(z <= 3.0) >= 0.985

    @pytest.mark.slow
    def test_dream_joint_kernel_with_metropolis(self, two_spin_ising):
        """Same consistency check for the Metropolis-adjusted replica kernel."""
        from drexel.domains import state_index
        from drexel.oracle import exact_joint_kernel

        params_low = ChainParams(alpha=0.2, tau=1.0, mh_enabled=True)
        params_high = ChainParams(alpha=0.4, tau=2.0, mh_enabled=True)
        swap = SwapConfig(variant="history", rho=1.0)
        exact = exact_joint_kernel(two_spin_ising, params_low, params_high, swap, with_mh=True).matrix

        iters = 600_000
        pair = make_replica_pair(
            np.array([0, 1]), np.array([1, 0]), params_low, params_high, swap, two_spin_ising,
        )
        rng_low = substream(200, SALT_LOW)
        rng_high = substream(201, SALT_LOW)
        rng_swap = substream(202, SALT_LOW)
        counts = np.zeros((16, 16))
        prev = state_index(pair.low, two_spin_ising.domain) * 4 + state_index(pair.high, two_spin_ising.domain)
        for _ in range(iters):
            pair, _ = replica_step(pair, two_spin_ising, rng_low, rng_high, rng_swap)
            cur = state_index(pair.low, two_spin_ising.domain) * 4 + state_index(pair.high, two_spin_ising.domain)
            counts[prev, cur] += 1
            prev = cur
        row_n = counts.sum(axis=1)
        assert row_n.min() > 1000
        emp = counts / row_n[:, None]
        se = np.sqrt(np.maximum(exact * (1 - exact), 1e-12) / row_n[:, None])
        z = np.abs(emp - exact) / se
        assert z.max() <= 4.0
        assert np.mean(z <= 3.0) >= 0.985
