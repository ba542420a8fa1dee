import numpy as np
import pytest

from triadred.integrate import (BlowupError, FastBathModel, FullTriadModel,
                                IntegrationError, ReducedTriadModel,
                                StepperConfig, integrate_trajectory,
                                rk5_step, split_step_sde)
from triadred.model import (SystemState, XyyTriad, builtin_paper_model,
                            projected_builtin_model)
from triadred.series import RngStream


class TestRk5Step:
    def test_exponential_decay_oracle(self):
        z = rk5_step(lambda z: -z, np.array([1.0]), 0.1)
        assert abs(z[0] - np.exp(-0.1)) < 1e-9

    def test_zero_drift(self):
        z0 = np.array([1.0, -2.0, 3.0])
        z = rk5_step(lambda z: np.zeros_like(z), z0, 0.5)
        assert np.array_equal(z, z0)

    def test_non_finite_drift_reported(self):
        def bad(z):
            return np.array([np.nan])
        with pytest.raises(IntegrationError):
            rk5_step(bad, np.array([1.0]), 0.1, t=3.0)

    def test_long_bath_run_conserves_energy(self):
        # dt = 1e-3 over 1e5 steps keeps the bath on its shell to 1e-8
        # relative without any renormalization.
        from triadred.bath import run_fast_subsystem, sample_uniform_sphere
        cs = projected_builtin_model()
        y0 = sample_uniform_sphere(10, 10.0, RngStream(5).generator())
        res = run_fast_subsystem(cs.yyy, y0, 1e-3, 100.0, n=10,
                                 record_stride=100, renormalize=False)
        assert res.max_rel_energy_drift <= 1e-8

    def test_observed_convergence_order(self):
        # halving dt against a fine reference shows at least fourth order
        from triadred.bath import sample_uniform_sphere
        from triadred.integrate import pack_bath_triads
        from triadred import kernels
        cs = projected_builtin_model()
        y0 = sample_uniform_sphere(10, 10.0, RngStream(6).generator())
        bt, bf1, bf2, bc = pack_bath_triads(cs.yyy)
        ei = np.empty(0, dtype=np.int64)
        ef = np.empty(0)

        def end_state(dt, T=1.0):
            nsteps = round(T / dt)
            out = kernels.fast_bath_run(y0, bt, bf1, bf2, bc, ei, ei, ef,
                                        dt, nsteps, nsteps,
                                        kernels.SCHEME_RK5, False, 0.0,
                                        False, 1e12)
            return out[0][-1]

        ref = end_state(4e-3 / 64)
        errs = [np.linalg.norm(end_state(dt) - ref)
                for dt in (4e-3, 2e-3, 1e-3)]
        orders = [np.log2(errs[i] / errs[i + 1]) for i in range(2)]
        assert min(orders) >= 4.0


class TestSplitStepSde:
    def test_zero_noise_matches_rk5(self):
        z0 = np.array([0.3, -0.7])

        def drift(z):
            return -z

        def no_noise(z):
            return np.zeros((2, 1))

        rng = np.random.default_rng(0)
        a = split_step_sde(drift, no_noise, z0, 0.05, rng)
        b = rk5_step(drift, z0, 0.05)
        assert np.allclose(a, b, rtol=0, atol=0)

    def test_ou_stationary_variance(self):
        # dz = -z dt + sigma dW; sample variance near sigma^2/2 within
        # 3 standard errors (T chosen for test runtime, not precision)
        gamma, sigma, dt, T = 1.0, 2.236, 2e-3, 400.0
        nsteps = round(T / dt)
        rng = RngStream(11).generator()
        z = np.zeros(1)
        out = np.empty(nsteps)
        amp = np.array([[sigma]])
        for i in range(nsteps):
            z = split_step_sde(lambda s: -gamma * s, lambda s: amp, z, dt,
                               rng)
            out[i] = z[0]
        out = out[round(10 / dt):]
        target = sigma ** 2 / (2 * gamma)
        blocks = np.array_split(out, 20)
        vars_ = np.array([b.var() for b in blocks])
        se = vars_.std(ddof=1) / np.sqrt(len(blocks))
        assert abs(out.var() - target) < 3 * se

    def test_fixed_seed_reproducible(self):
        def drift(z):
            return -z

        def amps(z):
            return np.array([[1.0]])

        a = split_step_sde(drift, amps, np.array([1.0]), 0.01,
                           RngStream(3).generator())
        b = split_step_sde(drift, amps, np.array([1.0]), 0.01,
                           RngStream(3).generator())
        assert np.array_equal(a, b)


class TestIntegrateTrajectory:
    def test_fence_post_count(self):
        model = ReducedTriadModel(gamma=1.0, sigma=1.0, n=10, M=0.0)

        class Init:
            x = 0.0
            E = 10.0
            t = 0.0

        cfg = StepperConfig(dt=0.1, record_stride=1)
        ts = integrate_trajectory(model, Init(), cfg, 1.0, RngStream(1))
        assert len(ts) == 11

    def test_full_model_short_run_finite(self):
        cs = projected_builtin_model()
        model = FullTriadModel(cs.params(1.0), cs)
        init = SystemState(x=0.5, y=np.full(10, 1.0))
        cfg = StepperConfig(dt=1e-4, record_stride=10)
        ts = integrate_trajectory(model, init, cfg, 1.0, RngStream(2))
        assert np.all(np.isfinite(ts.values))
        assert ts.names == ("x",) + tuple(f"y{j}" for j in range(1, 11))

    def test_reproducible_with_same_stream(self):
        cs = projected_builtin_model()
        model = FullTriadModel(cs.params(1.0), cs)
        init = SystemState(x=0.5, y=np.full(10, 1.0))
        cfg = StepperConfig(dt=1e-4, record_stride=10)
        a = integrate_trajectory(model, init, cfg, 0.5, RngStream(7, 1))
        b = integrate_trajectory(model, init, cfg, 0.5, RngStream(7, 1))
        assert np.array_equal(a.values, b.values)

    def test_different_streams_differ(self):
        cs = projected_builtin_model()
        model = FullTriadModel(cs.params(1.0), cs)
        init = SystemState(x=0.5, y=np.full(10, 1.0))
        cfg = StepperConfig(dt=1e-4, record_stride=10)
        a = integrate_trajectory(model, init, cfg, 0.5, RngStream(7, 1))
        b = integrate_trajectory(model, init, cfg, 0.5, RngStream(7, 2))
        assert not np.array_equal(a.values, b.values)

    def test_blowup_detected(self):
        # a constraint-violating triad pumps energy without bound
        cs = builtin_paper_model()
        bad = CoeffsWithPositiveFeedback(cs)
        model = FullTriadModel(cs.params(1.0), bad)
        init = SystemState(x=1.0, y=np.full(10, 1.0))
        cfg = StepperConfig(dt=1e-2, record_stride=1)
        with pytest.raises(BlowupError):
            integrate_trajectory(model, init, cfg, 50.0, RngStream(1))

    def test_rejects_T_below_dt(self):
        model = FastBathModel(n=10, yyy=projected_builtin_model().yyy)
        cfg = StepperConfig(dt=0.1)
        with pytest.raises(ValueError):
            integrate_trajectory(model, np.ones(10), cfg, 0.01, RngStream(1))


class CoeffsWithPositiveFeedback:
    """Coefficient set with a non-conservative xyy triad (test helper)."""

    def __init__(self, base):
        self.gamma = base.gamma
        self.sigma = base.sigma
        self.n = base.n
        self.xyy = (XyyTriad(1, 2, 2.0, 2.0, 2.0),)
        self.yyy = ()


class TestStepperConfig:
    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            StepperConfig(dt=0.0)
        with pytest.raises(ValueError):
            StepperConfig(dt=0.1, record_stride=0)
        with pytest.raises(ValueError):
            StepperConfig(dt=0.1, scheme="rk9")

    def test_scheme_names(self):
        for scheme in ("rk5_euler", "rk2_euler", "euler_maruyama"):
            StepperConfig(dt=0.1, scheme=scheme)
