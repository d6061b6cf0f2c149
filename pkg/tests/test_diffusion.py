import math

import numpy as np
import pytest
from scipy import stats as sps

from unidiff.diffusion import (
    DiffusionRun,
    EigensolveError,
    SampleBatch,
    UnitarityError,
    eigenphases,
    reunitarize,
    run_to_checkpoints,
    simulate,
    step,
    unitarity_defect,
    unitary_factor,
)
from unidiff.ensembles import EnsembleSpec, Family, sample_hermitian, stream
from unidiff.stats import empirical_moments


def haar(n, seed):
    from scipy.stats import unitary_group

    return unitary_group.rvs(n, random_state=seed)


def test_zero_generator_leaves_state():
    run = DiffusionRun(EnsembleSpec("gaussian", 5, 1.0), (1.0,))
    u0 = haar(5, 1)
    run.u_current = u0.copy()
    step(run, np.zeros((5, 5)))
    assert np.array_equal(run.u_current, u0) or np.max(np.abs(run.u_current - u0)) < 1e-15
    assert run.n_steps == 1
    assert run.t_elapsed == pytest.approx(run.eps2)


def test_scalar_exponential():
    eps = 0.1
    u = unitary_factor(np.array([[np.pi / eps]]), eps)
    assert u[0, 0] == pytest.approx(-1.0, abs=1e-14)


def test_step_preserves_unitarity():
    spec = EnsembleSpec("uniform", 30, 1.0, 4)
    run = DiffusionRun(spec, (1.0,))
    rng = stream(spec, 0)
    for _ in range(37):
        step(run, sample_hermitian(spec, rng))
        assert unitarity_defect(run.u_current) < 1e-8


def test_step_shape_mismatch():
    run = DiffusionRun(EnsembleSpec("gaussian", 3, 1.0), (1.0,))
    with pytest.raises(ValueError):
        step(run, np.eye(4))


def test_long_run_unitarity():
    spec = EnsembleSpec("gaussian", 8, 1.0, 1)
    run = DiffusionRun(spec, (100.0,), m_per_unit=100)
    assert run.step_schedule == [10_000]
    run_to_checkpoints(run, 0)
    assert run.n_steps == 10_000
    assert unitarity_defect(run.u_current) < 1e-8


def test_elapsed_time_bookkeeping():
    spec = EnsembleSpec("gaussian", 4, 2.0)
    run = DiffusionRun(spec, (0.1, 0.37, 1.0))
    assert run.eps2 * spec.m2 <= 1e-2 + 1e-15
    out = run_to_checkpoints(run, 0)
    assert run.t_elapsed == pytest.approx(run.n_steps * run.eps2, rel=1e-15)
    for s, n in zip(out, run.step_schedule):
        assert s.n_steps == n
        assert n == math.ceil(s.t / run.eps2 - 1e-9)


def test_minimum_step_count():
    run = DiffusionRun(EnsembleSpec("gaussian", 4, 1e-4), (1.0,))
    assert run.step_schedule == [100]


def test_checkpoint_validation():
    spec = EnsembleSpec("gaussian", 4, 1.0)
    with pytest.raises(ValueError):
        DiffusionRun(spec, (2.0, 1.0))
    with pytest.raises(ValueError):
        DiffusionRun(spec, (-1.0,))
    with pytest.raises(ValueError):
        DiffusionRun(spec, ())


def test_zero_checkpoint_is_identity():
    spec = EnsembleSpec("sign", 6, 1.0)
    out = run_to_checkpoints(DiffusionRun(spec, (0.0, 0.5)), 0)
    assert np.all(out[0].thetas == 0)
    assert out[0].n_steps == 0
    assert np.any(out[1].thetas != 0)


def test_eigenphases_sorted_in_range():
    u = haar(40, 3)
    th = eigenphases(u)
    assert len(th) == 40
    assert np.all(np.diff(th) >= 0)
    assert np.all((th > -np.pi) & (th <= np.pi))
    np.testing.assert_allclose(np.sort(np.angle(np.linalg.eigvals(u))), np.sort(th), atol=1e-12)


def test_eigenphase_minus_pi_maps_to_pi():
    assert eigenphases(np.array([[-1.0 + 0j]]))[0] == np.pi


def test_eigenphases_reject_non_unitary():
    with pytest.raises(EigensolveError):
        eigenphases(np.diag([1.0, 1.1]).astype(complex))


def test_reunitarize_fixed_point():
    u = haar(10, 5)
    assert np.max(np.abs(reunitarize(u) - u)) < 1e-12


def test_reunitarize_scalar_perturbation():
    u = haar(10, 6)
    v = reunitarize(u * (1 + 1e-6))
    assert unitarity_defect(v) < 1e-12
    np.testing.assert_allclose(v, u, atol=1e-12)


def test_reunitarize_rejects_corruption():
    rng = np.random.default_rng(0)
    u = haar(6, 7)
    a = rng.standard_normal((6, 6))
    # scale a Hermitian perturbation so that |U^+U - I|_max is about 0.1
    h = (a + a.T) / 2
    w = u @ (np.eye(6) + 0.05 * h / np.max(np.abs(h)))
    assert unitarity_defect(w) > 1e-3
    with pytest.raises(UnitarityError):
        reunitarize(w)


def test_reunitarize_falls_back_when_svd_fails(monkeypatch):
    import unidiff.diffusion as mod

    real_svd = mod.linalg.svd
    drivers = []

    def flaky(a, *args, lapack_driver="gesdd", **kwargs):
        drivers.append(lapack_driver)
        if lapack_driver == "gesdd":
            raise mod.linalg.LinAlgError("SVD did not converge")
        return real_svd(a, *args, lapack_driver=lapack_driver, **kwargs)

    monkeypatch.setattr(mod.linalg, "svd", flaky)
    u = haar(10, 6)
    v = reunitarize(u * (1 + 1e-6))
    assert drivers == ["gesdd", "gesvd"]
    np.testing.assert_allclose(v, u, atol=1e-12)


def test_reunitarize_svd_failure_is_a_sample_failure(monkeypatch):
    import unidiff.diffusion as mod

    def broken(*args, **kwargs):
        raise mod.linalg.LinAlgError("SVD did not converge")

    monkeypatch.setattr(mod.linalg, "svd", broken)
    with pytest.raises(UnitarityError):
        reunitarize(haar(4, 1))


def test_batch_determinism_and_index_streams():
    spec = EnsembleSpec("gaussian", 10, 1.0, 42)
    a = simulate(spec, (0.5, 1.0), 4, threads=1)
    b = simulate(spec, (0.5, 1.0), 4, threads=1)
    c = simulate(spec, (0.5, 1.0), 2, start_index=2, threads=1)
    assert np.array_equal(a.thetas, b.thetas)
    assert np.array_equal(a.thetas[2:], c.thetas)
    assert list(c.indices) == [2, 3]


def test_parallel_matches_serial():
    spec = EnsembleSpec("sign", 8, 1.0, 3)
    a = simulate(spec, (1.0,), 4, threads=1)
    b = simulate(spec, (1.0,), 4, threads=2)
    assert np.array_equal(a.thetas, b.thetas)


def test_batch_accessors():
    spec = EnsembleSpec("gaussian", 6, 1.0, 1)
    batch = simulate(spec, (0.5, 1.0), 3, threads=1)
    assert isinstance(batch, SampleBatch)
    assert batch.thetas.shape == (3, 2, 6)
    samples = batch.at(1.0)
    assert [s.sample_index for s in samples] == [0, 1, 2]
    assert all(s.t == 1.0 and s.m2 == 1.0 and s.n == 6 for s in samples)
    assert np.array_equal(batch.phases(0.5), batch.thetas[:, 0])
    with pytest.raises(KeyError):
        batch.at(0.7)


def test_failed_samples_reported(monkeypatch):
    import unidiff.diffusion as d

    real = d.run_to_checkpoints

    def flaky(run, index=0):
        if index == 1:
            raise EigensolveError("synthetic")
        return real(run, index)

    monkeypatch.setattr(d, "run_to_checkpoints", flaky)
    spec = EnsembleSpec("gaussian", 4, 1.0)
    batch = simulate(spec, (0.5,), 5, threads=1, max_failure_fraction=0.5)
    assert batch.failed == [1]
    assert list(batch.indices) == [0, 2, 3, 4]
    with pytest.raises(EigensolveError):
        simulate(spec, (0.5,), 5, threads=1)


def test_scaling_in_m2t_is_exact_for_same_stream():
    # (m2, t) and (m2 / c, c t) use identical eps sqrt(m2), hence identical products
    a = simulate(EnsembleSpec("gaussian", 16, 1.0, 8), (1.0,), 3, threads=1).thetas
    b = simulate(EnsembleSpec("gaussian", 16, 0.5, 8), (2.0,), 3, threads=1).thetas
    np.testing.assert_allclose(a, b, atol=1e-10)


def test_scaling_in_m2t_statistically():
    a = simulate(EnsembleSpec("gaussian", 25, 1.0, 1), (1.5,), 40, threads=1).thetas.ravel()
    b = simulate(EnsembleSpec("gaussian", 25, 4.0, 2), (0.375,), 40, threads=1).thetas.ravel()
    assert sps.ks_2samp(a, b).pvalue > 0.01


def test_continuum_limit_stability():
    spec = EnsembleSpec("gaussian", 24, 1.0, 12)
    coarse = empirical_moments(simulate(spec, (1.0,), 60, m_per_unit=100, threads=1).at(1.0), 1)
    fine = empirical_moments(simulate(spec, (1.0,), 60, m_per_unit=200, threads=1).at(1.0), 1)
    se = math.hypot(coarse.stderr[0], fine.stderr[0])
    assert abs(coarse[1] - fine[1]) < 4 * se
    # both sit on the exact finite-N value e^{-t/2}
    assert abs(fine[1] - math.exp(-0.5)) < 4 * fine.stderr[0]


@pytest.mark.slow
@pytest.mark.parametrize("family", [Family.GAUSSIAN, Family.SIGN])
def test_first_moment_at_half(family):
    batch = simulate(EnsembleSpec(family, 100, 1.0, 31), (0.5,), 100)
    m = empirical_moments(batch.at(0.5), 1)
    assert abs(m[1] - math.exp(-0.25)) < 0.01
    assert abs(m[1] - math.exp(-0.25)) < 4 * m.stderr[0]
