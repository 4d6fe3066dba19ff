import numpy as np
import pytest

from ttsa import kernels
from ttsa.core import AffineMaps, NoiseModel
from ttsa.exceptions import EnsembleError, NumericBlowupError
from ttsa.schedules import Schedule

needs_compiled = pytest.mark.skipif("compiled" not in kernels.available_backends(),
                                    reason="compiled extension not built")

MAPS = AffineMaps([[0.5, 0.1], [0.0, 0.3]], [[0.2], [0.1]], [0.5, 0.1], [[0.3, 0.2]], [[0.1]], [0.3])
SCHED = Schedule("both_one_over_k", alpha=3.0, beta=1.5, offset=5.0)
NOISY = dict(noise_fast=NoiseModel.multiplicative(0.4), noise_slow=NoiseModel.additive(0.3))


def simulate(backend, seeds=(1, 2, 3), horizon=500, chunk=None, threads=1, **noise):
    noise = noise or NOISY
    rec = np.array([1, 2, 10, 77, 250, horizon])
    return kernels.simulate_affine(MAPS, SCHED, [0.2, -0.1], [1.0], horizon, rec, seeds,
                                   backend=backend, threads=threads, chunk=chunk, **noise)


def test_python_backend_always_available():
    assert "python" in kernels.available_backends()
    assert kernels.BACKEND in kernels.available_backends()


def test_unknown_backend_rejected():
    with pytest.raises(ValueError):
        kernels.get_impl("fortran")


@needs_compiled
def test_compiled_matches_fallback():
    a = simulate("python")
    b = simulate("compiled")
    for u, v in zip(a, b):
        assert np.max(np.abs(u - v)) <= 1e-12 * (1 + np.max(np.abs(u)))


@needs_compiled
def test_aux_recursion_backends_agree():
    rng = np.random.default_rng(0)
    decay, eps = rng.uniform(0.5, 1.0, 300), rng.uniform(0.0, 1e-3, 300)
    a = kernels.get_impl("python").aux_recursion(decay, eps)
    b = kernels.get_impl("compiled").aux_recursion(decay, eps)
    assert np.allclose(a, b, rtol=1e-13, atol=0)


@pytest.mark.parametrize("chunk", [1, 7, 64, 10_000])
def test_chunking_does_not_change_results(chunk):
    ref = simulate(None)
    got = simulate(None, chunk=chunk)
    for u, v in zip(ref, got):
        assert np.array_equal(u, v)


def test_threads_do_not_change_results():
    seeds = list(range(20))
    ref = simulate(None, seeds=seeds, threads=1)
    got = simulate(None, seeds=seeds, threads=4)
    for u, v in zip(ref, got):
        assert np.array_equal(u, v)


def test_trial_depends_only_on_its_seed():
    full = simulate(None, seeds=(5, 6, 7))
    alone = simulate(None, seeds=(6,))
    # batched matmuls may round differently from single-row ones
    for u, v in zip(full, alone):
        assert np.allclose(u[1], v[0], rtol=0, atol=1e-12)


def test_kernel_tracks_identity():
    X, Y, U, Z = simulate(None)
    assert np.max(np.abs(Y - Z - U)) <= 1e-12


def test_noiseless_u_is_zero_and_z_equals_y():
    zero = dict(noise_fast=NoiseModel.zero(), noise_slow=NoiseModel.zero())
    X, Y, U, Z = simulate(None, **zero)
    assert np.all(U == 0)
    assert np.max(np.abs(Y - Z)) <= 1e-15


def test_recorded_index_validation():
    with pytest.raises(ValueError):
        kernels.simulate_affine(MAPS, SCHED, [0, 0], [0], 10, [0, 5], [1], **NOISY)
    with pytest.raises(ValueError):
        kernels.simulate_affine(MAPS, SCHED, [0, 0], [0], 10, [5, 5], [1], **NOISY)


def test_blowup_reports_trial_seed():
    wild = Schedule("both_one_over_k", alpha=1e6, beta=1.0, offset=1.0)
    with pytest.raises(EnsembleError) as exc:
        kernels.simulate_affine(MAPS, wild, [1, 1], [1], 2000, [2000], [11, 12], **NOISY)
    assert exc.value.trial_seed == 11
    with pytest.raises(NumericBlowupError) as exc:
        kernels.simulate_affine(MAPS, wild, [1, 1], [1], 2000, [2000], [12], **NOISY)
    assert not isinstance(exc.value, EnsembleError)
    assert exc.value.trial_seed == 12


def test_thread_count_env(monkeypatch):
    monkeypatch.setenv("TTSA_THREADS", "3")
    assert kernels.thread_count() == 3
    assert kernels.thread_count(5) == 5
    monkeypatch.delenv("TTSA_THREADS")
    assert kernels.thread_count() >= 1
    assert kernels.thread_count(0) == 1


def test_noise_streams_are_independent_and_reproducible():
    a, b = kernels.NoiseStreams(3), kernels.NoiseStreams(3)
    assert np.array_equal(a.fast.standard_normal(4), b.fast.standard_normal(4))
    c = kernels.NoiseStreams(3)
    assert not np.array_equal(c.fast.standard_normal(4), c.slow.standard_normal(4))
