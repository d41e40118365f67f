import pytest

from eegfactor import CpdOptions, SynthSpec, make_tensor


@pytest.fixture(scope="session")
def planted_small():
    """Noiseless planted rank-3 tensor, small enough for repeated solves."""
    t, truth = make_tensor(SynthSpec(dims=(40, 19, 89), rank=3, seed=42))
    return t, truth


@pytest.fixture(scope="session")
def planted_noisy():
    """Planted rank-3 tensor at 20 dB SNR."""
    t, truth = make_tensor(SynthSpec(dims=(60, 19, 89), rank=3, snr_db=20.0, seed=17))
    return t, truth


@pytest.fixture()
def tight_opts():
    return CpdOptions(rank=3, n_starts=3, tol=1e-14, max_iters=300, seed=7)


def random_tensor3(rng, dims):
    from eegfactor import Tensor3

    return Tensor3(rng.standard_normal(dims))
