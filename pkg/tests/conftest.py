from __future__ import annotations

import pytest

from imputeaudit.core import zscore_normalize
from imputeaudit.data import SyntheticConfig, generate_synthetic
from imputeaudit.models import ImputerConfig, fine_tune, train

OVERFIT_SEED = 3

AE_SMALL = dict(architecture="autoencoder", hidden=48, latent=24, batch_size=4, momentum=0.9, mask_fraction=0.2)


@pytest.fixture(scope="session")
def tiny_corpus():
    """Four normalized noisy-sinusoid series; the memorization playground."""
    cfg = SyntheticConfig(count=4, length=64, seed=OVERFIT_SEED, noise_scale=0.3)
    return [zscore_normalize(s)[0] for s in generate_synthetic(cfg)]


@pytest.fixture(scope="session")
def overfit_model(tiny_corpus):
    """Autoencoder deliberately trained into memorizing the tiny corpus.

    Staged fine-tuning at shrinking learning rates polishes the fit far below
    what a single constant-rate run reaches.
    """
    model = train(tiny_corpus, ImputerConfig(**AE_SMALL, epochs=3000, learning_rate=0.05, seed=1))
    model = fine_tune(model, tiny_corpus, ImputerConfig(**AE_SMALL, epochs=1500, learning_rate=0.01, seed=2))
    return fine_tune(model, tiny_corpus, ImputerConfig(**AE_SMALL, epochs=1500, learning_rate=0.002, seed=3))


@pytest.fixture(scope="session")
def fresh_model(tiny_corpus):
    """Same architecture, effectively untrained (one zero-rate epoch)."""
    return train(tiny_corpus, ImputerConfig(**AE_SMALL, epochs=1, learning_rate=0.0, seed=99))
