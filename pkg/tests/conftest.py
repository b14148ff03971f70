import functools

import numpy as np
import pytest

from fedprov.numerics import sigmoid
from fedprov.schema import Dataset, LabeledMatrix, PatientRecord


def make_record(**overrides) -> PatientRecord:
    """A valid record at the cohort's typical values; override any field."""
    values = dict(
        age=57.1,
        sex_male=0,
        sbp=126.41,
        bmi=28.94,
        ldl=2.82,
        hdl=1.43,
        hba1c=5.936,
        tg=1.47,
        hypertension=0,
        depression=0,
        osteoarthritis=0,
        copd=0,
        htn_med=0,
        corticosteroids=0,
        diabetes=0,
        province="AB",
    )
    values.update(overrides)
    return PatientRecord(**values)


@pytest.fixture
def record_factory():
    return make_record


def make_dataset(n: int, province: str = "AB", seed: int = 0) -> Dataset:
    """Small dataset with varying ages/labels, all other fields typical."""
    rng = np.random.default_rng(seed)
    records = tuple(
        make_record(
            age=float(np.round(rng.uniform(20, 90), 3)),
            sbp=float(np.round(rng.uniform(90, 180), 3)),
            bmi=float(np.round(rng.uniform(18, 45), 3)),
            hba1c=float(np.round(rng.uniform(4.5, 9.0), 3)),
            tg=float(np.round(rng.uniform(0.5, 4.0), 3)),
            ldl=float(np.round(rng.uniform(1.0, 5.0), 3)),
            hdl=float(np.round(rng.uniform(0.8, 2.5), 3)),
            sex_male=int(rng.random() < 0.5),
            hypertension=int(rng.random() < 0.4),
            depression=int(rng.random() < 0.2),
            osteoarthritis=int(rng.random() < 0.18),
            copd=int(rng.random() < 0.3),
            htn_med=int(rng.random() < 0.43),
            corticosteroids=int(rng.random() < 0.25),
            diabetes=int(rng.random() < 0.4),
            province=province,
        )
        for _ in range(n)
    )
    return Dataset(records=records, provenance=f"test-{seed}")


@pytest.fixture
def dataset_factory():
    return make_dataset


def random_matrix(n: int, seed: int = 0, pos_rate: float = 0.4) -> LabeledMatrix:
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, 14))
    y = (rng.random(n) < pos_rate).astype(float)
    return LabeledMatrix(x=x, y=y)


def lr_toy_overlap() -> LabeledMatrix:
    """Non-separable 2D problem embedded in the first two columns.

    The unpenalized optimum of the smooth logistic loss on this fixture is
    finite; see test_models for the frozen oracle value.
    """
    rng = np.random.default_rng(11)
    n = 120
    x = np.zeros((n, 14))
    x[:, 0] = rng.normal(0.0, 1.0, n)
    x[:, 1] = rng.normal(0.0, 1.0, n)
    logits = 1.2 * x[:, 0] - 0.8 * x[:, 1] + 0.3
    y = (rng.random(n) < sigmoid(logits)).astype(float)
    return LabeledMatrix(x=x, y=y)


def lr_toy_separable() -> LabeledMatrix:
    """Linearly separable classes along column 0 with a wide margin."""
    rng = np.random.default_rng(4)
    n = 60
    half = n // 2
    x = np.zeros((n, 14))
    x[:half, 0] = rng.normal(-2.0, 0.4, half)
    x[half:, 0] = rng.normal(2.0, 0.4, half)
    x[:, 1] = rng.normal(0.0, 0.3, n)
    y = np.concatenate([np.zeros(half), np.ones(half)])
    return LabeledMatrix(x=x, y=y)


def xor_fixture(n: int = 400, seed: int = 9) -> LabeledMatrix:
    """XOR-style labels on the first two columns; linear models cap near 0.5."""
    rng = np.random.default_rng(seed)
    x = np.zeros((n, 14))
    a = rng.uniform(0.2, 1.0, n) * rng.choice([-1.0, 1.0], n)
    b = rng.uniform(0.2, 1.0, n) * rng.choice([-1.0, 1.0], n)
    x[:, 0] = a
    x[:, 1] = b
    y = (a * b > 0).astype(float)
    return LabeledMatrix(x=x, y=y)


@functools.lru_cache(maxsize=3)
def cohort_draw(total: int, seed: int):
    """Cached default-config draw: (complete dataset, with-missing dataset,
    complete x, y). Shared across test modules to keep big draws one-off."""
    from fedprov.schema import encode_dataset
    from fedprov.synth import default_generator_config, generate_cohort, inject_missingness

    cfg = default_generator_config(total=total)
    complete = generate_cohort(cfg.features, cfg.profiles, cfg.risk_model(), seed)
    missing = inject_missingness(complete, cfg.missingness, seed)
    x, y = encode_dataset(complete)
    return complete, missing, x, y
