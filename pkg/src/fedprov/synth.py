"""Synthetic province-partitioned cohort generator.

Continuous features are drawn independently per the marginal targets
(truncated normal, or moment-matched lognormal for the right-skewed labs)
and clamped to the valid ranges. Labels come from a known ground-truth
logistic risk model so that trained-model quality has a measurable
upper bound (oracle_auc). Per-province intercepts are bisection-tuned
against fixed uniform draws until the empirical positive rate matches the
profile target, which keeps generation fully deterministic per seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ValidationError
from .evaluation import roc_auc
from .numerics import sigmoid
from .rng import substream
from .schema import (
    BINARY_COLUMNS,
    CONTINUOUS_COLUMNS,
    FEATURE_COLUMNS,
    FEATURE_RANGES,
    FL_PROVINCES,
    N_FEATURES,
    OPTIONAL_COLUMNS,
    Dataset,
    PatientRecord,
    encode_dataset,
)


@dataclass(frozen=True, slots=True)
class ContinuousSpec:
    """Marginal target for one continuous feature: family + moments + clamp range."""

    family: str  # "normal" or "lognormal" (moment-matched)
    mean: float
    std: float
    lo: float
    hi: float

    def __post_init__(self) -> None:
        if self.family not in ("normal", "lognormal"):
            raise ValidationError(f"unknown distribution family {self.family!r}")
        if self.std <= 0:
            raise ValidationError("std must be positive")
        if not self.lo < self.hi:
            raise ValidationError("clamp range must be non-empty")


@dataclass(frozen=True, slots=True)
class FeatureSpec:
    """Per-feature sampling targets for the whole schema."""

    continuous: dict[str, ContinuousSpec]
    binary_rates: dict[str, float]

    def __post_init__(self) -> None:
        missing = set(CONTINUOUS_COLUMNS) - set(self.continuous)
        if missing:
            raise ValidationError(f"continuous spec missing for {sorted(missing)}")
        for name, spec in self.continuous.items():
            if name not in CONTINUOUS_COLUMNS:
                raise ValidationError(f"{name!r} is not a continuous feature")
            lo, hi = FEATURE_RANGES[name]
            if spec.lo < lo or spec.hi > hi:
                raise ValidationError(
                    f"{name}: clamp range [{spec.lo}, {spec.hi}] exceeds valid [{lo}, {hi}]"
                )
        missing = set(BINARY_COLUMNS) - set(self.binary_rates)
        if missing:
            raise ValidationError(f"binary rate missing for {sorted(missing)}")
        for name, rate in self.binary_rates.items():
            if name not in BINARY_COLUMNS:
                raise ValidationError(f"{name!r} is not a binary feature")
            if not 0.0 <= rate <= 1.0:
                raise ValidationError(f"{name}: rate {rate} outside [0, 1]")


@dataclass(frozen=True, slots=True)
class MissingnessSpec:
    """MCAR blanking rate per optional feature. Rates must lie in [0, 1)."""

    rates: dict[str, float]

    def __post_init__(self) -> None:
        for name, rate in self.rates.items():
            if name not in OPTIONAL_COLUMNS:
                raise ValidationError(f"{name!r} may not carry a missingness rate")
            if not 0.0 <= rate < 1.0:
                raise ValidationError(f"{name}: missingness rate {rate} outside [0, 1)")

    def rate_for(self, name: str) -> float:
        return self.rates.get(name, 0.0)


@dataclass(frozen=True, slots=True)
class ProvinceProfile:
    """Cohort size and positive-rate target for one provincial client.

    target_positive_rate None means: no intercept tuning, labels are drawn
    straight from the risk model's own intercept.
    """

    province: str
    n_patients: int
    target_positive_rate: float | None

    def __post_init__(self) -> None:
        if self.province not in FL_PROVINCES:
            raise ValidationError(f"province {self.province!r} is not a federated client")
        if self.n_patients <= 0:
            raise ValidationError("n_patients must be positive")
        if self.target_positive_rate is not None and not 0.0 < self.target_positive_rate < 1.0:
            raise ValidationError(
                f"target positive rate {self.target_positive_rate} outside (0, 1)"
            )


@dataclass(frozen=True, slots=True)
class RiskModel:
    """Ground-truth label mechanism: logistic in standardized features.

    Coefficients act on (x - feature_mean) / feature_std; binary columns use
    identity statistics, so their coefficients act on the raw 0/1 values.
    """

    coeffs: np.ndarray
    intercept: float = 0.0
    feature_mean: np.ndarray = field(default_factory=lambda: np.zeros(N_FEATURES))
    feature_std: np.ndarray = field(default_factory=lambda: np.ones(N_FEATURES))

    def __post_init__(self) -> None:
        for name, arr in (
            ("coeffs", self.coeffs),
            ("feature_mean", self.feature_mean),
            ("feature_std", self.feature_std),
        ):
            if np.asarray(arr).shape != (N_FEATURES,):
                raise ValidationError(f"{name} must be a {N_FEATURES}-vector")
        if np.any(self.feature_std <= 0):
            raise ValidationError("feature_std entries must be positive")

    def linear_score(self, x: np.ndarray) -> np.ndarray:
        """Risk score without intercept (what AUC is invariant to)."""
        return ((x - self.feature_mean) / self.feature_std) @ self.coeffs


# Table-style marginal targets the generator reproduces by default.
def default_feature_spec() -> FeatureSpec:
    ranges = FEATURE_RANGES
    cont = {
        "age": ContinuousSpec("normal", 57.1, 14.39, *ranges["age"]),
        "sbp": ContinuousSpec("normal", 126.41, 16.01, *ranges["sbp"]),
        "bmi": ContinuousSpec("normal", 28.94, 6.44, *ranges["bmi"]),
        "ldl": ContinuousSpec("normal", 2.82, 0.95, *ranges["ldl"]),
        "hdl": ContinuousSpec("normal", 1.43, 0.45, *ranges["hdl"]),
        # right-skewed labs: lognormal with matched mean/std
        "hba1c": ContinuousSpec("lognormal", 5.936, 0.90, *ranges["hba1c"]),
        "tg": ContinuousSpec("lognormal", 1.47, 0.98, *ranges["tg"]),
    }
    rates = {
        "sex_male": 0.4582,
        "hypertension": 0.3951,
        "depression": 0.2140,
        "osteoarthritis": 0.1806,
        "copd": 0.0527,
        "htn_med": 0.4289,
        # headline count and percentage disagree in the source table; the
        # count (151 of 11,631) is the consistent reading
        "corticosteroids": 0.013,
    }
    return FeatureSpec(continuous=cont, binary_rates=rates)


def default_missingness_spec() -> MissingnessSpec:
    return MissingnessSpec(
        rates={"bmi": 0.2079, "ldl": 0.0044, "hdl": 0.0003, "hba1c": 0.2834, "tg": 0.0005}
    )


# Desk-scale stand-ins for the per-province sample counts. The base positive
# rate is set so the pooled prevalence lands on 0.1836; QC and NS keep an
# elevated rate to reproduce the low-precision / high-recall local pattern.
_BASE_RATE = 0.164
DEFAULT_PROVINCE_SIZES: dict[str, int] = {
    "AB": 2600, "BC": 900, "MB": 1400, "NL": 1100, "NS": 1200, "ON": 3400, "QC": 1030,
}
DEFAULT_PROVINCE_RATES: dict[str, float] = {
    "AB": _BASE_RATE, "BC": _BASE_RATE, "MB": _BASE_RATE, "NL": _BASE_RATE,
    "NS": 0.22, "ON": _BASE_RATE, "QC": 0.32,
}


def default_province_profiles(total: int | None = None) -> tuple[ProvinceProfile, ...]:
    """Default seven-province profiles, optionally rescaled to a new total.

    Rescaling uses largest-remainder rounding so the sizes sum to exactly
    `total` while keeping the default proportions.
    """
    sizes = dict(DEFAULT_PROVINCE_SIZES)
    if total is not None:
        if total < len(FL_PROVINCES):
            raise ValidationError(f"total {total} too small for {len(FL_PROVINCES)} provinces")
        base_total = sum(sizes.values())
        exact = {p: total * n / base_total for p, n in sizes.items()}
        floors = {p: max(1, int(v)) for p, v in exact.items()}
        shortfall = total - sum(floors.values())
        by_remainder = sorted(exact, key=lambda p: exact[p] - int(exact[p]), reverse=True)
        for p in by_remainder[:shortfall]:
            floors[p] += 1
        sizes = floors
    return tuple(
        ProvinceProfile(p, sizes[p], DEFAULT_PROVINCE_RATES[p]) for p in FL_PROVINCES
    )


# Ground-truth coefficients on standardized features. Directionally:
# positive weight on HbA1c (dominant), age, BMI, sBP, TG, hypertension and
# its medication; negative on HDL; zero elsewhere. Magnitudes tuned so the
# pooled oracle AUC of the default cohort sits near 0.87.
DEFAULT_RISK_COEFFS: dict[str, float] = {
    "hba1c": 1.62,
    "age": 0.60,
    "bmi": 0.54,
    "sbp": 0.36,
    "tg": 0.36,
    "hdl": -0.42,
    "hypertension": 0.42,
    "htn_med": 0.36,
}


def risk_model_from_dict(
    coeffs: dict[str, float], intercept: float, features: FeatureSpec
) -> RiskModel:
    """Build a RiskModel whose standardization basis comes from the feature spec."""
    unknown = set(coeffs) - set(FEATURE_COLUMNS)
    if unknown:
        raise ValidationError(f"unknown risk coefficient(s): {sorted(unknown)}")
    vec = np.array([coeffs.get(name, 0.0) for name in FEATURE_COLUMNS])
    mean = np.zeros(N_FEATURES)
    std = np.ones(N_FEATURES)
    for i, name in enumerate(FEATURE_COLUMNS):
        if name in CONTINUOUS_COLUMNS:
            spec = features.continuous[name]
            mean[i] = spec.mean
            std[i] = spec.std
    return RiskModel(coeffs=vec, intercept=intercept, feature_mean=mean, feature_std=std)


def default_risk_model(features: FeatureSpec | None = None) -> RiskModel:
    return risk_model_from_dict(DEFAULT_RISK_COEFFS, 0.0, features or default_feature_spec())


def _sample_continuous(spec: ContinuousSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    if spec.family == "normal":
        draws = rng.normal(spec.mean, spec.std, size=n)
    else:
        sigma2 = np.log1p((spec.std / spec.mean) ** 2)
        mu = np.log(spec.mean) - sigma2 / 2.0
        draws = rng.lognormal(mean=mu, sigma=np.sqrt(sigma2), size=n)
    return np.clip(draws, spec.lo, spec.hi)


def _tune_intercept(scores: np.ndarray, u: np.ndarray, target: float) -> float:
    """Bisect the intercept until mean(u < sigmoid(b + scores)) matches target.

    The empirical rate is a monotone step function of b against the fixed
    uniforms, so every count 0..n is reachable; tolerance is one percentage
    point or one record, whichever is larger.
    """
    lo, hi = -40.0, 40.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        rate = float(np.mean(u < sigmoid(mid + scores)))
        if rate < target:
            lo = mid
        else:
            hi = mid
    best = 0.5 * (lo + hi)
    rate = float(np.mean(u < sigmoid(best + scores)))
    tol = max(0.01, 1.0 / scores.size)
    if abs(rate - target) > tol:
        raise ValidationError(
            f"cannot reach positive rate {target} (closest achievable {rate})"
        )
    return best


def _generate_province(
    profile: ProvinceProfile,
    features: FeatureSpec,
    risk: RiskModel,
    seed: int,
) -> list[PatientRecord]:
    rng = substream(seed, "cohort", profile.province)
    n = profile.n_patients
    columns: dict[str, np.ndarray] = {}
    # fixed draw order: continuous then binary, each in schema column order
    for name in FEATURE_COLUMNS:
        if name in CONTINUOUS_COLUMNS:
            columns[name] = _sample_continuous(features.continuous[name], n, rng)
    for name in FEATURE_COLUMNS:
        if name in BINARY_COLUMNS:
            columns[name] = (rng.random(n) < features.binary_rates[name]).astype(int)

    x = np.column_stack([columns[name] for name in FEATURE_COLUMNS])
    scores = risk.linear_score(x)
    u = rng.random(n)
    if profile.target_positive_rate is None:
        intercept = risk.intercept
    else:
        intercept = _tune_intercept(scores, u, profile.target_positive_rate)
    labels = (u < sigmoid(intercept + scores)).astype(int)

    records = []
    for i in range(n):
        values = {name: columns[name][i] for name in FEATURE_COLUMNS}
        for name in CONTINUOUS_COLUMNS:
            values[name] = float(values[name])
        for name in BINARY_COLUMNS:
            values[name] = int(values[name])
        records.append(
            PatientRecord(**values, diabetes=int(labels[i]), province=profile.province)
        )
    return records


def generate_cohort(
    features: FeatureSpec,
    profiles: tuple[ProvinceProfile, ...] | list[ProvinceProfile],
    risk: RiskModel,
    seed: int,
) -> Dataset:
    """Draw a complete (no missing values) cohort, province by province.

    Each province uses an independent substream derived from (seed,
    province), so results do not depend on generation order. Records are
    concatenated in canonical province order.
    """
    if not profiles:
        raise ValidationError("at least one province profile required")
    seen = [p.province for p in profiles]
    if len(set(seen)) != len(seen):
        raise ValidationError(f"duplicate province profiles: {seen}")
    ordered = sorted(profiles, key=lambda p: FL_PROVINCES.index(p.province))
    records: list[PatientRecord] = []
    for profile in ordered:
        records.extend(_generate_province(profile, features, risk, seed))
    return Dataset(records=tuple(records), provenance=f"synthetic-seed-{seed}")


def inject_missingness(ds: Dataset, spec: MissingnessSpec, seed: int) -> Dataset:
    """Blank each optional cell independently at its spec rate (MCAR)."""
    n = len(ds.records)
    rng = substream(seed, "missingness")
    masks = {name: rng.random(n) < spec.rate_for(name) for name in OPTIONAL_COLUMNS}
    records = []
    for i, rec in enumerate(ds.records):
        blank = {name: None for name in OPTIONAL_COLUMNS if masks[name][i]}
        records.append(replace(rec, **blank) if blank else rec)
    return Dataset(records=tuple(records), provenance=ds.provenance)


def oracle_auc(risk: RiskModel, ds: Dataset) -> float:
    """ROC-AUC of the ground-truth risk score against the realized labels.

    This is the Bayes-optimal yardstick: no model trained on the features
    can beat it except by sampling luck.
    """
    x, y = encode_dataset(ds)
    if np.isnan(x).any():
        raise ValidationError("oracle_auc requires a complete dataset")
    return roc_auc(risk.linear_score(x), y)


@dataclass(frozen=True, slots=True)
class GeneratorConfig:
    """Everything generate_dataset needs, as one configurable bundle."""

    features: FeatureSpec
    missingness: MissingnessSpec
    profiles: tuple[ProvinceProfile, ...]
    risk_coeffs: dict[str, float]
    risk_intercept: float = 0.0

    def risk_model(self) -> RiskModel:
        return risk_model_from_dict(self.risk_coeffs, self.risk_intercept, self.features)


def default_generator_config(total: int | None = None) -> GeneratorConfig:
    return GeneratorConfig(
        features=default_feature_spec(),
        missingness=default_missingness_spec(),
        profiles=default_province_profiles(total),
        risk_coeffs=dict(DEFAULT_RISK_COEFFS),
    )


def generate_dataset(config: GeneratorConfig, seed: int) -> Dataset:
    """Generate the cohort and apply MCAR missingness: the standard entry point."""
    complete = generate_cohort(config.features, config.profiles, config.risk_model(), seed)
    return inject_missingness(complete, config.missingness, seed)


def generator_config_to_dict(cfg: GeneratorConfig) -> dict:
    """JSON-ready representation; see README for the schema."""
    return {
        "features": {
            "continuous": {
                name: {
                    "family": s.family, "mean": s.mean, "std": s.std,
                    "lo": s.lo, "hi": s.hi,
                }
                for name, s in cfg.features.continuous.items()
            },
            "binary_rates": dict(cfg.features.binary_rates),
        },
        "missingness": dict(cfg.missingness.rates),
        "provinces": [
            {
                "province": p.province,
                "n_patients": p.n_patients,
                "target_positive_rate": p.target_positive_rate,
            }
            for p in cfg.profiles
        ],
        "risk_model": {"coefficients": dict(cfg.risk_coeffs), "intercept": cfg.risk_intercept},
    }


def generator_config_from_dict(data: dict) -> GeneratorConfig:
    try:
        features = FeatureSpec(
            continuous={
                name: ContinuousSpec(
                    family=s["family"], mean=s["mean"], std=s["std"], lo=s["lo"], hi=s["hi"]
                )
                for name, s in data["features"]["continuous"].items()
            },
            binary_rates=dict(data["features"]["binary_rates"]),
        )
        missingness = MissingnessSpec(rates=dict(data["missingness"]))
        profiles = tuple(
            ProvinceProfile(
                province=p["province"],
                n_patients=p["n_patients"],
                target_positive_rate=p.get("target_positive_rate"),
            )
            for p in data["provinces"]
        )
        risk = data["risk_model"]
        return GeneratorConfig(
            features=features,
            missingness=missingness,
            profiles=profiles,
            risk_coeffs=dict(risk["coefficients"]),
            risk_intercept=risk.get("intercept", 0.0),
        )
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed generator config: {exc}") from exc
