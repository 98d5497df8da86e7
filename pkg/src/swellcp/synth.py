"""Synthetic swelling-like data with known noise structure.

Each sample gets a random incubation dose ``d ~ N(d0, sd)`` (truncated to
``d >= 0``), a clean swelling ramp ``y0 = max(0, rate * (dose - d))`` and
multiplicative log-normal noise on ``y0 + 1``::

    y = max(0, (y0 + 1) * exp(eps) - 1),   eps ~ N(0, noise_sd_log)

so ``ln(y + 1)`` has homoscedastic Gaussian noise while the swelling itself
scatters more the larger it gets. Temperature, gas and composition are drawn
uniformly over the ranges of the reference dataset and carry no signal.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

from ._random import derive_seed, substream
from .config import PipelineConfig
from .data import CONTINUOUS, DEFAULT_SCHEMA, ELEMENTS, Dataset, encode, split
from .errors import ConfigError
from .evaluation import VARIANTS, compare_variants

COMPOSITION_RANGES = {
    "B": (0.0, 0.010), "C": (0.0, 0.110), "N": (0.0, 0.150), "Al": (0.0, 1.120),
    "Si": (0.0, 1.270), "P": (0.0, 0.220), "S": (0.0, 0.030), "Ti": (0.0, 1.110),
    "Cr": (14.88, 24.70), "Mn": (0.0, 1.94), "Fe": (34.28, 72.40), "Ni": (8.40, 43.00),
    "Cu": (0.0, 0.540), "Mo": (0.0, 3.08),
}
GAS_RANGE = (0.0, 10.0)

# Forest used for Monte-Carlo runs: 100 trees, every column a candidate at
# each node, leaves of at least 15 rows. Only dose carries signal here, so
# per-node column sampling would mostly split on noise columns and inflate
# the tree spread.
DESK_PIPELINE = PipelineConfig(n_trees=100, max_features=22, min_samples_leaf=15)


@dataclass(frozen=True)
class GeneratorConfig:
    n_samples: int = 311
    seed: int = 0
    incubation_dose_mean: float = 30.0
    incubation_dose_sd: float = 10.0
    steady_rate: float = 0.2
    noise_sd_log: float = 0.4
    dose_range: tuple = (0.5, 230.0)
    temperature_range: tuple = (150.0, 1023.4)
    # test-set doses for exchangeability-breaking runs, disjoint from dose_range
    shift_dose_range: tuple | None = (240.0, 400.0)

    def __post_init__(self):
        object.__setattr__(self, "dose_range", tuple(float(v) for v in self.dose_range))
        object.__setattr__(self, "temperature_range", tuple(float(v) for v in self.temperature_range))
        if self.shift_dose_range is not None:
            object.__setattr__(self, "shift_dose_range", tuple(float(v) for v in self.shift_dose_range))
        if self.n_samples < 0 or self.seed < 0:
            raise ConfigError("n_samples and seed must be non-negative")
        if self.steady_rate <= 0 or self.incubation_dose_sd < 0 or self.noise_sd_log < 0:
            raise ConfigError("steady_rate must be > 0; incubation_dose_sd and noise_sd_log >= 0")
        if self.incubation_dose_mean < 0 and self.incubation_dose_sd == 0:
            raise ConfigError("incubation dose cannot be negative")
        for name in ("dose_range", "temperature_range", "shift_dose_range"):
            rng = getattr(self, name)
            if rng is not None and not (len(rng) == 2 and rng[0] < rng[1]):
                raise ConfigError(f"{name} must be an increasing (low, high) pair")
        if self.dose_range[0] < 0:
            raise ConfigError("doses must be non-negative")

    def as_dict(self):
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        unknown = sorted(set(d) - set(cls.__dataclass_fields__))
        if unknown:
            raise ConfigError(f"unknown generator config keys: {unknown}")
        return cls(**d)


def _incubation_doses(rng, mean, sd, n):
    if sd == 0:
        return np.full(n, float(mean))
    d = rng.normal(mean, sd, size=n)
    bad = d < 0
    while bad.any():
        d[bad] = rng.normal(mean, sd, size=int(bad.sum()))
        bad = d < 0
    return d


def generate_arrays(cfg):
    """Raw generator output: continuous features, class labels, clean and noisy swelling."""
    rng = substream(cfg.seed, "generator")
    n = cfg.n_samples
    dose = rng.uniform(*cfg.dose_range, size=n)
    temperature = rng.uniform(*cfg.temperature_range, size=n)
    gas = rng.uniform(*GAS_RANGE, size=n)
    lo = np.array([COMPOSITION_RANGES[e][0] for e in ELEMENTS])
    hi = np.array([COMPOSITION_RANGES[e][1] for e in ELEMENTS])
    comp = lo + (hi - lo) * rng.random((n, len(ELEMENTS)))
    classes = rng.integers(0, len(DEFAULT_SCHEMA.classes), size=n)
    incubation = _incubation_doses(rng, cfg.incubation_dose_mean, cfg.incubation_dose_sd, n)
    eps = rng.normal(0.0, 1.0, size=n) * cfg.noise_sd_log
    y_clean = np.maximum(0.0, cfg.steady_rate * (dose - incubation))
    y = np.maximum(0.0, (y_clean + 1.0) * np.exp(eps) - 1.0)
    cont = np.column_stack([dose, temperature, gas, comp]).reshape(n, len(CONTINUOUS))
    labels = tuple(DEFAULT_SCHEMA.classes[c] for c in classes)
    return cont, labels, y_clean, y, incubation


def generate(cfg):
    """Schema-conformant synthetic :class:`~swellcp.data.Dataset`."""
    cont, labels, _, y, _ = generate_arrays(cfg)
    return Dataset(
        schema=DEFAULT_SCHEMA,
        continuous=cont,
        irradiation_type=labels,
        target=y,
        provenance={"source": "synthetic", "generator": cfg.as_dict(), "filters": []},
    )


def _repetition(gen_cfg, pipe_cfg, r, shift):
    rep_seed = derive_seed(gen_cfg.seed, "repetition", r)
    ds = generate(replace(gen_cfg, seed=rep_seed))
    sp = split(ds, pipe_cfg.fractions, rep_seed)
    X, y = encode(ds)
    tr, ca, te = (np.asarray(ix, dtype=np.int64) for ix in (sp.train, sp.calibration, sp.test))
    X_test, y_test = X[te], y[te]
    if shift:
        shifted = generate(replace(
            gen_cfg,
            seed=derive_seed(rep_seed, "shift"),
            n_samples=len(te),
            dose_range=gen_cfg.shift_dose_range,
        ))
        X_test, y_test = encode(shifted)
    cfg = pipe_cfg.updated(seed=rep_seed, n_jobs=1)
    res = compare_variants(X[tr], y[tr], X[ca], y[ca], X_test, y_test, cfg)
    out = {v: res[v].report.coverage for v in VARIANTS}
    cal = res["log_cp"].extra["calibrator"]
    return {
        "seed": rep_seed,
        "coverage": out,
        "q_alpha": cal.q_alpha if cal.bounded else None,
        "n_cal": cal.n_cal,
        "n_test": len(y_test),
    }


def _summary(values):
    v = np.asarray(values, dtype=float)
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else None
    return {"mean": float(v.mean()), "se": se, "values": [float(x) for x in v]}


def coverage_trial(gen_cfg, pipe_cfg=None, alpha=0.2, repetitions=200, shift=False, n_jobs=1):
    """Monte-Carlo check of marginal conformal coverage.

    Every repetition draws a fresh dataset, splits it, fits both forests,
    calibrates on the calibration block and records test coverage for all
    three variants. With ``shift=True`` the test block is replaced by samples
    whose doses come from ``gen_cfg.shift_dose_range``.

    The returned ``guarantee_band`` for ``log_cp`` is
    ``[1 - alpha - 3 se, 1 - alpha + 1 / (n_cal + 1) + 3 se]`` with ``se`` the
    standard error of the per-repetition coverages.
    """
    if repetitions < 1:
        raise ConfigError("repetitions must be at least 1")
    if shift and gen_cfg.shift_dose_range is None:
        raise ConfigError("shift requested but generator config has no shift_dose_range")
    pipe_cfg = (pipe_cfg or DESK_PIPELINE).updated(alpha=alpha)
    reps = range(repetitions)
    if n_jobs == 1:
        rows = [_repetition(gen_cfg, pipe_cfg, r, shift) for r in reps]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            rows = list(pool.map(lambda r: _repetition(gen_cfg, pipe_cfg, r, shift), reps))

    variants = {v: _summary([row["coverage"][v] for row in rows]) for v in VARIANTS}
    n_cal = rows[0]["n_cal"]
    n_test = rows[0]["n_test"]
    target = 1.0 - alpha
    cp = variants["log_cp"]
    se = cp["se"] or 0.0
    band = [target - 3 * se, target + 1.0 / (n_cal + 1) + 3 * se]
    std_cov = np.array(variants["standard_rf"]["values"])
    cp_cov = np.array(cp["values"])
    return {
        "alpha": alpha,
        "target_coverage": target,
        "repetitions": repetitions,
        "shift": bool(shift),
        "n_samples": gen_cfg.n_samples,
        "n_cal": n_cal,
        "n_test": n_test,
        "generator": gen_cfg.as_dict(),
        "pipeline": {k: v for k, v in pipe_cfg.as_dict().items() if k != "n_jobs"},
        "variants": variants,
        "guarantee_band": band,
        "within_band": bool(band[0] <= cp["mean"] <= band[1]),
        "binomial_se": math.sqrt(alpha * target / (n_test * repetitions)),
        "frac_standard_below_cp": float(np.mean(std_cov < cp_cov)),
        "coverage_shortfall": target - cp["mean"],
        "per_repetition": rows,
    }
