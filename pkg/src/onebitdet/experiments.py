"""Monte Carlo harness: trial batches, threshold calibration, ROC curves and presets."""
import time
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from . import detectors as det
from .estimation import BihtConfig, NormMode, biht_batch, project, spectral_step
from .model import (
    DEFAULT_THETA,
    Hypothesis,
    SpectrumSpec,
    build_scenario,
    build_spectrum_scenario,
    matrix_rng,
    make_rng,
    sample_measurements,
    trial_rng,
)
from .quantizer import SingularFIMError


class DetectorId(str, Enum):
    SIGN_GLRT = "sign-glrt"
    UNIFORM = "uniform"
    DOUBLE = "double"
    ORACLE = "oracle"
    CLAIRVOYANT = "clairvoyant"
    ENERGY = "energy"


class ThetaSource(str, Enum):
    BIHT_BITS = "biht-bits"
    TRUE_THETA = "true-theta"


@dataclass(frozen=True)
class DetectorSpec:
    detector: DetectorId
    p_fa_internal: float = 0.3
    theta_source: ThetaSource = ThetaSource.BIHT_BITS
    label: str = None

    def __post_init__(self):
        object.__setattr__(self, "detector", DetectorId(self.detector))
        object.__setattr__(self, "theta_source", ThetaSource(self.theta_source))
        if self.detector is DetectorId.DOUBLE and not 0.0 < self.p_fa_internal < 1.0:
            raise ValueError("p_fa_internal must lie in (0, 1)")

    @property
    def name(self):
        if self.label:
            return self.label
        if self.detector is DetectorId.DOUBLE:
            return f"double(pfa={self.p_fa_internal:g},{self.theta_source.value})"
        return self.detector.value


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to rebuild an experiment's world from a seed."""

    theta: tuple = tuple(DEFAULT_THETA)
    n_sensors: int = 50
    snr_db: float = 0.0
    sparsity: int = None  # None -> number of nonzeros in theta
    norm_mode: NormMode = NormMode.UNIT
    biht_iterations: int = 100
    redraw_matrix: bool = False
    spectrum: SpectrumSpec = None

    def __post_init__(self):
        object.__setattr__(self, "theta", tuple(float(t) for t in self.theta))
        object.__setattr__(self, "norm_mode", NormMode(self.norm_mode))
        if self.n_sensors < 1:
            raise ValueError("n_sensors must be at least 1")

    @property
    def k(self):
        if self.sparsity is not None:
            return self.sparsity
        if self.spectrum is not None:
            return 2 * len(self.spectrum.tone_bins)
        return int(np.count_nonzero(self.theta))

    def build(self, rng):
        if self.spectrum is not None:
            return build_spectrum_scenario(self.spectrum, self.n_sensors, self.snr_db, rng)
        return build_scenario(np.array(self.theta), self.n_sensors, self.snr_db, rng)


class Pipeline:
    """Sensor-side and fusion-center-side halves of one detector on one scenario.

    Both halves accept a single measurement vector or a (trials, N) stack;
    each row is processed independently.
    """

    chunk = 256

    def __init__(self, spec, scenario, config):
        self.spec = spec
        self.scenario = scenario
        self.config = config
        H = scenario.measurement_matrix
        sigma = scenario.noise_std
        d = spec.detector
        if d in (DetectorId.SIGN_GLRT, DetectorId.DOUBLE):
            self.step = spectral_step(H)
            self.biht_config = BihtConfig(
                sparsity=config.k,
                max_iterations=config.biht_iterations,
                norm_mode=config.norm_mode,
                oracle_norm=float(np.linalg.norm(scenario.theta)) or None,
            )
        if d is DetectorId.DOUBLE:
            self.taus = det.internal_thresholds(spec.p_fa_internal, sigma)
            if spec.theta_source is ThetaSource.TRUE_THETA:
                self.weights = det.double_detector_weights(scenario.theta, H, sigma, spec.p_fa_internal)
        elif d is DetectorId.ORACLE:
            self.weights = det.sign_glrt_weights(scenario.theta, H, sigma, scenario.quant_thresholds)
        elif d is DetectorId.CLAIRVOYANT:
            # theta_hat = P x with P = (H^T C^-1 H)^-1 H^T C^-1, factored once
            w = 1.0 / sigma ** 2
            normal = (H * w[:, None]).T @ H
            if H.shape[0] < H.shape[1] or np.linalg.matrix_rank(normal) < H.shape[1]:
                raise SingularFIMError(f"H^T C^-1 H is singular (N={H.shape[0]}, M={H.shape[1]})")
            self.wls_operator = np.linalg.solve(normal, H.T * w)

    def sense(self, x):
        """What the sensors transmit for measurement vector(s) ``x``."""
        d = self.spec.detector
        if d in (DetectorId.SIGN_GLRT, DetectorId.UNIFORM, DetectorId.ORACLE):
            return (np.asarray(x) - self.scenario.quant_thresholds > 0).astype(np.int8)
        if d is DetectorId.DOUBLE:
            return det.internal_detector(x, self.spec.p_fa_internal, self.scenario.noise_std)
        return np.asarray(x, dtype=float)

    def _biht(self, bits, taus):
        if bits.ndim == 1:
            return biht_batch(bits[None], self.scenario.measurement_matrix, taus, self.biht_config, self.step)[0][0]
        out = np.empty((bits.shape[0], self.scenario.dim))
        for i in range(0, bits.shape[0], self.chunk):
            out[i:i + self.chunk] = biht_batch(bits[i:i + self.chunk], self.scenario.measurement_matrix,
                                               taus, self.biht_config, self.step)[0]
        return out

    def fuse(self, data):
        """Fusion-center statistic(s), including any estimation done there."""
        d = self.spec.detector
        sc = self.scenario
        H, sigma = sc.measurement_matrix, sc.noise_std
        if d is DetectorId.SIGN_GLRT:
            theta_hat = self._biht(data, sc.quant_thresholds)
            return det.sign_glrt_statistic(data, det.sign_glrt_weights(theta_hat, H, sigma, sc.quant_thresholds))
        if d is DetectorId.UNIFORM:
            return det.uniform_glrt_statistic(data)
        if d is DetectorId.ORACLE:
            return det.sign_glrt_statistic(data, self.weights)
        if d is DetectorId.DOUBLE:
            if self.spec.theta_source is ThetaSource.TRUE_THETA:
                weights = self.weights
            else:
                weights = det.double_detector_weights(self._biht(data, self.taus), H, sigma, self.spec.p_fa_internal)
            return det.double_detector_statistic(data, weights)
        if d is DetectorId.CLAIRVOYANT:
            return det.clairvoyant_statistic(data, project(data, self.wls_operator), H, sigma)
        return det.energy_statistic(data)

    def statistic(self, x):
        return self.fuse(self.sense(x))


class TrialError(RuntimeError):
    def __init__(self, trial, hypothesis, cause):
        where = "all trials" if trial is None else f"trial {trial}"
        super().__init__(f"{where} ({hypothesis.value}): {cause}")
        self.trial = trial
        self.hypothesis = hypothesis


def _guarded(fn, x, trial, hyp):
    try:
        return fn(x)
    except np.linalg.LinAlgError as exc:
        raise TrialError(trial, hyp, exc) from exc


@dataclass
class TrialBatch:
    h0_statistics: np.ndarray
    h1_statistics: np.ndarray
    trials: int
    seed: int
    detector_id: str

    def __post_init__(self):
        if len(self.h0_statistics) != self.trials or len(self.h1_statistics) != self.trials:
            raise ValueError("statistic lists must both have length `trials`")


def experiment_scenario(config, seed):
    return config.build(matrix_rng(seed))


def _trial_scenario(config, base, seed, trial):
    if not config.redraw_matrix:
        return base
    return config.build(make_rng(seed, 13, trial))


def run_trials(config, detector, trials, seed, scenario=None):
    """Statistics of one detector under H0 and H1 for ``trials`` independent draws.

    Trial ``t`` under hypothesis ``h`` always uses substream ``(seed, t, h)``,
    so results do not depend on execution order or on the total trial count.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    spec = detector if isinstance(detector, DetectorSpec) else DetectorSpec(detector)
    base = scenario if scenario is not None else experiment_scenario(config, seed)
    stats = {}
    for hyp in (Hypothesis.H0, Hypothesis.H1):
        if config.redraw_matrix:
            values = np.empty(trials)
            for t in range(trials):
                pipeline = Pipeline(spec, _trial_scenario(config, base, seed, t), config)
                x = sample_measurements(pipeline.scenario, hyp, trial_rng(seed, t, hyp)).values
                values[t] = _guarded(pipeline.statistic, x, t, hyp)
        else:
            pipeline = _guarded(lambda _: Pipeline(spec, base, config), None, 0, hyp)
            xs = np.stack([sample_measurements(base, hyp, trial_rng(seed, t, hyp)).values for t in range(trials)])
            values = _guarded(pipeline.statistic, xs, None, hyp)
        stats[hyp] = np.asarray(values, dtype=float)
    return TrialBatch(stats[Hypothesis.H0], stats[Hypothesis.H1], trials, seed, spec.name)


@dataclass
class RocCurve:
    p_fa: np.ndarray
    p_d: np.ndarray
    thresholds: np.ndarray
    trials: int
    label: str = ""

    @property
    def points(self):
        return list(zip(self.p_fa.tolist(), self.p_d.tolist()))

    def pd_at(self, pfa):
        """Detection probability at false-alarm level ``pfa`` (linear interpolation)."""
        return float(np.interp(pfa, self.p_fa, self.p_d))


def roc_from_batch(batch, grid_size=200, label=None):
    """Threshold sweep over the pooled statistics.

    Points are ordered by increasing p_fa; thresholds sharing a p_fa keep the
    best p_d so p_fa is strictly increasing. A threshold below every
    statistic closes the curve at (1, 1).
    """
    h0 = np.sort(np.asarray(batch.h0_statistics, dtype=float))
    h1 = np.sort(np.asarray(batch.h1_statistics, dtype=float))
    if h0.size == 0 or h1.size == 0:
        raise ValueError("both statistic lists must be nonempty")
    pooled = np.unique(np.concatenate([h0, h1]))
    if pooled.size > grid_size:
        pooled = pooled[np.unique(np.linspace(0, pooled.size - 1, grid_size).round().astype(int))]
    thresholds = np.concatenate([[np.inf], pooled[::-1], [-np.inf]])
    p_fa = (h0.size - np.searchsorted(h0, thresholds, side="right")) / h0.size
    p_d = (h1.size - np.searchsorted(h1, thresholds, side="right")) / h1.size
    # thresholds descend, so p_fa and p_d are already nondecreasing
    last = np.r_[p_fa[1:] != p_fa[:-1], True]
    return RocCurve(p_fa[last], p_d[last], thresholds[last], batch.trials, label or batch.detector_id)


def calibrate_threshold(h0_statistics, target_pfa):
    """Smallest H0 sample value exceeded by at most ``target_pfa`` of the sample.

    This is the (1 - target_pfa) quantile taken on the sample points
    (inverted-CDF rule), so ``statistic > threshold`` has empirical false
    alarm rate floor(target_pfa * n) / n on the calibration batch.
    """
    h0 = np.asarray(h0_statistics, dtype=float)
    if h0.size == 0:
        raise ValueError("no H0 statistics to calibrate on")
    if not 0.0 < target_pfa < 1.0:
        raise ValueError("target_pfa must lie in (0, 1)")
    return float(np.quantile(h0, 1.0 - target_pfa, method="inverted_cdf"))


def calibrate_randomized(h0_statistics, target_pfa):
    """Threshold plus tie probability for a randomized Neyman-Pearson test.

    Deciding H1 when ``statistic > threshold``, and with probability
    ``tie_prob`` when ``statistic == threshold``, has empirical false-alarm
    rate exactly ``target_pfa`` on the calibration batch. Needed for
    lattice-valued statistics such as the uniform GLRT's bit count.
    """
    h0 = np.asarray(h0_statistics, dtype=float)
    threshold = calibrate_threshold(h0, target_pfa)
    above = np.count_nonzero(h0 > threshold)
    ties = np.count_nonzero(h0 == threshold)
    tie_prob = float(np.clip((target_pfa * h0.size - above) / ties, 0.0, 1.0))
    return threshold, tie_prob


def empirical_pfa(h0_statistics, threshold, tie_prob=0.0):
    """Expected false-alarm rate of the (possibly randomized) test on a batch."""
    h0 = np.asarray(h0_statistics)
    return float(np.mean(h0 > threshold) + tie_prob * np.mean(h0 == threshold))


@dataclass
class ExperimentResult:
    name: str
    curves: dict
    config: ScenarioConfig
    trials: int
    seed: int
    meta: dict = field(default_factory=dict)


def _run_many(config, specs, trials, seed, grid_size):
    scenario = experiment_scenario(config, seed)
    curves = {}
    for spec in specs:
        batch = run_trials(config, spec, trials, seed, scenario=scenario)
        curves[spec.name] = roc_from_batch(batch, grid_size, label=spec.name)
    return curves


PFA_SWEEP = (0.1, 0.2, 0.3, 0.4, 0.5)


def experiment_pfa_sweep(snr_db=0.0, trials=10_000, seed=1, config=None, grid_size=200,
                         theta_source=ThetaSource.BIHT_BITS, pfas=PFA_SWEEP):
    """Double-detector at each internal P_fa plus the sign-GLRT baseline."""
    config = replace(config or ScenarioConfig(), snr_db=snr_db)
    specs = [DetectorSpec(DetectorId.DOUBLE, p, theta_source) for p in pfas]
    specs.append(DetectorSpec(DetectorId.SIGN_GLRT))
    curves = _run_many(config, specs, trials, seed, grid_size)
    return ExperimentResult("pfa-sweep", curves, config, trials, seed,
                            {"p_fa_internal": {s.name: s.p_fa_internal for s in specs[:-1]}})


def experiment_comparison(trials=10_000, seed=1, config=None, grid_size=200,
                          p_fa_internal=0.3, theta_source=ThetaSource.BIHT_BITS):
    config = config or ScenarioConfig()
    specs = [
        DetectorSpec(DetectorId.CLAIRVOYANT),
        DetectorSpec(DetectorId.ORACLE),
        DetectorSpec(DetectorId.DOUBLE, p_fa_internal, theta_source),
        DetectorSpec(DetectorId.SIGN_GLRT),
        DetectorSpec(DetectorId.UNIFORM),
    ]
    return ExperimentResult("compare", _run_many(config, specs, trials, seed, grid_size), config, trials, seed)


SPECTRUM = SpectrumSpec(128, (10, 20, 30), (1.0, 0.5, 2.0))


def experiment_spectrum(n_sensors=100, trials=10_000, seed=1, snr_db=0.0, grid_size=200,
                        p_fa_internal=0.3, theta_source=ThetaSource.BIHT_BITS, spectrum=SPECTRUM, config=None):
    config = replace(config or ScenarioConfig(), spectrum=spectrum, n_sensors=n_sensors, snr_db=snr_db,
                     theta=tuple(np.zeros(spectrum.length)))
    specs = [
        DetectorSpec(DetectorId.DOUBLE, p_fa_internal, theta_source),
        DetectorSpec(DetectorId.SIGN_GLRT),
        DetectorSpec(DetectorId.ENERGY),
    ]
    return ExperimentResult("spectrum", _run_many(config, specs, trials, seed, grid_size), config, trials, seed)


@dataclass
class TimingResult:
    detector: str
    runs: int
    mean_seconds: float


def experiment_timing(runs=1000, seed=1, config=None, p_fa_internal=0.3):
    """Mean fusion-center time per detector; data generation is excluded."""
    config = config or ScenarioConfig()
    scenario = experiment_scenario(config, seed)
    specs = [
        DetectorSpec(DetectorId.SIGN_GLRT),
        DetectorSpec(DetectorId.DOUBLE, p_fa_internal, ThetaSource.TRUE_THETA),
        DetectorSpec(DetectorId.DOUBLE, p_fa_internal, ThetaSource.BIHT_BITS),
        DetectorSpec(DetectorId.UNIFORM),
        DetectorSpec(DetectorId.ORACLE),
        DetectorSpec(DetectorId.CLAIRVOYANT),
        DetectorSpec(DetectorId.ENERGY),
    ]
    results = []
    for spec in specs:
        pipeline = Pipeline(spec, scenario, config)
        payloads = [pipeline.sense(sample_measurements(scenario, Hypothesis.H1, trial_rng(seed, t, Hypothesis.H1)).values)
                    for t in range(runs)]
        start = time.perf_counter()
        for data in payloads:
            pipeline.fuse(data)
        results.append(TimingResult(spec.name, runs, (time.perf_counter() - start) / runs))
    return results
