"""Seeded Monte Carlo runner for the MSE-versus-power curves.

Each trial draws one channel realization from its own counter-based stream
and pushes it through every (power, scheme) cell, so all schemes and power
points see the same channels and noise (common random numbers). Errors are
normalized by the prior energy of the estimated quantity; see
:func:`run_trial`.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .backward import lmmse_backward, nonoptimal_stage1_training, optimal_stage1_training
from .channel import draw_channels, stage1_receive, stage2_receive
from .config import SystemConfig, db_to_linear, trial_rng
from .errors import ConfigError, ExperimentAborted, TwRelayError
from .forward import entry_ls_baseline, forward_from_composite, noise_weight_eta, q_value, svd_ml_composite
from .training import build_training, random_allocation, solve_allocation

__all__ = [
    "Scheme",
    "ExperimentSpec",
    "MseRecord",
    "figure_spec",
    "stage_powers",
    "run_trial",
    "run_experiment",
    "write_csv",
    "read_csv",
    "write_gnuplot",
    "CSV_HEADER",
    "NONOPTIMAL_SEED",
]

log = logging.getLogger(__name__)

CSV_HEADER = ("snr_db", "scheme", "estimator", "target", "mse_mean", "mse_stderr", "trials")

# Fixed stream for the non-optimal stage-2 allocation: one draw, reused for
# every trial and power point.
NONOPTIMAL_SEED = 20240101
STAGE1_NONOPTIMAL_FRACTION = 0.8
MAX_FAILED_FRACTION = 0.01

TARGETS = ("backward", "composite", "forward")
STAGE1_SCHEMES = ("optimal", "non-optimal")
STAGE2_SCHEMES = ("bcrlb", "non-optimal")
STAGE2_ESTIMATORS = ("svd-ml", "entry-ml")


@dataclass(frozen=True)
class Scheme:
    """Training choice for both stages; ``stage2=None`` stops after stage 1."""

    stage1: str = "optimal"
    stage2: str | None = None

    def __post_init__(self):
        if self.stage1 not in STAGE1_SCHEMES:
            raise ConfigError(f"unknown stage-1 scheme {self.stage1!r}")
        if self.stage2 is not None and self.stage2 not in STAGE2_SCHEMES:
            raise ConfigError(f"unknown stage-2 scheme {self.stage2!r}")

    @property
    def label(self) -> str:
        return self.stage1 if self.stage2 is None else self.stage2


@dataclass(frozen=True)
class MseRecord:
    snr_db: float
    scheme: str
    estimator: str
    target: str
    mse_mean: float
    mse_stderr: float
    trials: int

    def __post_init__(self):
        if not (self.mse_mean >= 0 and self.mse_stderr >= 0):
            raise ValueError(f"negative statistics in {self}")


@dataclass(frozen=True)
class ExperimentSpec:
    """One figure's worth of Monte Carlo cells.

    ``snr_db`` is the transmit-power grid ``P`` in dB (unit noise power).
    ``stage1_boost_db`` raises the relay's stage-1 power above ``P`` in the
    stage-2 figures; ``decouple_powers`` instead takes the powers not being
    swept from ``config``.
    """

    figure: int
    snr_db: tuple[float, ...] = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    trials: int = 1000
    config: SystemConfig = field(default_factory=SystemConfig)
    schemes: tuple[Scheme, ...] = ()
    targets: tuple[str, ...] = ()
    output: str | None = None
    threads: int = 1
    decouple_powers: bool = False
    stage1_boost_db: float = 20.0

    def __post_init__(self):
        if self.figure not in (1, 2, 3):
            raise ConfigError(f"figure must be 1, 2 or 3, got {self.figure}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if len(self.snr_db) == 0:
            raise ConfigError("SNR grid is empty")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        object.__setattr__(self, "snr_db", tuple(float(s) for s in self.snr_db))
        if not self.schemes:
            if self.figure == 1:
                schemes = tuple(Scheme(s) for s in STAGE1_SCHEMES)
            else:
                schemes = tuple(Scheme("optimal", s) for s in STAGE2_SCHEMES)
            object.__setattr__(self, "schemes", schemes)
        if not self.targets:
            object.__setattr__(self, "targets", (TARGETS[self.figure - 1],))
        for t in self.targets:
            if t not in TARGETS:
                raise ConfigError(f"unknown target {t!r}")
        if any(t != "backward" for t in self.targets) and any(s.stage2 is None for s in self.schemes):
            raise ConfigError("stage-2 targets need schemes with a stage-2 training")

    @property
    def estimators(self) -> dict[str, tuple[str, ...]]:
        return {t: ("lmmse",) if t == "backward" else STAGE2_ESTIMATORS for t in self.targets}


def figure_spec(figure: int, **overrides) -> ExperimentSpec:
    return ExperimentSpec(figure=figure, **overrides)


def stage_powers(snr_db, config, figure, decouple_powers=False, stage1_boost_db=20.0):
    """Return ``(Pr, P1, P2)`` for one grid point.

    Coupled mode drives all three from ``P``, with the stage-1 power raised by
    ``stage1_boost_db`` in the stage-2 figures. Decoupled mode sweeps only the
    powers of the stage the figure studies.
    """
    P = float(db_to_linear(snr_db))
    if figure == 1:
        if decouple_powers:
            return P, config.P1, config.P2
        return P, P, P
    if decouple_powers:
        return config.Pr, P, P
    return P * float(db_to_linear(stage1_boost_db)), P, P


def _nonoptimal_allocation(budgets, N):
    return random_allocation(budgets, N, np.random.default_rng(NONOPTIMAL_SEED))


def _sqerr(estimate, truth) -> float:
    d = estimate - truth
    return float(np.vdot(d, d).real)


def run_trial(trial_index, snr_db, scheme: Scheme, config: SystemConfig, *,
              figure=None, decouple_powers=False, stage1_boost_db=20.0, rng=None) -> dict:
    """One pass of the two-stage pipeline at a single power point.

    Estimation happens at source 1. Squared errors are divided by the prior
    energy of the true quantity: ``N1 sigma2_h_1r`` for the backward channel,
    ``sum_k N_k sigma2_h_rk`` for the forward channel and their product for
    the composite ``h_hat h_c``. The mean of these is therefore a normalized
    MSE whose backward value is ``tr(C_dh) / (N1 sigma2_h_1r)``.

    Returns
    -------
    dict
        ``{(estimator, target): normalized squared error}``.
    """
    if figure is None:
        figure = 1 if scheme.stage2 is None else 2
    if rng is None:
        rng = trial_rng(config.seed, trial_index)
    Pr, P1, P2 = stage_powers(snr_db, config, figure, decouple_powers, stage1_boost_db)
    N1, N2 = config.N

    channels = draw_channels(config, rng)
    make_stage1 = optimal_stage1_training if scheme.stage1 == "optimal" else (
        lambda p, l: nonoptimal_stage1_training(p, l, STAGE1_NONOPTIMAL_FRACTION))
    p_R = make_stage1(Pr, config.Lr).p_R
    backward = []
    for i in (1, 2):
        Ytilde, _ = stage1_receive(channels.backward(i), p_R, config.sigma2_i[i - 1], rng)
        backward.append(lmmse_backward(Ytilde, p_R, config.sigma2_h_ir[i - 1], config.sigma2_i[i - 1]))
    h1, h1_hat = channels.h_1r, backward[0].h_hat
    e_back = N1 * config.sigma2_h_ir[0]
    out = {("lmmse", "backward"): _sqerr(h1_hat, h1) / e_back}
    if scheme.stage2 is None:
        return out

    if scheme.stage2 == "bcrlb":
        q = [q_value(b.h_hat, config.sigma2_r, config.sigma2_i[i]) for i, b in enumerate(backward)]
        allocation = solve_allocation(q, config.sigma2_h_ri, (P1, P2), config.N)
    else:
        allocation = _nonoptimal_allocation((P1, P2), config.N)
    training = build_training(allocation, config.L)
    P = training.P
    signals = stage2_receive(channels, training.P1, training.P2, config, rng)
    Y1 = signals.Y[0]

    h_c = channels.h_c
    e_fwd = N1 * config.sigma2_h_ri[0] + N2 * config.sigma2_h_ri[1]
    H_true = h1_hat @ h_c
    eta = noise_weight_eta(h1_hat, config.sigma2_r, config.sigma2_i[0])
    for name, est in (("svd-ml", svd_ml_composite(Y1, P, eta)), ("entry-ml", entry_ls_baseline(Y1, P))):
        fwd = forward_from_composite(est.H_c_hat, h1_hat, N1)
        out[(name, "composite")] = _sqerr(est.H_c_hat, H_true) / (e_back * e_fwd)
        out[(name, "forward")] = _sqerr(fwd.h_c_hat, h_c) / e_fwd
    return out


def _cells(spec: ExperimentSpec):
    return [(si, scheme, est, target)
            for si, scheme in enumerate(spec.schemes)
            for target in spec.targets
            for est in spec.estimators[target]]


def _trial_block(spec: ExperimentSpec, trial_index: int) -> np.ndarray:
    """Errors for every (snr, cell) of one trial; NaN marks a failed pass."""
    cells = _cells(spec)
    block = np.full((len(spec.snr_db), len(cells)), np.nan)
    for k, snr in enumerate(spec.snr_db):
        for si, scheme in enumerate(spec.schemes):
            try:
                errs = run_trial(trial_index, snr, scheme, spec.config, figure=spec.figure,
                                 decouple_powers=spec.decouple_powers,
                                 stage1_boost_db=spec.stage1_boost_db)
            except (TwRelayError, np.linalg.LinAlgError) as exc:
                log.warning("trial %d failed at %.3g dB, scheme %s: %s", trial_index, snr, scheme.label, exc)
                continue
            for c, (ci, _, est, target) in enumerate(cells):
                if ci == si:
                    block[k, c] = errs[(est, target)]
    return block


def run_experiment(spec: ExperimentSpec) -> list[MseRecord]:
    """Average every cell over ``spec.trials`` trials.

    Trials run on up to ``spec.threads`` workers; results are collected and
    reduced in trial-index order, so the output does not depend on the
    thread count.

    Raises
    ------
    ExperimentAborted
        If more than 1% of the trials in any cell failed.
    """
    indices = range(spec.trials)
    if spec.threads == 1:
        blocks = [_trial_block(spec, t) for t in indices]
    else:
        with ThreadPoolExecutor(max_workers=spec.threads) as pool:
            blocks = list(pool.map(lambda t: _trial_block(spec, t), indices))
    errors = np.stack(blocks)  # trial x snr x cell

    records = []
    for c, (_, scheme, est, target) in enumerate(_cells(spec)):
        for k, snr in enumerate(spec.snr_db):
            values = errors[:, k, c]
            ok = values[~np.isnan(values)]
            failed = values.size - ok.size
            if failed > MAX_FAILED_FRACTION * values.size:
                bad = np.flatnonzero(np.isnan(values))[:10].tolist()
                raise ExperimentAborted(
                    f"{failed}/{values.size} trials failed for scheme {scheme.label}, estimator {est}, "
                    f"target {target} at {snr:g} dB (first failed trials: {bad})")
            if failed:
                log.warning("%d failed trial(s) excluded from %s/%s/%s at %g dB",
                            failed, scheme.label, est, target, snr)
            stderr = float(np.std(ok, ddof=1) / math.sqrt(ok.size)) if ok.size > 1 else 0.0
            records.append(MseRecord(snr_db=snr, scheme=scheme.label, estimator=est, target=target,
                                     mse_mean=float(np.mean(ok)), mse_stderr=stderr, trials=int(ok.size)))
    return records


def _sort_key(r: MseRecord):
    return (r.target, r.scheme, r.estimator, r.snr_db)


def write_csv(records, path) -> Path:
    """Write records sorted by (target, scheme, estimator, snr_db), 9 significant digits."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in sorted(records, key=_sort_key):
            writer.writerow([f"{r.snr_db:.9g}", r.scheme, r.estimator, r.target,
                             f"{r.mse_mean:.9g}", f"{r.mse_stderr:.9g}", r.trials])
    return path


def read_csv(path) -> list[MseRecord]:
    with Path(path).open(encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        return [MseRecord(snr_db=float(row["snr_db"]), scheme=row["scheme"], estimator=row["estimator"],
                          target=row["target"], mse_mean=float(row["mse_mean"]),
                          mse_stderr=float(row["mse_stderr"]), trials=int(row["trials"]))
                for row in reader]


def write_gnuplot(records, csv_path, script_path) -> Path:
    """Companion gnuplot script drawing one log-scale curve per (target, scheme, estimator)."""
    csv_path, script_path = Path(csv_path), Path(script_path)
    curves = sorted({(r.target, r.scheme, r.estimator) for r in records})
    lines = [
        "set datafile separator ','",
        "set logscale y",
        "set xlabel 'P (dB)'",
        "set ylabel 'normalized MSE'",
        "set key outside",
        "set terminal pngcairo size 900,600",
        f"set output '{csv_path.with_suffix('.png').name}'",
    ]
    plots = [
        f"'{csv_path.name}' using ((strcol(2) eq '{s}' && strcol(3) eq '{e}' && strcol(4) eq '{t}') ? $1 : 1/0):5 "
        f"every ::1 with linespoints title '{t} {s} {e}'"
        for t, s, e in curves
    ]
    if plots:
        lines.append("plot " + ", \\\n     ".join(plots))
    script_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return script_path
