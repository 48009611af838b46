"""Seeded SNR sweeps over the benchmark scenarios, CSV output and checkpoints.

Config files are flat ``key = value`` text, ``#`` starts a comment, lists
are comma separated::

    scenario = nonuniform_4pam
    snr_db_grid = 0, 2, 4, 6, 8, 10, 12
    decoders = map, maxl_gaussian, mind_supervised
    eval_samples = 100000
    seed = 1
    epochs = 40

Recognised keys are the fields of :class:`ExperimentConfig` plus the
training fields of :class:`mindec.mind.TrainConfig` (``epochs``,
``batch_size``, ``samples_per_epoch``, ``learning_rate``, ``lr_decay``,
``logit_clamp``, ``hidden``, ``activation``).
"""

from __future__ import annotations

import csv
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import baselines, channels as chan, coding, mind
from .estimators import RateEstimate, estimate_rates

log = logging.getLogger(__name__)

CSV_COLUMNS = ("scenario", "snr_db", "decoder", "ser", "ser_stderr", "ber", "ber_stderr",
               "pe_est", "hx", "hxy", "mi_per_use", "n_train", "n_eval", "seed")

SCENARIOS = {
    "nonuniform_4pam": ("awgn", ("map", "maxl_gaussian", "mind_supervised")),
    "nonlinear_4pam": ("nonlinear_awgn", ("map", "maxl_gaussian", "maxl_gaussian_csi",
                                          "mind_supervised")),
    "middleton_repetition": ("middleton", ("genie_middleton", "maxl_middleton",
                                           "maxl_gaussian", "mind_supervised")),
    "middleton_hamming": ("middleton", ("genie_middleton", "maxl_middleton",
                                        "maxl_gaussian", "mind_supervised")),
    "middleton_conv": ("middleton", ("genie_middleton", "maxl_middleton",
                                     "maxl_gaussian", "mind_supervised")),
}

# Impulsive-noise decision regions are thin and rarely visited, so those
# scenarios default to a deeper network and more data per epoch.  Keys given
# explicitly in a config file take precedence.
_MIDDLETON_TRAIN = {"hidden": (64, 64, 64), "samples_per_epoch": 300_000, "epochs": 60,
                    "lr_decay": 0.95}
SCENARIO_TRAIN = {name: dict(_MIDDLETON_TRAIN) for name, (kind, _) in SCENARIOS.items()
                  if kind == "middleton"}

_TRAIN_KEYS = {f.name for f in fields(mind.TrainConfig)} - {"seed"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    snr_db_grid: tuple[float, ...] = (0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0)
    train: mind.TrainConfig = field(default_factory=mind.TrainConfig)
    eval_samples: int = 100_000
    decoders: tuple[str, ...] = ()
    seed: int = 0
    output: str = ""
    p_low: float = 0.05
    impulse_ratio: float = 5.0
    impulse_prob: float = 0.05

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        grid = tuple(float(s) for s in self.snr_db_grid)
        if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("snr_db_grid must be non-empty and strictly increasing")
        object.__setattr__(self, "snr_db_grid", grid)
        if self.eval_samples < 1000:
            raise ConfigError("eval_samples must be at least 1000")
        decoders = tuple(self.decoders) or SCENARIOS[self.scenario][1]
        for d in decoders:
            if d not in baselines.DECODER_KINDS:
                raise ConfigError(f"unknown decoder {d!r}")
        channel_kind = SCENARIOS[self.scenario][0]
        if channel_kind != "middleton" and {"maxl_middleton", "genie_middleton"} & set(decoders):
            raise ConfigError("middleton decoders need a middleton scenario")
        object.__setattr__(self, "decoders", decoders)

    @property
    def channel_kind(self) -> str:
        return SCENARIOS[self.scenario][0]


@dataclass
class DecoderResult:
    ser: float
    ser_stderr: float
    ber: float
    ber_stderr: float


@dataclass
class SweepRow:
    snr_db: float
    results: dict[str, DecoderResult]
    rate: RateEstimate | None
    train_loss_final: float
    wall_time: float
    failed: bool = False


# -- config ------------------------------------------------------------------

def _parse_value(key: str, raw: str, target_type):
    try:
        if key in ("snr_db_grid",):
            return tuple(float(v) for v in raw.split(",") if v.strip())
        if key in ("decoders",):
            return tuple(v.strip() for v in raw.split(",") if v.strip())
        if key == "hidden":
            return tuple(int(v) for v in raw.split(",") if v.strip())
        if target_type in (int, "int"):
            return int(raw)
        if target_type in (float, "float"):
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {raw!r}") from exc


def parse_config(text: str, **overrides) -> ExperimentConfig:
    exp_types = {f.name: f.type for f in fields(ExperimentConfig)}
    train_types = {f.name: f.type for f in fields(mind.TrainConfig)}
    exp_kw: dict = {}
    train_kw: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        if key in _TRAIN_KEYS:
            train_kw[key] = _parse_value(key, raw, train_types[key])
        elif key in exp_types and key != "train":
            exp_kw[key] = _parse_value(key, raw, exp_types[key])
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
    exp_kw.update({k: v for k, v in overrides.items() if v is not None})
    if "scenario" not in exp_kw:
        raise ConfigError("config must set 'scenario'")
    train_kw = {**SCENARIO_TRAIN.get(exp_kw["scenario"], {}), **train_kw}
    try:
        exp_kw["train"] = mind.TrainConfig(**train_kw)
        return ExperimentConfig(**exp_kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path, **overrides) -> ExperimentConfig:
    return parse_config(Path(path).read_text(), **overrides)


# -- scenario construction ---------------------------------------------------

def scenario_codebook(cfg: ExperimentConfig) -> coding.Codebook:
    if cfg.scenario == "nonuniform_4pam":
        return coding.build_pam4(cfg.p_low)
    if cfg.scenario == "nonlinear_4pam":
        return coding.build_pam4(0.5)
    if cfg.scenario == "middleton_repetition":
        return coding.build_repetition(5)
    if cfg.scenario == "middleton_hamming":
        return coding.build_hamming74()
    return coding.build_conv(coding.ConvCodeSpec())


def scenario_channel(cfg: ExperimentConfig, cb: coding.Codebook, snr_db: float) -> chan.ChannelModel:
    kind = cfg.channel_kind
    es = chan.symbol_energy(cb.codewords, cb.prior, kind)
    sigma = chan.sigma_for_snr(snr_db, es, kind, cfg.impulse_ratio, cfg.impulse_prob)
    if kind == "middleton":
        return chan.ChannelModel(kind, sigma, cfg.impulse_ratio, cfg.impulse_prob)
    return chan.ChannelModel(kind, sigma)


def point_seed(seed: int, snr_index: int) -> int:
    """Per-SNR-point seed derived from the sweep seed."""
    return int(np.random.SeedSequence([seed, snr_index]).generate_state(1)[0])


def train_point(cfg: ExperimentConfig, snr_index: int, kind: str = "supervised") -> mind.TrainResult:
    cb = scenario_codebook(cfg)
    ch = scenario_channel(cfg, cb, cfg.snr_db_grid[snr_index])
    tcfg = replace(cfg.train, seed=point_seed(cfg.seed, snr_index))
    return mind.fit_discriminator(cb, ch, tcfg, kind)


# -- evaluation --------------------------------------------------------------

def ber_from_blocks(true_indices, decoded_indices, cb: coding.Codebook) -> DecoderResult:
    """Block (symbol) and information-bit error rates with binomial standard errors."""
    t = np.asarray(true_indices)
    d = np.asarray(decoded_indices)
    if t.shape != d.shape:
        raise ValueError("true and decoded index sequences differ in length")
    n_blocks = t.size
    if n_blocks == 0:
        raise ValueError("no blocks to score")
    ser = float(np.mean(t != d))
    bit_errors = int(np.sum(cb.label_bits[t] != cb.label_bits[d]))
    n_bits = n_blocks * cb.k
    ber = bit_errors / n_bits
    return DecoderResult(ser, math.sqrt(ser * (1 - ser) / n_blocks),
                         ber, math.sqrt(ber * (1 - ber) / n_bits))


def evaluate_point(cfg: ExperimentConfig, snr_index: int, discs: dict | None = None):
    """Decode a fresh evaluation stream with every configured decoder.

    Returns ``(results, posteriors)``; ``posteriors`` are the normalised MIND
    posteriors of the first trained discriminator (or None).
    """
    cb = scenario_codebook(cfg)
    ch = scenario_channel(cfg, cb, cfg.snr_db_grid[snr_index])
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, snr_index, 7]))
    idx, y, side = mind.draw_samples(cb, ch, cfg.eval_samples, rng)
    discs = discs or {}
    results: dict[str, DecoderResult] = {}
    posteriors = None
    for kind in cfg.decoders:
        disc = discs.get(kind)
        if kind.startswith("mind_") and disc is None:
            nan = float("nan")
            results[kind] = DecoderResult(nan, nan, nan, nan)
            continue
        decoded = baselines.decode_with(kind, cb, ch, y, side=side, disc=disc)
        results[kind] = ber_from_blocks(idx, decoded, cb)
        if disc is not None and posteriors is None:
            posteriors = mind.posterior(disc, y, normalize=True)
    return results, posteriors


def run_point(cfg: ExperimentConfig, snr_index: int) -> SweepRow:
    start = time.perf_counter()
    snr = cfg.snr_db_grid[snr_index]
    discs, losses, failed = {}, [], False
    for kind in cfg.decoders:
        if kind.startswith("mind_"):
            try:
                res = train_point(cfg, snr_index, kind.removeprefix("mind_"))
            except mind.TrainingDivergence as exc:
                log.warning("%s @ %g dB: %s: training diverged: %s", cfg.scenario, snr, kind, exc)
                failed = True
                continue
            discs[kind] = res.disc
            losses.append(res.final_loss)
    results, post = evaluate_point(cfg, snr_index, discs)
    cb = scenario_codebook(cfg)
    rate = estimate_rates(post, cb.n) if post is not None else None
    return SweepRow(snr, results, rate, losses[0] if losses else float("nan"),
                    time.perf_counter() - start, failed)


def run_scenario(cfg: ExperimentConfig, jobs: int = 1, progress=None) -> list[SweepRow]:
    """One row per SNR point, in grid order regardless of completion order."""
    n = len(cfg.snr_db_grid)
    if jobs > 1 and n > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(run_point, [cfg] * n, range(n)))
    else:
        rows = []
        for i in range(n):
            rows.append(run_point(cfg, i))
            if progress:
                progress(f"{cfg.scenario}: {cfg.snr_db_grid[i]:g} dB done "
                         f"({rows[-1].wall_time:.1f} s)")
    return rows


# -- persistence -------------------------------------------------------------

def _f(v) -> str:
    return format(float(v), ".17g")


def rows_to_records(cfg: ExperimentConfig, rows: list[SweepRow]) -> list[dict]:
    n_train = cfg.train.samples_per_epoch * cfg.train.epochs
    out = []
    for row in rows:
        r = row.rate
        nan = float("nan")
        for dec in cfg.decoders:
            res = row.results[dec]
            out.append({
                "scenario": cfg.scenario, "snr_db": _f(row.snr_db), "decoder": dec,
                "ser": _f(res.ser), "ser_stderr": _f(res.ser_stderr),
                "ber": _f(res.ber), "ber_stderr": _f(res.ber_stderr),
                "pe_est": _f(r.pe if r else nan), "hx": _f(r.hx_bits if r else nan),
                "hxy": _f(r.hxy_bits if r else nan),
                "mi_per_use": _f(r.mi_bits_per_use if r else nan),
                "n_train": str(n_train), "n_eval": str(cfg.eval_samples), "seed": str(cfg.seed),
            })
    return out


def save_results(cfg: ExperimentConfig, rows: list[SweepRow], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows_to_records(cfg, rows))


def load_results(path) -> list[dict]:
    """Read a sweep CSV back; numeric columns become floats / ints."""
    ints = {"n_train", "n_eval", "seed"}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV columns {reader.fieldnames}")
        out = []
        for rec in reader:
            parsed = {}
            for k, v in rec.items():
                if k in ("scenario", "decoder"):
                    parsed[k] = v
                elif k in ints:
                    parsed[k] = int(v)
                else:
                    parsed[k] = float(v)
            out.append(parsed)
    return out


def save_checkpoint(disc, path) -> None:
    Path(path).write_text(mind.dumps_discriminator(disc))


def load_checkpoint(path, codebook: coding.Codebook):
    return mind.loads_discriminator(Path(path).read_text(), codebook)
