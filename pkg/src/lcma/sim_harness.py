"""Monte Carlo experiment engine: SNR sweeps producing FER/BER tables.

A trial draws a channel block and K messages, runs the full transmit chain
and the configured receiver, and scores a frame error when any user's message
is wrong or missing.  Trial RNG streams are derived from
(master seed, SNR index, trial index), so results are independent of
execution order and re-runs are bit-identical.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, fields

import numpy as np

from .channel_model import (
    SpreadingMatrix,
    build_h,
    draw_spatial,
    load_spreading,
    table2_spreading,
    transmit,
)
from .receiver import StageConfig, run_multi_stage, run_single_stage
from .ring_code import PamMapper, RingCode, load_code, make_test_codes, map_pam

__all__ = ["ConfigError", "ExperimentConfig", "ResultRow", "run_experiment", "emit_csv", "load_results"]

CSV_HEADER = "snr_db,trials,frame_errors,bit_errors,fer,ber,mean_recovered,wall_time_s"

DETECTOR_NAMES = {"lsd": "lpnc_lsd", "exhaustive": "lpnc_exhaustive", "lf": "linear_filter"}


class ConfigError(ValueError):
    """Raised on invalid experiment configuration, before any trial runs."""


@dataclass(frozen=True)
class ExperimentConfig:
    q: int = 2
    users: int = 2
    n_s: int = 1
    n_r: int = 1
    fading: str = "awgn"
    code_n: int = 128
    code_k: int = 64
    code_seed: int = 7
    code_profile: str = "regular"
    code_file: str | None = None
    detector: str = "lf"  # lsd | exhaustive | lf
    receiver: str = "single"  # single | multi
    snr_db: tuple = (6.0, 8.0, 10.0)
    trials: int = 1000
    max_frame_errors: int = 100
    list_size: int = 50
    theta: float | None = None
    max_stages: int = 4
    bp_iters: int = 50
    seed: int = 0
    spreading: str | None = None  # None | "table2" | path to a pattern file
    out: str | None = None

    def validate(self):
        if self.q < 2:
            raise ConfigError("q must be >= 2")
        if self.users < 1:
            raise ConfigError("users must be >= 1")
        if self.n_s < 1 or self.n_r < 1:
            raise ConfigError("n_s and n_r must be >= 1")
        if self.fading not in ("awgn", "rayleigh_block"):
            raise ConfigError(f"unknown fading {self.fading!r}")
        if self.detector not in DETECTOR_NAMES:
            raise ConfigError(f"detector must be one of {sorted(DETECTOR_NAMES)}")
        if self.receiver not in ("single", "multi"):
            raise ConfigError("receiver must be 'single' or 'multi'")
        if not self.snr_db:
            raise ConfigError("snr_db list must be non-empty")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.max_frame_errors < 1:
            raise ConfigError("max_frame_errors must be >= 1")
        if self.code_file is None and not 0 < self.code_k < self.code_n:
            raise ConfigError("need 0 < code_k < code_n")
        if self.code_profile not in ("regular", "irregular"):
            raise ConfigError("code_profile must be 'regular' or 'irregular'")
        if self.theta is not None and self.theta <= 0:
            raise ConfigError("theta must be positive")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")
        if self.max_stages < 1:
            raise ConfigError("max_stages must be >= 1")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "snr_db" in d:
            d = dict(d, snr_db=tuple(float(v) for v in d["snr_db"]))
        cfg = cls(**d)
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as f:
            try:
                payload = json.load(f)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
        if not isinstance(payload, dict):
            raise ConfigError(f"{path}: top level must be a JSON object")
        return cls.from_dict(payload)


@dataclass(frozen=True)
class ResultRow:
    """One SNR point.  bit_errors counts a never-recovered user as all-wrong."""

    snr_db: float
    trials_run: int
    frame_errors: int
    bit_errors: int
    fer: float
    ber: float
    mean_recovered: float
    wall_time_s: float


def _resolve_code(config: ExperimentConfig) -> RingCode:
    if config.code_file:
        code = load_code(config.code_file)
        if code.q != config.q:
            raise ConfigError(f"code file has q={code.q}, config says q={config.q}")
        return code
    return make_test_codes(config.q, config.code_n, config.code_k, config.code_seed,
                           profile=config.code_profile)


def _resolve_spreading(config: ExperimentConfig) -> SpreadingMatrix | None:
    if config.spreading is None:
        if config.n_s != 1:
            raise ConfigError("n_s > 1 requires a spreading matrix (file or 'table2')")
        return None
    sp = table2_spreading() if config.spreading == "table2" else load_spreading(config.spreading)
    if sp.n_s != config.n_s or sp.k_users != config.users:
        raise ConfigError(
            f"spreading is {sp.n_s}x{sp.k_users}, config wants {config.n_s}x{config.users}"
        )
    return sp


def _bit_table(q: int) -> np.ndarray:
    """popcount(a XOR b) for all symbol pairs, used to count bit errors."""
    xor = np.arange(q)[:, None] ^ np.arange(q)[None, :]
    return np.vectorize(lambda v: bin(v).count("1"))(xor).astype(np.int64)


def run_experiment(config: ExperimentConfig, progress=None) -> list[ResultRow]:
    """Run the sweep; per point, trials stop early at the frame-error budget."""
    config.validate()
    code = _resolve_code(config)
    spreading = _resolve_spreading(config)
    mapper = PamMapper(config.q)
    bits_per_symbol = max(int(math.ceil(math.log2(config.q))), 1)
    bit_tab = _bit_table(config.q)
    bits_per_frame = config.users * code.k * bits_per_symbol
    stage_cfg = StageConfig(
        detector=DETECTOR_NAMES[config.detector],
        max_stages=config.max_stages,
        list_size=config.list_size,
        theta=config.theta,
        bp_iters=config.bp_iters,
    )
    rows = []
    for si, snr in enumerate(config.snr_db):
        rho = 10.0 ** (snr / 10.0)
        t0 = time.perf_counter()
        frame_errors = 0
        bit_errors = 0
        recovered_total = 0
        trials_run = 0
        for trial in range(config.trials):
            rng = np.random.default_rng(np.random.SeedSequence([config.seed, si, trial]))
            spatial = draw_spatial(config.users, config.n_r, config.fading, rng)
            h = build_h(spreading, spatial, config.fading, rho)
            messages = rng.integers(0, config.q, size=(config.users, code.k))
            cw = (code.generator.data @ messages.T) % config.q  # (n, K)
            x = map_pam(mapper, cw.T)  # (K, n)
            y = transmit(h, x, rng)
            if config.receiver == "single":
                report = run_single_stage(h, y, code, stage_cfg)
            else:
                report = run_multi_stage(h, y, code, stage_cfg)
            trials_run += 1
            recovered_total += report.n_recovered
            frame_bad = False
            for i in range(config.users):
                got = report.recovered_users.get(i)
                if got is None:
                    frame_bad = True
                    bit_errors += code.k * bits_per_symbol
                else:
                    diff = int(bit_tab[messages[i], got].sum())
                    if diff:
                        frame_bad = True
                    bit_errors += diff
            if frame_bad:
                frame_errors += 1
            if frame_errors >= config.max_frame_errors:
                break
        wall = time.perf_counter() - t0
        row = ResultRow(
            snr_db=float(snr),
            trials_run=trials_run,
            frame_errors=frame_errors,
            bit_errors=bit_errors,
            fer=frame_errors / trials_run,
            ber=bit_errors / (trials_run * bits_per_frame),
            mean_recovered=recovered_total / trials_run,
            wall_time_s=wall,
        )
        rows.append(row)
        if progress is not None:
            progress(row)
    return rows


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    # repr round-trips exactly and is locale-independent
    return repr(float(v))


def emit_csv(rows, path):
    """Write result rows with a fixed header and locale-free decimal formatting."""
    lines = [CSV_HEADER]
    for r in rows:
        lines.append(
            ",".join(
                _fmt(v)
                for v in (
                    r.snr_db,
                    r.trials_run,
                    r.frame_errors,
                    r.bit_errors,
                    r.fer,
                    r.ber,
                    r.mean_recovered,
                    r.wall_time_s,
                )
            )
        )
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def load_results(path) -> list[ResultRow]:
    with open(path) as f:
        lines = [ln.strip() for ln in f if ln.strip()]
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"{path}: missing or wrong CSV header")
    out = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 8:
            raise ValueError(f"{path}: bad row {ln!r}")
        out.append(
            ResultRow(
                snr_db=float(parts[0]),
                trials_run=int(parts[1]),
                frame_errors=int(parts[2]),
                bit_errors=int(parts[3]),
                fer=float(parts[4]),
                ber=float(parts[5]),
                mean_recovered=float(parts[6]),
                wall_time_s=float(parts[7]),
            )
        )
    return out
