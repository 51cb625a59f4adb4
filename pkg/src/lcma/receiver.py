"""Single-stage and multi-stage receivers for decoding message combinations.

Single stage: select a K-by-K coefficient matrix, compute each stream's bin
posteriors with the configured detector, decode all streams in parallel, and
invert the coefficient matrix (or fall back to generalized inversion on the
syndrome-passing subset) to recover user messages.

Multi stage: per stage, decode the remaining users' streams, feed the
syndrome-passing ones to generalized matrix inversion, re-encode and
re-modulate every newly recovered user and subtract its exact signal from the
received block, then repeat on the reduced user set until nothing new is
recovered, everyone is recovered, or the stage budget runs out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel_model import ChannelRealization
from .coeff_select import select_coefficients
from .detector_lf import build_filter, app_lf_seq
from .detector_lpnc import app_exhaustive_seq, lsd_app_seq
from .ring_code import PamMapper, RingCode, decode_bp, encode, map_pam
from .zq_algebra import ZqMatrix, gmi, is_unit_invertible

__all__ = ["StageConfig", "ReceiverReport", "run_single_stage", "run_multi_stage"]

DETECTORS = ("lpnc_lsd", "lpnc_exhaustive", "linear_filter")


@dataclass(frozen=True)
class StageConfig:
    """Receiver knobs shared by the single- and multi-stage paths."""

    detector: str = "linear_filter"
    l_target: int | str = "auto"
    max_stages: int = 4
    list_size: int = 50
    theta: float | None = None
    bp_iters: int = 50

    def __post_init__(self):
        if self.detector not in DETECTORS:
            raise ValueError(f"detector must be one of {DETECTORS}")
        if self.max_stages < 1:
            raise ValueError("max_stages must be >= 1")
        if self.l_target != "auto" and (not isinstance(self.l_target, int) or self.l_target < 1):
            raise ValueError("l_target must be 'auto' or a positive integer")


@dataclass
class ReceiverReport:
    """Per-trial outcome: stream decodes, recovered users, stage trace."""

    decoded_combinations: np.ndarray  # L-by-k decoded combination messages (stage 1)
    success_flags: np.ndarray  # per-stream syndrome pass (stage 1)
    recovered_users: dict[int, np.ndarray]  # global user index -> message
    stages_run: int
    stage_matrices: list[np.ndarray] = field(default_factory=list)  # per-stage A~
    stage_recovered: list[tuple[int, ...]] = field(default_factory=list)

    @property
    def n_recovered(self) -> int:
        return len(self.recovered_users)


def _detect_apps(h, y, a_tilde, q, config):
    a_mod = np.asarray(a_tilde, dtype=np.int64) % q
    if config.detector == "lpnc_exhaustive":
        return app_exhaustive_seq(h, y, a_mod, q)
    if config.detector == "lpnc_lsd":
        return lsd_app_seq(h, y, a_mod, q, config.list_size)
    fb = build_filter(h, a_tilde, q, config.theta)
    return app_lf_seq(fb, y, a_mod, q)


def _decode_streams(code, apps, config):
    l_streams = apps.shape[0]
    decoded = np.zeros((l_streams, code.k), dtype=np.int64)
    flags = np.zeros(l_streams, dtype=bool)
    for l_idx in range(l_streams):
        decoded[l_idx], flags[l_idx] = decode_bp(code, apps[l_idx], config.bp_iters)
    return decoded, flags


def _recover_subset(a_mod, q, decoded, flags):
    """Recover whatever users the syndrome-passing rows pin down exactly."""
    ok_rows = np.nonzero(flags)[0]
    recovered: dict[int, np.ndarray] = {}
    if len(ok_rows) == 0:
        return recovered
    res = gmi(ZqMatrix(a_mod[ok_rows] % q, q))
    for user, ext_row in zip(res.recoverable_indices, res.extraction_rows.data):
        recovered[int(user)] = (ext_row @ decoded[ok_rows]) % q
    return recovered


def run_single_stage(
    h: ChannelRealization,
    y,
    code: RingCode,
    config: StageConfig,
    coeff_matrix=None,
) -> ReceiverReport:
    """Parallel decoding of K message combinations from one received block.

    coeff_matrix overrides the lattice-reduction choice with explicit integer
    rows (e.g. the identity for plain per-user decoding).  If every stream
    decodes, messages come from the full inverse; otherwise the
    syndrome-passing subset goes through generalized inversion.
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    q = code.q
    k_users = h.k_users
    if coeff_matrix is None:
        a_tilde = select_coefficients(h, k_users, q).a_tilde
    else:
        a_tilde = np.atleast_2d(np.asarray(coeff_matrix, dtype=np.int64))
    a_mod = a_tilde % q

    apps = _detect_apps(h, y, a_tilde, q, config)
    decoded, flags = _decode_streams(code, apps, config)

    recovered: dict[int, np.ndarray] = {}
    if flags.all() and a_mod.shape[0] == a_mod.shape[1]:
        ok, inv = is_unit_invertible(ZqMatrix(a_mod, q))
        if ok:
            b_hat = (inv.data @ decoded) % q
            recovered = {i: b_hat[i] for i in range(k_users)}
    if not recovered:
        recovered = _recover_subset(a_mod, q, decoded, flags)
    return ReceiverReport(
        decoded_combinations=decoded,
        success_flags=flags,
        recovered_users=recovered,
        stages_run=1,
        stage_matrices=[a_tilde.copy()],
        stage_recovered=[tuple(sorted(recovered))],
    )


def run_multi_stage(
    h: ChannelRealization,
    y,
    code: RingCode,
    config: StageConfig,
) -> ReceiverReport:
    """Stage loop: decode, extract users by generalized inversion, cancel, repeat."""
    y_cur = np.array(y, dtype=float, copy=True)
    q = code.q
    mapper = PamMapper(q)
    sqrho = math.sqrt(h.rho)
    remaining = list(range(h.k_users))
    recovered: dict[int, np.ndarray] = {}
    stage_matrices: list[np.ndarray] = []
    stage_recovered: list[tuple[int, ...]] = []
    first_decoded = None
    first_flags = None

    stages = 0
    for _ in range(config.max_stages):
        if not remaining:
            break
        stages += 1
        h_stage = ChannelRealization(
            H=h.H[:, remaining], rho=h.rho, fading=h.fading, n_r=h.n_r, n_s=h.n_s
        )
        k_rem = len(remaining)
        l_want = k_rem if config.l_target == "auto" else min(config.l_target, k_rem)
        sel = select_coefficients(h_stage, l_want, q)
        apps = _detect_apps(h_stage, y_cur, sel.a_tilde, q, config)
        decoded, flags = _decode_streams(code, apps, config)
        if first_decoded is None:
            first_decoded = decoded
            first_flags = flags
        stage_matrices.append(sel.a_tilde.copy())

        new_local = _recover_subset(sel.a_mod.data, q, decoded, flags)
        new_global: dict[int, np.ndarray] = {
            remaining[local]: msg for local, msg in new_local.items()
        }
        stage_recovered.append(tuple(sorted(new_global)))
        if not new_global:
            break
        for user, msg in new_global.items():
            x = map_pam(mapper, encode(code, msg))
            y_cur -= sqrho * np.outer(h.H[:, user], x)
            recovered[user] = msg
        remaining = [u for u in remaining if u not in new_global]

    return ReceiverReport(
        decoded_combinations=first_decoded
        if first_decoded is not None
        else np.zeros((0, code.k), dtype=np.int64),
        success_flags=first_flags if first_flags is not None else np.zeros(0, dtype=bool),
        recovered_users=recovered,
        stages_run=stages,
        stage_matrices=stage_matrices,
        stage_recovered=stage_recovered,
    )
