"""Lattice-code multiple-access uplink simulation library.

K users share the channel with the same ring code over Z_q and q-PAM
signaling; the receiver decodes integer linear combinations of their messages
via algebraic binning, then inverts the coefficient matrix (fully or
generalized) to recover everyone.  See README.md for a tour.
"""

from .channel_model import (
    ChannelRealization,
    SpreadingMatrix,
    build_h,
    generate_spreading,
    load_spreading,
    save_spreading,
    table2_spreading,
    transmit,
)
from .coeff_select import CoefficientSelection, lll_reduce, select_coefficients
from .detector_lf import FilterBank, app_lf, app_lf_seq, build_filter
from .detector_lpnc import (
    CandidateList,
    app_exhaustive,
    app_exhaustive_seq,
    app_from_list,
    lsd,
    lsd_app_seq,
)
from .rate_tools import RateEstimate, estimate_rates, pam_awgn_mi, uniform_bin_check
from .receiver import ReceiverReport, StageConfig, run_multi_stage, run_single_stage
from .ring_code import (
    PamMapper,
    RingCode,
    decode_bp,
    encode,
    is_codeword,
    load_code,
    make_test_codes,
    map_pam,
    repetition_code,
    save_code,
    single_parity_check_code,
    unmap_pam,
)
from .sim_harness import (
    ConfigError,
    ExperimentConfig,
    ResultRow,
    emit_csv,
    load_results,
    run_experiment,
)
from .zq_algebra import GmiResult, ZqMatrix, gmi, is_unit_invertible, mat_mul_mod, row_reduce_mod

__version__ = "0.1.0"
