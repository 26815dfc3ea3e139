"""Message-passing multiuser detectors for SCMA."""

from .core import (
    LLR_MAX,
    LOG_FLOOR,
    PROB_FLOOR,
    VARIANTS,
    DecodeResult,
    DecoderConfig,
    DecoderConfigError,
    MessageState,
    Problem,
    beliefs_and_llr,
    decode,
    fn_likelihood,
    fn_operation_count,
    fn_update,
    init_messages,
    likelihood_tables,
    llr_from_log_beliefs,
    log_beliefs,
    make_problem,
    run_iterations,
    superposition_constellation,
    superposition_metric,
    update_all_fns,
    update_all_vns,
    vn_update,
)
from .dmpa import GridExtentError, decode_dmpa, dmpa_fn_update
from .eml import decode_eml
from .maxstar import CorrectionLUT, correction, max_star, max_star_reduce
from .pm import decode_pm, reliability, select_users

__all__ = [
    "LLR_MAX",
    "LOG_FLOOR",
    "PROB_FLOOR",
    "VARIANTS",
    "CorrectionLUT",
    "DecodeResult",
    "DecoderConfig",
    "DecoderConfigError",
    "GridExtentError",
    "MessageState",
    "Problem",
    "beliefs_and_llr",
    "correction",
    "decode",
    "decode_dmpa",
    "decode_eml",
    "decode_pm",
    "dmpa_fn_update",
    "fn_likelihood",
    "fn_operation_count",
    "fn_update",
    "init_messages",
    "likelihood_tables",
    "llr_from_log_beliefs",
    "log_beliefs",
    "make_problem",
    "max_star",
    "max_star_reduce",
    "reliability",
    "run_iterations",
    "select_users",
    "superposition_constellation",
    "superposition_metric",
    "update_all_fns",
    "update_all_vns",
    "vn_update",
]
