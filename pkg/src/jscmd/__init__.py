"""Joint source-channel decoding of multiple description quantized Markov sources."""

from jscmd.channel import (
    ERASED,
    AwgnChannel,
    EecChannel,
    ReceivedSequence,
    hard_side_indices,
    likelihood,
    likelihood_table,
    stage_loglik,
    transmit_streams,
)
from jscmd.harness import ExperimentConfig, MetricRow, emit_csv, run_experiment
from jscmd.hmm_estimator import (
    GaussianHmm,
    HmmModel,
    hmm_estimate_cheapest,
    hmm_estimate_mid,
    hmm_map_estimate,
)
from jscmd.map_decoder import (
    DecodeStats,
    InfeasibleObservation,
    NotMonge,
    check_monge,
    map_decode,
    map_decode_fast,
    smawk,
)
from jscmd.mdq import (
    MdqCodebook,
    TotalErasure,
    build_2dsq,
    encode,
    hard_decode,
    hard_decode_streams,
    quantize,
)
from jscmd.mmse_decoder import (
    PosteriorTable,
    forward_backward,
    mmse_decode,
    mmse_decode_iid,
    mmse_reconstruct,
)
from jscmd.source_model import GaussMarkovSource, MarkovSourceModel, derive_markov_model, generate

__all__ = [
    "ERASED", "AwgnChannel", "EecChannel", "ReceivedSequence", "hard_side_indices", "likelihood",
    "likelihood_table", "stage_loglik", "transmit_streams",
    "ExperimentConfig", "MetricRow", "emit_csv", "run_experiment",
    "GaussianHmm", "HmmModel", "hmm_estimate_cheapest", "hmm_estimate_mid", "hmm_map_estimate",
    "DecodeStats", "InfeasibleObservation", "NotMonge", "check_monge", "map_decode", "map_decode_fast", "smawk",
    "MdqCodebook", "TotalErasure", "build_2dsq", "encode", "hard_decode", "hard_decode_streams", "quantize",
    "PosteriorTable", "forward_backward", "mmse_decode", "mmse_decode_iid", "mmse_reconstruct",
    "GaussMarkovSource", "MarkovSourceModel", "derive_markov_model", "generate",
]
