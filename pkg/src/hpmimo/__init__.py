"""Link-level simulator for hybrid-precoded mmWave MIMO with oscillator phase noise."""

from .channel import (
    ChannelParams,
    array_response,
    generate_channel,
    iter_channel_dump,
    read_channel_dump,
    sample_angles,
    write_channel_dump,
)
from .detection import DetectorConfig, count_errors, euclidean_detect, polar_detect, wrap_phase
from .modulation import Constellation, build_pqam, build_qam, demap_symbols, map_bits, polar_geometry
from .montecarlo import (
    SCHEMA_COLUMNS,
    ExperimentConfig,
    SchemeSpec,
    derive_stream_rng,
    run_ber_sweep,
    run_se_sweep,
    split_rows,
    write_config_sidecar,
    write_results_csv,
)
from .phasenoise import REGIMES, PnConfig, PnTrace, apply_clo, coherent_gain, compensate, estimate_pn, sample_pn
from .precoding import (
    AltMinResult,
    PrecoderSet,
    StreamMetrics,
    design_precoders,
    equivalent_channel,
    fdp_precoder_set,
    optimal_fdp,
    pe_altmin,
    stream_metrics,
)
from .validate import CheckResult, run_checks

__version__ = "0.1.0"

__all__ = [
    "AltMinResult",
    "ChannelParams",
    "CheckResult",
    "Constellation",
    "DetectorConfig",
    "ExperimentConfig",
    "PnConfig",
    "PnTrace",
    "PrecoderSet",
    "REGIMES",
    "SCHEMA_COLUMNS",
    "SchemeSpec",
    "StreamMetrics",
    "__version__",
    "apply_clo",
    "array_response",
    "build_pqam",
    "build_qam",
    "coherent_gain",
    "compensate",
    "count_errors",
    "demap_symbols",
    "derive_stream_rng",
    "design_precoders",
    "equivalent_channel",
    "estimate_pn",
    "euclidean_detect",
    "fdp_precoder_set",
    "generate_channel",
    "iter_channel_dump",
    "map_bits",
    "optimal_fdp",
    "pe_altmin",
    "polar_detect",
    "polar_geometry",
    "read_channel_dump",
    "run_ber_sweep",
    "run_checks",
    "run_se_sweep",
    "sample_angles",
    "sample_pn",
    "split_rows",
    "stream_metrics",
    "wrap_phase",
    "write_channel_dump",
    "write_config_sidecar",
    "write_results_csv",
]
