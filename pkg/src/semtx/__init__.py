"""Importance-aware image compression and unequal channel protection.

The pipeline attributes classification importance to image regions via
Shapley values over a coded-transmission game, aggregates a star region
that alone guarantees the target-class probability, ranks the remaining
regions as positive or negative, and compares transmission schemes that
protect different region groups.
"""

from .channel import (
    ChannelSpec,
    NAResult,
    bpsk_ber,
    dispersion_bpsk,
    inject_bit_errors,
    mutual_info_bpsk,
    na_min_blocklength,
    protect_stream,
    q_function,
    q_inverse,
    sample_channel_gain,
)
from .classifier import ClassDistribution, ExternalOracle, PrototypeModel, classify
from .codec import (
    RegionBitstream,
    decode_region,
    encode_region,
    quant_table,
    semantic_decode,
    semantic_encode,
)
from .errors import (
    ConfigError,
    DomainError,
    OracleError,
    RasterFormatError,
    SemtxError,
    StreamHeaderError,
    ThresholdUnachievableError,
)
from .imaging import (
    Image,
    Rect,
    RegionMask,
    RegionSet,
    composite,
    fill_background_uniform,
    grid_presegment,
    load_mask,
    load_raster,
    min_bounding_rect,
    save_mask,
    save_raster,
)
from .pipeline import Scheme, SchemeResult, run_scheme, run_sweep, scheme_preset
from .shapley import (
    CodingProfile,
    RegionPartition,
    SegmentationResult,
    ShapleyReport,
    evaluate_coalition,
    rank_remaining_regions,
    select_star_region,
    shapley_exact,
    shapley_sampled,
)

__version__ = "0.1.0"
