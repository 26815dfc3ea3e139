"""scmalab: link-level simulation of sparse code multiple access.

Factor graphs and star-QAM codebooks, uplink/downlink transmission,
message-passing detectors and an exhaustive MAP oracle.
"""

from .codebook import (
    CodebookSet,
    ConstellationOperator,
    DegenerateConstellationError,
    KpiReport,
    MotherConstellation,
    assemble_codebooks,
    default_codebook,
    kpi,
    phase_operators,
    star_qam_mother,
)
from .decoder import DecodeResult, DecoderConfig, decode
from .graph import (
    FactorGraph,
    GraphConstructionError,
    GraphDimensionError,
    build_regular_factor_graph,
    from_matrix,
    mapping_matrix,
    neighborhoods,
)
from .link import (
    ChannelRealization,
    bits_to_symbol,
    ebn0_db_to_n0,
    encode,
    realize_channel,
    symbol_to_bits,
    transmit,
)

__version__ = "0.1.0"
