"""Streaming grammar compression with bounded dictionaries."""
from .codec import ContainerHeader
from .decompressor import DecompressStats, Decompressor, decompress, decompress_stream, expand
from .dictionary import SIGMA, PhraseDictionary
from .errors import (
    CorruptStreamError,
    GrcompError,
    IntegrityError,
    InvariantError,
    MirrorDivergenceError,
    TruncatedStreamError,
)
from .parser import CompressStats, Compressor, compress, compress_stream, landmark
from .strategies import Mode, StrategyConfig, StrategyState

__version__ = "0.1.0"
