"""Change detection in image time series via SOM quantization error.

Train a small self-organizing map on a reference image, score later images by
their quantization error against the frozen map, and fit the error against
the known percentage of change. The fit is close to linear on synthetic
series, which makes QE a usable change indicator.
"""

from .analysis import (
    ImageRecord,
    RegressionFit,
    SeriesResult,
    TrainingMode,
    emit_report,
    linear_fit,
    run_series,
    series_result_from_json,
)
from .backend import available_backends, backend_name, set_backend
from .errors import ConfigError, FormatError, InputError, SomQeError
from .features import (
    GrayImage,
    Patch,
    PixelPosition,
    PixelScalar,
    extract_vectors,
    strategy_from_name,
)
from .imaging import (
    SeriesKind,
    SeriesSpec,
    generate_series,
    load_image,
    measure_white_fraction,
    read_series_manifest,
    save_image,
    write_series_manifest,
)
from .som import (
    BmuResult,
    FeatureDataset,
    SomConfig,
    SomGrid,
    decay_at,
    find_bmu,
    init_grid,
    neighborhood_factor,
    quantization_error,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "BmuResult",
    "ConfigError",
    "FeatureDataset",
    "FormatError",
    "GrayImage",
    "ImageRecord",
    "InputError",
    "Patch",
    "PixelPosition",
    "PixelScalar",
    "RegressionFit",
    "SeriesKind",
    "SeriesResult",
    "SeriesSpec",
    "SomConfig",
    "SomGrid",
    "SomQeError",
    "TrainingMode",
    "available_backends",
    "backend_name",
    "decay_at",
    "emit_report",
    "extract_vectors",
    "find_bmu",
    "generate_series",
    "init_grid",
    "linear_fit",
    "load_image",
    "measure_white_fraction",
    "neighborhood_factor",
    "quantization_error",
    "read_series_manifest",
    "run_series",
    "save_image",
    "series_result_from_json",
    "set_backend",
    "strategy_from_name",
    "train",
    "write_series_manifest",
]
