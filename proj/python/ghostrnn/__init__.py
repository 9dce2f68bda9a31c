"""Ghost imaging reconstruction from bucket measurements."""

from ._ghostrnn import (
    FormatError,
    InvalidArgument,
    IoError,
    MeasurementSequence,
    Model,
    NumericalError,
    SpeckleSequence,
    __version__,
    correlate,
    generate_speckles,
    load_mnist,
    load_model,
    measure,
    psnr,
    reconstruct_cs,
    reconstruct_gi,
    sampling_count,
    train,
)

__all__ = [
    "FormatError",
    "InvalidArgument",
    "IoError",
    "MeasurementSequence",
    "Model",
    "NumericalError",
    "SpeckleSequence",
    "__version__",
    "correlate",
    "generate_speckles",
    "load_mnist",
    "load_model",
    "measure",
    "psnr",
    "reconstruct_cs",
    "reconstruct_gi",
    "sampling_count",
    "train",
]
