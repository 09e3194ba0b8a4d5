"""Light-field super-resolution.

Light fields are float64 numpy arrays shaped (C, S, T, Y, X).
"""

from ._lf4d import (
    Model,
    angular_loss,
    bicubic,
    conv4d,
    degrade,
    psnr,
    read_lf4d,
    ssim,
    synth,
    synth_from_spec,
    train,
    write_lf4d,
)

__all__ = [
    "Model",
    "angular_loss",
    "bicubic",
    "conv4d",
    "degrade",
    "psnr",
    "read_lf4d",
    "ssim",
    "synth",
    "synth_from_spec",
    "train",
    "write_lf4d",
]
