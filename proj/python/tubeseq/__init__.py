# Copyright 2026 The tubeseq Authors
# SPDX-License-Identifier: Apache-2.0
"""Run-length voxel tubes and a sequence-to-sequence shape auto-decoder."""

from tubeseq._tubeseq import (
    GRADCHECK_TOLERANCE,
    FormatError,
    InvalidArgument,
    IoError,
    NumericError,
    RunConfig,
    ShapeSet,
    TrainingState,
    TrainRun,
    Tube,
    TubelizedShape,
    VoxelGrid,
    detubelize,
    generate_shapes,
    gradcheck,
    import_binvox,
    load_shape_dir,
    primitive_suites,
    read_voxd,
    read_vtz,
    token_classes,
    tokens,
    train,
    tubelize,
    volumetric_iou,
    write_shape_dir,
    write_voxd,
    write_vtz,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
