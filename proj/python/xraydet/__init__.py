"""Detection post-processing, evaluation, mosaic augmentation and attention checks."""

from ._core import (
    Box,
    DataError,
    Detection,
    GroundTruth,
    LabeledBox,
    MosaicLabel,
    NormalizedBox,
    average_precision,
    attention_check,
    decay_gaussian,
    decay_linear,
    evaluate,
    f_beta,
    fps,
    iou,
    mosaic,
    parse_detections,
    parse_yolo_labels,
    pr_curve,
    serialize_detections,
    serialize_yolo_labels,
    suppress,
    threshold_range,
)

__all__ = [
    "Box",
    "DataError",
    "Detection",
    "GroundTruth",
    "LabeledBox",
    "MosaicLabel",
    "NormalizedBox",
    "average_precision",
    "attention_check",
    "decay_gaussian",
    "decay_linear",
    "evaluate",
    "f_beta",
    "fps",
    "iou",
    "mosaic",
    "parse_detections",
    "parse_yolo_labels",
    "pr_curve",
    "serialize_detections",
    "serialize_yolo_labels",
    "suppress",
    "threshold_range",
]
