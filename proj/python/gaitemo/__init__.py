"""Perceived-emotion classification from 3D gaits.

Thin Python layer over the C++ core. Geometry helpers take and return numpy
arrays; the command wrappers mirror the ``gaitemo`` CLI and return dicts.
"""

import json
import os

from ._core import (
    GaitEmoError,
    __version__,
    average_precision,
    class_names,
    extract_affective,
    extract_rotations,
    learning_rate_at,
    quat_to_euler,
    shortest_arc,
    teacher_forcing_at,
    to_multihot,
)
from . import _core

__all__ = [
    "GaitEmoError",
    "ablate",
    "average_precision",
    "class_names",
    "evaluate",
    "evaluate_run",
    "extract_affective",
    "extract_rotations",
    "learning_rate_at",
    "predict",
    "resolve_config",
    "shortest_arc",
    "stats",
    "sweep",
    "synth",
    "teacher_forcing_at",
    "to_multihot",
    "train",
    "quat_to_euler",
]


def _path(p):
    return None if p is None else os.fspath(p)


def resolve_config(config_file=None, **overrides):
    """Defaults, then ``config_file``, then keyword overrides. ``seed`` must end up set."""
    return json.loads(_core.resolve_config(_path(config_file), json.dumps(overrides)))


def evaluate(probs, truths):
    """Per-class AP and mAP for an (N, 4) probability array and (N, 4) boolean truths."""
    return json.loads(_core.evaluate(probs, [[bool(b) for b in row] for row in truths]))


def synth(labeled, unlabeled, seed, out):
    _core.synth(labeled, unlabeled, seed, _path(out))


def stats(dataset, out, bins=10, features=18):
    return _core.stats(_path(dataset), _path(out), bins, features)


def train(config_file=None, **overrides):
    return json.loads(_core.train(json.dumps(resolve_config(config_file, **overrides))))


def evaluate_run(dataset, out, checkpoint=None, predictions=None, split="test", seed=None):
    return json.loads(
        _core.evaluate_run(_path(dataset), _path(checkpoint), _path(predictions), split, seed, _path(out))
    )


def predict(dataset, checkpoint, out):
    return json.loads(_core.predict(_path(dataset), _path(checkpoint), _path(out)))


def ablate(seeds=(1, 2, 3), config_file=None, **overrides):
    return json.loads(_core.ablate(json.dumps(resolve_config(config_file, **overrides)), list(seeds)))


def sweep(fractions=(0.0, 0.25, 0.5, 0.75, 1.0), seeds=(1,), config_file=None, **overrides):
    cfg = json.dumps(resolve_config(config_file, **overrides))
    return json.loads(_core.sweep(cfg, list(fractions), list(seeds)))
