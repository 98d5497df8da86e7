"""Versioned JSON model files.

A model file holds the fitted forest (node arrays in preorder), the target
transform, the split used for training, the run configuration, the data
provenance and, once calibrated, the conformal calibrator. Floats are
written with ``repr`` precision, so loading reproduces predictions exactly.
"""

import hashlib
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .conformal import ConformalCalibrator
from .errors import StateError
from .forest import ForestModel, Hyperparams, Tree
from .transform import TargetTransform

FORMAT = "swellcp-model"
VERSION = 1


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def atomic_write_text(path, text):
    """Write via a temporary file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(obj, path, indent=None):
    text = json.dumps(obj, indent=indent, allow_nan=False, sort_keys=False)
    atomic_write_text(path, text + "\n")


def forest_to_dict(model):
    return {
        "hyperparams": model.hyperparams.as_dict(),
        "seed": model.seed,
        "target_space": model.target_space,
        "n_features": model.n_features,
        "trees": [
            {
                "feature": t.feature.tolist(),
                "threshold": t.threshold.tolist(),
                "left": t.left.tolist(),
                "right": t.right.tolist(),
                "value": t.value.tolist(),
            }
            for t in model.trees
        ],
    }


def forest_from_dict(d):
    trees = tuple(
        Tree(
            np.array(t["feature"], dtype=np.int64),
            np.array(t["threshold"], dtype=float),
            np.array(t["left"], dtype=np.int64),
            np.array(t["right"], dtype=np.int64),
            np.array(t["value"], dtype=float),
        )
        for t in d["trees"]
    )
    return ForestModel(
        trees, Hyperparams(**d["hyperparams"]), int(d["seed"]), d["target_space"], int(d["n_features"])
    )


class ModelFile:
    """In-memory view of a model file."""

    def __init__(self, forest, transform, config, split, data, calibrator=None):
        self.forest = forest
        self.transform = transform
        self.config = config
        self.split = split
        self.data = data
        self.calibrator = calibrator

    def to_dict(self):
        return {
            "format": FORMAT,
            "version": VERSION,
            "offset": self.transform.offset,
            "config": self.config,
            "data": self.data,
            "split": self.split,
            "calibrator": None if self.calibrator is None else self.calibrator.as_dict(),
            "forest": forest_to_dict(self.forest),
        }

    def save(self, path):
        dump_json(self.to_dict(), path)

    @classmethod
    def load(cls, path):
        try:
            d = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise StateError(f"cannot read model file {path}: {exc}") from exc
        if d.get("format") != FORMAT:
            raise StateError(f"{path} is not a {FORMAT} file")
        if d.get("version") != VERSION:
            raise StateError(f"unsupported model file version {d.get('version')}")
        cal = d.get("calibrator")
        return cls(
            forest=forest_from_dict(d["forest"]),
            transform=TargetTransform(float(d["offset"])),
            config=d["config"],
            split=d["split"],
            data=d["data"],
            calibrator=None if cal is None else ConformalCalibrator.from_dict(cal),
        )
