"""Self-describing checkpoint container: JSON metadata plus float32 weight blobs.

A checkpoint is a single ``.npz`` archive holding one ``__meta__`` entry (the
UTF-8 JSON header with format version, config, and normalization stats) and
one float32 array per weight tensor. Loading a saved model reproduces its
predictions bitwise.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np
import torch

from ..errors import CheckpointError
from .model import Normalization, SequenceRegressor, TnpConfig, TnpModel

CHECKPOINT_FORMAT_VERSION = 1


def save_model(model: TnpModel, path) -> None:
    meta = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "config": model.config.to_json(),
        "input_dims": model.input_dims,
        "normalization": model.normalization.to_json(),
        "loss_curve": np.asarray(model.loss_curve).tolist(),
    }
    blobs = {
        name: tensor.detach().numpy().astype(np.float32, copy=False)
        for name, tensor in model.net.state_dict().items()
    }
    header = np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        np.savez(fh, __meta__=header, **blobs)


def load_model(path) -> TnpModel:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"no checkpoint at {path}")
    try:
        archive = np.load(path, allow_pickle=False)
        meta = json.loads(bytes(archive["__meta__"]).decode("utf-8"))
    except CheckpointError:
        raise
    except Exception as exc:
        raise CheckpointError(f"corrupt checkpoint {path}: {exc}") from exc
    if meta.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(
            f"checkpoint format {meta.get('format_version')!r} unsupported"
        )
    try:
        cfg = TnpConfig(**meta["config"])
        net = SequenceRegressor(cfg, int(meta["input_dims"]))
        state = {
            name: torch.from_numpy(np.array(archive[name]))
            for name in archive.files
            if name != "__meta__"
        }
        net.load_state_dict(state, strict=True)
    except CheckpointError:
        raise
    except Exception as exc:
        raise CheckpointError(f"checkpoint {path} does not match model: {exc}") from exc
    net.eval()
    return TnpModel(
        config=cfg,
        net=net,
        input_dims=int(meta["input_dims"]),
        normalization=Normalization.from_json(meta["normalization"]),
        loss_curve=np.asarray(meta.get("loss_curve", [])),
    )


def checkpoint_digest(path) -> str:
    """SHA-256 of the checkpoint file, for run-record integrity references."""
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
