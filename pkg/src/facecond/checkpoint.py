"""JSON tensor archive for model parameters.

Flat key -> tensor mapping ("frlp.local.3.weight", "frgca.w_q.bias",
"vision.fc1.weight", "decoder.embedding.weight", ...) plus a small meta
section with the non-tensor configuration. Floats serialize via repr,
so save/load round-trips are bit-exact.
"""

from __future__ import annotations

import json

import numpy as np

from .frgca import FrgcaParams
from .frlp import FrlpParams
from .geometry import PatchGrid, default_partition
from .toytrain.decoder import ToyDecoderParams
from .toytrain.projector import VisionProjectorParams
from .toytrain.training import ModelParams, model_arrays

FORMAT_TAG = "facecond-checkpoint-v1"


def save_arrays(path: str, arrays: dict[str, np.ndarray], meta: dict | None = None) -> None:
    doc = {
        "format": FORMAT_TAG,
        "meta": meta or {},
        "tensors": {
            key: {"shape": list(arr.shape), "data": np.asarray(arr, dtype=np.float64).ravel().tolist()}
            for key, arr in arrays.items()
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_arrays(path: str) -> tuple[dict[str, np.ndarray], dict]:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != FORMAT_TAG:
        raise ValueError(f"{path}: not a {FORMAT_TAG} archive")
    arrays = {}
    for key, entry in doc["tensors"].items():
        arrays[key] = np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
    return arrays, doc.get("meta", {})


def save_model(path: str, model: ModelParams) -> None:
    meta = {
        "heads": model.frgca.heads,
        "scale": model.frgca.scale,
        "use_bias": model.frgca.use_bias,
        "grid_rows": model.grid.rows,
        "grid_cols": model.grid.cols,
    }
    save_arrays(path, model_arrays(model), meta)


def _require(arrays: dict[str, np.ndarray], key: str) -> np.ndarray:
    if key not in arrays:
        raise ValueError(f"checkpoint is missing tensor {key!r}")
    return arrays[key]


def build_frlp(arrays: dict[str, np.ndarray]) -> FrlpParams:
    partition = default_partition()
    local_weights = []
    local_biases = []
    for i, (_, idx) in enumerate(partition.groups):
        w = _require(arrays, f"frlp.local.{i}.weight")
        if w.shape[1] != 2 * len(idx):
            raise ValueError(
                f"frlp.local.{i}.weight has input width {w.shape[1]}, expected {2 * len(idx)}"
            )
        local_weights.append(w)
        local_biases.append(_require(arrays, f"frlp.local.{i}.bias"))
    global_weight = _require(arrays, "frlp.global.weight")
    global_bias = _require(arrays, "frlp.global.bias")
    return FrlpParams(
        local_weights, local_biases, global_weight, global_bias, d=global_weight.shape[0]
    )


def build_frgca(arrays: dict[str, np.ndarray], meta: dict) -> FrgcaParams:
    return FrgcaParams(
        w_q=_require(arrays, "frgca.w_q.weight"),
        b_q=_require(arrays, "frgca.w_q.bias"),
        w_k=_require(arrays, "frgca.w_k.weight"),
        b_k=_require(arrays, "frgca.w_k.bias"),
        w_v=_require(arrays, "frgca.w_v.weight"),
        b_v=_require(arrays, "frgca.w_v.bias"),
        w_o=_require(arrays, "frgca.w_o.weight"),
        b_o=_require(arrays, "frgca.w_o.bias"),
        heads=int(meta.get("heads", 8)),
        scale=str(meta.get("scale", "per_head")),
        use_bias=bool(meta.get("use_bias", True)),
    )


def build_vision(arrays: dict[str, np.ndarray]) -> VisionProjectorParams:
    return VisionProjectorParams(
        w1=_require(arrays, "vision.fc1.weight"),
        b1=_require(arrays, "vision.fc1.bias"),
        w2=_require(arrays, "vision.fc2.weight"),
        b2=_require(arrays, "vision.fc2.bias"),
    )


def build_decoder(arrays: dict[str, np.ndarray]) -> ToyDecoderParams:
    return ToyDecoderParams(
        embedding=_require(arrays, "decoder.embedding.weight"),
        readout_w=_require(arrays, "decoder.readout.weight"),
        readout_b=_require(arrays, "decoder.readout.bias"),
    )


def load_model(path: str) -> ModelParams:
    arrays, meta = load_arrays(path)
    return ModelParams(
        frlp=build_frlp(arrays),
        frgca=build_frgca(arrays, meta),
        vision=build_vision(arrays),
        decoder=build_decoder(arrays),
        partition=default_partition(),
        grid=PatchGrid(int(meta.get("grid_rows", 16)), int(meta.get("grid_cols", 16))),
    )
