"""Checkpoint serialization.

A checkpoint is a text manifest (`key = value` lines: layer kinds, shapes,
dropout rates, seed, plus free-form `extra.*` entries) next to a binary file
holding every parameter as little-endian float64, laid out layer by layer
with weight before bias.  Round trips are bit-exact.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import ContractError
from .nn import Dense, Dropout, MlpModel, Relu, Softmax

FORMAT = "distillnn-checkpoint-v1"


def _manifest_lines(model: MlpModel, seed: int | None, extra: dict) -> list[str]:
    lines = [f"format = {FORMAT}", f"n_layers = {len(model.layers)}"]
    for i, layer in enumerate(model.layers):
        lines.append(f"layer{i}.kind = {layer.kind}")
        if isinstance(layer, Dense):
            lines.append(f"layer{i}.in = {layer.in_dim}")
            lines.append(f"layer{i}.out = {layer.out_dim}")
        elif isinstance(layer, Dropout):
            lines.append(f"layer{i}.rate = {layer.rate!r}")
    lines.append(f"dropout_active_in_eval = {model.dropout_active_in_eval}")
    if seed is not None:
        lines.append(f"seed = {seed}")
    for key in sorted(extra):
        lines.append(f"extra.{key} = {extra[key]}")
    return lines


def save_model(model: MlpModel, path: str, seed: int | None = None,
               extra: dict | None = None) -> None:
    extra = extra or {}
    with open(path, "w") as f:
        f.write("\n".join(_manifest_lines(model, seed, extra)) + "\n")
    blob = b"".join(
        np.ascontiguousarray(p.data, dtype="<f8").tobytes()
        for p in model.parameters()
    )
    with open(path + ".bin", "wb") as f:
        f.write(blob)


def read_manifest(path: str) -> dict:
    entries: dict = {}
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line or "=" not in line:
                continue
            key, value = line.split("=", 1)
            entries[key.strip()] = value.strip()
    return entries


def load_model(path: str) -> tuple[MlpModel, dict]:
    """Rebuild a model from its manifest and parameter blob.

    Returns (model, extra) where extra holds the manifest's `extra.*` entries
    plus `seed` when present."""
    entries = read_manifest(path)
    if entries.get("format") != FORMAT:
        raise ContractError(f"unrecognized checkpoint format in {path}")
    layers: list = []
    for i in range(int(entries["n_layers"])):
        kind = entries[f"layer{i}.kind"]
        if kind == "dense":
            layers.append(Dense(int(entries[f"layer{i}.in"]),
                                int(entries[f"layer{i}.out"])))
        elif kind == "relu":
            layers.append(Relu())
        elif kind == "dropout":
            layers.append(Dropout(float(entries[f"layer{i}.rate"])))
        elif kind == "softmax":
            layers.append(Softmax())
        else:
            raise ContractError(f"unknown layer kind {kind!r} in {path}")
    model = MlpModel(layers, entries.get("dropout_active_in_eval") == "True")
    model.eval()

    with open(path + ".bin", "rb") as f:
        blob = f.read()
    offset = 0
    for p in model.parameters():
        n = p.data.size
        chunk = np.frombuffer(blob, dtype="<f8", count=n, offset=offset)
        p.data = chunk.reshape(p.data.shape).astype(np.float64)
        offset += n * 8
    if offset != len(blob):
        raise ContractError(f"parameter blob size mismatch for {path}")

    extra = {k[len("extra."):]: v for k, v in entries.items()
             if k.startswith("extra.")}
    if "seed" in entries:
        extra["seed"] = entries["seed"]
    return model, extra


def write_kv_text(path: str, entries: dict) -> None:
    """Write a flat key-value text file atomically (tmp file + rename)."""
    tmp = path + ".tmp"
    with open(tmp, "w") as f:
        for key, value in entries.items():
            f.write(f"{key} = {value}\n")
    os.replace(tmp, path)


def read_kv_text(path: str) -> dict:
    return read_manifest(path)
