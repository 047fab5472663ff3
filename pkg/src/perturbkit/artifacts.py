"""Checkpoint containers, weight hashing, and config hashing.

Every on-disk artifact is a torch container with a ``format_version`` and a
``kind`` field; loaders refuse mismatched versions instead of guessing.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import torch

from .errors import CheckpointError

FORMAT_VERSION = 1


def weight_hash(module_or_state) -> str:
    """SHA-256 over all parameter/buffer bytes, in state-dict key order.

    Used to prove frozen models did not drift during training.
    """
    if isinstance(module_or_state, torch.nn.Module):
        state = module_or_state.state_dict()
    else:
        state = module_or_state
    h = hashlib.sha256()
    for key in sorted(state.keys()):
        h.update(key.encode())
        tensor = state[key]
        if isinstance(tensor, torch.Tensor):
            h.update(tensor.detach().cpu().contiguous().numpy().tobytes())
        else:
            h.update(repr(tensor).encode())
    return h.hexdigest()


def tensor_hash(t: torch.Tensor) -> str:
    return hashlib.sha256(t.detach().cpu().contiguous().numpy().tobytes()).hexdigest()


def canonical_json(obj) -> str:
    """Deterministic JSON used for config hashing and embedded metadata."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()[:12]


def save_container(path, kind: str, payload: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    container = {"format_version": FORMAT_VERSION, "kind": kind}
    container.update(payload)
    torch.save(container, path)


def load_container(path, kind: str) -> dict:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        container = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as exc:  # corrupted file: refuse, no partial state
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if not isinstance(container, dict) or "format_version" not in container:
        raise CheckpointError(f"{path} is not a perturbkit checkpoint container")
    version = container["format_version"]
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: format version {version} unsupported (expected {FORMAT_VERSION})"
        )
    if container.get("kind") != kind:
        raise CheckpointError(
            f"{path}: kind {container.get('kind')!r} does not match expected {kind!r}"
        )
    return container
