"""Versioned checkpoint files: network spec, parameters, optimizer state."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .adam import AdamState
from .network import NetworkSpec, Params

FORMAT_VERSION = 1


class CheckpointError(Exception):
    pass


@dataclass
class Checkpoint:
    spec: NetworkSpec
    params: Params
    bn_state: Params
    adam_m: Params = field(default_factory=dict)
    adam_v: Params = field(default_factory=dict)
    adam_t: int = 0
    meta: dict = field(default_factory=dict)

    def restore_adam(self) -> AdamState:
        state = AdamState(self.params)
        if self.adam_m:
            state.m = {k: v.copy() for k, v in self.adam_m.items()}
            state.v = {k: v.copy() for k, v in self.adam_v.items()}
            state.t = self.adam_t
        return state


def save_checkpoint(
    path,
    spec: NetworkSpec,
    params: Params,
    bn_state: Params,
    adam: AdamState | None = None,
    meta: dict | None = None,
) -> None:
    header = {
        "version": FORMAT_VERSION,
        "spec": asdict(spec),
        "adam_t": adam.t if adam else 0,
        "meta": meta or {},
    }
    arrays = {"__header__": np.frombuffer(json.dumps(header).encode(), dtype=np.uint8)}
    arrays.update({f"param/{k}": v for k, v in params.items()})
    arrays.update({f"bn/{k}": v for k, v in bn_state.items()})
    if adam:
        arrays.update({f"adam_m/{k}": v for k, v in adam.m.items()})
        arrays.update({f"adam_v/{k}": v for k, v in adam.v.items()})
    with open(path, "wb") as fh:
        np.savez_compressed(fh, **arrays)


def load_checkpoint(path) -> Checkpoint:
    with np.load(path) as data:
        if "__header__" not in data:
            raise CheckpointError(f"{path}: not a checkpoint file")
        header = json.loads(bytes(data["__header__"].tobytes()).decode())
        if header.get("version") != FORMAT_VERSION:
            raise CheckpointError(
                f"{path}: unsupported checkpoint version {header.get('version')}"
            )
        spec_dict = header["spec"]
        spec = NetworkSpec(
            input_shape=tuple(spec_dict["input_shape"]),
            conv_channels=tuple(spec_dict["conv_channels"]),
            dense_widths=tuple(spec_dict["dense_widths"]),
            n_actions=spec_dict["n_actions"],
        )
        groups: dict[str, Params] = {"param": {}, "bn": {}, "adam_m": {}, "adam_v": {}}
        for key in data.files:
            if key == "__header__":
                continue
            group, _, name = key.partition("/")
            groups[group][name] = data[key]
        return Checkpoint(
            spec=spec,
            params=groups["param"],
            bn_state=groups["bn"],
            adam_m=groups["adam_m"],
            adam_v=groups["adam_v"],
            adam_t=header.get("adam_t", 0),
            meta=header.get("meta", {}),
        )
