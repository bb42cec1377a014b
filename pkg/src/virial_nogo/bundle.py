"""Field bundles: a directory holding ``manifest.json`` plus one raw array file per field.

Arrays are little-endian float64, row-major, with complex arrays stored as
interleaved (re, im) pairs, i.e. a trailing axis of length 2.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Union

import numpy as np

from .lattice_fields import GaugeGroup, GridSpec, ScalarGaugeConfig
from .vector_theory import VectorConfig

SCHEMA_VERSION = 1
DTYPE = "f64-le"


class BundleError(ValueError):
    pass


def _write_array(directory: Path, name: str, arr: np.ndarray) -> dict:
    is_complex = np.iscomplexobj(arr)
    data = np.stack([arr.real, arr.imag], axis=-1) if is_complex else arr
    data = np.ascontiguousarray(data, dtype="<f8")
    fname = f"{name}.bin"
    (directory / fname).write_bytes(data.tobytes(order="C"))
    return {"file": fname, "shape": list(data.shape), "dtype": DTYPE, "complex": bool(is_complex)}


def _read_array(directory: Path, spec: dict) -> np.ndarray:
    if spec.get("dtype") != DTYPE:
        raise BundleError(f"unsupported dtype {spec.get('dtype')!r}")
    path = directory / spec["file"]
    if not path.is_file():
        raise BundleError(f"missing array file {path}")
    shape = tuple(spec["shape"])
    raw = np.frombuffer(path.read_bytes(), dtype="<f8")
    if raw.size != int(np.prod(shape)):
        raise BundleError(f"{path.name}: {raw.size} values, manifest shape {shape}")
    arr = raw.reshape(shape).astype(np.float64)
    if spec.get("complex"):
        if shape[-1] != 2:
            raise BundleError(f"{path.name}: complex array needs trailing axis 2")
        arr = arr[..., 0] + 1j * arr[..., 1]
    return arr


def _group_to_dict(group: GaugeGroup) -> dict:
    T = group.generators
    return {
        "name": group.name,
        "coupling": group.coupling,
        "structure_constants": group.structure_constants.tolist(),
        "generators_re": T.real.tolist(),
        "generators_im": T.imag.tolist(),
    }


def _group_from_dict(d: dict) -> GaugeGroup:
    name = d.get("name", "custom")
    coupling = float(d.get("coupling", 1.0))
    if "structure_constants" in d:
        C = np.array(d["structure_constants"], dtype=np.float64)
        T = np.array(d["generators_re"], dtype=np.float64) + 1j * np.array(d["generators_im"], dtype=np.float64)
        return GaugeGroup(name, C, T, coupling)
    if name == "U(1)":
        return GaugeGroup.u1(float(d.get("charge", 1.0)), coupling)
    if name == "SU(2)":
        return GaugeGroup.su2(coupling)
    raise BundleError(f"group {name!r} needs explicit structure constants and generators")


def save_bundle(path: Union[str, Path], config: Union[ScalarGaugeConfig, VectorConfig]) -> Path:
    directory = Path(path)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {"schema_version": SCHEMA_VERSION, "grid": config.grid.to_dict()}
    if isinstance(config, ScalarGaugeConfig):
        manifest["theory"] = "scalar_gauge"
        manifest["group"] = _group_to_dict(config.group)
        manifest["arrays"] = {
            "phi": _write_array(directory, "phi", config.phi),
            "A": _write_array(directory, "A", config.A),
        }
    elif isinstance(config, VectorConfig):
        manifest["theory"] = "vector"
        manifest["e_charge"] = config.e_charge
        manifest["mass_m"] = config.mass_m
        manifest["arrays"] = {
            "W": _write_array(directory, "W", config.W),
            "A": _write_array(directory, "A", config.A),
        }
    else:
        raise TypeError(f"cannot save {type(config).__name__}")
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return directory


def load_bundle(path: Union[str, Path]) -> Union[ScalarGaugeConfig, VectorConfig]:
    directory = Path(path)
    mpath = directory / "manifest.json"
    if not mpath.is_file():
        raise BundleError(f"no manifest.json in {directory}")
    try:
        manifest = json.loads(mpath.read_text())
    except json.JSONDecodeError as exc:
        raise BundleError(f"bad manifest: {exc}") from None
    if manifest.get("schema_version") != SCHEMA_VERSION:
        raise BundleError(f"unsupported schema_version {manifest.get('schema_version')!r}")
    try:
        grid = GridSpec(**manifest["grid"])
        arrays = manifest["arrays"]
        theory = manifest.get("theory", "scalar_gauge")
        if theory == "vector":
            return VectorConfig(
                grid,
                _read_array(directory, arrays["W"]),
                _read_array(directory, arrays["A"]),
                float(manifest.get("e_charge", 1.0)),
                float(manifest.get("mass_m", 1.0)),
            )
        if theory == "scalar_gauge":
            group = _group_from_dict(manifest["group"])
            return ScalarGaugeConfig(
                grid, group, _read_array(directory, arrays["phi"]), _read_array(directory, arrays["A"])
            )
    except (KeyError, TypeError) as exc:
        raise BundleError(f"incomplete manifest: {exc}") from None
    raise BundleError(f"unknown theory {theory!r}")
