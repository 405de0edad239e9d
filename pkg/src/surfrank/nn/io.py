"""Network serialization.

Format (version 1): a numpy ``.npz`` archive (readable by ``np.load``)
holding

* ``meta.npy`` -- a JSON string (0-d unicode array) with ``format``,
  ``version``, ``seed`` and the ordered list of layer-spec dicts;
* ``p{i}_{name}.npy`` -- one float64 array per parameter of layer ``i``
  (``w``/``b`` for dense and conv layers).

The archive is written with fixed zip member metadata (epoch timestamps, no
compression), so saving the same network twice produces byte-identical
files, and arrays round-trip bit-exactly.
"""

from __future__ import annotations

import io
import json
import zipfile
from pathlib import Path

import numpy as np

from .layers import LayerSpec
from .network import Network, _head_classes

FORMAT_NAME = "surfrank-network"
FORMAT_VERSION = 1
_ZIP_EPOCH = (1980, 1, 1, 0, 0, 0)


def _write_member(archive: zipfile.ZipFile, name: str, array: np.ndarray) -> None:
    buffer = io.BytesIO()
    np.lib.format.write_array(buffer, np.ascontiguousarray(array), allow_pickle=False)
    info = zipfile.ZipInfo(name + ".npy", date_time=_ZIP_EPOCH)
    info.compress_type = zipfile.ZIP_STORED
    archive.writestr(info, buffer.getvalue())


def save_network(net: Network, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "seed": net.seed,
        "layers": [spec.to_dict() for spec in net.specs],
    }
    with zipfile.ZipFile(path, "w") as archive:
        _write_member(archive, "meta", np.asarray(json.dumps(meta, sort_keys=True)))
        for i in sorted(net.params):
            for key in sorted(net.params[i]):
                _write_member(archive, f"p{i}_{key}", net.params[i][key])
    return path


def load_network(path) -> Network:
    with np.load(Path(path), allow_pickle=False) as archive:
        meta = json.loads(str(np.asarray(archive["meta"]).reshape(-1)[0]))
        if meta.get("format") != FORMAT_NAME:
            raise ValueError(f"{path}: not a {FORMAT_NAME} file")
        if meta.get("version") != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported version {meta.get('version')!r}")
        specs = tuple(LayerSpec.from_dict(d) for d in meta["layers"])
        params: dict[int, dict[str, np.ndarray]] = {}
        for name in archive.files:
            if name == "meta":
                continue
            layer, key = name[1:].split("_", 1)
            params.setdefault(int(layer), {})[key] = archive[name]
    return Network(
        specs=specs, params=params, seed=int(meta["seed"]), n_classes=_head_classes(specs)
    )
