"""Zip-of-arrays container used for body models and pose-prior checkpoints.

A container is a plain zip archive holding one entry per array (raw
little-endian, C row-major bytes, entry name = array name) plus a
``manifest.json`` entry: a single JSON line recording each array's shape
and dtype along with free-form metadata.
"""

import json
import zipfile

import numpy as np

from .errors import LoadError

MANIFEST_NAME = "manifest.json"
FORMAT_TAG = "array-container/1"

# fixed entry timestamp so identical arrays produce identical files
_EPOCH = (1980, 1, 1, 0, 0, 0)


def _entry(name):
    info = zipfile.ZipInfo(name, date_time=_EPOCH)
    info.compress_type = zipfile.ZIP_DEFLATED
    return info


def save_container(path, arrays, meta=None):
    """Write named arrays plus metadata to ``path``.

    Arrays are stored little-endian and C-contiguous regardless of the
    in-memory layout; the archive is byte-reproducible.
    """
    manifest = {"format": FORMAT_TAG, "arrays": {}, "meta": meta or {}}
    with zipfile.ZipFile(path, "w") as zf:
        for name, arr in arrays.items():
            arr = np.ascontiguousarray(arr)
            le = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
            manifest["arrays"][name] = {
                "shape": list(arr.shape),
                "dtype": le.dtype.str,
            }
            zf.writestr(_entry(name), le.tobytes())
        zf.writestr(_entry(MANIFEST_NAME), json.dumps(manifest, sort_keys=True))
    return path


def load_container(path):
    """Read a container, returning ``(arrays, meta)``.

    Raises:
        LoadError: missing file, bad zip, missing manifest/entries, or a
            byte count that disagrees with the declared shape.
    """
    try:
        zf = zipfile.ZipFile(path, "r")
    except (OSError, zipfile.BadZipFile) as exc:
        raise LoadError(f"cannot open container {path!r}: {exc}") from exc
    with zf:
        try:
            manifest = json.loads(zf.read(MANIFEST_NAME))
        except KeyError:
            raise LoadError(f"{path!r}: no {MANIFEST_NAME} entry") from None
        except json.JSONDecodeError as exc:
            raise LoadError(f"{path!r}: manifest is not valid JSON: {exc}") from exc
        if manifest.get("format") != FORMAT_TAG:
            raise LoadError(
                f"{path!r}: unsupported container format {manifest.get('format')!r}"
            )
        arrays = {}
        for name, info in manifest.get("arrays", {}).items():
            try:
                raw = zf.read(name)
            except KeyError:
                raise LoadError(f"{path!r}: missing array entry {name!r}") from None
            dtype = np.dtype(info["dtype"])
            shape = tuple(info["shape"])
            expected = dtype.itemsize * int(np.prod(shape, dtype=np.int64))
            if len(raw) != expected:
                raise LoadError(
                    f"{path!r}: entry {name!r} has {len(raw)} bytes, "
                    f"expected {expected} for shape {shape}"
                )
            arrays[name] = np.frombuffer(raw, dtype=dtype).reshape(shape).copy()
        return arrays, manifest.get("meta", {})
