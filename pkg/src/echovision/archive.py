"""Byte-reproducible archives of named numpy arrays plus JSON metadata.

Standard ``np.savez`` stamps zip entries with the current time, which breaks
bit-identical re-runs. This writer pins all entry timestamps and orders
entries by name, so archives written from identical contents are identical
files. Used for checkpoints and feature archives.
"""

import io
import json
import os
import zipfile

import numpy as np

META_NAME = "meta.json"
_EPOCH = (1980, 1, 1, 0, 0, 0)


def save_archive(path, arrays, meta=None):
    """Write ``arrays`` (name -> ndarray) and a JSON ``meta`` dict to ``path``.

    The write is atomic (temp file + rename) so an interrupted run never
    leaves a truncated archive behind.
    """
    meta = dict(meta or {})
    tmp = str(path) + ".tmp"
    with zipfile.ZipFile(tmp, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        info = zipfile.ZipInfo(META_NAME, date_time=_EPOCH)
        zf.writestr(info, json.dumps(meta, sort_keys=True, indent=1))
        for name in sorted(arrays):
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.ascontiguousarray(arrays[name]))
            info = zipfile.ZipInfo(name + ".npy", date_time=_EPOCH)
            zf.writestr(info, buf.getvalue())
    os.replace(tmp, path)


def load_archive(path):
    """Read an archive back as ``(arrays, meta)``."""
    arrays = {}
    meta = {}
    with zipfile.ZipFile(path, "r") as zf:
        for name in zf.namelist():
            data = zf.read(name)
            if name == META_NAME:
                meta = json.loads(data.decode("utf-8"))
            elif name.endswith(".npy"):
                arrays[name[: -len(".npy")]] = np.lib.format.read_array(
                    io.BytesIO(data)
                )
    return arrays, meta
