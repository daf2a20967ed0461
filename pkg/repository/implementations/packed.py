"""
Packed-array files: one JSON header line followed by the raw bytes of each array,
in the order and with the shapes and dtypes the header lists.
"""
import json
from pathlib import Path

import numpy as np

from constants import ERROR_CORRUPT_FILE
from exceptions_handler import FormatError


def write_packed(path: Path, header: dict, arrays: dict[str, np.ndarray]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    layout = [{"name": name, "dtype": str(a.dtype), "shape": list(a.shape)} for name, a in arrays.items()]
    line = json.dumps({**header, "arrays": layout}, sort_keys=True).encode() + b"\n"
    with path.open("wb") as fh:
        fh.write(line)
        for a in arrays.values():
            fh.write(np.ascontiguousarray(a).tobytes())
    return path


def read_packed(path: Path, expected_version: int) -> tuple[dict, dict[str, np.ndarray]]:
    with Path(path).open("rb") as fh:
        header = json.loads(fh.readline())
        payload = fh.read()
    version = header.get("version")
    if version != expected_version:
        raise FormatError(detail=f"{ERROR_CORRUPT_FILE}: {path} has version {version!r}, expected {expected_version}",
                          version=version)
    arrays, offset = {}, 0
    for spec in header["arrays"]:
        dtype = np.dtype(spec["dtype"])
        count = int(np.prod(spec["shape"], dtype=np.int64))
        end = offset + count * dtype.itemsize
        if end > len(payload):
            raise FormatError(detail=f"{ERROR_CORRUPT_FILE}: {path} is truncated")
        arrays[spec["name"]] = np.frombuffer(payload[offset:end], dtype=dtype).reshape(spec["shape"]).copy()
        offset = end
    if offset != len(payload):
        raise FormatError(detail=f"{ERROR_CORRUPT_FILE}: {path} has {len(payload) - offset} trailing bytes")
    return header, arrays
