"""
Array archives with stable bytes

numpy's savez stamps each zip member with the current time, so two saves of the
same arrays hash differently. These helpers write the same .npz layout with a
fixed timestamp and a JSON header member, which keeps artifact digests
reproducible.
"""

import hashlib
import io
import json
import os
import zipfile

import numpy as np

from eagle.errors import FormatError, IOFailure

_FIXED_TIME = (1980, 1, 1, 0, 0, 0)
HEADER_KEY = 'header'


def write_archive(path, header, arrays):
    """Write a JSON header and named arrays to an npz-compatible file

    :param header: JSON-serializable metadata
    :type header: dict
    :param arrays: name to numpy array, written in the given order
    :type arrays: dict
    """
    members = {HEADER_KEY: np.frombuffer(json.dumps(header, sort_keys=True).encode('utf-8'), dtype=np.uint8)}
    members.update(arrays)
    try:
        directory = os.path.dirname(os.path.abspath(path))
        os.makedirs(directory, exist_ok=True)
        with zipfile.ZipFile(path, 'w', compression=zipfile.ZIP_STORED) as archive:
            for name, array in members.items():
                buffer = io.BytesIO()
                np.lib.format.write_array(buffer, np.ascontiguousarray(array), allow_pickle=False)
                info = zipfile.ZipInfo(f"{name}.npy", date_time=_FIXED_TIME)
                info.external_attr = 0o644 << 16
                archive.writestr(info, buffer.getvalue())
    except OSError as e:
        raise IOFailure(f"Cannot write {path}: {e}")


def read_archive(path, names=None):
    """Read the header and arrays written by write_archive

    :return: (header dict, name to array dict)
    :raises IOFailure: the file does not exist or cannot be read
    :raises FormatError: the file is truncated, not an archive, or lacks a member
    """
    if not os.path.exists(path):
        raise IOFailure(f"{path} does not exist")
    try:
        with open(path, 'rb') as fh:
            payload = fh.read()
    except OSError as e:
        raise IOFailure(f"Cannot read {path}: {e}")
    try:
        with np.load(io.BytesIO(payload), allow_pickle=False) as data:
            header = json.loads(data[HEADER_KEY].tobytes().decode('utf-8'))
            wanted = names if names is not None else [n for n in data.files if n != HEADER_KEY]
            arrays = {name: data[name] for name in wanted}
    except (OSError, ValueError, KeyError, EOFError, UnicodeDecodeError, zipfile.BadZipFile) as e:
        raise FormatError(f"Corrupted archive {path}: {e}")
    return header, arrays


def file_digest(path):
    """sha256 of a file's bytes"""
    digest = hashlib.sha256()
    try:
        with open(path, 'rb') as fh:
            for block in iter(lambda: fh.read(1 << 20), b''):
                digest.update(block)
    except OSError as e:
        raise IOFailure(f"Cannot read {path}: {e}")
    return digest.hexdigest()


def json_digest(json_object):
    return hashlib.sha256(json.dumps(json_object, sort_keys=True).encode('utf-8')).hexdigest()
