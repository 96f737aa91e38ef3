"""Atomic CSV and JSON writers.

Files are written to a temporary file in the target directory and moved
into place with os.replace, so the target name never holds a truncated file.
Floats are written with 17 significant digits, '.' decimal and '\\n' line
endings so that reruns are byte-identical.
"""

import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Sequence, Union

import numpy as np

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.17g'


def _atomic_write(path: Union[str, Path], text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f'.{path.name}.', suffix='.tmp')
    try:
        with os.fdopen(fd, 'w', newline='\n') as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    logger.debug('wrote %s (%d bytes)', path, len(text))
    return path


def format_float(value: float) -> str:
    return FLOAT_FORMAT % value


def write_csv(path: Union[str, Path], columns: Sequence[str], rows: np.ndarray) -> Path:
    """Write a header row and one line per row of a 2D float array."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.size and rows.shape[1] != len(columns):
        raise ValueError(f'{len(columns)} columns but rows have {rows.shape[1]} entries')
    lines = [','.join(columns)]
    lines += [','.join(format_float(v) for v in row) for row in rows if row.size]
    return _atomic_write(path, '\n'.join(lines) + '\n')


def _jsonable(obj: Any):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    raise TypeError(f'{type(obj).__name__} is not JSON serializable')


def to_json(data: Any) -> str:
    return json.dumps(data, indent=2, sort_keys=True, default=_jsonable) + '\n'


def write_json(path: Union[str, Path], data: Any) -> Path:
    """Write data as indented JSON with sorted keys."""
    return _atomic_write(path, to_json(data))
