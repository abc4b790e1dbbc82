"""Matrix Market export of sign matrices with their row and column labels.

Labels are stored as two comment lines ``%rows: [...]`` and ``%cols: [...]``
(JSON lists) right after the banner, so files stay readable by any Matrix
Market reader.
"""

from __future__ import annotations

import io
import json
from pathlib import Path

import numpy as np
import scipy.io as sio
import scipy.sparse as sp

from .graph import SignMatrix

__all__ = ["write_matrix", "read_matrix", "matrix_market_text"]


def matrix_market_text(m: SignMatrix | np.ndarray, row_labels=None, col_labels=None) -> str:
    if isinstance(m, SignMatrix):
        row_labels = m.row_labels if row_labels is None else row_labels
        col_labels = m.col_labels if col_labels is None else col_labels
        data = m.sparse
    else:
        data = np.asarray(m)
    coo = sp.coo_array(data).astype(np.int64)
    n, k = coo.shape
    rows = list(row_labels) if row_labels is not None else [str(i) for i in range(n)]
    cols = list(col_labels) if col_labels is not None else [str(j) for j in range(k)]
    comment = f"rows: {json.dumps(rows)}\ncols: {json.dumps(cols)}"
    buf = io.BytesIO()
    sio.mmwrite(buf, coo, comment=comment, field="integer", symmetry="general")
    return buf.getvalue().decode()


def write_matrix(path, m, row_labels=None, col_labels=None) -> Path:
    path = Path(path)
    path.write_text(matrix_market_text(m, row_labels, col_labels))
    return path


def read_matrix(path):
    """``(dense int array, row_labels, col_labels)``."""
    text = Path(path).read_text()
    labels = {}
    for line in text.splitlines()[1:]:
        if not line.startswith("%"):
            break
        key, _, val = line[1:].partition(":")
        if key.strip() in ("rows", "cols"):
            labels[key.strip()] = tuple(json.loads(val))
    m = sio.mmread(io.StringIO(text))
    dense = np.asarray(m.toarray() if sp.issparse(m) else m).astype(np.int64)
    return dense, labels.get("rows"), labels.get("cols")
