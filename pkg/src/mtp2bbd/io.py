"""File formats: Matrix Market matrices, CSV data, JSON reports.

Vertex indices in every external file are 1-based.
"""

import json

import numpy as np
import scipy.io
import scipy.sparse as sp

PRECISION = 17


class FormatError(ValueError):
    pass


def read_matrix(path, dense=True):
    """Read a Matrix Market file; symmetric storage is expanded."""
    try:
        A = scipy.io.mmread(str(path))
    except (OSError, ValueError, IndexError) as exc:
        raise FormatError(f"{path}: {exc}") from exc
    if sp.issparse(A):
        return A.toarray() if dense else sp.csr_array(A)
    A = np.asarray(A, dtype=float)
    return A if dense else sp.csr_array(A)


def _symmetric(A):
    if sp.issparse(A):
        return (abs(A - A.T) > 0).nnz == 0
    return np.array_equal(A, A.T)


def write_dense(path, A, comment=""):
    """Array-format Matrix Market with 17 significant digits."""
    A = np.asarray(A, dtype=float)
    scipy.io.mmwrite(
        str(path), A, comment=comment, field="real", precision=PRECISION,
        symmetry="symmetric" if _symmetric(A) else "general",
    )


def write_sparse(path, A, comment=""):
    """Coordinate-format Matrix Market; explicit zeros are dropped."""
    A = sp.coo_array(A)
    A.sum_duplicates()
    A.eliminate_zeros()
    scipy.io.mmwrite(
        str(path), A, comment=comment, field="real", precision=PRECISION,
        symmetry="symmetric" if _symmetric(A) else "general",
    )


def read_data_csv(path):
    """Samples as an ``n x p`` array; a single non-numeric header row is skipped."""
    for skip in (0, 1):
        try:
            X = np.loadtxt(path, delimiter=",", ndmin=2, skiprows=skip)
        except ValueError:
            continue
        if X.shape[0] < 1:
            break
        return X
    raise FormatError(f"{path}: expected numeric CSV with n rows and p columns")


def covariance_from_data(X, ddof=0):
    """Centered sample covariance normalized by ``n - ddof``."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if n - ddof < 1:
        raise FormatError(f"need more than {ddof} samples, got {n}")
    Xc = X - X.mean(axis=0)
    S = Xc.T @ Xc / (n - ddof)
    return (S + S.T) / 2


def _jsonable(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"not serializable: {type(obj).__name__}")


def write_json(path, data):
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def dumps_json(data):
    return json.dumps(data, indent=2, sort_keys=True, default=_jsonable)
