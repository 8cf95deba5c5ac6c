"""Numpy implementations of the counting kernels.

Used when the compiled module is unavailable (or SOFICOUNT_PURE=1). The
arithmetic mirrors ``_ckernels.pyx`` operation by operation: the measure
defect is accumulated atom by atom in index order, so both backends return
bit-identical floats.

Conventions shared with the compiled kernels:

* ``inv[i, k]`` is ``sigma_{F[i]}^{-1}(k)``;
* ``coord[i, a]`` is the alpha-digit ``f_a(F[i])`` of table atom ``a``;
* a labeling index ``idx`` enumerates labelings little-endian, i.e. the label
  of point ``k`` is ``(idx // m**k) % m``.
"""

from __future__ import annotations

import numpy as np

BACKEND = "numpy"


def labeling_defects(labels, inv, coord, e_pos, mu):
    """Per labeling: max over s of the mismatch count, and the measure defect.

    The equivariance defect for ``s`` is ``2 * mismatches_s / d``.
    """
    labels = np.asarray(labels, dtype=np.int64)
    T, d = labels.shape
    m = coord.shape[1]
    e_lab = coord[e_pos][labels]
    max_mm = np.zeros(T, dtype=np.int64)
    for i in range(inv.shape[0]):
        mm = np.count_nonzero(e_lab[:, inv[i]] != coord[i][labels], axis=1)
        np.maximum(max_mm, mm, out=max_mm)
    flat = labels + (m * np.arange(T, dtype=np.int64))[:, None]
    counts = np.bincount(flat.ravel(), minlength=T * m).reshape(T, m)
    meas = np.zeros(T)
    for a in range(m):
        meas += np.abs(counts[:, a] / d - mu[a])
    return max_mm, meas


def decode(indices, m, d):
    indices = np.asarray(indices, dtype=np.int64)
    powers = np.int64(m) ** np.arange(d, dtype=np.int64)
    return (indices[:, None] // powers[None, :]) % m


def enumerate_defects(m, d, start, count, inv, coord, e_pos, mu):
    """Defects of the labelings ``start .. start+count-1``."""
    idx = np.arange(start, start + count, dtype=np.int64)
    return labeling_defects(decode(idx, m, d), inv, coord, e_pos, mu)


def gamma_labels(gamma, inv, n):
    """Table-atom labels of phi_gamma: f_k(F[i]) = gamma(sigma_{F[i]}^{-1} k)."""
    gamma = np.asarray(gamma, dtype=np.int64)
    out = np.zeros_like(gamma)
    for i in range(inv.shape[0]):
        out *= n
        out += gamma[:, inv[i]]
    return out
