"""Measurement helpers shared by the unit and acceptance suites.

These deliberately sit outside the package: they peek at planted secrets to
strip noise, which no attack or protocol code is allowed to do.
"""

import numpy as np

from nlhb.nlfunc import DEFAULT_SPEC, apply_f_batch


def measured_merge_distribution(spec, rng, samples, k=6, n=None, j=None):
    """Empirical law of the p+1 response bits disturbed by one column merge.

    Plants a nonzero key, then for each sample XORs a fresh random source
    column into challenge column j and records which of the outputs
    j-p .. j changed (noise-free on both sides, so the difference is purely
    the merge effect).  Returns {outcome tuple: relative frequency}.
    """
    p = spec.p
    if n is None:
        n = 2 * p + 3
    if j is None:
        j = p + 1
    key = rng.uniform_bits(k)
    while not key.any():
        key = rng.uniform_bits(k)

    a = rng.uniform_matrix(samples * k, n).reshape(samples, k, n)
    src = rng.uniform_matrix(samples, k)
    x = ((key[None, :, None] * a).sum(axis=1) & 1).astype(np.uint8)
    flip = ((src * key[None, :]).sum(axis=1) & 1).astype(np.uint8)
    x2 = x.copy()
    x2[:, j - 1] ^= flip

    err = (apply_f_batch(spec, x) ^ apply_f_batch(spec, x2))[:, j - p - 1 : j]
    outcomes, counts = np.unique(err, axis=0, return_counts=True)
    return {
        tuple(int(b) for b in row): int(c) / samples
        for row, c in zip(outcomes, counts)
    }


def total_variation(measured: dict, exact: dict) -> float:
    keys = set(measured) | set(exact)
    return 0.5 * sum(
        abs(measured.get(e, 0.0) - float(exact.get(e, 0))) for e in keys
    )


def hybrid_tables(s, i, include_c):
    """Exact integer-weighted joint table of (A', z) at k=2, n=6, p=3, eps=1/4.

    Enumerates all 2^12 challenge matrices, all 2^3 noise vectors weighted by
    1^wt * 3^(3-wt) (numerators of (1/4)^wt (3/4)^(3-wt) over 4^3), and all
    2^6 perturbations c of row i.  Cell index packs A' (row-major, MSB-first)
    with z.  Without c the same weighting yields the honest table.
    """
    k, n, d = 2, 6, 3
    a_codes = np.arange(1 << (k * n), dtype=np.int64)
    bits = (a_codes[:, None] >> np.arange(k * n - 1, -1, -1)) & 1
    a_bits = bits.reshape(-1, k, n).astype(np.uint8)
    x = np.zeros((a_codes.size, n), dtype=np.uint8)
    for row in range(k):
        if s[row]:
            x ^= a_bits[:, row, :]
    base = apply_f_batch(DEFAULT_SPEC, x)
    base_code = base @ (1 << np.arange(d - 1, -1, -1)).astype(np.int64)
    shift = n * (k - i)
    table = np.zeros(1 << (k * n + d), dtype=np.int64)
    c_values = range(1 << n) if include_c else (0,)
    for v in range(1 << d):
        weight = 3 ** (d - bin(v).count("1"))
        z_code = base_code ^ v
        for c in c_values:
            cell = ((a_codes ^ (c << shift)) << d) | z_code
            np.add.at(table, cell, weight)
    return table
