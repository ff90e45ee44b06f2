"""Dense GF(2) vectors and matrices, seeded randomness, and hex serialization.

Bit vectors and matrices are plain numpy ``uint8`` arrays with entries in
{0, 1}; a length-n vector models the row vector (x_1, ..., x_n) and a k-by-n
matrix models k such rows.  Protocol-level notation is 1-based (x_1 is the
first bit); numpy indexing is 0-based, so x_j lives at index j-1.  Functions
here never mutate their inputs.

Serialized form is a header line ``bits <len>`` or ``mat <rows> <cols>``
followed by one line of lowercase hex.  The bitstream is row-major with the
most significant bit of the first hex byte holding index 1, zero-padded at
the end to a byte boundary.
"""

from __future__ import annotations

import hashlib
from fractions import Fraction

import numpy as np


class ParameterError(ValueError):
    """A parameter is outside its documented domain."""


class DimensionError(ValueError):
    """Operand shapes do not satisfy an operation's contract."""


class FormatError(ValueError):
    """Malformed serialized input; carries a line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = "line %d: %s" % (line, message)
        super().__init__(message)


class SingularSystemError(ValueError):
    """Linear solve failed; ``reason`` is 'rank_deficient' or 'inconsistent'."""

    def __init__(self, reason: str):
        if reason not in ("rank_deficient", "inconsistent"):
            raise ValueError("unknown singularity reason %r" % reason)
        self.reason = reason
        super().__init__("singular system: %s" % reason)


# ---------------------------------------------------------------------------
# array helpers
# ---------------------------------------------------------------------------

def as_bits(values) -> np.ndarray:
    """Coerce a sequence/array of 0-1 values to a 1-D uint8 bit vector."""
    v = np.asarray(values, dtype=np.uint8)
    if v.ndim != 1:
        raise DimensionError("expected a 1-D bit vector, got shape %r" % (v.shape,))
    if v.size and v.max() > 1:
        raise ParameterError("bit vector entries must be 0 or 1")
    return v


def as_bit_matrix(values) -> np.ndarray:
    """Coerce a nested sequence/array of 0-1 values to a 2-D uint8 matrix."""
    m = np.asarray(values, dtype=np.uint8)
    if m.ndim != 2:
        raise DimensionError("expected a 2-D bit matrix, got shape %r" % (m.shape,))
    if m.size and m.max() > 1:
        raise ParameterError("bit matrix entries must be 0 or 1")
    return m


def mat_vec_mul(s, a) -> np.ndarray:
    """Row-vector times matrix over GF(2): returns s.A of length n.

    Args:
        s: bit vector of length k.
        a: bit matrix of shape (k, n).
    """
    s = as_bits(s)
    a = as_bit_matrix(a)
    if s.shape[0] != a.shape[0]:
        raise DimensionError(
            "vector length %d does not match matrix rows %d" % (s.shape[0], a.shape[0])
        )
    # uint8 matmul wraps mod 256, which preserves parity, so `& 1` is exact.
    return ((s @ a) & 1).astype(np.uint8)


def gf2_matmul(a, b) -> np.ndarray:
    """Matrix product over GF(2) for uint8 operands."""
    return ((np.asarray(a, dtype=np.uint8) @ np.asarray(b, dtype=np.uint8)) & 1).astype(np.uint8)


def hamming(a, b) -> int:
    """Hamming distance between two equal-length bit vectors."""
    a = as_bits(a)
    b = as_bits(b)
    if a.shape != b.shape:
        raise DimensionError("length mismatch %d vs %d" % (a.shape[0], b.shape[0]))
    return int(np.count_nonzero(a != b))


def weight(a) -> int:
    """Hamming weight of a bit vector."""
    return int(np.count_nonzero(as_bits(a)))


def gf2_rank(a) -> int:
    """Rank of a bit matrix over GF(2)."""
    m = as_bit_matrix(a).copy()
    rows, cols = m.shape
    rank = 0
    for col in range(cols):
        pivot = -1
        for r in range(rank, rows):
            if m[r, col]:
                pivot = r
                break
        if pivot < 0:
            continue
        m[[rank, pivot]] = m[[pivot, rank]]
        hits = np.nonzero(m[:, col])[0]
        for r in hits:
            if r != rank:
                m[r, :] ^= m[rank, :]
        rank += 1
        if rank == rows:
            break
    return rank


def gaussian_solve(a, z) -> np.ndarray:
    """Solve s.A = z for s over GF(2).

    Args:
        a: bit matrix of shape (k, m) with m >= k.
        z: bit vector of length m.

    Returns:
        The unique solution s of length k.

    Raises:
        SingularSystemError: with reason ``inconsistent`` when no s satisfies
            the system, or ``rank_deficient`` when solutions exist but are
            not unique (rank(A) < k).  Pivoting is deterministic
            (first nonzero).
    """
    a = as_bit_matrix(a)
    z = as_bits(z)
    k, m = a.shape
    if z.shape[0] != m:
        raise DimensionError("rhs length %d does not match matrix cols %d" % (z.shape[0], m))
    if m < k:
        raise DimensionError("need at least k=%d equations, got %d" % (k, m))

    # s.A = z  <=>  A^T s^T = z^T: eliminate on the m-by-(k+1) augmented system.
    aug = np.concatenate([a.T.copy(), z[:, None].copy()], axis=1)
    rank = 0
    pivot_cols = []
    for col in range(k):
        pivot = -1
        for r in range(rank, m):
            if aug[r, col]:
                pivot = r
                break
        if pivot < 0:
            continue
        aug[[rank, pivot]] = aug[[pivot, rank]]
        hits = np.nonzero(aug[:, col])[0]
        for r in hits:
            if r != rank:
                aug[r, :] ^= aug[rank, :]
        pivot_cols.append(col)
        rank += 1
    # Rows past the rank are all-zero on the coefficient side; a set rhs bit
    # there means z is outside the row space.
    if np.any(aug[rank:, k]):
        raise SingularSystemError("inconsistent")
    if rank < k:
        raise SingularSystemError("rank_deficient")
    s = np.zeros(k, dtype=np.uint8)
    for r, col in enumerate(pivot_cols):
        s[col] = aug[r, k]
    return s


def all_bit_vectors(k: int) -> np.ndarray:
    """All 2**k bit vectors of length k, one per row, in integer order.

    Row r spells the binary expansion of r with index 1 as the most
    significant bit, matching the serialization bit order.
    """
    if not 0 <= k <= 26:
        raise ParameterError("k=%d out of supported range 0..26 for exhaustive enumeration" % k)
    ints = np.arange(1 << k, dtype=np.uint64)
    shifts = np.arange(k - 1, -1, -1, dtype=np.uint64)
    return ((ints[:, None] >> shifts[None, :]) & np.uint64(1)).astype(np.uint8)


def row_codes(m) -> np.ndarray:
    """Pack each row of a bit matrix (cols <= 64) into a uint64 code.

    Index 1 is the most significant bit of the code, consistent with
    :func:`all_bit_vectors`.
    """
    m = as_bit_matrix(m)
    cols = m.shape[1]
    if cols > 64:
        raise ParameterError("row_codes supports at most 64 columns, got %d" % cols)
    pows = (np.uint64(1) << np.arange(cols - 1, -1, -1, dtype=np.uint64))
    return m.astype(np.uint64) @ pows


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def _pack_hex(bits: np.ndarray) -> str:
    return np.packbits(bits).tobytes().hex()


def _unpack_hex(hexline: str, nbits: int, line: int | None = None) -> np.ndarray:
    hexline = hexline.strip()
    if len(hexline) % 2 != 0:
        raise FormatError("odd-length hex payload", line)
    try:
        raw = bytes.fromhex(hexline)
    except ValueError:
        raise FormatError("junk characters in hex payload", line) from None
    expected = (nbits + 7) // 8
    if len(raw) != expected:
        raise FormatError(
            "hex payload is %d bytes, expected %d for %d bits" % (len(raw), expected, nbits),
            line,
        )
    bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8))
    if np.any(bits[nbits:]):
        raise FormatError("nonzero padding bits past the end of the payload", line)
    return bits[:nbits].copy()


def dump_bits(v) -> str:
    """Serialize a bit vector to the two-line ``bits <len>`` text form."""
    v = as_bits(v)
    return "bits %d\n%s\n" % (v.shape[0], _pack_hex(v))


def dump_matrix(m) -> str:
    """Serialize a bit matrix to the two-line ``mat <rows> <cols>`` text form."""
    m = as_bit_matrix(m)
    return "mat %d %d\n%s\n" % (m.shape[0], m.shape[1], _pack_hex(m.reshape(-1)))


def parse_header(header: str, line: int | None = None):
    """Parse a serialization header line.

    Returns ("bits", n) or ("mat", rows, cols).
    """
    parts = header.split()
    if len(parts) == 2 and parts[0] == "bits":
        try:
            n = int(parts[1])
        except ValueError:
            raise FormatError("bad bits header %r" % header, line) from None
        if n < 0:
            raise FormatError("negative length in header", line)
        return ("bits", n)
    if len(parts) == 3 and parts[0] == "mat":
        try:
            rows, cols = int(parts[1]), int(parts[2])
        except ValueError:
            raise FormatError("bad mat header %r" % header, line) from None
        if rows < 0 or cols < 0:
            raise FormatError("negative dimension in header", line)
        return ("mat", rows, cols)
    raise FormatError("unrecognized header %r" % header, line)


def load_bits(text: str) -> np.ndarray:
    """Parse the two-line ``bits`` form back into a vector (round-trips dump_bits)."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if len(lines) != 2:
        raise FormatError("expected header plus one hex line, got %d lines" % len(lines))
    kind = parse_header(lines[0], line=1)
    if kind[0] != "bits":
        raise FormatError("expected a bits header", line=1)
    return _unpack_hex(lines[1], kind[1], line=2)


def load_matrix(text: str) -> np.ndarray:
    """Parse the two-line ``mat`` form back into a matrix (round-trips dump_matrix)."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if len(lines) != 2:
        raise FormatError("expected header plus one hex line, got %d lines" % len(lines))
    kind = parse_header(lines[0], line=1)
    if kind[0] != "mat":
        raise FormatError("expected a mat header", line=1)
    rows, cols = kind[1], kind[2]
    flat = _unpack_hex(lines[1], rows * cols, line=2)
    return flat.reshape(rows, cols)


# ---------------------------------------------------------------------------
# randomness
# ---------------------------------------------------------------------------

class RandomSource:
    """Deterministic random stream for all protocol and attack sampling.

    A single PCG64 stream per source: uniform bits, Bernoulli bits and
    derived child sources are all functions of the 64-bit seed, so a run is
    reproducible bit-for-bit from its seed.

    Bernoulli sampling is exact for rational eps: each bit consumes one
    64-bit uniform word compared against floor(eps * 2**64), and the
    boundary case (probability 2**-64 per bit) is resolved by further
    draws on the residual fraction, never by float rounding.
    """

    def __init__(self, seed: int):
        seed = int(seed)
        if not 0 <= seed < (1 << 64):
            raise ParameterError("seed must be a 64-bit unsigned integer")
        self.seed = seed
        self._gen = np.random.Generator(np.random.PCG64(seed))

    def __repr__(self):
        return "RandomSource(seed=%d)" % self.seed

    def u64(self, count: int) -> np.ndarray:
        """Draw ``count`` uniform 64-bit words."""
        return self._gen.integers(0, 1 << 64, size=count, dtype=np.uint64)

    def uniform_bits(self, length: int) -> np.ndarray:
        """Draw a uniform bit vector of the given length."""
        if length < 0:
            raise ParameterError("length must be nonnegative")
        if length == 0:
            return np.zeros(0, dtype=np.uint8)
        words = self.u64((length + 63) // 64)
        stream = np.unpackbits(np.frombuffer(words.astype(">u8").tobytes(), dtype=np.uint8))
        return stream[:length].copy()

    def uniform_matrix(self, rows: int, cols: int) -> np.ndarray:
        """Draw a uniform bit matrix of shape (rows, cols)."""
        return self.uniform_bits(rows * cols).reshape(rows, cols)

    def bernoulli_bits(self, length: int, eps) -> np.ndarray:
        """Draw ``length`` i.i.d. Bernoulli(eps) bits for rational 0 < eps < 1/2."""
        eps = Fraction(eps)
        if not Fraction(0) < eps < Fraction(1, 2):
            raise ParameterError("eps must satisfy 0 < eps < 1/2, got %s" % eps)
        if length < 0:
            raise ParameterError("length must be nonnegative")
        num, den = eps.numerator, eps.denominator
        threshold, residual = divmod(num << 64, den)
        u = self.u64(length)
        bits = (u < np.uint64(threshold)).astype(np.uint8)
        for idx in np.nonzero(u == np.uint64(threshold))[0]:
            bits[idx] = self._bernoulli_residual(residual, den)
        return bits

    def _bernoulli_residual(self, num: int, den: int) -> int:
        # Continue the base-2**64 expansion of the probability until a draw
        # falls strictly above or below the next digit.
        while num:
            threshold, num = divmod(num << 64, den)
            v = int(self.u64(1)[0])
            if v < threshold:
                return 1
            if v > threshold:
                return 0
        return 0

    def bernoulli_matrix(self, rows: int, cols: int, eps) -> np.ndarray:
        """Draw a (rows, cols) matrix of i.i.d. Bernoulli(eps) bits."""
        return self.bernoulli_bits(rows * cols, eps).reshape(rows, cols)

    def bounded_weight_bits(self, length: int, eps) -> np.ndarray:
        """Draw Bernoulli(eps) bits conditioned on weight <= floor(eps * length).

        This is the bounded-weight noise variant some problem statements use
        in place of plain i.i.d. noise; implemented by rejection so the
        conditional law is exact.
        """
        eps = Fraction(eps)
        limit = int(eps * length)
        for _ in range(100000):
            v = self.bernoulli_bits(length, eps)
            if int(np.count_nonzero(v)) <= limit:
                return v
        raise ParameterError(
            "bounded-weight rejection sampler failed to terminate for eps=%s, length=%d"
            % (eps, length)
        )

    def derive(self, label: str) -> "RandomSource":
        """Return an independent child source keyed by this seed and a label."""
        digest = hashlib.blake2b(
            self.seed.to_bytes(8, "big") + label.encode("utf-8"), digest_size=8
        ).digest()
        return RandomSource(int.from_bytes(digest, "big"))


def derive_seed(seed: int, label: str) -> int:
    """The 64-bit child seed :meth:`RandomSource.derive` would use."""
    digest = hashlib.blake2b(
        int(seed).to_bytes(8, "big") + label.encode("utf-8"), digest_size=8
    ).digest()
    return int.from_bytes(digest, "big")
