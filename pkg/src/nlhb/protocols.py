"""Parallelized single-exchange HB-family sessions.

All four variants share one response/verify core:

- ``hb``     z = s.A + v
- ``hb+``    z = s1.B + s2.A + v          (prover-chosen blinding matrix B)
- ``nlhb``   z = f(s.A) + v
- ``nlhb+``  z = f(s1.B) + f(s2.A) + v

with v an i.i.d. Bernoulli(eps) noise vector chosen by the prover, and the
verifier accepting iff the response is within Hamming distance
u = floor(eps' * D) of the expected image.  The linear variants are the
p = 0, g = 0 degenerate case of the nonlinear ones and share every code
path, which the tests pin down bit-for-bit.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .gf2core import (
    DimensionError,
    FormatError,
    ParameterError,
    RandomSource,
    as_bit_matrix,
    as_bits,
    dump_bits,
    dump_matrix,
    hamming,
    mat_vec_mul,
    parse_header,
    _unpack_hex,
)
from .nlfunc import (
    IDENTITY_SPEC,
    NonlinearFunctionSpec,
    apply_f,
    format_spec,
    parse_spec,
)
from .params import threshold_u

PROTOCOLS = ("hb", "hb+", "nlhb", "nlhb+")


@dataclass(frozen=True)
class ProtocolParams:
    """Public parameters of one protocol instance.

    D and u are derived: D = n - p output bits, u = floor(eps' * D).
    """

    proto: str
    k: int
    n: int
    eps: Fraction
    eps_prime: Fraction
    spec: NonlinearFunctionSpec

    def __post_init__(self):
        if self.proto not in PROTOCOLS:
            raise ParameterError("unknown protocol %r" % self.proto)
        if self.k < 1 or self.n < 1:
            raise ParameterError("k and n must be positive")
        object.__setattr__(self, "eps", Fraction(self.eps))
        object.__setattr__(self, "eps_prime", Fraction(self.eps_prime))
        if not Fraction(0) < self.eps < self.eps_prime < Fraction(1, 2):
            raise ParameterError("need 0 < eps < eps' < 1/2")
        if self.proto in ("hb", "hb+") and (self.spec.p != 0 or self.spec.monomials):
            raise ParameterError("linear protocols require the identity response map")
        self.spec.output_length(self.n)  # raises if the window leaves no output

    @property
    def d(self) -> int:
        return self.n - self.spec.p

    @property
    def u(self) -> int:
        return threshold_u(self.eps_prime, self.d)

    @property
    def blinded(self) -> bool:
        return self.proto.endswith("+")


def hb_params(k: int, n: int, eps, eps_prime, blinded: bool = False) -> ProtocolParams:
    return ProtocolParams("hb+" if blinded else "hb", k, n, eps, eps_prime, IDENTITY_SPEC)


def nlhb_params(
    k: int,
    n: int,
    eps,
    eps_prime,
    spec: NonlinearFunctionSpec,
    blinded: bool = False,
) -> ProtocolParams:
    return ProtocolParams("nlhb+" if blinded else "nlhb", k, n, eps, eps_prime, spec)


@dataclass(frozen=True)
class SecretKey:
    """s1 is the only secret for hb/nlhb; the blinded variants add s2.

    In the blinded variants s1 acts on the prover's blinding matrix B and
    s2 on the verifier's challenge A.
    """

    s1: np.ndarray
    s2: np.ndarray | None = None


def generate_key(params: ProtocolParams, rng: RandomSource) -> SecretKey:
    s1 = rng.uniform_bits(params.k)
    s2 = rng.uniform_bits(params.k) if params.blinded else None
    return SecretKey(s1=s1, s2=s2)


@dataclass
class SessionTranscript:
    params: ProtocolParams
    b: np.ndarray | None
    a: np.ndarray
    z: np.ndarray
    accepted: bool
    distance: int

    @property
    def proto(self) -> str:
        return self.params.proto


# ---------------------------------------------------------------------------
# respond / verify
# ---------------------------------------------------------------------------

def _check_challenge(params: ProtocolParams, a, name="challenge") -> np.ndarray:
    a = as_bit_matrix(a)
    if a.shape != (params.k, params.n):
        raise DimensionError(
            "%s matrix shape %r does not match (k=%d, n=%d)"
            % (name, a.shape, params.k, params.n)
        )
    return a


def expected_response(params: ProtocolParams, key: SecretKey, a, b=None) -> np.ndarray:
    """The noise-free response image for a given challenge (and blinding)."""
    a = _check_challenge(params, a)
    if params.blinded:
        if b is None:
            raise ParameterError("%s requires a blinding matrix" % params.proto)
        if key.s2 is None:
            raise ParameterError("%s requires a two-part key" % params.proto)
        b = _check_challenge(params, b, name="blinding")
        return apply_f(params.spec, mat_vec_mul(key.s1, b)) ^ apply_f(
            params.spec, mat_vec_mul(key.s2, a)
        )
    if b is not None:
        raise ParameterError("%s has no blinding matrix" % params.proto)
    return apply_f(params.spec, mat_vec_mul(key.s1, a))


def respond(
    params: ProtocolParams,
    key: SecretKey,
    a,
    b=None,
    rng: RandomSource | None = None,
    noise=None,
) -> np.ndarray:
    """Prover response: expected image plus Bernoulli(eps) noise.

    Pass ``noise`` explicitly (test hook) or an ``rng`` to draw it.
    """
    image = expected_response(params, key, a, b)
    if noise is None:
        if rng is None:
            raise ParameterError("respond needs either an rng or an explicit noise vector")
        noise = rng.bernoulli_bits(params.d, params.eps)
    noise = as_bits(noise)
    if noise.shape[0] != params.d:
        raise DimensionError("noise length %d != D=%d" % (noise.shape[0], params.d))
    return image ^ noise


def verify(params: ProtocolParams, key: SecretKey, a, z, b=None) -> tuple[bool, int]:
    """Verifier decision: (accepted, Hamming distance to the expected image)."""
    z = as_bits(z)
    if z.shape[0] != params.d:
        raise DimensionError(
            "response length %d does not match D=%d" % (z.shape[0], params.d)
        )
    dist = hamming(z, expected_response(params, key, a, b))
    return dist <= params.u, dist


def hb_respond(params, key, a, rng=None, noise=None):
    """z = s.A + v (requires hb params)."""
    if params.proto != "hb":
        raise ParameterError("hb_respond requires hb params")
    return respond(params, key, a, rng=rng, noise=noise)


def hb_verify(params, key, a, z):
    if params.proto != "hb":
        raise ParameterError("hb_verify requires hb params")
    return verify(params, key, a, z)


def nlhb_respond(params, key, a, rng=None, noise=None):
    """z = f(s.A) + v (requires nlhb params)."""
    if params.proto != "nlhb":
        raise ParameterError("nlhb_respond requires nlhb params")
    return respond(params, key, a, rng=rng, noise=noise)


def nlhb_verify(params, key, a, z):
    if params.proto != "nlhb":
        raise ParameterError("nlhb_verify requires nlhb params")
    return verify(params, key, a, z)


# ---------------------------------------------------------------------------
# sessions
# ---------------------------------------------------------------------------

def run_session(
    params: ProtocolParams,
    key: SecretKey,
    rng_prover: RandomSource,
    rng_verifier: RandomSource,
    noise=None,
) -> SessionTranscript:
    """One honest exchange.  Draw order: prover B (blinded variants only),
    verifier A, prover noise."""
    b = rng_prover.uniform_matrix(params.k, params.n) if params.blinded else None
    a = rng_verifier.uniform_matrix(params.k, params.n)
    z = respond(params, key, a, b=b, rng=rng_prover, noise=noise)
    accepted, dist = verify(params, key, a, z, b=b)
    return SessionTranscript(params=params, b=b, a=a, z=z, accepted=accepted, distance=dist)


def hbplus_session(params, key, rng_prover, rng_verifier, noise=None):
    if params.proto != "hb+":
        raise ParameterError("hbplus_session requires hb+ params")
    return run_session(params, key, rng_prover, rng_verifier, noise=noise)


def nlhbplus_session(params, key, rng_prover, rng_verifier, noise=None):
    if params.proto != "nlhb+":
        raise ParameterError("nlhbplus_session requires nlhb+ params")
    return run_session(params, key, rng_prover, rng_verifier, noise=noise)


def transcript_sampler(params, key, rng: RandomSource, count: int):
    """``count`` honest sessions driven by one stream (prover and verifier
    roles interleaved deterministically: B, A, noise per session)."""
    return [run_session(params, key, rng, rng) for _ in range(count)]


# ---------------------------------------------------------------------------
# transcript files
# ---------------------------------------------------------------------------

def _params_line(params: ProtocolParams) -> str:
    return "k=%d n=%d p=%d d=%d u=%d eps=%s epsp=%s g=%s" % (
        params.k,
        params.n,
        params.spec.p,
        params.d,
        params.u,
        params.eps,
        params.eps_prime,
        format_spec(params.spec).split("g=", 1)[1],
    )


def format_transcript(t: SessionTranscript) -> str:
    out = ["proto=%s" % t.proto, _params_line(t.params)]
    if t.params.blinded:
        out.append(dump_matrix(t.b).rstrip("\n"))
    out.append(dump_matrix(t.a).rstrip("\n"))
    out.append(dump_bits(t.z).rstrip("\n"))
    out.append("decision=%s distance=%d" % ("accept" if t.accepted else "reject", t.distance))
    return "\n".join(out) + "\n"


def write_transcripts(fp, transcripts) -> None:
    """Write records separated by blank lines to a path or text file object."""
    if isinstance(fp, (str, bytes)):
        with open(fp, "w") as handle:
            write_transcripts(handle, transcripts)
            return
    fp.write("\n".join(format_transcript(t) for t in transcripts))


class _LineReader:
    def __init__(self, fp):
        self.lines = fp.read().splitlines()
        self.pos = 0

    def next_content(self):
        while self.pos < len(self.lines):
            line = self.lines[self.pos]
            self.pos += 1
            if line.strip():
                return line.strip(), self.pos
        return None, self.pos


def _expect_kv(token: str, key: str, line: int) -> str:
    if "=" not in token:
        raise FormatError("expected %s=<value>, got %r" % (key, token), line)
    name, value = token.split("=", 1)
    if name != key:
        raise FormatError("expected key %r, got %r" % (key, name), line)
    return value


def _parse_params(proto: str, line_text: str, line: int) -> ProtocolParams:
    fields = {}
    for token in line_text.split():
        if "=" not in token:
            raise FormatError("bad params token %r" % token, line)
        name, value = token.split("=", 1)
        fields[name] = value
    try:
        k = int(fields["k"])
        n = int(fields["n"])
        p = int(fields["p"])
        d = int(fields["d"])
        u = int(fields["u"])
        eps = Fraction(fields["eps"])
        epsp = Fraction(fields["epsp"])
        g = fields["g"]
    except KeyError as exc:
        raise FormatError("params line missing %s" % exc, line) from None
    except ValueError as exc:
        raise FormatError("bad params value: %s" % exc, line) from None
    spec = parse_spec("p=%d; g=%s" % (p, g))
    try:
        params = ProtocolParams(proto, k, n, eps, epsp, spec)
    except ParameterError as exc:
        raise FormatError(str(exc), line) from None
    if params.d != d or params.u != u:
        raise FormatError(
            "stated d=%d u=%d disagree with derived d=%d u=%d" % (d, u, params.d, params.u),
            line,
        )
    return params


def _read_block(reader: _LineReader, want: str, rows: int, cols: int):
    header, line = reader.next_content()
    if header is None:
        raise FormatError("unexpected end of file, expected %s block" % want, line)
    kind = parse_header(header, line)
    hexline, hline = reader.next_content()
    if hexline is None:
        raise FormatError("missing hex payload", hline)
    if want == "mat":
        if kind[0] != "mat" or kind[1] != rows or kind[2] != cols:
            raise FormatError("expected mat %d %d, got %r" % (rows, cols, header), line)
        return _unpack_hex(hexline, rows * cols, hline).reshape(rows, cols)
    if kind[0] != "bits" or kind[1] != rows:
        raise FormatError("expected bits %d, got %r" % (rows, header), line)
    return _unpack_hex(hexline, rows, hline)


def read_transcripts(fp) -> list[SessionTranscript]:
    """Parse a transcript file back into records (inverse of write_transcripts)."""
    if isinstance(fp, (str, bytes)):
        with open(fp) as handle:
            return read_transcripts(handle)
    reader = _LineReader(fp)
    records = []
    while True:
        first, line = reader.next_content()
        if first is None:
            return records
        proto = _expect_kv(first, "proto", line)
        if proto not in PROTOCOLS:
            raise FormatError("unknown protocol %r" % proto, line)
        params_text, pline = reader.next_content()
        if params_text is None:
            raise FormatError("missing params line", pline)
        params = _parse_params(proto, params_text, pline)
        b = None
        if params.blinded:
            b = _read_block(reader, "mat", params.k, params.n)
        a = _read_block(reader, "mat", params.k, params.n)
        z = _read_block(reader, "bits", params.d, 0)
        decision_text, dline = reader.next_content()
        if decision_text is None:
            raise FormatError("missing decision line", dline)
        tokens = decision_text.split()
        if len(tokens) != 2:
            raise FormatError("bad decision line %r" % decision_text, dline)
        decision = _expect_kv(tokens[0], "decision", dline)
        if decision not in ("accept", "reject"):
            raise FormatError("decision must be accept or reject", dline)
        distance = int(_expect_kv(tokens[1], "distance", dline))
        if not 0 <= distance <= params.d:
            raise FormatError("distance %d outside 0..D" % distance, dline)
        if (distance <= params.u) != (decision == "accept"):
            raise FormatError("decision disagrees with distance and threshold", dline)
        records.append(
            SessionTranscript(
                params=params, b=b, a=a, z=z, accepted=decision == "accept", distance=distance
            )
        )


def transcripts_to_text(transcripts) -> str:
    buf = io.StringIO()
    write_transcripts(buf, transcripts)
    return buf.getvalue()


def transcripts_from_text(text: str) -> list[SessionTranscript]:
    return read_transcripts(io.StringIO(text))
