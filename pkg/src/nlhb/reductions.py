"""Executable security-reduction constructions.

Four drivers, each against pluggable adversary oracles:

- ``lpn_to_unld_embed``: turns LPN samples into a decoding instance of the
  nonlinear code by spacing the columns so every window monomial vanishes.
- ``hybrid_sample``: the one-row perturbation whose distribution is exactly
  uniform when the corresponding key bit is 1 and exactly honest when it
  is 0 — the lever that turns a distinguisher into a key extractor.
- ``algorithm_x``: recovers the key bit by bit from any transcript
  distinguisher by comparing its acceptance rate on hybrids against the
  uniform baseline.
- ``forger_to_distinguisher`` / ``active_forger_to_distinguisher``: wrap a
  passive forger (threshold test on one forged response) or an active one
  (rewound twice from the same blinding commitment so the unknown half of
  the response cancels) into such a distinguisher.

Oracles are trusted in-process callables, deterministic given their seed.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .params import false_accept
from .gf2core import (
    DimensionError,
    ParameterError,
    RandomSource,
    all_bit_vectors,
    as_bit_matrix,
    as_bits,
    hamming,
    mat_vec_mul,
)
from ._kernels import hamming_rows
from .nlfunc import NonlinearFunctionSpec, apply_f, apply_f_batch
from .protocols import ProtocolParams, SecretKey, expected_response

# ---------------------------------------------------------------------------
# transcript <-> flat bitstring packing
# ---------------------------------------------------------------------------

def pack_transcript(a, z) -> np.ndarray:
    """Flatten one (challenge, response) pair to a k*n + D bit string."""
    a = as_bit_matrix(a)
    return np.concatenate([a.reshape(-1), as_bits(z)])


def unpack_transcript(bits, params: ProtocolParams):
    bits = as_bits(bits)
    expected = params.k * params.n + params.d
    if bits.shape[0] != expected:
        raise DimensionError(
            "transcript string has %d bits, expected k*n+D = %d" % (bits.shape[0], expected)
        )
    split = params.k * params.n
    return bits[:split].reshape(params.k, params.n), bits[split:]


def string_length(params: ProtocolParams) -> int:
    return params.k * params.n + params.d


def honest_transcript_source(params: ProtocolParams, key: SecretKey, rng: RandomSource):
    """Unbounded source of packed honest transcripts (1 and 0 alike draw A
    then noise, so streams are reproducible)."""

    def draw(count: int) -> np.ndarray:
        out = np.empty((count, string_length(params)), dtype=np.uint8)
        for row in range(count):
            a = rng.uniform_matrix(params.k, params.n)
            z = expected_response(params, key, a) ^ rng.bernoulli_bits(params.d, params.eps)
            out[row] = pack_transcript(a, z)
        return out

    return draw


def uniform_string_source(params: ProtocolParams, rng: RandomSource):
    length = string_length(params)

    def draw(count: int) -> np.ndarray:
        return rng.uniform_matrix(count, length)

    return draw


def finite_transcript_source(strings):
    """Source over a fixed pool; raises once the pool is exhausted."""
    pool = [np.asarray(s, dtype=np.uint8) for s in strings]
    cursor = [0]

    def draw(count: int) -> np.ndarray:
        if cursor[0] + count > len(pool):
            raise ParameterError(
                "transcript source exhausted: %d left, %d requested"
                % (len(pool) - cursor[0], count)
            )
        batch = np.stack(pool[cursor[0] : cursor[0] + count])
        cursor[0] += count
        return batch

    return draw


# ---------------------------------------------------------------------------
# LPN -> UNLD embedding
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EmbeddingLayout:
    """Where the original columns land inside the widened challenge matrix.

    ``gaps[i]`` zero columns sit between original columns i+1 and i+2
    (1-based), each at least p-1 wide so no window ever sees two original
    columns; p more zero columns trail the last one.
    """

    n: int
    n_prime: int
    p: int
    gaps: tuple[int, ...]
    positions: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        if len(self.gaps) != self.n_prime - 1:
            raise ParameterError("need n'-1 gap sizes")
        if any(g < self.p - 1 for g in self.gaps):
            raise ParameterError("every gap must be at least p-1")
        if sum(self.gaps) != self.n - self.p - self.n_prime:
            raise ParameterError("gaps must sum to n - p - n'")
        pos = [1]
        for g in self.gaps:
            pos.append(pos[-1] + 1 + g)
        object.__setattr__(self, "positions", tuple(pos))


def embedding_feasible(n: int, n_prime: int, p: int) -> bool:
    return p >= 1 and n_prime >= 1 and n_prime * p <= n - 1


def default_layout(n: int, n_prime: int, p: int) -> EmbeddingLayout:
    """Minimal gaps p-1 everywhere, remainder folded into the first gap."""
    if not embedding_feasible(n, n_prime, p):
        raise ParameterError(
            "infeasible embedding: need n' <= (n-1)/p, got n'=%d, n=%d, p=%d"
            % (n_prime, n, p)
        )
    gaps = [p - 1] * (n_prime - 1)
    if gaps:
        gaps[0] += (n - p - n_prime) - (p - 1) * (n_prime - 1)
    elif n - p - n_prime:
        raise ParameterError("n' = 1 requires n = p + 1")
    return EmbeddingLayout(n=n, n_prime=n_prime, p=p, gaps=tuple(gaps))


def lpn_to_unld_embed(
    g,
    z,
    spec: NonlinearFunctionSpec,
    n: int,
    rng: RandomSource,
    eps,
    layout: EmbeddingLayout | None = None,
):
    """Widen an LPN batch (G, z) into a decoding instance (A, y) of the
    nonlinear code, preserving the planted secret.

    A places G's columns at ``layout.positions`` with zero columns between
    and after them; y carries z's bits at those positions and fresh
    Bernoulli(eps) filler elsewhere.  Because no window of A contains two
    original columns and every monomial of g has degree >= 2, f(mA) equals
    mG at the original positions for every m — so a decoder for (A, y) is
    a decoder for the LPN batch.
    """
    g = as_bit_matrix(g)
    z = as_bits(z)
    k, n_prime = g.shape
    if z.shape[0] != n_prime:
        raise DimensionError("z length %d != n'=%d" % (z.shape[0], n_prime))
    if spec.p < 1 or not spec.monomials:
        raise ParameterError("embedding needs a nonlinear spec with p >= 1")
    if not k < n_prime:
        raise ParameterError("need k < n'")
    if layout is None:
        layout = default_layout(n, n_prime, spec.p)
    elif (layout.n, layout.n_prime, layout.p) != (n, n_prime, spec.p):
        raise ParameterError("layout does not match (n, n', p)")

    d = n - spec.p
    a = np.zeros((k, n), dtype=np.uint8)
    y = rng.bernoulli_bits(d, eps)
    cols = np.array(layout.positions) - 1
    a[:, cols] = g
    y[cols] = z
    return a, y, layout


def brute_force_unld(instances, k: int, spec: NonlinearFunctionSpec):
    """Exhaustive decoder: the m minimizing total distance to the given
    (A, y) instances, plus that distance.  The reduction's sanity oracle;
    cost 2^k response-map evaluations per instance."""
    if not instances:
        raise ParameterError("need at least one instance")
    candidates = all_bit_vectors(k)
    total = np.zeros(1 << k, dtype=np.int64)
    for a, y in instances:
        a = as_bit_matrix(a)
        images = apply_f_batch(spec, (candidates @ a) & 1)
        total += hamming_rows(images, as_bits(y))
    best = int(np.argmin(total))
    return candidates[best].copy(), int(total[best])


# ---------------------------------------------------------------------------
# hybrid perturbation
# ---------------------------------------------------------------------------

def hybrid_sample(transcript, i: int, rng: RandomSource | None = None, c=None):
    """Add a fresh uniform row vector to row i (1-based) of the challenge.

    Returns the perturbed (A', z) pair; z is untouched.  When key bit i is
    1 the result is exactly uniform on (A', z); when it is 0 row i never
    entered the response, so the distribution is exactly the honest one.
    """
    a, z = transcript
    a = as_bit_matrix(a)
    if not 1 <= i <= a.shape[0]:
        raise ParameterError("row index %d outside 1..k=%d" % (i, a.shape[0]))
    if c is None:
        if rng is None:
            raise ParameterError("hybrid_sample needs an rng or an explicit c")
        c = rng.uniform_bits(a.shape[1])
    else:
        c = as_bits(c)
        if c.shape[0] != a.shape[1]:
            raise DimensionError("c length %d != n=%d" % (c.shape[0], a.shape[1]))
    perturbed = a.copy()
    perturbed[i - 1] ^= c
    return perturbed, as_bits(z)


# ---------------------------------------------------------------------------
# distinguishers and forgers
# ---------------------------------------------------------------------------

@dataclass
class DistinguisherOracle:
    """One-bit verdict on a batch of q packed strings of length k*n + D.

    ``seed`` plays the role of the fixed coins: the verdict is a
    deterministic function of (seed, strings).
    """

    func: Callable[[np.ndarray], int]
    q: int
    advantage: float
    seed: int
    params: ProtocolParams

    def __call__(self, strings) -> int:
        strings = np.atleast_2d(np.asarray(strings, dtype=np.uint8))
        if strings.shape[0] != self.q:
            raise ParameterError(
                "distinguisher expects %d strings, got %d" % (self.q, strings.shape[0])
            )
        return int(self.func(strings))


def ideal_distinguisher(
    params: ProtocolParams, key: SecretKey, q: int = 1, seed: int = 0
) -> DistinguisherOracle:
    """Reference adversary that knows the key: accepts a batch iff every
    string verifies within the protocol threshold."""

    def func(strings):
        for row in strings:
            a, z = unpack_transcript(row, params)
            if hamming(z, expected_response(params, key, a)) > params.u:
                return 0
        return 1

    return DistinguisherOracle(func=func, q=q, advantage=1.0, seed=seed, params=params)


class PassiveForger:
    """Observe q transcripts, then answer one challenge matrix.

    Subclasses fill in ``_forge``; ``reset`` refixes the coins so a wrapping
    distinguisher stays deterministic per call.
    """

    def __init__(self, params: ProtocolParams, q: int = 0):
        self.params = params
        self.q = q
        self._seen: list = []

    def reset(self, seed: int) -> None:
        self._seen = []
        self._rng = RandomSource(seed)

    def observe(self, transcripts) -> None:
        self._seen.extend(transcripts)

    def forge(self, a) -> np.ndarray:
        return self._forge(as_bit_matrix(a))

    def _forge(self, a):  # pragma: no cover - abstract
        raise NotImplementedError


class PerfectPassiveForger(PassiveForger):
    """Knows the key outright; forges the exact noise-free image."""

    def __init__(self, params, key: SecretKey, q: int = 0):
        super().__init__(params, q)
        self.key = key

    def _forge(self, a):
        return expected_response(self.params, self.key, a)


class HonestPassiveForger(PassiveForger):
    """Knows the key but answers like the honest noisy prover."""

    def __init__(self, params, key: SecretKey, q: int = 0):
        super().__init__(params, q)
        self.key = key

    def _forge(self, a):
        noise = self._rng.bernoulli_bits(self.params.d, self.params.eps)
        return expected_response(self.params, self.key, a) ^ noise


class RandomPassiveForger(PassiveForger):
    """Baseline with no information: uniform responses."""

    def _forge(self, a):
        return self._rng.uniform_bits(self.params.d)


def passive_distinguisher_interval(params: ProtocolParams):
    """Admissible open interval for the accept threshold rate of the
    passive forger wrapper: (eps' - 2 eps eps' + eps, 1/2)."""
    eps, epsp = params.eps, params.eps_prime
    return epsp - 2 * eps * epsp + eps, Fraction(1, 2)


def forger_to_distinguisher(
    z_oracle: PassiveForger, q: int, epsilon_dd=None, *, seed: int = 0
) -> DistinguisherOracle:
    """Distinguisher from a passive forger: train it on q strings read as
    transcripts, challenge it with the (q+1)-th string's matrix, and accept
    iff the forgery lands within floor(eps'' * D) of that string's response.

    Honest strings make the forger's training genuine, so a good forger
    lands close; uniform strings make the response independent of anything,
    so the distance is a fair coin per bit and the accept rate is exactly
    the false-accept tail at the threshold.
    """
    params = z_oracle.params
    low, high = passive_distinguisher_interval(params)
    if epsilon_dd is None:
        epsilon_dd = (low + high) / 2
    epsilon_dd = Fraction(epsilon_dd)
    if not low < epsilon_dd < high:
        raise ParameterError(
            "threshold rate %s outside the open interval (%s, %s)" % (epsilon_dd, low, high)
        )
    u_dd = int(epsilon_dd * params.d)

    def func(strings):
        z_oracle.reset(seed)
        z_oracle.observe([unpack_transcript(row, params) for row in strings[:q]])
        a_star, z_star = unpack_transcript(strings[q], params)
        forged = z_oracle.forge(a_star)
        return int(hamming(z_star, forged) <= u_dd)

    declared = 1.0 - float(false_accept(params.d, u_dd).exact)
    return DistinguisherOracle(
        func=func, q=q + 1, advantage=declared, seed=seed, params=params
    )


# ---------------------------------------------------------------------------
# active forgers and the rewinding wrapper
# ---------------------------------------------------------------------------

class ActiveForger:
    """Interactive forger against the blinded protocol.

    Query phase, q times: ``on_blinding(B) -> A`` then ``on_response(z)``.
    Challenge phase: ``commit_blinding() -> B_hat`` then ``respond(A) ->
    z_hat``, with ``snapshot``/``restore`` replaying identically on equal
    subsequent inputs.  The base class enforces the phase order and raises
    on misuse.
    """

    def __init__(self, params: ProtocolParams, q: int = 0):
        if not params.blinded:
            raise ParameterError("active forgers target the blinded protocols")
        self.params = params
        self.q = q
        self._state: dict = {}

    def reset(self, seed: int) -> None:
        self._state = {"phase": "query", "awaiting": None, "seed": seed, "round": 0}

    def _require(self, phase: str, awaiting):
        if not self._state:
            raise ParameterError("forger used before reset()")
        if self._state["phase"] != phase or self._state["awaiting"] != awaiting:
            raise ParameterError(
                "forger protocol misuse: in phase %r awaiting %r"
                % (self._state["phase"], self._state["awaiting"])
            )

    def on_blinding(self, b) -> np.ndarray:
        self._require("query", None)
        self._state["awaiting"] = "response"
        return self._on_blinding(as_bit_matrix(b))

    def on_response(self, z) -> None:
        self._require("query", "response")
        self._state["awaiting"] = None
        self._state["round"] += 1
        self._on_response(as_bits(z))

    def commit_blinding(self) -> np.ndarray:
        self._require("query", None)
        self._state["phase"] = "challenge"
        b_hat = self._commit_blinding()
        self._state["b_hat"] = b_hat
        return b_hat

    def respond(self, a) -> np.ndarray:
        if not self._state or self._state["phase"] != "challenge":
            raise ParameterError("forger protocol misuse: respond() before commit_blinding()")
        return self._respond(as_bit_matrix(a))

    def snapshot(self) -> dict:
        return dict(self._state)

    def restore(self, state: dict) -> None:
        self._state = dict(state)

    # subclass hooks
    def _on_blinding(self, b):  # pragma: no cover - abstract
        raise NotImplementedError

    def _on_response(self, z) -> None:
        pass

    def _commit_blinding(self):  # pragma: no cover - abstract
        raise NotImplementedError

    def _respond(self, a):  # pragma: no cover - abstract
        raise NotImplementedError

    def _message_rng(self, label: str, payload: bytes) -> RandomSource:
        """Coins tied to (seed, message): a restored snapshot replays the
        same message identically, yet distinct messages stay independent."""
        digest = hashlib.blake2b(
            int(self._state["seed"]).to_bytes(8, "big")
            + label.encode()
            + payload,
            digest_size=8,
        ).digest()
        return RandomSource(int.from_bytes(digest, "big"))


class HonestActiveForger(ActiveForger):
    """Models a fully successful forger: an honest blinded prover holding
    (s1, s2).  Noise is drawn from message-tied coins so rewinding
    reproduces it exactly on a replayed challenge."""

    def __init__(self, params, key: SecretKey, q: int = 0, noisy: bool = True):
        super().__init__(params, q)
        if key.s2 is None:
            raise ParameterError("blinded prover needs a two-part key")
        self.key = key
        self.noisy = noisy

    def _on_blinding(self, b):
        tag = b.tobytes() + int(self._state["round"]).to_bytes(4, "big")
        return self._message_rng("query-a", tag).uniform_matrix(self.params.k, self.params.n)

    def _commit_blinding(self):
        return self._message_rng("b-hat", b"").uniform_matrix(self.params.k, self.params.n)

    def _respond(self, a):
        image = expected_response(self.params, self.key, a, b=self._state["b_hat"])
        if not self.noisy:
            return image
        noise = self._message_rng("noise", a.tobytes()).bernoulli_bits(
            self.params.d, self.params.eps
        )
        return image ^ noise


class RandomActiveForger(ActiveForger):
    """No-information baseline: responses are message-tied uniform bits."""

    def _on_blinding(self, b):
        return self._message_rng("query-a", b.tobytes()).uniform_matrix(
            self.params.k, self.params.n
        )

    def _commit_blinding(self):
        return self._message_rng("b-hat", b"").uniform_matrix(self.params.k, self.params.n)

    def _respond(self, a):
        return self._message_rng("z-hat", a.tobytes()).uniform_bits(self.params.d)


class ExtractingActiveForger(ActiveForger):
    """Forger that must *earn* its challenge-phase success from the query
    phase: it holds s1 as side information but learns s2 from the
    interaction.

    Strategy: send one fixed challenge matrix A* every query round, strip
    the known f(s1 . B) term, majority-vote the q noisy copies of
    f(s2 . A*) and brute-force s2 from the denoised image (k <= 16).  Fed
    genuine transcripts it recovers s2 and forges like an honest prover;
    fed garbage its estimate is uncorrelated with the real s2 and the
    forgeries miss.  This is the success/failure contrast the rewinding
    wrapper turns into a distinguisher.
    """

    def __init__(self, params: ProtocolParams, s1, q: int = 5, noisy: bool = True):
        super().__init__(params, q)
        if params.k > 16:
            raise ParameterError("extraction brute-forces 2^k candidates; need k <= 16")
        self.s1 = as_bits(s1)
        if self.s1.shape[0] != params.k:
            raise DimensionError("s1 length %d != k=%d" % (self.s1.shape[0], params.k))
        self.noisy = noisy

    def reset(self, seed: int) -> None:
        super().reset(seed)
        self._state["a_star"] = self._message_rng("a-star", b"").uniform_matrix(
            self.params.k, self.params.n
        )
        self._state["votes"] = np.zeros(self.params.d, dtype=np.int64)
        self._state["rounds_seen"] = 0
        self._state["s2_hat"] = None

    def _on_blinding(self, b):
        self._state["b_bar"] = b
        return self._state["a_star"]

    def _on_response(self, z):
        known = apply_f(self.params.spec, mat_vec_mul(self.s1, self._state["b_bar"]))
        self._state["votes"] += z ^ known
        self._state["rounds_seen"] += 1

    def _commit_blinding(self):
        count = self._state["rounds_seen"]
        if count == 0:
            raise ParameterError("extraction needs at least one query round")
        image = (2 * self._state["votes"] > count).astype(np.uint8)
        candidates = all_bit_vectors(self.params.k)
        table = apply_f_batch(self.params.spec, (candidates @ self._state["a_star"]) & 1)
        self._state["s2_hat"] = candidates[
            int(np.argmin(hamming_rows(table, image)))
        ].copy()
        return self._message_rng("b-hat", b"").uniform_matrix(self.params.k, self.params.n)

    def snapshot(self) -> dict:
        state = dict(self._state)
        state["votes"] = self._state["votes"].copy()
        return state

    def _respond(self, a):
        key = SecretKey(s1=self.s1, s2=self._state["s2_hat"])
        image = expected_response(self.params, key, a, b=self._state["b_hat"])
        if not self.noisy:
            return image
        noise = self._message_rng("noise", a.tobytes()).bernoulli_bits(
            self.params.d, self.params.eps
        )
        return image ^ noise


def rewinding_distinguisher_interval(params: ProtocolParams):
    """Admissible open interval for the rewinding accept rate:
    ((1 - (1 - 2 eps')^2) / 2, 1/2) — the XOR of two tolerable error
    vectors must stay distinguishable from a fair coin."""
    epsp = params.eps_prime
    return (1 - (1 - 2 * epsp) ** 2) / 2, Fraction(1, 2)


def active_forger_to_distinguisher(
    zp: ActiveForger, q: int, epsilon_1=None, *, seed: int = 0, s2=None
) -> DistinguisherOracle:
    """Distinguisher from an active forger via rewinding.

    Input strings are read as single-secret transcripts (B, z_bar).  The
    wrapper samples its own s2, simulates the blinded prover toward zp in
    the query phase (z = z_bar + f(s2 . A)), then rewinds zp's challenge
    phase from one blinding commitment: the unknown f(s1 . B_hat) term is
    identical in both forged responses, so it cancels from their XOR, which
    is compared against f(s2 A1) + f(s2 A2) at threshold floor(eps1 * D).
    """
    params = zp.params
    if not params.blinded:
        raise ParameterError("rewinding wraps a forger for the blinded protocol")
    for method in ("snapshot", "restore"):
        if not callable(getattr(zp, method, None)):
            raise ParameterError("active forger lacks %s(): rewinding unsupported" % method)
    low, high = rewinding_distinguisher_interval(params)
    if epsilon_1 is None:
        epsilon_1 = (low + high) / 2
    epsilon_1 = Fraction(epsilon_1)
    if not low < epsilon_1 < high:
        raise ParameterError(
            "threshold rate %s outside the open interval (%s, %s)" % (epsilon_1, low, high)
        )
    u_1 = int(epsilon_1 * params.d)
    if s2 is None:
        s2 = RandomSource(seed).derive("rewind-s2").uniform_bits(params.k)
    else:
        s2 = as_bits(s2)

    def func(strings):
        zp.reset(seed)
        for row in strings:
            b_bar, z_bar = unpack_transcript(row, params)
            a = zp.on_blinding(b_bar)
            zp.on_response(z_bar ^ apply_f(params.spec, mat_vec_mul(s2, a)))
        zp.commit_blinding()
        digest = hashlib.blake2b(
            int(seed).to_bytes(8, "big") + strings.tobytes(), digest_size=8
        ).digest()
        challenge_rng = RandomSource(int.from_bytes(digest, "big"))
        a1 = challenge_rng.uniform_matrix(params.k, params.n)
        a2 = challenge_rng.uniform_matrix(params.k, params.n)
        state = zp.snapshot()
        z1 = zp.respond(a1)
        zp.restore(state)
        z2 = zp.respond(a2)
        target = apply_f(params.spec, mat_vec_mul(s2, a1)) ^ apply_f(
            params.spec, mat_vec_mul(s2, a2)
        )
        return int(hamming(z1 ^ z2, target) <= u_1)

    declared = 1.0 - float(false_accept(params.d, u_1).exact)
    return DistinguisherOracle(
        func=func, q=q, advantage=declared, seed=seed, params=params
    )


# ---------------------------------------------------------------------------
# algorithm X: distinguisher -> key extractor
# ---------------------------------------------------------------------------

BATCH_SCHEDULE_CONSTANT = 24
"""Calibrated multiplier for the default batch count N = ceil(C * log2(2k) / delta^2).

The asymptotic schedule only fixes N up to a constant; this one is tuned so
the ideal-oracle and perfect-forger drivers pass their acceptance rates with
margin, and is exposed for callers that want the knob."""


def default_batch_count(k: int, delta: float) -> int:
    if not 0 < delta <= 1:
        raise ParameterError("advantage delta must be in (0, 1]")
    return int(math.ceil(BATCH_SCHEDULE_CONSTANT * math.log2(2 * k) / delta**2))


def algorithm_x(
    y_oracle: DistinguisherOracle,
    transcript_source,
    k: int,
    q: int | None = None,
    n_batches: int | None = None,
    delta: float | None = None,
    *,
    params: ProtocolParams | None = None,
    rng: RandomSource | None = None,
) -> np.ndarray:
    """Extract the key from a transcript distinguisher, bit by bit.

    Estimates the distinguisher's accept rate p on uniform batches, then for
    each row i the rate p_i on honest batches with row i re-randomized.
    When s_i = 1 the hybrid is exactly uniform, so p_i stays within delta/4
    of p and the bit is set to 1; when s_i = 0 the hybrid is exactly honest
    and the distinguisher's advantage pushes p_i away, so the bit is 0.
    """
    params = y_oracle.params if params is None else params
    if k != params.k:
        raise ParameterError("k=%d disagrees with params.k=%d" % (k, params.k))
    q = y_oracle.q if q is None else q
    if q != y_oracle.q:
        raise ParameterError("q=%d disagrees with the oracle's batch size %d" % (q, y_oracle.q))
    delta = y_oracle.advantage if delta is None else float(delta)
    if n_batches is None:
        n_batches = default_batch_count(k, min(delta, 1.0))
    if n_batches < 1:
        raise ParameterError("need at least one batch")
    rng = RandomSource(y_oracle.seed).derive("algorithm-x") if rng is None else rng

    uniform = uniform_string_source(params, rng)
    p_base = sum(y_oracle(uniform(q)) for _ in range(n_batches)) / n_batches

    split = params.k * params.n
    recovered = np.zeros(k, dtype=np.uint8)
    for i in range(1, k + 1):
        hits = 0
        for _ in range(n_batches):
            batch = np.array(transcript_source(q), dtype=np.uint8, copy=True)
            if batch.ndim != 2 or batch.shape != (q, split + params.d):
                raise DimensionError("source must yield %d strings of %d bits" % (q, split + params.d))
            row_lo = (i - 1) * params.n
            batch[:, row_lo : row_lo + params.n] ^= rng.uniform_matrix(q, params.n)
            hits += y_oracle(batch)
        p_i = hits / n_batches
        recovered[i - 1] = 0 if abs(p_i - p_base) >= delta / 4 else 1
    return recovered
