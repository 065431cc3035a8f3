"""Private set-union cardinality over encrypted bin vectors.

Each data collector hashes its items into a b-bin vector of
ciphertexts, occupied bins holding random non-zero plaintexts and the
rest zeros (encryptions of the group identity). The per-DC vectors are
combined bin-wise by ciphertext multiplication, so a combined bin is
non-zero exactly when any DC occupied it: that is what makes the count
a set union rather than a sum. Computation parties then append
coin-flip noise bins, each applies a secret shuffle with
rerandomization, and finally they strip their key shares in sequence.
The published result is the raw count of non-zero plaintexts; turning
that into a cardinality estimate is the inference module's job.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from privmeter.privacy import gaussian_sigma
from privmeter.psc.group import GROUP_DESK, Cipher, Group, KeyMaterial

B_DEFAULT = 2 ** 18


def hash_to_bin(item: bytes, key: bytes, b: int) -> int:
    """Keyed hash into [0, b); b must be a power of two."""
    digest = hashlib.blake2s(item, key=key[:32]).digest()
    return int.from_bytes(digest[:8], "big") & (b - 1)


def hash_to_bins(items, key: bytes, b: int) -> np.ndarray:
    out = np.fromiter((hash_to_bin(i, key, b) for i in items), dtype=np.int64,
                      count=len(items))
    return out


def encode_item(value) -> bytes:
    """Canonical byte encoding per item type.

    Integers (client IPs, AS numbers) and strings (countries, SLDs,
    onion addresses) get distinct prefixes so the two namespaces cannot
    collide; bytes pass through untouched.
    """
    if isinstance(value, bytes):
        return value
    if isinstance(value, (int, np.integer)):
        return b"i" + int(value).to_bytes(8, "big")
    if isinstance(value, str):
        return b"s" + value.lower().encode()
    raise TypeError(f"cannot encode {type(value).__name__} as a set item")


def noise_bins_required(epsilon: float, delta: float, sensitivity: float) -> int:
    """Total noise bins whose Binomial(n, 1/2) variance n/4 covers the
    Gaussian calibration sigma**2 for the same (epsilon, delta)."""
    sigma = gaussian_sigma(sensitivity, epsilon, delta)
    return int(math.ceil(4.0 * sigma * sigma))


@dataclass(frozen=True)
class NoiseBinParams:
    """Per-CP noise bin count; each bin is non-zero with probability 1/2."""

    n_noise: int

    def __post_init__(self):
        if self.n_noise < 0:
            raise ValueError("n_noise must be >= 0")

    @classmethod
    def from_privacy(cls, epsilon: float, delta: float, sensitivity: float,
                     n_parties: int) -> "NoiseBinParams":
        if n_parties < 1:
            raise ValueError("need at least one noise-adding party")
        need = noise_bins_required(epsilon, delta, sensitivity)
        return cls(n_noise=int(math.ceil(need / n_parties)))


class BinVector:
    """One DC's encrypted presence vector."""

    def __init__(self, b: int, hash_key: bytes, cipher: Cipher,
                 rng: np.random.Generator):
        if b < 2 or b & (b - 1):
            raise ValueError(f"bin count must be a power of two >= 2, got {b}")
        self.b = b
        self.hash_key = hash_key
        self.cipher = cipher
        self.rng = rng
        self.c1, self.c2 = cipher.encrypt_zeros(b, rng)

    def observe_item(self, item) -> None:
        self.observe_items([item])

    def observe_items(self, items) -> None:
        """Replace each bin H(item) with an encryption of a fresh random
        non-zero plaintext. Re-observing an item rewrites the same bin,
        so the occupied-bin set is unchanged."""
        if not len(items):
            return
        idx = np.unique(hash_to_bins([encode_item(i) for i in items],
                                     self.hash_key, self.b))
        g = self.cipher.group
        m = g.pow(np.uint64(g.g), g.random_nonzero_exponents(self.rng, idx.size))
        c1, c2 = self.cipher.encrypt(m, self.rng)
        self.c1[idx] = c1
        self.c2[idx] = c2

    def occupied_bins(self, items) -> int:
        """Occupancy oracle: distinct bin indices this vector's hash key
        assigns to the given items. Test plumbing, no ciphertext access."""
        enc = {encode_item(i) for i in items}
        if not enc:
            return 0
        return int(np.unique(hash_to_bins(sorted(enc), self.hash_key, self.b)).size)


def dc_observe_item(vector: BinVector, item) -> BinVector:
    vector.observe_item(item)
    return vector


@dataclass
class Matrix:
    """Bin rows flowing through the CP pipeline: the combined DC vector
    plus any appended noise rows."""

    c1: np.ndarray
    c2: np.ndarray
    b: int
    n_noise_total: int = 0

    @classmethod
    def from_vectors(cls, vectors) -> "Matrix":
        """Bin-wise product of the DC vectors. The product plaintext is
        the identity only when every factor is (up to a 1/q fluke), so
        occupancy of the result is occupancy of the union."""
        vectors = list(vectors)
        if not vectors:
            raise ValueError("need at least one DC vector")
        bs = {v.b for v in vectors}
        if len(bs) != 1:
            raise ValueError(f"DC vectors disagree on bin count: {sorted(bs)}")
        g = vectors[0].cipher.group
        c1 = vectors[0].c1.copy()
        c2 = vectors[0].c2.copy()
        for v in vectors[1:]:
            c1 = g.mul(c1, v.c1)
            c2 = g.mul(c2, v.c2)
        return cls(c1=c1, c2=c2, b=bs.pop())

    def __len__(self):
        return int(self.c1.size)


def cp_add_noise(matrix: Matrix, params: NoiseBinParams, cipher: Cipher,
                 rng: np.random.Generator) -> Matrix:
    """Append one CP's noise bins, each non-zero with probability 1/2.

    The appended count is recorded in the matrix so the tally can
    subtract the n_noise_total/2 mean later.
    """
    n = params.n_noise
    if n == 0:
        return matrix
    g = cipher.group
    flips = rng.random(n) < 0.5
    plain = np.ones(n, dtype=np.uint64)
    if flips.any():
        plain[flips] = g.pow(np.uint64(g.g),
                             g.random_nonzero_exponents(rng, int(flips.sum())))
    c1, c2 = cipher.encrypt(plain, rng)
    return Matrix(c1=np.concatenate([matrix.c1, c1]),
                  c2=np.concatenate([matrix.c2, c2]),
                  b=matrix.b, n_noise_total=matrix.n_noise_total + n)


def cp_shuffle_rerandomize(matrix: Matrix, cipher: Cipher,
                           rng: np.random.Generator) -> Matrix:
    """Secret permutation plus fresh encryption randomness on every row."""
    ok = cipher.group.is_element(matrix.c1) & cipher.group.is_element(matrix.c2)
    if not ok.all():
        raise ValueError("malformed ciphertext in matrix")
    perm = rng.permutation(len(matrix))
    c1, c2 = cipher.rerandomize(matrix.c1[perm], matrix.c2[perm], rng)
    return Matrix(c1=c1, c2=c2, b=matrix.b, n_noise_total=matrix.n_noise_total)


def joint_decrypt_count(matrix: Matrix, keys: KeyMaterial) -> int:
    """Sequentially strip every CP share, then count non-zero plaintexts."""
    if not keys.shares or any(s is None for s in keys.shares):
        raise ValueError("missing key share")
    cipher = Cipher(keys.group, keys.public_key)
    c1, c2 = matrix.c1, matrix.c2
    for share in keys.shares:
        c1, c2 = cipher.partial_decrypt(c1, c2, share.secret)
    return int((c2 != keys.group.identity).sum())


@dataclass
class PSCRoundResult:
    """Raw published output of one round plus escrow-only oracle fields."""

    raw_count: int
    b: int
    n_noise_total: int
    n_dcs: int
    occupied_truth: int | None = None
    noise_flipped_truth: int | None = None


def run_psc_round(itemsets, b: int = B_DEFAULT, n_cps: int = 3,
                  noise: NoiseBinParams = NoiseBinParams(0), seed: int = 0,
                  group: Group = GROUP_DESK, escrow: bool = False,
                  transcript=None) -> PSCRoundResult:
    """Drive one full round in memory: DC vectors, bin-wise combine, CP
    noise and shuffle passes, joint decryption.

    itemsets is one iterable of items per DC. With escrow enabled the
    result also carries the true occupied-bin count of the union and the
    true flipped-noise count, recomputed outside the ciphertext path.
    """
    root = np.random.SeedSequence(seed)
    s_keys, s_hash, s_dc, s_cp = root.spawn(4)
    keys = KeyMaterial.generate(group, n_cps, np.random.default_rng(s_keys),
                                escrow=escrow)
    cipher = Cipher(group, keys.public_key)
    hash_key = np.random.default_rng(s_hash).bytes(32)

    itemsets = [list(items) for items in itemsets]
    vectors = []
    for items, s in zip(itemsets, s_dc.spawn(max(len(itemsets), 1))):
        v = BinVector(b, hash_key, cipher, np.random.default_rng(s))
        v.observe_items(items)
        vectors.append(v)
    matrix = Matrix.from_vectors(vectors)
    if transcript is not None:
        transcript.record("combined", matrix)

    cp_seeds = s_cp.spawn(2 * n_cps)
    for s in cp_seeds[:n_cps]:
        matrix = cp_add_noise(matrix, noise, cipher, np.random.default_rng(s))
    for s in cp_seeds[n_cps:]:
        matrix = cp_shuffle_rerandomize(matrix, cipher, np.random.default_rng(s))
    if transcript is not None:
        transcript.record("shuffled", matrix)

    raw = joint_decrypt_count(matrix, keys)

    occupied_truth = noise_flipped_truth = None
    if escrow:
        union = set()
        for items in itemsets:
            union.update(encode_item(i) for i in items)
        occupied_truth = (int(np.unique(hash_to_bins(sorted(union), hash_key,
                                                     b)).size)
                          if union else 0)
        # replay the CP coin flips; noise rows precede any shuffling so
        # the flip streams are independent of row order
        noise_flipped_truth = sum(
            int((np.random.default_rng(s).random(noise.n_noise) < 0.5).sum())
            for s in cp_seeds[:n_cps]) if noise.n_noise else 0
    return PSCRoundResult(raw_count=raw, b=b, n_noise_total=matrix.n_noise_total,
                          n_dcs=len(vectors), occupied_truth=occupied_truth,
                          noise_flipped_truth=noise_flipped_truth)
