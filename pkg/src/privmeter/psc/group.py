"""Rerandomizable encryption over a prime-order group.

The group is the order-q subgroup of quadratic residues mod a safe
prime p = 2q+1. The default prime is 31 bits wide: small enough that
residue products fit in uint64 (which is what makes the vectorized
kernels possible), large enough that random non-identity plaintexts
never collide with the identity in practice. This is a desk-scale
stand-in for a production group, not a security parameter choice.

Plaintexts are group elements; the protocol only ever distinguishes
the identity ("zero") from everything else, so a fresh non-zero
plaintext is g**e for a random non-zero exponent e.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from privmeter._kernels import mul_mod, pow_mod
from privmeter.privcount import is_probable_prime

#: largest safe prime below 2**31
P_DESK = 2147483579
#: tiny safe prime (p=2q+1 with q=11) for statistical tests with escrow
P_TINY = 23


class Group:
    """Quadratic-residue subgroup of Z_p*, p = 2q+1 safe prime."""

    def __init__(self, p: int):
        q = (p - 1) // 2
        if not (is_probable_prime(p) and is_probable_prime(q)):
            raise ValueError(f"{p} is not a safe prime")
        if p >= 1 << 32:
            raise ValueError("modulus too wide for the uint64 kernels")
        self.p = p
        self.q = q
        self.g = 4 % p  # 2**2 is always a quadratic residue
        self.identity = np.uint64(1)

    def mul(self, a, b):
        return mul_mod(a, b, self.p)

    def pow(self, base, exp):
        return pow_mod(base, exp, self.p)

    def inv_exp(self, exp):
        """Exponent negation: x -> q - x (group elements have order q)."""
        e = np.asarray(exp, dtype=np.uint64)
        return (np.uint64(self.q) - e % np.uint64(self.q)) % np.uint64(self.q)

    def random_exponents(self, rng: np.random.Generator, size) -> np.ndarray:
        return rng.integers(0, self.q, size=size, dtype=np.uint64)

    def random_nonzero_exponents(self, rng: np.random.Generator, size) -> np.ndarray:
        return rng.integers(1, self.q, size=size, dtype=np.uint64)

    def random_elements(self, rng: np.random.Generator, size) -> np.ndarray:
        return self.pow(np.uint64(self.g), self.random_exponents(rng, size))

    def is_element(self, x) -> np.ndarray:
        """Membership test: x in [1, p) and x**q == 1."""
        x = np.asarray(x, dtype=np.uint64)
        in_range = (x >= 1) & (x < self.p)
        ok = np.zeros(x.shape, dtype=bool)
        if in_range.any():
            ok[in_range] = self.pow(x[in_range], np.uint64(self.q)) == 1
        return ok


GROUP_DESK = Group(P_DESK)
GROUP_TINY = Group(P_TINY)


@dataclass(frozen=True)
class KeyShare:
    """One computation party's secret exponent and public contribution."""

    secret: int
    public: int


@dataclass(frozen=True)
class KeyMaterial:
    """Combined public key plus the per-party shares.

    With escrow enabled the combined secret is retained so tests can
    open ciphertexts directly; release configurations must keep it off.
    """

    group: Group
    shares: tuple
    public_key: int
    escrow: bool = False
    escrow_secret: int = None

    @classmethod
    def generate(cls, group: Group, n_parties: int, rng: np.random.Generator,
                 escrow: bool = False) -> "KeyMaterial":
        if n_parties < 1:
            raise ValueError("need at least one computation party")
        shares = []
        pk = np.uint64(1)
        total = 0
        for _ in range(n_parties):
            x = int(group.random_nonzero_exponents(rng, ()))
            h = int(group.pow(np.uint64(group.g), np.uint64(x)))
            shares.append(KeyShare(secret=x, public=h))
            pk = group.mul(pk, np.uint64(h))
            total = (total + x) % group.q
        return cls(group=group, shares=tuple(shares), public_key=int(pk),
                   escrow=escrow, escrow_secret=total if escrow else None)


class Cipher:
    """ElGamal-style operations, vectorized over bin arrays."""

    def __init__(self, group: Group, public_key: int):
        self.group = group
        self.pk = np.uint64(public_key)

    def encrypt(self, plaintexts, rng: np.random.Generator):
        """Fresh encryptions (g**r, m * pk**r); plaintexts broadcast."""
        g = self.group
        m = np.asarray(plaintexts, dtype=np.uint64)
        r = g.random_exponents(rng, m.shape)
        c1 = g.pow(np.uint64(g.g), r)
        c2 = g.mul(m, g.pow(self.pk, r))
        return c1, c2

    def encrypt_zeros(self, n: int, rng: np.random.Generator):
        return self.encrypt(np.ones(n, dtype=np.uint64), rng)

    def rerandomize(self, c1, c2, rng: np.random.Generator):
        """Multiply by fresh encryptions of the identity."""
        g = self.group
        s = g.random_exponents(rng, np.asarray(c1).shape)
        return g.mul(c1, g.pow(np.uint64(g.g), s)), g.mul(c2, g.pow(self.pk, s))

    def partial_decrypt(self, c1, c2, secret: int):
        """Strip one share: c2 * c1**(-x). c1 passes through unchanged."""
        g = self.group
        neg = g.inv_exp(np.uint64(secret))
        return c1, g.mul(c2, g.pow(c1, neg))

    def open_with(self, c1, c2, combined_secret: int) -> np.ndarray:
        """Escrow decryption to plaintext elements."""
        _, m = self.partial_decrypt(c1, c2, combined_secret)
        return m
