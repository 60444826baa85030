"""Ramanujan sums, blocked Ramanujan sums and normalized quadratic Gauss sums.

``e_q(x)`` means ``exp(2 pi i x / q)``.  All phases are reduced modulo ``q`` in
integer arithmetic before exponentiation, so rounding never depends on the
size of the argument.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np

from .errors import CapacityError

SIEVE_BOUND = 10**6
BLOCK_CAP = 10**7
GAUSS_TABLE_CAP = 2**22
CONVENTION = "[Q, 2Q)"


# ---------------------------------------------------------------------------
# sieve tables
# ---------------------------------------------------------------------------

@lru_cache(maxsize=8)
def _sieve(n: int) -> tuple[np.ndarray, np.ndarray]:
    mu = np.ones(n + 1, dtype=np.int64)
    phi = np.arange(n + 1, dtype=np.int64)
    composite = np.zeros(n + 1, dtype=np.bool_)
    mu[0] = 0
    for p in range(2, n + 1):
        if composite[p]:
            continue
        composite[2 * p :: p] = True
        mu[p::p] *= -1
        mu[p * p :: p * p] = 0
        phi[p::p] -= phi[p::p] // p
    mu.flags.writeable = False
    phi.flags.writeable = False
    return mu, phi


def arithmetic_tables(n: int, bound: int = SIEVE_BOUND) -> tuple[np.ndarray, np.ndarray]:
    """Mobius and totient tables covering 0..n (built to the next power of two)."""
    if n > bound:
        raise CapacityError(f"sieve needed up to {n}, bound is {bound}")
    size = 1024
    while size < n:
        size *= 2
    return _sieve(min(size, max(bound, n)))


def mobius(n: int) -> int:
    return int(arithmetic_tables(n)[0][n])


def totient(n: int) -> int:
    return int(arithmetic_tables(n)[1][n])


def divisors(n: int) -> list[int]:
    small, large = [], []
    for t in range(1, math.isqrt(n) + 1):
        if n % t == 0:
            small.append(t)
            if t != n // t:
                large.append(n // t)
    return small + large[::-1]


# ---------------------------------------------------------------------------
# Ramanujan sums
# ---------------------------------------------------------------------------

def ramanujan_sum(q: int, m: int) -> int:
    """c_q(m) = sum over t | gcd(q, m) of t * mu(q / t).

    With gcd(q, 0) = q this gives c_q(0) = phi(q).
    """
    if q < 1:
        raise ValueError("modulus must be >= 1")
    mu = arithmetic_tables(q)[0]
    g = math.gcd(q, m)
    return int(sum(t * int(mu[q // t]) for t in divisors(g)))


@lru_cache(maxsize=4096)
def ramanujan_table(q: int) -> np.ndarray:
    """c_q(r) for r = 0..q-1; c_q is q-periodic and depends only on gcd(r, q)."""
    mu = arithmetic_tables(q)[0]
    by_gcd = {g: sum(t * int(mu[q // t]) for t in divisors(g)) for g in divisors(q)}
    g = np.gcd(np.arange(q), q)
    g[0] = q
    table = np.array([by_gcd[int(v)] for v in g], dtype=np.int64)
    table.flags.writeable = False
    return table


def ramanujan_values(q: int, ms) -> np.ndarray:
    return ramanujan_table(q)[np.mod(np.asarray(ms, dtype=np.int64), q)]


def ramanujan_block(Q: int, m: int) -> int:
    """C_Q(m) = sum of c_q(m) over Q <= q < 2Q."""
    if Q < 1:
        raise ValueError("block base must be >= 1")
    return int(sum(int(ramanujan_table(q)[m % q]) for q in range(Q, 2 * Q)))


def ramanujan_block_values(Q: int, ms) -> np.ndarray:
    ms = np.asarray(ms, dtype=np.int64)
    out = np.zeros(ms.shape, dtype=np.int64)
    for q in range(Q, 2 * Q):
        out += ramanujan_values(q, ms)
    return out


@dataclass(frozen=True, eq=False)
class RamanujanBlock:
    Q: int
    values: np.ndarray  # C_Q(m) for m = 0..len-1
    convention: str = CONVENTION

    def __getitem__(self, m: int) -> int:
        return int(self.values[m])


def ramanujan_block_table(Q: int, M: int) -> RamanujanBlock:
    vals = ramanujan_block_values(Q, np.arange(M + 1))
    vals.flags.writeable = False
    return RamanujanBlock(Q, vals)


@dataclass(frozen=True)
class RamanujanReport:
    Q: int
    k: int
    M: int
    eps: float
    sup_range: int
    sup_abs: int
    sup_argmax: int
    sup_ratio: float
    moment: float
    moment_ratio: float
    trivial_max: int
    trivial_bound: int
    trivial_holds: bool
    block_at_zero: int
    convention: str = CONVENTION

    def to_dict(self) -> dict:
        return asdict(self)


def ramanujan_bound_report(Q: int, k: int, M: int, eps: float, cap: int = BLOCK_CAP) -> RamanujanReport:
    """Empirical check of the sup, k-th moment and trivial Q^2 bounds for C_Q."""
    if Q < 2 or k < 1:
        raise ValueError("need Q >= 2 and k >= 1")
    top = Q**k
    if M < top:
        raise ValueError(f"need M >= Q^k = {top}")
    if M > cap:
        raise CapacityError(f"M = {M} exceeds block cap {cap}")
    vals = np.abs(ramanujan_block_values(Q, np.arange(M + 1)))
    head = vals[1 : top + 1]
    i = int(np.argmax(head))
    scale = Q ** (1 + eps)
    moment = float(np.mean(vals[1:].astype(np.float64) ** k) ** (1.0 / k))
    tmax = int(vals.max())
    return RamanujanReport(
        Q=Q, k=k, M=M, eps=eps,
        sup_range=top,
        sup_abs=int(head[i]),
        sup_argmax=i + 1,
        sup_ratio=float(head[i]) / scale,
        moment=moment,
        moment_ratio=moment / scale,
        trivial_max=tmax,
        trivial_bound=Q * Q,
        trivial_holds=tmax <= Q * Q,
        block_at_zero=int(vals[0]),
    )


# ---------------------------------------------------------------------------
# Gauss sums
# ---------------------------------------------------------------------------

def _roots(q: int) -> np.ndarray:
    t = 2.0 * np.pi * np.arange(q) / q
    return np.cos(t) + 1j * np.sin(t)


@lru_cache(maxsize=1024)
def gauss_factors(a: int, q: int) -> np.ndarray:
    """One-dimensional factors q^-1 sum_{n mod q} e_q(a n^2 + n l), for l = 0..q-1."""
    if math.gcd(a, q) != 1:
        raise ValueError(f"gcd({a}, {q}) != 1")
    if q * q > GAUSS_TABLE_CAP:
        raise CapacityError(f"modulus {q} too large for a dense factor table")
    n = np.arange(q, dtype=np.int64)
    phase = (a * n[:, None] ** 2 + n[:, None] * n[None, :]) % q
    out = _roots(q)[phase].sum(axis=0) / q
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class GaussSumValue:
    a: int
    q: int
    ell: tuple[int, ...]
    value: complex

    def __abs__(self) -> float:
        return abs(self.value)


def gauss_sum(d: int, a: int, q: int, ell) -> GaussSumValue:
    """G(a/q, ell) = q^-d sum_{n in Z_q^d} e_q(a|n|^2 + n.ell), via the coordinate product."""
    ell = tuple(int(v) % q for v in ell)
    if len(ell) != d:
        raise ValueError(f"ell has length {len(ell)}, expected {d}")
    f = gauss_factors(a, q)
    value = complex(np.prod([f[v] for v in ell])) if d else 1 + 0j
    return GaussSumValue(a, q, ell, value)


def gauss_values(a: int, q: int, ells: np.ndarray) -> np.ndarray:
    """Vectorized G(a/q, ell) for an integer array of shape (..., d)."""
    f = gauss_factors(a, q)
    return np.prod(f[np.mod(ells, q)], axis=-1)


def gauss_table(d: int, a: int, q: int, cap: int = GAUSS_TABLE_CAP) -> np.ndarray:
    """Array of shape (q,)*d holding G(a/q, ell) at index ell."""
    if q**d > cap:
        raise CapacityError(f"q^d = {q**d} exceeds table cap {cap}")
    f = gauss_factors(a, q)
    out = np.ones((), dtype=np.complex128)
    for _ in range(d):
        out = np.multiply.outer(out, f)
    return out


def verify_gauss_fourier(d: int, a: int, q: int, cap: int = GAUSS_TABLE_CAP) -> float:
    """Max deviation between the inverse transform of ell -> G(a/q, ell) and x -> e_q(a|x|^2).

    Since G(ell) = q^-d sum_x e_q(a|x|^2) e_q(x.ell), the inverse is
    sum_ell G(ell) e_q(-x.ell), which is exactly numpy's forward ``fftn``.
    """
    table = gauss_table(d, a, q, cap)
    recovered = np.fft.fftn(table)
    sq = np.zeros((q,) * d, dtype=np.int64)
    for axis in range(d):
        shape = [1] * d
        shape[axis] = q
        sq = sq + (np.arange(q, dtype=np.int64) ** 2).reshape(shape)
    target = _roots(q)[(a * sq) % q]
    return float(np.max(np.abs(recovered - target)))
