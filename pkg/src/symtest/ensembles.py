"""Unitary ensembles: seeded samplers, exact quadrature and Monte Carlo means.

Three ensembles are supported: Haar measure on U(d), Haar measure on the
orthogonal group O(d) (time-reversal symmetric unitaries) and the uniform
measure on diagonal unitaries. SO(d) is available as a variant of the
orthogonal ensemble.

For d = 2 every ensemble has an exact quadrature rule: a finite weighted
node set reproducing the ensemble average of every polynomial in the
entries of U and conj(U) up to a chosen total degree.
"""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import UnsupportedError, ValidationError
from .fileio import cmat_b64, cmat_from_b64

HAAR_UNITARY = "haar_unitary"
HAAR_ORTHOGONAL = "haar_orthogonal"
HAAR_SPECIAL_ORTHOGONAL = "haar_special_orthogonal"
HAAR_DIAGONAL = "haar_diagonal"
KINDS = (HAAR_UNITARY, HAAR_ORTHOGONAL, HAAR_SPECIAL_ORTHOGONAL, HAAR_DIAGONAL)

_ALIASES = {
    "unitary": HAAR_UNITARY,
    "haar": HAAR_UNITARY,
    "u": HAAR_UNITARY,
    "orthogonal": HAAR_ORTHOGONAL,
    "o": HAAR_ORTHOGONAL,
    "t": HAAR_ORTHOGONAL,
    "special_orthogonal": HAAR_SPECIAL_ORTHOGONAL,
    "special-orthogonal": HAAR_SPECIAL_ORTHOGONAL,
    "so": HAAR_SPECIAL_ORTHOGONAL,
    "diagonal": HAAR_DIAGONAL,
    "d": HAAR_DIAGONAL,
    "z": HAAR_DIAGONAL,
}

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)

DEFAULT_SEED = 0xC0FFEE


@dataclass(frozen=True)
class EnsembleSpec:
    kind: str
    dim: int = 2

    def __post_init__(self):
        kind = _ALIASES.get(str(self.kind).lower(), str(self.kind).lower())
        if kind not in KINDS:
            raise ValidationError("unknown ensemble %r" % (self.kind,))
        if int(self.dim) < 2:
            raise ValidationError("ensemble dimension must be at least 2")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "dim", int(self.dim))

    @property
    def is_real(self):
        return self.kind in (HAAR_ORTHOGONAL, HAAR_SPECIAL_ORTHOGONAL)

    def to_json(self):
        return {"kind": self.kind, "dim": self.dim}

    @classmethod
    def from_json(cls, obj):
        return cls(obj["kind"], obj.get("dim", 2))


def haar_unitary(d=2):
    return EnsembleSpec(HAAR_UNITARY, d)


def haar_orthogonal(d=2):
    return EnsembleSpec(HAAR_ORTHOGONAL, d)


def haar_diagonal(d=2):
    return EnsembleSpec(HAAR_DIAGONAL, d)


@dataclass(frozen=True)
class SeededSource:
    """Counter-based random source: sample ``index`` owns its own Philox stream.

    The stream for an index is addressed directly through the Philox counter,
    so draws do not depend on call order or on how work is split across
    threads.
    """

    seed: int = DEFAULT_SEED
    _key: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        seed = int(self.seed)
        if not 0 <= seed < 2 ** 64:
            raise ValidationError("seed must fit in 64 bits")
        object.__setattr__(self, "seed", seed)
        key = np.random.SeedSequence(seed).generate_state(2, np.uint64)
        object.__setattr__(self, "_key", key)

    def generator(self, index):
        index = int(index)
        if index < 0:
            raise ValidationError("sample index must be non-negative")
        bitgen = np.random.Philox(key=self._key, counter=[0, 0, 0, index])
        return np.random.Generator(bitgen)

    def child(self, tag):
        """Independent source derived from this one, e.g. for a sub-task."""
        state = np.random.SeedSequence(self.seed, spawn_key=(int(tag),)).generate_state(1, np.uint64)
        return SeededSource(int(state[0]))


def _draw(kind, gen, d):
    if kind == HAAR_DIAGONAL:
        return np.diag(np.exp(1j * gen.uniform(0.0, 2 * np.pi, size=d)))
    if kind == HAAR_UNITARY:
        z = (gen.standard_normal((d, d)) + 1j * gen.standard_normal((d, d))) / np.sqrt(2)
    else:
        z = gen.standard_normal((d, d))
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r)
    q = q * (diag / np.abs(diag))
    if kind == HAAR_SPECIAL_ORTHOGONAL and np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q.astype(complex)


def sample(ensemble, src, index):
    """One unitary from ``ensemble``, fully determined by ``(src.seed, index)``."""
    return _draw(ensemble.kind, src.generator(index), ensemble.dim)


def sample_batch(ensemble, src, start, count):
    """Stack of samples for indices ``start .. start+count-1``."""
    out = np.empty((count, ensemble.dim, ensemble.dim), dtype=complex)
    for i in range(count):
        out[i] = _draw(ensemble.kind, src.generator(start + i), ensemble.dim)
    return out


def uniform_s3(src, index):
    """Uniform point on the unit 3-sphere."""
    p = src.generator(index).standard_normal(4)
    return p / np.linalg.norm(p)


def su2_from_point(p):
    """``p0 I + i (p1 X + p2 Y + p3 Z)`` for a point on the unit 3-sphere."""
    p = np.asarray(p, dtype=float).ravel()
    if p.size != 4:
        raise ValidationError("expected 4 coordinates")
    if abs(float(p @ p) - 1.0) > 1e-12:
        raise ValidationError("point is not on the unit 3-sphere")
    return p[0] * np.eye(2) + 1j * (p[1] * PAULI_X + p[2] * PAULI_Y + p[3] * PAULI_Z)


def su2_from_points(p):
    """Vectorized :func:`su2_from_point` without validation; ``p`` is ``(N, 4)``."""
    p = np.asarray(p, dtype=float)
    out = np.empty((p.shape[0], 2, 2), dtype=complex)
    out[:, 0, 0] = p[:, 0] + 1j * p[:, 3]
    out[:, 0, 1] = p[:, 2] + 1j * p[:, 1]
    out[:, 1, 0] = -p[:, 2] + 1j * p[:, 1]
    out[:, 1, 1] = p[:, 0] - 1j * p[:, 3]
    return out


def rotation(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]], dtype=complex)


def reflection(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, s], [s, -c]], dtype=complex)


def _double_factorial(n):
    return math.prod(range(n, 0, -2)) if n > 0 else 1


def s3_monomial_moment(k0, k1, k2, k3):
    """Exact ``E[p0^(2k0) p1^(2k1) p2^(2k2) p3^(2k3)]`` over the uniform 3-sphere."""
    ks = (int(k0), int(k1), int(k2), int(k3))
    if min(ks) < 0:
        raise ValidationError("exponents must be non-negative")
    num = math.prod(_double_factorial(2 * k - 1) for k in ks)
    den = math.prod(4 + 2 * j for j in range(sum(ks)))
    return Fraction(num, den)


def s3_moment(e0, e1, e2, e3):
    """``E[p0^e0 p1^e1 p2^e2 p3^e3]``; zero whenever an exponent is odd."""
    es = (e0, e1, e2, e3)
    if any(e % 2 for e in es):
        return Fraction(0)
    return s3_monomial_moment(*(e // 2 for e in es))


@dataclass
class QuadratureScheme:
    """Weighted unitaries whose weighted sum reproduces ensemble averages."""

    unitaries: np.ndarray
    weights: np.ndarray
    degree: int
    ensemble: EnsembleSpec

    def __len__(self):
        return len(self.weights)

    def expect(self, f):
        """Weighted sum of ``f(U)`` over the nodes."""
        vals = [f(u) for u in self.unitaries]
        return sum(w * v for w, v in zip(self.weights, vals))

    def to_json(self):
        return {
            "ensemble": self.ensemble.to_json(),
            "degree": self.degree,
            "nodes": [
                {"weight": float(w), "unitary": cmat_b64(u)}
                for u, w in zip(self.unitaries, self.weights)
            ],
        }

    def dumps(self):
        return json.dumps(self.to_json())

    @classmethod
    def from_json(cls, obj):
        nodes = obj["nodes"]
        return cls(
            unitaries=np.array([cmat_from_b64(n["unitary"]) for n in nodes]),
            weights=np.array([float(n["weight"]) for n in nodes]),
            degree=int(obj["degree"]),
            ensemble=EnsembleSpec.from_json(obj["ensemble"]),
        )


def _fourier_nodes(n):
    return 2 * np.pi * np.arange(n) / n


def exact_quadrature(ensemble, degree, global_phase=False):
    """Quadrature exact for all polynomials of total degree <= ``degree`` in U, conj(U).

    Only d = 2 is supported. For Haar unitaries the nodes live on SU(2),
    parameterized by Hopf coordinates on the 3-sphere,

        p = (cos t cos a, cos t sin a, sin t cos b, sin t sin b),

    with a, b on equally spaced Fourier grids of ``degree + 1`` points and
    u = sin^2 t on Gauss-Legendre points in [0, 1] (the uniform measure on
    the sphere is uniform in u). SU(2) averages equal U(2) averages for
    every polynomial with as many U factors as conj(U) factors, which covers
    all performance operators and twirls. ``global_phase=True`` adds a
    U(1) phase grid so that unbalanced monomials are exact too.
    """
    if ensemble.dim != 2:
        raise UnsupportedError("exact quadrature is implemented for d = 2 only; use Monte Carlo")
    degree = int(degree)
    if degree < 0:
        raise ValidationError("degree must be non-negative")
    n = degree + 1
    grid = _fourier_nodes(n)
    kind = ensemble.kind
    if kind == HAAR_UNITARY:
        n_gl = (degree + 3) // 2
        x, w = np.polynomial.legendre.leggauss(n_gl)
        u = (x + 1) / 2
        w = w / 2
        a, b, uu = np.meshgrid(grid, grid, u, indexing="ij")
        _, _, ww = np.meshgrid(grid, grid, w, indexing="ij")
        ct, st = np.sqrt(1 - uu.ravel()), np.sqrt(uu.ravel())
        a, b = a.ravel(), b.ravel()
        pts = np.stack([ct * np.cos(a), ct * np.sin(a), st * np.cos(b), st * np.sin(b)], axis=1)
        us = su2_from_points(pts)
        weights = ww.ravel() / n ** 2
        if global_phase:
            phases = np.exp(1j * grid)
            us = (phases[:, None, None, None] * us[None]).reshape(-1, 2, 2)
            weights = np.tile(weights, n) / n
    elif kind in (HAAR_ORTHOGONAL, HAAR_SPECIAL_ORTHOGONAL):
        rots = [rotation(t) for t in grid]
        if kind == HAAR_ORTHOGONAL:
            us = np.array(rots + [reflection(t) for t in grid])
            weights = np.full(2 * n, 1.0 / (2 * n))
        else:
            us = np.array(rots)
            weights = np.full(n, 1.0 / n)
    else:
        p0, p1 = np.meshgrid(grid, grid, indexing="ij")
        us = np.zeros((n * n, 2, 2), dtype=complex)
        us[:, 0, 0] = np.exp(1j * p0.ravel())
        us[:, 1, 1] = np.exp(1j * p1.ravel())
        weights = np.full(n * n, 1.0 / (n * n))
    return QuadratureScheme(np.ascontiguousarray(us), np.asarray(weights, dtype=float), degree, ensemble)


@dataclass
class MonteCarloEstimate:
    """Sample mean with its standard error; complex entries use ``E|x - mean|^2``."""

    mean: np.ndarray
    stderr: np.ndarray
    samples: int
    seed: int

    def within(self, exact, nsigma=3.0, floor=1e-12):
        """Elementwise ``|mean - exact| <= nsigma * stderr + floor``."""
        return np.abs(self.mean - exact) <= nsigma * self.stderr + floor


def max_threads():
    try:
        return max(1, int(os.environ.get("SYMTEST_THREADS", "0")) or os.cpu_count() or 1)
    except ValueError:
        return 1


def _tree_sum(parts):
    while len(parts) > 1:
        nxt = [parts[i] + parts[i + 1] for i in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            nxt.append(parts[-1])
        parts = nxt
    return parts[0]


def monte_carlo_sums(ensemble, chunk_sums, samples, src, chunk=2000, start=0):
    """Run ``chunk_sums`` over fixed sample chunks and add the results.

    ``chunk_sums`` maps a stack ``(n, d, d)`` of unitaries to a tuple of
    arrays. Chunk boundaries depend on ``chunk`` alone and partial results
    are combined in a fixed pairwise tree, so totals are bit-identical for
    any number of worker threads.
    """
    samples = int(samples)
    bounds = [(s, min(chunk, samples - s)) for s in range(0, samples, chunk)]

    def work(b):
        return chunk_sums(sample_batch(ensemble, src, start + b[0], b[1]))

    threads = min(max_threads(), len(bounds))
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(work, bounds))
    else:
        parts = [work(b) for b in bounds]
    return tuple(_tree_sum([p[i] for p in parts]) for i in range(len(parts[0])))


def estimate_from_sums(total, total_sq, samples, seed):
    mean = total / samples
    var = np.maximum(total_sq - samples * np.abs(mean) ** 2, 0.0) / (samples - 1)
    return MonteCarloEstimate(mean, np.sqrt(var / samples), samples, seed)


def monte_carlo_mean(ensemble, f, samples, src, chunk=2000, start=0):
    """Estimate ``E f(U)`` from ``samples`` draws.

    ``f`` maps a stack ``(n, d, d)`` of unitaries to an ``(n, ...)`` array.
    """
    if int(samples) < 2:
        raise ValidationError("Monte Carlo needs at least 2 samples")

    def sums(us):
        vals = np.asarray(f(us))
        return vals.sum(axis=0), (np.abs(vals) ** 2).sum(axis=0)

    total, total_sq = monte_carlo_sums(ensemble, sums, samples, src, chunk, start)
    return estimate_from_sums(total, total_sq, int(samples), src.seed)


@lru_cache(maxsize=64)
def cached_quadrature(ensemble, degree):
    """Shared read-only copy of :func:`exact_quadrature`."""
    scheme = exact_quadrature(ensemble, degree)
    scheme.unitaries.setflags(write=False)
    scheme.weights.setflags(write=False)
    return scheme
