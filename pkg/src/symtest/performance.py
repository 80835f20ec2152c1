"""Performance operators, moment twirls and overlap moments.

The performance operator of an ensemble for ``m`` queries is

    Omega = E |U^{(x)m}>> <<U^{(x)m}|,

a PSD matrix of dimension ``d**(2m)`` and trace ``d**m``. For any state
psi, ``E |<psi|U^{(x)m}|psi>|^2 = tr[Omega (conj(psi psi^+) (x) psi psi^+)]``;
:func:`overlap_moment` evaluates the left side directly over quadrature
nodes, which never needs Omega itself.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from . import kernels
from .ensembles import (
    HAAR_DIAGONAL,
    HAAR_UNITARY,
    EnsembleSpec,
    SeededSource,
    cached_quadrature,
    estimate_from_sums,
    monte_carlo_mean,
    monte_carlo_sums,
)
from .errors import MemoryGuardError, UnsupportedError, ValidationError
from .fileio import cmat_dumps
from .tensor import check_state, hermitian_eig, is_hermitian, kron

MAX_DENSE_DIM = 4096

QUADRATURE = "quadrature"
CLOSED_FORM = "closed_form"
MONTE_CARLO = "monte_carlo"
OMEGA = "omega"

_NODE_CHUNK = 256


def _method(name):
    name = str(name).lower().replace("-", "_")
    if name not in (QUADRATURE, CLOSED_FORM, MONTE_CARLO, OMEGA):
        raise ValidationError("unknown method %r" % name)
    return name


@dataclass
class PerformanceOperator:
    """Omega for ``m`` queries of ``ensemble``.

    ``factor`` (quadrature builds only) holds rows ``sqrt(w_q) |U_q^{(x)m}>>``
    so that ``matrix = factor.T @ factor.conj()``; it allows exact low-rank
    reductions without forming the dense matrix, which is built on first
    access. ``stderr`` is set for Monte Carlo builds.
    """

    m: int
    ensemble: EnsembleSpec
    method: str
    samples: int | None = None
    seed: int | None = None
    factor: np.ndarray | None = None
    stderr: np.ndarray | None = None
    dense: np.ndarray | None = field(default=None, repr=False)

    @property
    def matrix(self):
        if self.dense is None:
            self.dense = _hermitize(self.factor.T @ self.factor.conj())
        return self.dense

    @property
    def dim(self):
        return self.ensemble.dim ** (2 * self.m)

    @property
    def trace(self):
        if self.dense is None:
            return float(np.sum(np.abs(self.factor) ** 2))
        return float(np.trace(self.dense).real)

    def check(self, trace_tol=1e-9, psd_rtol=1e-9):
        """Raise if Hermiticity, positivity or the trace condition fails."""
        if not is_hermitian(self.matrix):
            raise ValidationError("performance operator is not Hermitian")
        evals = np.linalg.eigvalsh(self.matrix)
        scale = max(abs(evals[-1]), 1.0)
        if evals[0] < -psd_rtol * scale:
            raise ValidationError("performance operator has eigenvalue %.3g < 0" % evals[0])
        expected = self.ensemble.dim ** self.m
        if abs(self.trace - expected) > trace_tol * expected:
            raise ValidationError("trace %.15g differs from %d" % (self.trace, expected))
        return evals

    def header(self):
        return {
            "omega": {
                "m": self.m,
                "ensemble": self.ensemble.kind,
                "dim": self.ensemble.dim,
                "method": self.method,
                "samples": self.samples,
                "seed": self.seed,
            }
        }

    def to_cmat(self):
        return cmat_dumps(self.matrix, hermitian=True, **self.header())


def _guard(d, m):
    if m < 1:
        raise ValidationError("m must be at least 1")
    if d ** (2 * m) > MAX_DENSE_DIM:
        raise MemoryGuardError(
            "dense performance operator of dimension %d = %d^(2*%d) exceeds the limit %d"
            % (d ** (2 * m), d, m, MAX_DENSE_DIM)
        )


def vectorized_powers(us, m):
    """Rows ``|U^{(x)m}>>`` for a stack of unitaries (input-first column stacking)."""
    powers = kernels.tensor_power_batch(us, m)
    return np.ascontiguousarray(powers.transpose(0, 2, 1)).reshape(len(us), -1)


def omega_factor(ensemble, m):
    scheme = cached_quadrature(ensemble, 2 * m)
    rows = []
    for s in range(0, len(scheme), _NODE_CHUNK):
        us = scheme.unitaries[s : s + _NODE_CHUNK]
        w = scheme.weights[s : s + _NODE_CHUNK]
        rows.append(np.sqrt(w)[:, None] * vectorized_powers(us, m))
    return np.concatenate(rows)


def _hermitize(a):
    a += a.conj().T
    a *= 0.5
    return a


def build_omega(ensemble, m, method=QUADRATURE, samples=100_000, src=None):
    """Performance operator by exact quadrature, closed form or Monte Carlo.

    The result is symmetrized as ``(Omega + Omega^+)/2``; no PSD projection
    is applied.
    """
    method = _method(method)
    _guard(ensemble.dim, m)
    if method == CLOSED_FORM:
        if ensemble.kind != HAAR_DIAGONAL:
            raise UnsupportedError("closed form is available for the diagonal ensemble only")
        return build_omega_diagonal_closed_form(m, ensemble.dim)
    if method == QUADRATURE:
        return PerformanceOperator(m, ensemble, QUADRATURE, factor=omega_factor(ensemble, m))
    if method == MONTE_CARLO:
        src = src or SeededSource()
        est = omega_monte_carlo(ensemble, m, samples, src)
        return PerformanceOperator(
            m, ensemble, MONTE_CARLO, samples=est.samples, seed=src.seed, stderr=est.stderr,
            dense=_hermitize(est.mean),
        )
    raise ValidationError("method %r cannot build a performance operator" % method)


def omega_monte_carlo(ensemble, m, samples, src, chunk=500):
    """Entrywise Monte Carlo estimate of Omega with standard errors."""
    _guard(ensemble.dim, m)
    if samples < 2:
        raise ValidationError("Monte Carlo needs at least 2 samples")

    def sums(us):
        v = vectorized_powers(us, m)
        a = np.abs(v) ** 2
        return v.T @ v.conj(), a.T @ a

    total, total_sq = monte_carlo_sums(ensemble, sums, samples, src, chunk)
    return estimate_from_sums(total, total_sq, int(samples), src.seed)


def _digit_counts(m, d):
    return [tuple(np.bincount(np.array(x, dtype=int), minlength=d)) for x in product(range(d), repeat=m)]


def build_omega_diagonal_closed_form(m, d=2):
    """Omega for uniformly random diagonal unitaries.

    ``E exp(i phi.(n_x - n_y)) = delta(n_x, n_y)``, where ``n_x`` counts the
    occurrences of each symbol in the string ``x``; hence Omega is the sum of
    ``|x,x><y,y|`` over strings of equal type (equal Hamming weight for d=2).
    """
    _guard(d, m)
    size = d ** m
    types = _digit_counts(m, d)
    groups = {}
    for x, t in enumerate(types):
        groups.setdefault(t, []).append(x * size + x)
    matrix = np.zeros((size * size, size * size), dtype=complex)
    for idx in groups.values():
        idx = np.array(idx)
        matrix[np.ix_(idx, idx)] = 1.0
    return PerformanceOperator(m, EnsembleSpec(HAAR_DIAGONAL, d), CLOSED_FORM, dense=matrix)


def swap_operator(d):
    s = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            s[j * d + i, i * d + j] = 1.0
    return s


def twirl_closed_form(x, d, k):
    """Haar twirl ``E U^{+(x)k} X U^{(x)k}`` for k = 1, 2 from the moment formulas."""
    x = np.asarray(x, dtype=complex)
    if k == 1:
        return np.trace(x) * np.eye(d) / d
    if k == 2:
        s = swap_operator(d)
        ident = np.eye(d * d)
        tr_x, tr_sx = np.trace(x), np.trace(s @ x)
        return (tr_x * ident + tr_sx * s) / (d * d - 1) - (tr_x * s + tr_sx * ident) / (d * (d * d - 1))
    raise UnsupportedError("closed-form twirl is implemented for k = 1, 2 only")


def _twirl_terms(x, k):
    def f(us):
        w = kernels.tensor_power_batch(us, k)
        return np.einsum("nba,bc,ncd->nad", w.conj(), x, w)

    return f


def twirl(x, ensemble, k, method=QUADRATURE, samples=100_000, src=None):
    """``E U^{+(x)k} X U^{(x)k}`` over ``ensemble``."""
    method = _method(method)
    x = np.asarray(x, dtype=complex)
    d = ensemble.dim
    if x.shape != (d ** k, d ** k):
        raise ValidationError("operator of shape %r does not act on (C^%d)^(x)%d" % (x.shape, d, k))
    if method == CLOSED_FORM:
        if ensemble.kind != HAAR_UNITARY:
            raise UnsupportedError("closed-form twirl is for the Haar unitary ensemble only")
        return twirl_closed_form(x, d, k)
    if method == QUADRATURE:
        scheme = cached_quadrature(ensemble, 2 * k)
        terms = _twirl_terms(x, k)(scheme.unitaries)
        return np.einsum("n,nij->ij", scheme.weights, terms)
    if method == MONTE_CARLO:
        return twirl_estimate(x, ensemble, k, samples, src).mean
    raise ValidationError("method %r cannot compute a twirl" % method)


def twirl_estimate(x, ensemble, k, samples, src=None):
    """Monte Carlo twirl with entrywise standard errors."""
    src = src or SeededSource()
    return monte_carlo_mean(ensemble, _twirl_terms(np.asarray(x, dtype=complex), k), samples, src)


def overlap_probe(psi):
    """``conj(psi psi^+) (x) psi psi^+`` as the vector ``conj(psi) (x) psi``."""
    return kron(np.conj(psi), psi)


def overlap_from_omega(omega, psi):
    """``tr[Omega (conj(psi psi^+) (x) psi psi^+)]``."""
    x = overlap_probe(psi)
    return float(np.real(x.conj() @ (omega.matrix @ x)))


def overlap_moment(psi, ensemble, m, method=QUADRATURE, samples=100_000, src=None):
    """``E |<psi|U^{(x)m}|psi>|^2`` over ``ensemble``.

    ``quadrature`` loops over exact nodes, ``omega`` builds the performance
    operator and uses the trace formula, ``closed_form`` is available for
    diagonal unitaries and ``monte_carlo`` samples.
    """
    method = _method(method)
    d = ensemble.dim
    psi = check_state(psi, d ** m, tol=1e-10)
    if method == QUADRATURE:
        scheme = cached_quadrature(ensemble, 2 * m)
        vals = kernels.expectations(scheme.unitaries, m, psi)
        return float(scheme.weights @ (np.abs(vals) ** 2))
    if method == OMEGA:
        return overlap_from_omega(build_omega(ensemble, m), psi)
    if method == CLOSED_FORM:
        if ensemble.kind != HAAR_DIAGONAL:
            raise UnsupportedError("closed-form overlap is for the diagonal ensemble only")
        weights = {}
        for t, p in zip(_digit_counts(m, d), np.abs(psi) ** 2):
            weights[t] = weights.get(t, 0.0) + p
        return float(sum(v * v for v in weights.values()))
    return float(overlap_estimate(psi, ensemble, m, samples, src).mean)


def overlap_estimate(psi, ensemble, m, samples, src=None):
    src = src or SeededSource()
    psi = np.asarray(psi, dtype=complex)
    return monte_carlo_mean(
        ensemble, lambda us: np.abs(kernels.expectations(us, m, psi)) ** 2, samples, src
    )


def spectrum(omega):
    """Ascending eigenvalues of a performance operator."""
    return hermitian_eig(omega.matrix)[0]
