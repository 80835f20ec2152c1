"""Eigenstate testing protocols and their error probabilities.

An eigenstate protocol for ``m`` queries prepares ``psi``, applies
``U^{(x)m}`` and measures ``{|psi><psi|, I - |psi><psi|}``; outcome 0
("symmetric") has probability ``|<psi|U^{(x)m}|psi>|^2``. When ``psi`` is a
common eigenvector of ``U^{(x)m}`` for every symmetric ``U`` the protocol
never rejects a symmetric unitary, and its type-II error against Haar
unitaries is the overlap moment of ``psi``.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from . import kernels
from .ensembles import (
    HAAR_DIAGONAL,
    HAAR_ORTHOGONAL,
    EnsembleSpec,
    SeededSource,
    haar_unitary,
    sample_batch,
)
from .errors import UnsupportedError, ValidationError
from .performance import QUADRATURE, overlap_moment
from .tensor import (
    SystemLabel,
    apply_tensor_power,
    basis_state,
    check_state,
    check_unitary,
    kron,
    link_product,
    normalize,
    partial_trace,
)

SYMMETRIES = {"T": HAAR_ORTHOGONAL, "Z": HAAR_DIAGONAL}

# Exact type-II errors of the tabulated optimal protocols.
TABLE_BETAS = {
    "T": {2: Fraction(1, 3), 4: Fraction(1, 6), 6: Fraction(1, 10)},
    "Z": {1: Fraction(1, 2), 2: Fraction(1, 4), 3: Fraction(1, 6), 4: Fraction(1, 9), 5: Fraction(1, 12)},
}

# Optimal zero-type-I errors including the odd-m T plateaus.
OPTIMAL_BETAS = {
    "T": {2: Fraction(1, 3), 3: Fraction(1, 3), 4: Fraction(1, 6), 5: Fraction(1, 6), 6: Fraction(1, 10)},
    "Z": TABLE_BETAS["Z"],
}


def symmetry_key(symmetry):
    key = str(symmetry).upper()
    if key not in SYMMETRIES:
        raise ValidationError("symmetry must be 'T' or 'Z', got %r" % (symmetry,))
    return key


def symmetry_ensemble(symmetry, d=2):
    return EnsembleSpec(SYMMETRIES[symmetry_key(symmetry)], d)


def matching_state(pairs, m, d=2):
    """Product of ``|Phi+>`` over the given pairs of tensor positions (0-indexed)."""
    covered = sorted(i for p in pairs for i in p)
    if covered != list(range(m)):
        raise ValidationError("pairs %r are not a perfect matching of %d positions" % (pairs, m))
    digits = np.indices((d,) * m).reshape(m, -1)
    amp = np.ones(d ** m)
    for i, j in pairs:
        amp = amp * (digits[i] == digits[j])
    return normalize(amp)


def _basis_sum(strings):
    return sum(basis_state(s) for s in strings)


def paper_state(symmetry, m):
    """Optimal input state of the tabulated protocol for ``(symmetry, m)``."""
    key = symmetry_key(symmetry)
    m = int(m)
    r5, r7 = math.sqrt(5), math.sqrt(7)
    if key == "T":
        if m == 2:
            psi = matching_state([(0, 1)], 2)
        elif m == 4:
            psi = (r5 + 1) / 4 * matching_state([(0, 1), (2, 3)], 4) + (r5 - 1) / 4 * matching_state(
                [(0, 2), (1, 3)], 4
            )
        elif m == 6:
            # First term pairs (0,5),(1,4),(2,3); the pairing (0,5),(1,3),(2,4)
            # gives an unnormalized superposition that misses 1/10.
            psi = (
                (r7 - 2) / 6 * matching_state([(0, 5), (1, 4), (2, 3)], 6)
                + (r7 + 1) / 6 * matching_state([(0, 1), (2, 4), (3, 5)], 6)
                + (r7 + 1) / 6 * matching_state([(0, 2), (1, 3), (4, 5)], 6)
            )
        else:
            raise UnsupportedError(
                "no tabulated T-symmetry state for m=%d (tabulated: 2, 4, 6); "
                "use bounds.optimize_protocol" % m
            )
    else:
        s12, c12 = math.sin(math.pi / 12), math.cos(math.pi / 12)
        if m == 1:
            psi = basis_state("0")
        elif m == 2:
            psi = s12 * basis_state("01") + c12 * basis_state("10")
        elif m == 3:
            psi = _basis_sum(["001", "010"]) / math.sqrt(2)
        elif m == 4:
            psi = (r5 + 1) / (2 * math.sqrt(6)) * _basis_sum(["0011", "0110"]) + (r5 - 1) / (
                2 * math.sqrt(6)
            ) * _basis_sum(["0101", "1001"])
        elif m == 5:
            psi = (
                (r5 + 1) / 8 * _basis_sum(["00011", "10100"])
                + (r5 - 1) / 8 * _basis_sum(["00101", "10010"])
                + r5 / 4 * _basis_sum(["00110", "10001"])
            )
        else:
            raise UnsupportedError(
                "no tabulated Z-symmetry state for m=%d (tabulated: 1..5); "
                "use bounds.optimize_protocol" % m
            )
    return check_state(psi, 2 ** m)


@dataclass(frozen=True)
class EigenstateProtocol:
    """``m``-query protocol with input ``psi`` targeting the symmetric ensemble.

    ``parts`` is non-empty for naive repetitions: each part is measured
    separately and the composite accepts only if every part accepts.
    """

    m: int
    psi: np.ndarray = field(repr=False)
    symmetry: EnsembleSpec
    parts: tuple = ()

    def __post_init__(self):
        psi = check_state(self.psi, self.symmetry.dim ** self.m, tol=1e-10)
        psi.setflags(write=False)
        object.__setattr__(self, "psi", psi)

    @classmethod
    def from_table(cls, symmetry, m):
        return cls(int(m), paper_state(symmetry, m), symmetry_ensemble(symmetry))

    def pieces(self):
        return self.parts or (self,)

    def accept_probabilities(self, us):
        """``(N, parts)`` array of per-part acceptance probabilities for a stack of unitaries."""
        us = np.asarray(us, dtype=complex)
        cols = [np.abs(kernels.expectations(us, p.m, p.psi)) ** 2 for p in self.pieces()]
        return np.clip(np.stack(cols, axis=1), 0.0, 1.0)

    def zero_type_one(self, tol=1e-9, method=QUADRATURE):
        return 1.0 - overlap_moment(self.psi, self.symmetry, self.m, method=method) <= tol


@dataclass(frozen=True)
class TestReport:
    __test__ = False

    alpha: float
    beta: float
    method: str
    m: int
    symmetry: str | None = None
    samples: int | None = None
    seed: int | None = None
    expected: Fraction | None = None

    def __post_init__(self):
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not -1e-12 <= v <= 1 + 1e-12:
                raise ValidationError("%s=%r is not a probability" % (name, v))
            object.__setattr__(self, name, float(min(max(v, 0.0), 1.0)))

    def to_json(self):
        out = {
            "symmetry": self.symmetry,
            "m": self.m,
            "alpha": self.alpha,
            "beta": self.beta,
            "expected": None if self.expected is None else str(self.expected),
            "method": self.method,
        }
        if self.samples is not None:
            out["samples"] = self.samples
            out["seed"] = self.seed
        return out


def _symmetry_name(ensemble):
    for key, kind in SYMMETRIES.items():
        if ensemble.kind == kind:
            return key
    return ensemble.kind


def type_errors(protocol, mu1=None, method=QUADRATURE, samples=100_000, src=None, expected=None):
    """Type-I error against the protocol's symmetry and type-II error against ``mu1``."""
    mu1 = mu1 or haar_unitary(protocol.symmetry.dim)
    src = src or SeededSource()
    stochastic = str(method).replace("-", "_") == "monte_carlo"
    kw = {"samples": samples}
    a = overlap_moment(protocol.psi, protocol.symmetry, protocol.m, method, src=src.child(0), **kw)
    b = overlap_moment(protocol.psi, mu1, protocol.m, method, src=src.child(1), **kw)
    return TestReport(
        alpha=1.0 - a,
        beta=b,
        method=str(method),
        m=protocol.m,
        symmetry=_symmetry_name(protocol.symmetry),
        samples=samples if stochastic else None,
        seed=src.seed if stochastic else None,
        expected=expected,
    )


def compose_repetition(parts):
    """Run several protocols side by side; accept iff every part accepts."""
    parts = tuple(parts)
    if not parts:
        raise ValidationError("need at least one protocol to compose")
    target = parts[0].symmetry
    if any(p.symmetry != target for p in parts):
        raise ValidationError("all parts must target the same symmetric ensemble")
    flat = tuple(q for p in parts for q in p.pieces())
    psi = kron(*[q.psi for q in flat])
    return EigenstateProtocol(sum(q.m for q in flat), psi, target, flat)


def closed_form_beta(symmetry, kind, n):
    """Exact type-II error of the optimal (``m = n``) or naive (``k = n`` repeats) protocol.

    Optimal Z values follow ``4/((m+1)(m+3))`` for odd m and ``4/(m+2)^2``
    for even m, established for m <= 5 only; larger m would be an
    extrapolation and is rejected. Optimal T values are the certified ones
    for m = 2..6. Naive repetitions of the 2-query T protocol give
    ``1/(2k+1)``; of the 1-query Z protocol, ``1/(k+1)``.
    """
    key = symmetry_key(symmetry)
    n = int(n)
    if kind == "optimal":
        if key == "Z":
            if not 1 <= n <= 5:
                raise UnsupportedError(
                    "the Z-symmetry optimum is established for 1 <= m <= 5; m=%d would be conjecture" % n
                )
            return Fraction(4, (n + 1) * (n + 3)) if n % 2 else Fraction(4, (n + 2) ** 2)
        if n not in OPTIMAL_BETAS["T"]:
            raise UnsupportedError("the T-symmetry optimum is established for 2 <= m <= 6 only")
        return OPTIMAL_BETAS["T"][n]
    if kind == "naive":
        if n < 1:
            raise ValidationError("number of repetitions must be positive")
        return Fraction(1, 2 * n + 1) if key == "T" else Fraction(1, n + 1)
    raise ValidationError("kind must be 'optimal' or 'naive'")


@dataclass(frozen=True)
class MeasureChannelChoi:
    """Choi matrix of the two-outcome measurement ``{|psi><psi|, I - |psi><psi|}``.

    Systems are ``("in", "flag")``. The Choi convention is
    ``sum_ij |i><j| (x) M(|i><j|)``, so the projector appearing in the Choi
    matrix is onto ``conj(psi)``; for real states (all tabulated ones) this is
    the same matrix as ``|psi><psi| (x) |0><0| + (I - |psi><psi|) (x) |1><1|``.
    """

    matrix: np.ndarray
    labels: SystemLabel

    def apply(self, rho):
        """Flag-register state ``M(rho)``, computed as a link product."""
        rho = np.asarray(rho, dtype=complex)
        if rho.ndim == 1:
            rho = np.outer(rho, rho.conj())
        out, _ = link_product(self.matrix, self.labels, rho, SystemLabel(("in",), (rho.shape[0],)))
        return out

    def flag_marginal(self):
        """``tr_flag J``; equals the identity for a valid channel."""
        return partial_trace(self.matrix, self.labels, ["in"])


def measure_channel(psi):
    psi = check_state(psi, tol=1e-10)
    p = np.outer(psi.conj(), psi)
    flag0 = np.diag([1.0, 0.0]).astype(complex)
    flag1 = np.diag([0.0, 1.0]).astype(complex)
    j = np.kron(p, flag0) + np.kron(np.eye(psi.size) - p, flag1)
    return MeasureChannelChoi(j, SystemLabel(("in", "flag"), (psi.size, 2)))


def simulate(protocol, u, shots, src=None):
    """Outcome counts (0 = accept symmetric, 1 = reject) for ``shots`` runs on ``u``."""
    u = check_unitary(u)
    shots = int(shots)
    if shots < 0:
        raise ValidationError("shots must be non-negative")
    counts = Counter()
    if shots == 0:
        return counts
    src = src or SeededSource()
    gen = src.generator(0)
    accept = np.ones(shots, dtype=bool)
    for part in protocol.pieces():
        amp = np.vdot(part.psi, apply_tensor_power(u, part.m, part.psi))
        accept &= gen.random(shots) < min(abs(amp) ** 2, 1.0)
    n0 = int(accept.sum())
    if n0:
        counts[0] = n0
    if shots - n0:
        counts[1] = shots - n0
    return counts


def simulate_trials(protocol, truth, trials, src=None, chunk=5000):
    """Sample a fresh unitary from ``truth`` per trial and run one shot on it.

    Returns the number of trials ending with outcome 0. Unitary ``i`` uses
    sample index ``i`` of ``src``; the measurement randomness comes from a
    separate child stream.
    """
    src = src or SeededSource()
    flags = src.child(1)
    accepted = 0
    for start in range(0, int(trials), chunk):
        n = min(chunk, int(trials) - start)
        us = sample_batch(truth, src, start, n)
        probs = protocol.accept_probabilities(us)
        draws = np.stack(
            [flags.generator(start + i).random(probs.shape[1]) for i in range(n)]
        )
        accepted += int(np.all(draws < probs, axis=1).sum())
    return accepted


def wilson_interval(successes, trials, z=1.96):
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValidationError("trials must be positive")
    p = successes / trials
    denom = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def scale_for_tolerance(report, epsilon):
    """Mix a zero-type-I protocol with the always-reject strategy.

    Weight ``1 - epsilon`` on the protocol gives type-I error ``epsilon`` and
    type-II error ``(1 - epsilon) beta``.
    """
    epsilon = float(epsilon)
    if not 0.0 <= epsilon <= 1.0:
        raise ValidationError("epsilon must lie in [0, 1]")
    if report.alpha > 1e-9:
        raise ValidationError("scaling applies to protocols without type-I error")
    expected = None if report.expected is None else report.expected * (1 - Fraction(epsilon))
    return replace(report, alpha=epsilon, beta=(1.0 - epsilon) * report.beta, expected=expected)
