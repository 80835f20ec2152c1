"""Dense complex linear algebra used throughout the package.

Conventions
-----------
States on ``m`` copies of ``C^d`` are flat arrays of length ``d**m`` with
copy 0 as the most significant index. The vectorization of an operator
``K`` acting from an input space to an output space is

    |K>> = sum_j |j>_in (x) K|j>_out,

so entry ``j * dim_out + i`` of ``|K>>`` equals ``K[i, j]``. This is
column-stacking with the input system first; swapping the order transposes
the structure of every performance operator, so it is fixed here and only
here.
"""
from __future__ import annotations

from dataclasses import dataclass
from string import ascii_letters

import numpy as np

from . import kernels
from .errors import ValidationError

HERMITIAN_RTOL = 1e-10
UNITARY_TOL = 1e-10
STATE_TOL = 1e-12


def is_hermitian(a, rtol=HERMITIAN_RTOL):
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    scale = max(np.abs(a).max(initial=0.0), 1e-300)
    return np.abs(a - a.conj().T).max(initial=0.0) <= rtol * scale


def is_unitary(u, tol=UNITARY_TOL):
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    return np.abs(u.conj().T @ u - np.eye(u.shape[0])).max() <= tol


def check_unitary(u, tol=UNITARY_TOL):
    u = np.asarray(u, dtype=complex)
    if not is_unitary(u, tol):
        raise ValidationError("operator is not unitary within %g" % tol)
    return u


def check_state(psi, dim=None, tol=STATE_TOL):
    """Validate a normalized pure state and return it as a complex vector."""
    psi = np.asarray(psi, dtype=complex).ravel()
    if dim is not None and psi.size != dim:
        raise ValidationError("state has dimension %d, expected %d" % (psi.size, dim))
    if abs(np.linalg.norm(psi) - 1.0) > tol:
        raise ValidationError("state is not normalized (norm %.15g)" % np.linalg.norm(psi))
    return psi


def normalize(psi):
    psi = np.asarray(psi, dtype=complex).ravel()
    return psi / np.linalg.norm(psi)


def kron(*ops):
    """Kronecker product of any number of matrices or vectors."""
    out = np.asarray(ops[0], dtype=complex)
    for op in ops[1:]:
        out = np.kron(out, np.asarray(op, dtype=complex))
    return out


def tensor_power(u, m):
    """Explicit ``u^{(x)m}``; only for small ``d**m``."""
    u = np.asarray(u, dtype=complex)
    return kernels.tensor_power_batch(u[None], m)[0]


def vectorize(op):
    """``sum_j |j> (x) op|j>`` for a square or rectangular operator."""
    return np.asarray(op, dtype=complex).T.ravel()


def vectorize_tensor_power(u, m):
    """Unnormalized vector ``|U^{(x)m}>>`` of squared norm ``d**m``."""
    u = check_unitary(u)
    return vectorize(tensor_power(u, m))


def apply_tensor_power(u, m, psi):
    """``U^{(x)m} psi`` without forming the ``d**m`` square matrix.

    ``psi`` may also be a ``(d**m, k)`` block of column vectors.
    """
    u = np.asarray(u, dtype=complex)
    psi = np.asarray(psi, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValidationError("expected a square matrix")
    if psi.shape[0] != u.shape[0] ** m:
        raise ValidationError(
            "state dimension %d does not match d**m = %d" % (psi.shape[0], u.shape[0] ** m)
        )
    return kernels.apply_power(u, m, psi)


def hermitian_eig(a):
    """Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian matrix."""
    a = np.asarray(a, dtype=complex)
    if not is_hermitian(a):
        raise ValidationError("matrix is not Hermitian")
    return np.linalg.eigh((a + a.conj().T) / 2)


def max_entangled(d=2):
    """Normalized ``|Phi+> = sum_j |jj> / sqrt(d)``."""
    return vectorize(np.eye(d)) / np.sqrt(d)


def basis_state(bits, d=2):
    """Computational basis ket from a string like ``"0110"`` or a sequence of digits."""
    digits = [int(b) for b in bits]
    idx = 0
    for b in digits:
        if not 0 <= b < d:
            raise ValidationError("digit %d out of range for d=%d" % (b, d))
        idx = idx * d + b
    out = np.zeros(d ** len(digits), dtype=complex)
    out[idx] = 1.0
    return out


@dataclass(frozen=True)
class SystemLabel:
    """Ordered subsystem names with their local dimensions."""

    names: tuple
    dims: tuple

    def __post_init__(self):
        names = tuple(self.names)
        dims = tuple(int(x) for x in self.dims)
        if len(names) != len(dims):
            raise ValidationError("names and dims differ in length")
        if len(set(names)) != len(names):
            raise ValidationError("duplicate subsystem names: %r" % (names,))
        if any(x < 1 for x in dims):
            raise ValidationError("subsystem dimensions must be positive")
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "dims", dims)

    @classmethod
    def of(cls, **systems):
        return cls(tuple(systems), tuple(systems.values()))

    @property
    def dim(self):
        return int(np.prod(self.dims, dtype=np.int64))

    def dim_of(self, name):
        return self.dims[self.names.index(name)]

    def subset(self, names):
        return SystemLabel(tuple(names), tuple(self.dim_of(n) for n in names))

    def check(self, a):
        a = np.asarray(a)
        if a.shape != (self.dim, self.dim):
            raise ValidationError(
                "matrix of shape %r does not match labels of dimension %d" % (a.shape, self.dim)
            )


def _as_tensor(a, labels):
    labels.check(a)
    return np.asarray(a, dtype=complex).reshape(labels.dims + labels.dims)


def partial_trace(a, labels, keep):
    """Trace out every subsystem not in ``keep``; kept systems stay in label order."""
    keep = set(keep)
    unknown = keep - set(labels.names)
    if unknown:
        raise ValidationError("unknown subsystems %r" % sorted(unknown))
    n = len(labels.names)
    t = _as_tensor(a, labels)
    rows = list(ascii_letters[:n])
    cols = list(ascii_letters[n : 2 * n])
    for i, name in enumerate(labels.names):
        if name not in keep:
            cols[i] = rows[i]
    kept = [i for i, name in enumerate(labels.names) if name in keep]
    out_idx = "".join(rows[i] for i in kept) + "".join(cols[i] for i in kept)
    res = np.einsum("".join(rows) + "".join(cols) + "->" + out_idx, t)
    d = int(np.prod([labels.dims[i] for i in kept], dtype=np.int64))
    return res.reshape(d, d)


def partial_transpose(a, labels, systems):
    systems = set(systems)
    n = len(labels.names)
    t = _as_tensor(a, labels)
    axes = list(range(2 * n))
    for i, name in enumerate(labels.names):
        if name in systems:
            axes[i], axes[n + i] = n + i, i
    return t.transpose(axes).reshape(labels.dim, labels.dim)


def permute_systems(a, labels, order):
    """Reorder the tensor factors of ``a`` to follow ``order`` (a list of names)."""
    order = list(order)
    if sorted(order) != sorted(labels.names):
        raise ValidationError("order must be a permutation of %r" % (labels.names,))
    n = len(order)
    perm = [labels.names.index(x) for x in order]
    t = _as_tensor(a, labels).transpose(perm + [n + p for p in perm])
    return t.reshape(labels.dim, labels.dim), labels.subset(order)


def link_product(a, labels_a, b, labels_b):
    """Link product ``A * B``: partial transpose on shared systems, contract, trace.

    Returns the product matrix and its labels (systems of ``A`` not shared,
    then systems of ``B`` not shared). Without shared systems this is the
    tensor product.
    """
    shared = [x for x in labels_a.names if x in labels_b.names]
    for x in shared:
        if labels_a.dim_of(x) != labels_b.dim_of(x):
            raise ValidationError("subsystem %r has mismatched dimensions" % x)
    ta = _as_tensor(a, labels_a)
    tb = _as_tensor(b, labels_b)
    letters = iter(ascii_letters)
    row_a = {x: next(letters) for x in labels_a.names}
    col_a = {x: next(letters) for x in labels_a.names}
    row_b = {x: next(letters) for x in labels_b.names if x not in shared}
    col_b = {x: next(letters) for x in labels_b.names if x not in shared}
    # A[a s'', a' s] B[s'' c, s c']: B's row index on a shared system is A's
    # row index there, B's column index is A's column index.
    for x in shared:
        row_b[x] = row_a[x]
        col_b[x] = col_a[x]
    sub_a = "".join(row_a[x] for x in labels_a.names) + "".join(col_a[x] for x in labels_a.names)
    sub_b = "".join(row_b[x] for x in labels_b.names) + "".join(col_b[x] for x in labels_b.names)
    out_names = [x for x in labels_a.names if x not in shared] + [
        x for x in labels_b.names if x not in shared
    ]
    out_rows = "".join(row_a[x] if x in labels_a.names else row_b[x] for x in out_names)
    out_cols = "".join(col_a[x] if x in labels_a.names else col_b[x] for x in out_names)
    res = np.einsum(sub_a + "," + sub_b + "->" + out_rows + out_cols, ta, tb)
    out_labels = SystemLabel(
        tuple(out_names),
        tuple(labels_a.dim_of(x) if x in labels_a.names else labels_b.dim_of(x) for x in out_names),
    )
    return res.reshape(out_labels.dim, out_labels.dim), out_labels
