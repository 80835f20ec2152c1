"""Pure numpy implementations of the hot kernels.

These are the reference versions; ``symtest._kernels`` (Cython) must agree
with them to rounding error. Every function takes the local dimension from
the shape of the unitary and assumes states are flattened row-major with
copy 0 as the most significant index.
"""
import numpy as np


def apply_power(u, m, psi):
    """Return ``u^{(x)m} @ psi`` by ``m`` single-mode contractions.

    ``psi`` may be a vector of length ``d**m`` or a ``(d**m, k)`` matrix whose
    columns are transformed independently.
    """
    u = np.asarray(u, dtype=complex)
    psi = np.asarray(psi, dtype=complex)
    d = u.shape[0]
    cols = psi.shape[1:]
    out = psi.reshape((d,) * m + cols)
    for k in range(m):
        out = np.tensordot(u, out, axes=([1], [k]))
        out = np.moveaxis(out, 0, k)
    return np.ascontiguousarray(out).reshape(psi.shape)


def apply_power_batch(us, m, psi):
    """Apply ``U_n^{(x)m}`` to one state for every ``U_n`` in ``us``.

    Returns an ``(N, d**m)`` array.
    """
    us = np.asarray(us, dtype=complex)
    psi = np.asarray(psi, dtype=complex)
    n, d, _ = us.shape
    state = np.broadcast_to(psi, (n, psi.size))
    for k in range(m):
        state = state.reshape(n, d ** k, d, d ** (m - k - 1))
        state = np.einsum("nab,nibj->niaj", us, state)
    return state.reshape(n, d ** m)


def expectations(us, m, psi):
    """Return ``<psi| U_n^{(x)m} |psi>`` for every ``U_n`` in ``us``."""
    psi = np.asarray(psi, dtype=complex)
    return apply_power_batch(us, m, psi) @ psi.conj()


def tensor_power_batch(us, m):
    """Explicit ``(N, d**m, d**m)`` stack of tensor powers."""
    us = np.asarray(us, dtype=complex)
    n, d, _ = us.shape
    out = np.ones((n, 1, 1), dtype=complex)
    for _ in range(m):
        k = out.shape[1]
        out = np.einsum("nab,ncd->nacbd", out, us).reshape(n, k * d, k * d)
    return out
