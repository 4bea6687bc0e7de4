"""Polarization states, Pauli algebra and fidelity primitives.

Jones vectors are complex arrays of shape ``(2,)`` ordered (H, V); density
matrices are ``(2, 2)`` complex arrays in the same basis.

Circular convention used everywhere in the package::

    R = (H - iV) / sqrt(2)      L = (H + iV) / sqrt(2)

so that R is the -1 eigenstate of sigma_Y and L the +1 eigenstate.
"""

import numpy as np

from .errors import DegenerateStateError, PhysicalityError

#: Eigenvalues above this (negative) bound are clamped to zero before sqrt.
EIG_CLAMP = 1e-9

_S = 1 / np.sqrt(2)


def _frozen(a):
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


PAULI_LABELS = ("I", "X", "Y", "Z")
I2 = _frozen([[1, 0], [0, 1]])
SX = _frozen([[0, 1], [1, 0]])
SY = _frozen([[0, -1j], [1j, 0]])
SZ = _frozen([[1, 0], [0, -1]])
PAULI = _frozen([I2, SX, SY, SZ])

STATE_LABELS = ("H", "V", "D", "A", "R", "L")
JONES = {
    "H": _frozen([1, 0]),
    "V": _frozen([0, 1]),
    "D": _frozen([_S, _S]),
    "A": _frozen([_S, -_S]),
    "R": _frozen([_S, -1j * _S]),
    "L": _frozen([_S, 1j * _S]),
}


def jones_vector(state):
    """Return a unit Jones vector for a label in ``STATE_LABELS`` or pass an array through."""
    if isinstance(state, str):
        try:
            return JONES[state.upper()]
        except KeyError:
            raise ValueError(f"unknown polarization label {state!r}") from None
    v = np.asarray(state, dtype=complex)
    if v.shape != (2,):
        raise ValueError(f"Jones vector must have shape (2,), got {v.shape}")
    return v


def jones_to_density(v):
    """Pure-state density matrix v v^dagger / |v|^2.

    Raises:
        DegenerateStateError: if ``v`` has zero norm.
    """
    v = jones_vector(v)
    norm2 = float(np.vdot(v, v).real)
    if norm2 <= 0.0:
        raise DegenerateStateError("cannot form a density matrix from a zero-norm Jones vector")
    return np.outer(v, v.conj()) / norm2


def projector(label):
    return jones_to_density(label)


def pauli_decompose(m):
    """Coefficients c_i = Tr(sigma_i M) / 2 in the order I, X, Y, Z."""
    m = np.asarray(m, dtype=complex)
    return np.einsum("kab,ba->k", PAULI, m) / 2


def pauli_compose(coeffs):
    return np.einsum("k,kab->ab", np.asarray(coeffs, dtype=complex), PAULI)


def hermitian_part(m):
    m = np.asarray(m, dtype=complex)
    return (m + m.conj().T) / 2


def _eigh2(m):
    # closed form for a Hermitian 2x2; eigenvalues ascending
    a = m[0, 0].real
    d = m[1, 1].real
    b = m[0, 1]
    mean = (a + d) / 2
    r = np.hypot((a - d) / 2, abs(b))
    vals = np.array([mean - r, mean + r])
    if r == 0.0:
        return vals, np.eye(2, dtype=complex)
    # eigenvector of the larger eigenvalue, built from whichever row is better conditioned
    if a >= d:
        hi = np.array([a - mean + r, np.conj(b)], dtype=complex)
    else:
        hi = np.array([b, d - mean + r], dtype=complex)
    hi /= np.linalg.norm(hi)
    lo = np.array([-np.conj(hi[1]), np.conj(hi[0])])
    return vals, np.column_stack([lo, hi])


def eigh(m):
    """Eigen-decomposition of a Hermitian matrix (closed form for 2x2)."""
    m = hermitian_part(m)
    if m.shape == (2, 2):
        return _eigh2(m)
    return np.linalg.eigh(m)


def _clamped_eigh(m, name="matrix"):
    vals, vecs = eigh(m)
    if vals[0] < -EIG_CLAMP:
        raise PhysicalityError(f"{name} has eigenvalue {vals[0]:.3e} below -{EIG_CLAMP:g}")
    return np.clip(vals, 0.0, None), vecs


def check_hermitian(m, tol=1e-10, name="matrix"):
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise PhysicalityError(f"{name} must be square, got shape {m.shape}")
    dev = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
    if dev > tol:
        raise PhysicalityError(f"{name} is not Hermitian (deviation {dev:.3e})")
    return m


def is_physical(rho, tol=EIG_CLAMP):
    """True when ``rho`` is Hermitian, unit trace and has no eigenvalue below ``-tol``."""
    rho = np.asarray(rho, dtype=complex)
    if np.max(np.abs(rho - rho.conj().T)) > 1e-10:
        return False
    if abs(np.trace(rho) - 1) > 1e-10:
        return False
    return bool(eigh(rho)[0][0] >= -tol)


def psd_sqrt(m):
    """Principal square root of a Hermitian positive semidefinite matrix.

    Eigenvalues in ``[-1e-9, 0)`` are treated as zero.

    Raises:
        PhysicalityError: for non-Hermitian input or a more negative eigenvalue.
    """
    m = check_hermitian(m)
    vals, vecs = _clamped_eigh(m)
    return (vecs * np.sqrt(vals)) @ vecs.conj().T


def state_fidelity(rho1, rho2):
    """Uhlmann fidelity [Tr sqrt(sqrt(rho1) rho2 sqrt(rho1))]^2, clipped to [0, 1].

    Inputs are normalized to unit trace; both must be positive semidefinite.
    Qubits use Tr(rho1 rho2) + 2 sqrt(det rho1 det rho2), and a pure argument
    reduces the expression to Tr(rho1 rho2); both avoid square roots of
    round-off sized eigenvalues.
    """
    rho1 = check_hermitian(rho1, name="rho1")
    rho2 = check_hermitian(rho2, name="rho2")
    t1 = np.trace(rho1).real
    t2 = np.trace(rho2).real
    if t1 <= 0 or t2 <= 0:
        raise PhysicalityError("fidelity needs matrices with positive trace")
    rho1 = rho1 / t1
    rho2 = rho2 / t2
    _clamped_eigh(rho1, "rho1")
    _clamped_eigh(rho2, "rho2")
    overlap = float(np.real(np.sum(rho1 * rho2.T)))
    if rho1.shape == (2, 2):
        dets = max(np.linalg.det(rho1).real, 0.0) * max(np.linalg.det(rho2).real, 0.0)
        f = overlap + 2 * np.sqrt(dets)
    elif max(_purity(rho1), _purity(rho2)) > 1 - 1e-12:
        f = overlap
    else:
        s1 = psd_sqrt(rho1)
        vals, _ = eigh(hermitian_part(s1 @ rho2 @ s1))
        f = np.sum(np.sqrt(np.clip(vals, 0.0, None))) ** 2
    return float(min(max(f, 0.0), 1.0))


def _purity(rho):
    return float(np.real(np.sum(rho * rho.T)))


def trace_distance(rho1, rho2):
    """Half the trace norm of the difference."""
    diff = hermitian_part(np.asarray(rho1) - np.asarray(rho2))
    return float(np.sum(np.abs(eigh(diff)[0])) / 2)


def random_unitary(rng, n=2):
    """Haar-random unitary via QR of a complex Ginibre matrix."""
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_density(rng, n=2, rank=None):
    rank = n if rank is None else rank
    g = rng.standard_normal((n, rank)) + 1j * rng.standard_normal((n, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real
