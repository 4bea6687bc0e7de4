"""State and process tomography of the polarization channel.

Process matrices are 4x4 complex arrays in the Pauli basis (I, X, Y, Z)::

    rho_out = sum_ij chi[i, j] sigma_i rho_in sigma_j^dagger

A trace-preserving chi satisfies sum_ij chi[i, j] sigma_j sigma_i = I, which
implies unit trace. Fidelities are always computed on unit-trace chi.

Both maximum-likelihood estimators use a Gaussian likelihood on normalized
intensities and the factored form M = A^dagger A with a full complex A, so
positivity holds by construction. A full factor (rather than a triangular
one) keeps Newton steps well conditioned when the optimum is rank deficient,
which is the usual case for a near-identity channel. Every predicted
intensity and every trace-preservation component is a linear functional
Tr(M G) with Hermitian G, so both problems share one analytic Jacobian and
a constant second-order term.
"""

from dataclasses import dataclass, replace

import numpy as np

from ._lm import levenberg_marquardt
from .datasets import TomographyDataset
from .errors import ConvergenceError, DegenerateStateError, PhysicalityError, RankDeficientError
from .polarization import (
    EIG_CLAMP,
    JONES,
    PAULI,
    STATE_LABELS,
    eigh,
    hermitian_part,
    jones_to_density,
    pauli_compose,
    state_fidelity,
)

VARIANCE_FLOOR = 1e-6
TP_TOL = 1e-6

PROJECTORS = np.array([jones_to_density(JONES[m]) for m in STATE_LABELS])

#: Port-2 H-axis inversion; equals -sigma_Z.
H_FLIP = np.diag([-1.0, 1.0]).astype(complex)

# outcome relabeling under the H flip: D<->A, R<->L
_FLIP_PERMUTATION = [STATE_LABELS.index(x) for x in ("H", "V", "A", "D", "L", "R")]


# ---------------------------------------------------------------------------
# linear inversion


def linear_state_reconstruction(probs):
    """Density matrix from intensities ordered (H, V, D, A, R, L).

    Stokes components are differences of each projector pair divided by
    p_H + p_V. The result is Hermitian and unit trace but may have a negative
    eigenvalue for noisy data; check with :func:`pmrouter.polarization.is_physical`.
    """
    p = np.asarray(probs, dtype=float)
    if p.shape != (6,):
        raise ValueError(f"expected 6 intensities ordered {STATE_LABELS}, got shape {p.shape}")
    pH, pV, pD, pA, pR, pL = p
    total = pH + pV
    if total <= 0:
        raise DegenerateStateError("p_H + p_V is zero; no signal to normalize by")
    s = np.array([pD - pA, pL - pR, pH - pV]) / total
    return pauli_compose([0.5, *(s / 2)])


def _chi_design(rho_in):
    """(4, 16) complex map from vec(chi) to vec(rho_out) for one input."""
    cols = [(PAULI[i] @ rho_in @ PAULI[j].conj().T).ravel() for i in range(4) for j in range(4)]
    return np.column_stack(cols)


def linear_process_reconstruction(pairs):
    """Least-squares chi from (rho_in, rho_out) pairs.

    Output states are normalized to unit trace. The result is Hermitian but
    not necessarily completely positive.

    Raises:
        RankDeficientError: if the inputs do not span the 2x2 operator space.
    """
    rows, rhs = [], []
    for rho_in, rho_out in pairs:
        rho_out = np.asarray(rho_out, dtype=complex)
        rows.append(_chi_design(np.asarray(rho_in, dtype=complex)))
        rhs.append((rho_out / np.trace(rho_out)).ravel())
    a = np.vstack(rows)
    if np.linalg.matrix_rank(a, tol=1e-9) < 16:
        raise RankDeficientError("input states do not span the operator space; need four independent inputs")
    x, *_ = np.linalg.lstsq(a, np.concatenate(rhs), rcond=None)
    return hermitian_part(x.reshape(4, 4))


def _mean_and_variance(samples):
    samples = np.asarray(samples, dtype=float)
    n = samples.shape[-1]
    mean = samples.mean(axis=-1)
    if n > 1:
        var = samples.var(axis=-1, ddof=1) / n
    else:
        var = np.zeros_like(mean)
    return mean, np.maximum(var, VARIANCE_FLOOR)


def linear_process_from_dataset(dataset):
    means = dataset.intensities.mean(axis=2)
    pairs = [
        (jones_to_density(JONES[label]), linear_state_reconstruction(means[s]))
        for s, label in enumerate(STATE_LABELS)
    ]
    return linear_process_reconstruction(pairs)


# ---------------------------------------------------------------------------
# factored parameterization


def params_to_matrix(theta, n):
    """Full complex n x n factor A from 2 n^2 reals (real parts, then imaginary parts, row-major)."""
    theta = np.asarray(theta, dtype=float)
    return (theta[: n * n] + 1j * theta[n * n :]).reshape(n, n)


def matrix_to_params(a):
    return np.concatenate([a.real.ravel(), a.imag.ravel()])


def params_from_psd(m, mix=0.0):
    """Parameters with A^dagger A = (1 - mix) M + mix * Tr(M) I / n; M is clipped to PSD first."""
    m = hermitian_part(m)
    n = m.shape[0]
    vals, vecs = eigh(m)
    vals = np.clip(vals, 0, None)
    vals = (1 - mix) * vals + mix * vals.sum() / n
    return matrix_to_params((vecs * np.sqrt(vals)).conj().T)


def params_to_psd(theta, n):
    a = params_to_matrix(theta, n)
    return a.conj().T @ a


def linear_forms(theta, gs):
    """Values Tr(A^dagger A G_k) and their Jacobian w.r.t. ``theta``.

    ``gs`` is a (K, n, n) stack of Hermitian matrices. With M_k = G_k A^dagger,
    d/dRe(A_ab) = 2 Re M_k[b, a] and d/dIm(A_ab) = -2 Im M_k[b, a].
    """
    n = gs.shape[1]
    a = params_to_matrix(theta, n)
    mk = gs @ a.conj().T
    values = np.einsum("ab,kba->k", a, mk).real
    mt = np.transpose(mk, (0, 2, 1)).reshape(gs.shape[0], n * n)
    return values, np.hstack([2 * mt.real, -2 * mt.imag])


def form_hessian(gs, weights):
    """Hessian of sum_k w_k Tr(A^dagger A G_k) w.r.t. the parameters (constant: the form is quadratic)."""
    h = np.einsum("k,kab->ab", weights, gs)[None]
    n = gs.shape[1]
    eye = np.eye(2 * n * n)
    return np.column_stack([linear_forms(e, h)[1][0] for e in eye])


def numeric_jacobian(fun, theta, step=1e-6):
    """Central-difference Jacobian of a vector function; the oracle for :func:`linear_forms`."""
    theta = np.asarray(theta, dtype=float)
    cols = []
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = step
        cols.append((fun(theta + e) - fun(theta - e)) / (2 * step))
    return np.column_stack(cols)


# ---------------------------------------------------------------------------
# maximum likelihood, single qubit state


@dataclass(frozen=True)
class StateEstimate:
    rho: np.ndarray
    log_likelihood: float
    iterations: int
    grad_norm: float


def state_objective(theta, observed, sigma):
    """Weighted residuals and Jacobian for state MLE.

    ``sigma`` are per-point standard deviations; the Gaussian negative
    log-likelihood is 0.5 |r|^2 up to a constant. The estimators pass
    standard deviations relative to the smallest one, which rescales the
    objective without moving its optimum.
    """
    pred, jac = linear_forms(theta, PROJECTORS)
    return (pred - observed) / sigma, jac / sigma[:, None]


def _run_mle(fun, theta0, gtol, max_iter, check_monotone, what, forms, weights):
    # residual k is quadratic in theta with Hessian form_hessian(forms[k]) * weights[k]
    def second_order(theta, r):
        return form_hessian(forms, r * weights)

    res = levenberg_marquardt(
        fun,
        theta0,
        max_iter=max_iter,
        gtol=gtol,
        check_monotone=check_monotone,
        second_order=second_order,
    )
    if not res.converged:
        raise ConvergenceError(
            f"{what} MLE did not converge ({res.reason}, gradient norm {res.grad_norm:.3e} "
            f"after {res.iterations} iterations)",
            last_iterate=res.x,
            gradient_norm=res.grad_norm,
            iterations=res.iterations,
        )
    return res


def mle_state(samples, gtol=1e-9, max_iter=500, check_monotone=False):
    """Maximum-likelihood density matrix from analyzer readings.

    ``samples`` has shape (6,) or (6, repeats) in (H, V, D, A, R, L) order.
    Per-point variances are the variance of the repeat mean, floored at 1e-6.

    Raises:
        ConvergenceError: carrying the last iterate and gradient norm.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    observed, var = _mean_and_variance(samples)
    sigma = np.sqrt(var)
    rel = sigma / sigma.min()
    lin = linear_state_reconstruction(observed)
    scale = observed[0] + observed[1]
    theta0 = params_from_psd(lin * scale, mix=0.05)
    res = _run_mle(
        lambda th: state_objective(th, observed, rel),
        theta0,
        gtol,
        max_iter,
        check_monotone,
        "state",
        PROJECTORS,
        1 / rel,
    )
    m = params_to_psd(res.x, 2)
    rho = hermitian_part(m / np.trace(m).real)
    loglik = -0.5 * float(np.sum(((linear_forms(res.x, PROJECTORS)[0] - observed) / sigma) ** 2))
    return StateEstimate(rho, loglik, res.iterations, res.grad_norm)


# ---------------------------------------------------------------------------
# maximum likelihood, process


def _process_forms():
    rhos = [jones_to_density(JONES[s]) for s in STATE_LABELS]
    gs = []
    for rho in rhos:
        for proj in PROJECTORS:
            # p = sum_ij chi_ij Tr(P sigma_i rho sigma_j) = Tr(chi G) with G[j, i] = Tr(P sigma_i rho sigma_j)
            k = np.einsum("ab,ibc,cd,jda->ij", proj, PAULI, rho, PAULI)
            gs.append(k.T)
    tp = []
    for k in range(4):
        # c_k = sum_ij chi_ij Tr(sigma_k sigma_j sigma_i) / 2 = Tr(chi G_k)
        tp.append(np.einsum("ab,jbc,ica->ji", PAULI[k], PAULI, PAULI) / 2)
    return np.array(gs), np.array(tp)


_PROCESS_G, _TP_G = _process_forms()
_ALL_G = np.concatenate([_PROCESS_G, _TP_G])


def tp_residual(chi):
    """sum_ij chi_ij sigma_j sigma_i - I."""
    chi = np.asarray(chi, dtype=complex)
    return np.einsum("ij,jab,ibc->ac", chi, PAULI, PAULI) - np.eye(2)


def tp_deviation(chi):
    return float(np.max(np.abs(tp_residual(chi))))


def process_objective(theta, observed, sigma, penalty):
    pred, jac = linear_forms(theta, _PROCESS_G)
    tp_val, tp_jac = linear_forms(theta, _TP_G)
    tp_val = tp_val - np.array([1.0, 0.0, 0.0, 0.0])
    w = np.sqrt(penalty)
    r = np.concatenate([(pred - observed) / sigma, w * tp_val])
    j = np.vstack([jac / sigma[:, None], w * tp_jac])
    return r, j


def _tp_projection(chi):
    """Frobenius-nearest Hermitian chi satisfying trace preservation exactly."""
    # Hermitian chi <-> 16 reals: coefficients on an orthonormal Hermitian basis
    basis = []
    for a in range(4):
        for b in range(4):
            e = np.zeros((4, 4), dtype=complex)
            if a == b:
                e[a, a] = 1
            elif a < b:
                e[a, b] = e[b, a] = 1 / np.sqrt(2)
            else:
                e[a, b], e[b, a] = 1j / np.sqrt(2), -1j / np.sqrt(2)
            basis.append(e)
    basis = np.array(basis)
    x = np.einsum("kab,ab->k", basis.conj(), chi).real
    # constraint rows: Pauli coefficients of the TP operator
    a_mat = np.array([[np.einsum("ij,ij->", b, g.T).real for b in basis] for g in _TP_G])
    target = np.array([1.0, 0.0, 0.0, 0.0])
    corr = np.linalg.pinv(a_mat) @ (a_mat @ x - target)
    return np.einsum("k,kab->ab", x - corr, basis)


def _restore_positivity(chi):
    # mixing with the TP depolarizing channel I/4 keeps trace preservation exact
    lam = eigh(chi)[0][0]
    if lam >= 0:
        return chi
    eps = -lam / (0.25 - lam)
    return (1 - eps) * chi + eps * np.eye(4) / 4


def _normalization(dataset):
    # mean port throughput: each input's three analyzer pairs each sum to it
    return float(dataset.intensities.mean(axis=2).sum(axis=1).mean() / 3)


def mle_process(dataset, gtol=1e-9, max_iter=500, check_monotone=False, max_escalations=12):
    """Completely positive, trace-preserving chi from a one-port dataset.

    Intensities are divided by the mean port throughput. Trace preservation
    is imposed by a quadratic penalty whose weight grows x10 until the
    deviation is below 1e-6, then by exact projection onto the TP subspace;
    any eigenvalue pushed below zero by that projection is removed by mixing
    in the fully depolarizing channel.

    Raises:
        ConvergenceError: if the optimizer stalls away from a stationary point
            or the penalty cannot reach the TP tolerance.
    """
    intens = dataset.intensities
    if intens.shape[:2] != (6, 6):
        raise ValueError(f"tomography dataset must be a full 6x6 grid, got {intens.shape[:2]}")
    norm = _normalization(dataset)
    if norm <= 0:
        raise DegenerateStateError("tomography dataset carries no signal")
    observed, var = _mean_and_variance(intens / norm)
    observed = observed.ravel()
    sigma = np.sqrt(var).ravel()
    sigma = sigma / sigma.min()

    lin = linear_process_from_dataset(dataset)
    theta = params_from_psd(lin / np.trace(lin).real, mix=0.05)
    penalty = 1.0
    total_iter = 0
    for _ in range(max_escalations + 1):
        res = _run_mle(
            lambda th: process_objective(th, observed, sigma, penalty),
            theta,
            gtol,
            max_iter,
            check_monotone,
            "process",
            _ALL_G,
            np.concatenate([1 / sigma, np.full(4, np.sqrt(penalty))]),
        )
        theta = res.x
        total_iter += res.iterations
        chi = params_to_psd(theta, 4)
        if tp_deviation(chi) < TP_TOL:
            break
        penalty *= 10
    else:
        raise ConvergenceError(
            f"trace-preservation deviation {tp_deviation(chi):.3e} after {max_escalations} penalty escalations",
            last_iterate=theta,
            gradient_norm=res.grad_norm,
            iterations=total_iter,
        )
    chi = _restore_positivity(hermitian_part(_tp_projection(chi)))
    return hermitian_part(chi)


# ---------------------------------------------------------------------------
# channels and fidelity


def ideal_chi(label="I"):
    """Pauli channel chi with a single unit entry on the diagonal."""
    chi = np.zeros((4, 4), dtype=complex)
    i = "IXYZ".index(label)
    chi[i, i] = 1
    return chi


def chi_from_unitary(u):
    """chi of rho -> U rho U^dagger."""
    c = np.einsum("kab,ba->k", PAULI, np.asarray(u, dtype=complex)) / 2
    return np.outer(c, c.conj())


def apply_chi(chi, rho):
    return np.einsum("ij,iab,bc,jdc->ad", chi, PAULI, rho, PAULI.conj())


def process_fidelity(chi_e, chi_i):
    """[Tr sqrt(sqrt(chi_e) chi_i sqrt(chi_e))]^2 on unit-trace process matrices."""
    for name, chi in (("chi_e", chi_e), ("chi_i", chi_i)):
        chi = np.asarray(chi)
        if chi.shape != (4, 4):
            raise PhysicalityError(f"{name} must be 4x4, got {chi.shape}")
    return state_fidelity(np.asarray(chi_e, dtype=complex), np.asarray(chi_i, dtype=complex))


def min_eigenvalue(m):
    return float(eigh(m)[0][0])


def is_physical_chi(chi, tp_tol=TP_TOL):
    return min_eigenvalue(chi) >= -EIG_CLAMP and tp_deviation(chi) <= tp_tol


def _frame_change(u):
    """M with M[k, i] = Tr(sigma_k U sigma_i) / 2, so chi -> M chi M^dagger conjugates the channel output by U."""
    return np.einsum("kab,bc,ica->ki", PAULI, np.asarray(u, dtype=complex), PAULI) / 2


def conjugate_output(chi, u):
    """chi of the channel rho -> U E(rho) U^dagger."""
    m = _frame_change(u)
    return m @ chi @ m.conj().T


def port2_frame_correction(obj):
    """Undo the port-2 H-axis inversion on a chi matrix or a tomography dataset.

    For a dataset the analyzer outcomes are relabeled (D<->A, R<->L) and the
    ``frame_corrected`` flag toggles; the operation is an involution.
    """
    if isinstance(obj, TomographyDataset):
        return replace(
            obj,
            intensities=obj.intensities[:, _FLIP_PERMUTATION, :].copy(),
            frame_corrected=not obj.frame_corrected,
            metadata=dict(obj.metadata),
        )
    chi = np.asarray(obj, dtype=complex)
    if chi.shape != (4, 4):
        raise ValueError(f"expected a 4x4 chi or a TomographyDataset, got shape {chi.shape}")
    return conjugate_output(chi, H_FLIP)


# ---------------------------------------------------------------------------
# repeated experiments


@dataclass(frozen=True)
class Spread:
    mean: float
    std: float
    values: tuple


def bootstrap_uncertainty(generator, n=10, seed=0):
    """Run ``generator(seed_i)`` for ``n`` independent seeds and summarize each returned quantity.

    ``generator`` returns a mapping name -> float. The reported std is the
    sample standard deviation (ddof=1).
    """
    if n < 2:
        raise ValueError(f"need at least two datasets, got {n}")
    seeds = np.random.SeedSequence(seed).generate_state(n)
    runs = [generator(int(s)) for s in seeds]
    out = {}
    for key in runs[0]:
        vals = np.array([r[key] for r in runs], dtype=float)
        out[key] = Spread(float(vals.mean()), float(vals.std(ddof=1)), tuple(vals.tolist()))
    return out
