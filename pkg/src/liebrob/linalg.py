"""Dense complex-matrix helpers: Schatten norms, Hermitian exponentials,
tensor embedding of local operators, commutators and conjugation.

Site 0 is always the most significant tensor factor.
"""

import numpy as np

from .errors import InvalidInputError

HERMITIAN_RTOL = 1e-12
UNITARY_TOL = 1e-10
CLAMP = 1e-14


def as_matrix(M):
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 1:
        raise InvalidInputError(f"expected a non-empty square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InvalidInputError("matrix has non-finite entries")
    return M.astype(complex, copy=False)


def singular_spectrum(M):
    """Singular values, non-increasing, from the eigenvalues of M^dagger M.

    Eigenvalues down to -1e-14 are treated as round-off and clamped to zero.
    """
    M = as_matrix(M)
    ev = np.linalg.eigvalsh(M.conj().T @ M)
    if ev.min() < -CLAMP * max(1.0, abs(ev).max()):
        raise InvalidInputError(f"Gram matrix has eigenvalue {ev.min():.3e} below clamp")
    return np.sqrt(np.clip(ev, 0.0, None))[::-1]


def schatten_norm(M, p):
    """Schatten p-norm (sum nu_i^p)^(1/p); p may be np.inf."""
    if not (p == np.inf or p >= 1):
        raise InvalidInputError(f"Schatten order must be >= 1 or inf, got {p}")
    nu = singular_spectrum(M)
    if p == np.inf:
        return float(nu[0])
    if p == 2:
        return float(np.sqrt(np.sum(nu**2)))
    top = nu[0]
    if top == 0.0:
        return 0.0
    return float(top * np.sum((nu / top) ** p) ** (1.0 / p))


def spectral_norm(M):
    return schatten_norm(M, np.inf)


def is_hermitian(M, rtol=HERMITIAN_RTOL):
    M = np.asarray(M)
    dev = np.max(np.abs(M - M.conj().T)) if M.size else 0.0
    scale = np.linalg.norm(M, 2) if M.size else 0.0
    return dev <= rtol * max(scale, 1e-300) or dev == 0.0


def hermitian_exponential(H, scale):
    """Return exp(-i * scale * H) for Hermitian H via eigendecomposition."""
    H = as_matrix(H)
    if not is_hermitian(H):
        raise InvalidInputError("hermitian_exponential needs a Hermitian matrix")
    w, V = np.linalg.eigh(0.5 * (H + H.conj().T))
    return (V * np.exp(-1j * scale * w)) @ V.conj().T


def embed_local(op, support, n_sites, local_dim=2):
    """Embed op acting on the ordered `support` into the full D^N space.

    The k-th tensor factor of op acts on site support[k].
    """
    op = as_matrix(op)
    support = [int(s) for s in support]
    k = len(support)
    if k == 0:
        raise InvalidInputError("support must be non-empty")
    if len(set(support)) != k or min(support) < 0 or max(support) >= n_sites:
        raise InvalidInputError(f"bad support {support} for {n_sites} sites")
    D = int(local_dim)
    if op.shape[0] != D**k:
        raise InvalidInputError(f"operator dim {op.shape[0]} != {D}^{k}")
    rest = [s for s in range(n_sites) if s not in support]
    full = np.kron(op, np.eye(D ** len(rest), dtype=complex))
    order = support + rest
    # axes of `full` are labelled by `order`; permute to natural site order
    perm = np.argsort(order)
    t = full.reshape([D] * (2 * n_sites))
    t = t.transpose(list(perm) + [n_sites + q for q in perm])
    return t.reshape(D**n_sites, D**n_sites)


def commutator(A, B):
    A = np.asarray(A)
    B = np.asarray(B)
    if A.shape != B.shape:
        raise InvalidInputError(f"dimension mismatch {A.shape} vs {B.shape}")
    return A @ B - B @ A


def is_unitary(U, tol=UNITARY_TOL):
    U = np.asarray(U)
    eye = np.eye(U.shape[0])
    return np.linalg.norm(U.conj().T @ U - eye, 2) <= tol


def conjugate(U, O, check=True):
    """Return U O U^dagger."""
    U = np.asarray(U)
    O = np.asarray(O)
    if U.shape != O.shape:
        raise InvalidInputError(f"dimension mismatch {U.shape} vs {O.shape}")
    if check and not is_unitary(U):
        raise InvalidInputError("conjugate needs a unitary matrix")
    return U @ O @ U.conj().T


def apply_local_conjugation(O, gate, sites, n_sites, local_dim=2):
    """Return G^dagger O G where G is `gate` on consecutive `sites`, without
    materialising the embedded gate.

    `sites` must be increasing and contiguous.
    """
    D = local_dim
    lo = sites[0]
    k = len(sites)
    left = D**lo
    mid = D**k
    right = D ** (n_sites - lo - k)
    dim = O.shape[0]
    # left factor: (G^dagger O) acts on the row index
    t = np.matmul(gate.conj().T, O.reshape(left, mid, right * dim))
    # right factor: (O G) acts on the column index
    t = np.matmul(gate.T, t.reshape(dim * left, mid, right))
    return t.reshape(dim, dim)
