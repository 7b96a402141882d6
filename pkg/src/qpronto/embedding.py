"""Bijective mapping between complex wavefunctions and real state vectors.

A wavefunction ``psi`` in C^n is stored as ``x = [Re(psi); Im(psi)]`` in
R^(2n).  Under this mapping (hbar = 1 throughout):

* the Schrodinger generator ``-i H`` of a Hermitian ``H`` becomes a real
  skew-symmetric 2n x 2n matrix, so ``|x(t)|`` is conserved exactly by the
  continuous dynamics;
* Hermitian quadratic forms ``<psi|Q|psi>`` become ``x^T Q_r x`` with a
  symmetric ``Q_r`` whose two diagonal blocks both equal ``Re(Q)``.
"""

import numpy as np

HERMITIAN_RTOL = 1e-12


def embed_state(psi: np.ndarray) -> np.ndarray:
    """Stack real and imaginary parts of a complex vector."""
    psi = np.asarray(psi, dtype=complex)
    if psi.ndim != 1:
        raise ValueError(f"wavefunction must be a vector, got shape {psi.shape}")
    return np.concatenate([psi.real, psi.imag])


def extract_state(x: np.ndarray) -> np.ndarray:
    """Invert :func:`embed_state`; rejects vectors of odd length."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size % 2:
        raise ValueError(f"real state must have even length, got shape {x.shape}")
    n = x.size // 2
    return x[:n] + 1j * x[n:]


def _hermitian_part(mat: np.ndarray, what: str) -> np.ndarray:
    """Validate Hermiticity (relative tolerance) and symmetrize round-off."""
    mat = np.asarray(mat, dtype=complex)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"{what} must be a square matrix, got shape {mat.shape}")
    defect = np.abs(mat - mat.conj().T).max()
    scale = max(np.abs(mat).max(), 1.0)
    if defect > HERMITIAN_RTOL * scale:
        raise ValueError(
            f"{what} is not Hermitian: max|M - M^dag| = {defect:.3e} "
            f"against scale {scale:.3e}"
        )
    return 0.5 * (mat + mat.conj().T)


def _induced_matrix(m: np.ndarray) -> np.ndarray:
    """Real matrix acting on x that represents the complex map psi -> M psi."""
    return np.block([[m.real, -m.imag], [m.imag, m.real]])


def embed_generator(hermitian: np.ndarray) -> np.ndarray:
    """Real dynamics generator of a Hermitian Hamiltonian.

    Returns the skew-symmetric matrix ``H`` such that ``xdot = H x``
    reproduces ``psidot = -i * hermitian * psi`` under the embedding.
    Non-Hermitian input is rejected with a diagnostic norm.
    """
    h = _hermitian_part(hermitian, "generator")
    return _induced_matrix(-1j * h)


def embed_quadratic(hermitian: np.ndarray) -> np.ndarray:
    """Real quadratic-form matrix: ``<psi|M|psi> == x^T Q x`` exactly.

    Both diagonal blocks of the result equal ``Re(M)``; the off-diagonal
    blocks carry ``Im(M)`` and vanish for real-valued cost matrices.
    """
    m = _hermitian_part(hermitian, "quadratic cost")
    return _induced_matrix(m)


def phase_projector(alpha: np.ndarray) -> np.ndarray:
    """Quadratic weight that vanishes exactly on the global-phase orbit of alpha.

    ``alpha`` is normalized to unit length first, so curves that drift off
    the sphere still yield a positive semi-definite weight.  For unit x,
    ``x^T Phi(alpha) x == 0`` iff the underlying wavefunctions agree up to a
    global phase, and ``Phi(alpha) @ alpha == 0``.
    """
    alpha = np.asarray(alpha, dtype=float)
    if alpha.ndim != 1 or alpha.size % 2:
        raise ValueError(f"real state must have even length, got shape {alpha.shape}")
    nrm = np.linalg.norm(alpha)
    if nrm < 1e-12:
        raise ValueError("phase projector is undefined for the zero vector")
    phi = extract_state(alpha / nrm)
    return embed_quadratic(np.eye(phi.size) - np.outer(phi, phi.conj()))
