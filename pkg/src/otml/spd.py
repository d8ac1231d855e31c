"""Numerically robust primitives on symmetric positive definite matrices.

All matrix functions go through the symmetric eigendecomposition, which is
the simplest route to a correct principal root. Inputs are symmetrized
before decomposition so that accumulated round-off asymmetry cannot leak
into eigenvalue signs, and results of the quadratic solve and the geometric
mean are re-symmetrized before return so that drift does not build up over
repeated alternating updates.
"""

import numpy as np

# An eigenvalue counts as "non positive" when it falls below this fraction
# of max(1, largest eigenvalue). Scale-relative so that well-posed inputs
# of any magnitude never trip a false positivity failure.
POSITIVITY_RTOL = 1e-12


class PositivityError(ValueError):
    """Raised when a matrix that must be positive definite is not."""


def symmetrize(mat: np.ndarray) -> np.ndarray:
    """Return the symmetric part (M + M^T) / 2 of a square matrix.

    Parameters
    ----------
    mat : ndarray of shape (d, d)
        Square matrix.

    Returns
    -------
    ndarray of shape (d, d)
        Symmetric matrix, equal to its own transpose exactly.
    """
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {mat.shape}")
    return (mat + mat.T) / 2.0


def eigh_spd(mat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix, checked for positivity.

    Parameters
    ----------
    mat : ndarray of shape (d, d)
        Matrix assumed symmetric positive definite. Symmetrized first.

    Returns
    -------
    eigenvalues : ndarray of shape (d,)
        Eigenvalues in ascending order, all strictly positive.
    eigenvectors : ndarray of shape (d, d)
        Orthogonal matrix of eigenvectors (columns).

    Raises
    ------
    PositivityError
        If the smallest eigenvalue is below the scale-relative floor.
    """
    w, v = np.linalg.eigh(symmetrize(mat))
    floor = POSITIVITY_RTOL * max(1.0, float(w[-1]))
    if w[0] < floor:
        raise PositivityError(
            f"matrix is not positive definite: min eigenvalue {w[0]:.3e} "
            f"below floor {floor:.3e}"
        )
    return w, v


def spd_sqrt(mat: np.ndarray) -> np.ndarray:
    """Principal square root of an SPD matrix.

    Returns the unique SPD matrix B with B @ B = mat.
    """
    w, v = eigh_spd(mat)
    return symmetrize((v * np.sqrt(w)) @ v.T)


def _psd_sqrt(mat: np.ndarray) -> np.ndarray:
    """Square root of a matrix known to be PSD up to round-off.

    Congruences P M P of a definite M are positive in exact arithmetic,
    but when the product is nearly singular the computed eigenvalues can
    land a hair below zero. Clamping them at zero is the correct reading
    of such inputs, so no positivity check is applied here.
    """
    w, v = np.linalg.eigh(symmetrize(mat))
    return symmetrize((v * np.sqrt(np.maximum(w, 0.0))) @ v.T)


def spd_inv_sqrt(mat: np.ndarray) -> np.ndarray:
    """Inverse principal square root of an SPD matrix.

    Returns the unique SPD matrix B with B @ mat @ B = identity.
    """
    w, v = eigh_spd(mat)
    return symmetrize((v / np.sqrt(w)) @ v.T)


def spd_inv(mat: np.ndarray) -> np.ndarray:
    """Inverse of an SPD matrix via eigendecomposition."""
    w, v = eigh_spd(mat)
    return symmetrize((v / w) @ v.T)


def riccati_solve(c: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Solve the quadratic matrix equation A @ C @ A = D for SPD A.

    The unique SPD solution is C^{-1/2} (C^{1/2} D C^{1/2})^{1/2} C^{-1/2}.

    Parameters
    ----------
    c, d : ndarray of shape (d, d)
        SPD matrices of equal dimension.

    Returns
    -------
    ndarray of shape (d, d)
        The SPD solution, symmetrized before return.
    """
    c = np.asarray(c, dtype=float)
    d = np.asarray(d, dtype=float)
    if c.shape != d.shape:
        raise ValueError(f"dimension mismatch: {c.shape} vs {d.shape}")
    c_half = spd_sqrt(c)
    c_inv_half = spd_inv_sqrt(c)
    inner = _psd_sqrt(c_half @ symmetrize(d) @ c_half)
    return symmetrize(c_inv_half @ inner @ c_inv_half)


def geometric_mean(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Affine-invariant geometric mean of two SPD matrices.

    Computed as P^{1/2} (P^{-1/2} Q P^{-1/2})^{1/2} P^{1/2}, the midpoint
    of the geodesic joining P and Q under the affine-invariant geometry.
    Coincides with the solution A of A @ P^{-1} @ A = Q, so
    ``geometric_mean(inv(C), D) == riccati_solve(C, D)``.

    Parameters
    ----------
    p, q : ndarray of shape (d, d)
        SPD matrices of equal dimension.

    Returns
    -------
    ndarray of shape (d, d)
        The geometric mean, symmetrized before return.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"dimension mismatch: {p.shape} vs {q.shape}")
    p_half = spd_sqrt(p)
    p_inv_half = spd_inv_sqrt(p)
    inner = _psd_sqrt(p_inv_half @ symmetrize(q) @ p_inv_half)
    return symmetrize(p_half @ inner @ p_half)


def eigen_floor(mat: np.ndarray, eps: float, always: bool = True) -> np.ndarray:
    """Lift a symmetric matrix to a safely positive definite one.

    By default adds ``eps * I`` unconditionally, which keeps results
    deterministic and independent of how close the input already is to
    singular. With ``always=False`` the lift is skipped when the smallest
    eigenvalue already clears ``eps``; the matrix is then only revalidated.

    Parameters
    ----------
    mat : ndarray of shape (d, d)
        Symmetric matrix (symmetrized first).
    eps : float
        Positive lift added to the diagonal.
    always : bool
        Apply the lift unconditionally (default) or only when needed.

    Returns
    -------
    ndarray of shape (d, d)
        SPD matrix.
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    sym = symmetrize(mat)
    if not always:
        w = np.linalg.eigvalsh(sym)
        if w[0] > eps:
            eigh_spd(sym)  # revalidate
            return sym
    return sym + eps * np.eye(sym.shape[0])


def trace_inner(a: np.ndarray, b: np.ndarray) -> float:
    """Trace inner product trace(A @ B) of two symmetric matrices.

    For symmetric arguments this equals the elementwise sum of A * B.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.sum(a * b))
