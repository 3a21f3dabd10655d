"""Covariance-matrix algebra for zero-mean Gaussian states.

Quadratures are ordered (x1, p1, x2, p2, ...) and measured in shot-noise
units, so the vacuum has covariance equal to the identity.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

SYMMETRY_TOL = 1e-12
PHYSICAL_TOL = 1e-9
UNPHYSICAL_TOL = 1e-6


class GaussianError(ValueError):
    """Raised for invalid parameters or unphysical states."""


class CovarianceMatrix:
    """Immutable 2n x 2n covariance matrix of an n-mode Gaussian state."""

    __slots__ = ("_m",)

    def __init__(self, matrix):
        m = np.array(matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] % 2:
            raise GaussianError(f"covariance matrix must be 2n x 2n, got {m.shape}")
        if m.shape[0] == 0:
            raise GaussianError("covariance matrix must have at least one mode")
        scale = max(1.0, float(np.max(np.abs(m))))
        if np.max(np.abs(m - m.T)) > SYMMETRY_TOL * scale:
            raise GaussianError("covariance matrix is not symmetric")
        m = 0.5 * (m + m.T)
        m.setflags(write=False)
        self._m = m

    @property
    def matrix(self) -> np.ndarray:
        return self._m

    @property
    def n_modes(self) -> int:
        return self._m.shape[0] // 2

    def block(self, i: int, j: int | None = None) -> np.ndarray:
        """2x2 block between modes i and j (j defaults to i)."""
        j = i if j is None else j
        return self._m[2 * i:2 * i + 2, 2 * j:2 * j + 2]

    def submatrix(self, modes: Sequence[int]) -> "CovarianceMatrix":
        idx = quadrature_indices(modes)
        return CovarianceMatrix(self._m[np.ix_(idx, idx)])

    def __add__(self, other: "CovarianceMatrix") -> "CovarianceMatrix":
        # direct sum, not matrix addition
        return direct_sum(self, other)

    def __eq__(self, other):
        if not isinstance(other, CovarianceMatrix):
            return NotImplemented
        return self._m.shape == other._m.shape and bool(np.array_equal(self._m, other._m))

    def __hash__(self):
        return hash(self._m.tobytes())

    def allclose(self, other, atol=1e-12) -> bool:
        other = other.matrix if isinstance(other, CovarianceMatrix) else np.asarray(other)
        return self._m.shape == other.shape and bool(np.allclose(self._m, other, rtol=0, atol=atol))

    def __repr__(self):
        return f"CovarianceMatrix(n_modes={self.n_modes})"


def quadrature_indices(modes: Iterable[int]) -> list[int]:
    idx = []
    for m in modes:
        idx.extend((2 * m, 2 * m + 1))
    return idx


def symplectic_form(n: int) -> np.ndarray:
    if n < 1:
        raise GaussianError("number of modes must be >= 1")
    return np.kron(np.eye(n), np.array([[0.0, 1.0], [-1.0, 0.0]]))


# ---------------------------------------------------------------- builders

def vacuum(n: int = 1) -> CovarianceMatrix:
    if n < 1:
        raise GaussianError("number of modes must be >= 1")
    return CovarianceMatrix(np.eye(2 * n))


def squeezed_state(V_s: float) -> CovarianceMatrix:
    """Pure single-mode state with x variance V_s and p variance 1/V_s."""
    if not V_s > 0:
        raise GaussianError(f"squeezed variance must be positive, got {V_s}")
    return CovarianceMatrix(np.diag([V_s, 1.0 / V_s]))


def thermal_state(V: float) -> CovarianceMatrix:
    if V < 1:
        raise GaussianError(f"thermal variance must be >= 1, got {V}")
    return CovarianceMatrix(np.diag([V, V]))


def epr_state(V: float) -> CovarianceMatrix:
    """Two-mode squeezed vacuum with local variance V."""
    if V < 1:
        raise GaussianError(f"EPR variance must be >= 1, got {V}")
    c = math.sqrt(V * V - 1.0)
    z = np.diag([c, -c])
    return CovarianceMatrix(np.block([[V * np.eye(2), z], [z, V * np.eye(2)]]))


def two_squeezer_state(x_var: float, p_var: float) -> CovarianceMatrix:
    """Pure two-mode state with equal marginals Diag(x_var, p_var).

    Built by interfering the squeezed states Diag(a, 1/a) and Diag(1/b, b) on
    a balanced beam splitter.  With x_var == p_var this is an EPR state.
    """
    if x_var * p_var < 1 - PHYSICAL_TOL:
        raise GaussianError("marginal violates the uncertainty relation")
    a = x_var + math.sqrt(max(x_var * x_var - x_var / p_var, 0.0))
    # 2 x_var - a, rearranged to avoid cancellation at large variance
    state = direct_sum(squeezed_state(a), squeezed_state(x_var / (p_var * a)))
    return apply_beamsplitter(state, 0, 1, 0.5)


def direct_sum(*states: CovarianceMatrix) -> CovarianceMatrix:
    from scipy.linalg import block_diag

    return CovarianceMatrix(block_diag(*(s.matrix for s in states)))


# ------------------------------------------------------ symplectic operations

def _check_mode(state: CovarianceMatrix, i: int):
    if not 0 <= i < state.n_modes:
        raise GaussianError(f"mode index {i} out of range for {state.n_modes} modes")


def beamsplitter_matrix(n: int, i: int, j: int, T: float) -> np.ndarray:
    t, r = math.sqrt(T), math.sqrt(1.0 - T)
    S = np.eye(2 * n)
    for q in (0, 1):
        a, b = 2 * i + q, 2 * j + q
        S[a, a], S[a, b] = t, r
        S[b, a], S[b, b] = -r, t
    return S


def phase_matrix(n: int, i: int, phi: float) -> np.ndarray:
    S = np.eye(2 * n)
    c, s = math.cos(phi), math.sin(phi)
    S[2 * i:2 * i + 2, 2 * i:2 * i + 2] = [[c, s], [-s, c]]
    return S


def apply_symplectic(state: CovarianceMatrix, S: np.ndarray) -> CovarianceMatrix:
    return CovarianceMatrix(S @ state.matrix @ S.T)


def apply_beamsplitter(state: CovarianceMatrix, i: int, j: int, T: float) -> CovarianceMatrix:
    """Mix modes i and j: r_i' = sqrt(T) r_i + sqrt(1-T) r_j, r_j' = -sqrt(1-T) r_i + sqrt(T) r_j."""
    if not 0.0 <= T <= 1.0:
        raise GaussianError(f"transmittance must lie in [0, 1], got {T}")
    if i == j:
        raise GaussianError("beam splitter needs two distinct modes")
    _check_mode(state, i)
    _check_mode(state, j)
    return apply_symplectic(state, beamsplitter_matrix(state.n_modes, i, j, T))


def apply_phase(state: CovarianceMatrix, i: int, phi: float) -> CovarianceMatrix:
    _check_mode(state, i)
    return apply_symplectic(state, phase_matrix(state.n_modes, i, phi))


def apply_gaussian_channel(state: CovarianceMatrix, i: int, eta: float, noise: float) -> CovarianceMatrix:
    """Phase-insensitive lossy channel on mode i with excess noise referred to the input.

    The mode covariance maps to eta*(gamma + noise) + (1 - eta).
    """
    if not 0.0 <= eta <= 1.0:
        raise GaussianError(f"transmittance must lie in [0, 1], got {eta}")
    if noise < 0:
        raise GaussianError("excess noise must be non-negative")
    _check_mode(state, i)
    n = state.n_modes
    X = np.eye(2 * n)
    X[2 * i, 2 * i] = X[2 * i + 1, 2 * i + 1] = math.sqrt(eta)
    Y = np.zeros((2 * n, 2 * n))
    Y[2 * i, 2 * i] = Y[2 * i + 1, 2 * i + 1] = 1.0 - eta + eta * noise
    return CovarianceMatrix(X @ state.matrix @ X.T + Y)


# ------------------------------------------------------------- measurements

def condition_on_homodyne(state: CovarianceMatrix, measured_mode: int, quadrature: str = "x") -> CovarianceMatrix:
    """Covariance of the remaining modes after homodyning one quadrature.

    The pseudoinverse of the projected block is taken analytically: only the
    measured variance is inverted.
    """
    _check_mode(state, measured_mode)
    if state.n_modes < 2:
        raise GaussianError("conditioning needs at least one remaining mode")
    if quadrature not in ("x", "p"):
        raise GaussianError(f"quadrature must be 'x' or 'p', got {quadrature!r}")
    q = 2 * measured_mode + (0 if quadrature == "x" else 1)
    m = state.matrix
    var = m[q, q]
    if not var > 0:
        raise GaussianError("measured quadrature has zero variance")
    rest = [k for k in range(2 * state.n_modes) if k not in (2 * measured_mode, 2 * measured_mode + 1)]
    A = m[np.ix_(rest, rest)]
    c = m[rest, q]
    return CovarianceMatrix(A - np.outer(c, c) / var)


def condition_on_heterodyne(state: CovarianceMatrix, measured_mode: int) -> CovarianceMatrix:
    """Condition on a balanced-split double homodyne (x on one port, p on the other)."""
    _check_mode(state, measured_mode)
    n = state.n_modes
    s = direct_sum(state, vacuum(1))
    s = apply_beamsplitter(s, measured_mode, n, 0.5)
    s = condition_on_homodyne(s, n, "p")
    return condition_on_homodyne(s, measured_mode, "x")


def condition_on_combination(state: CovarianceMatrix, i: int, j: int, a: float, b: float) -> CovarianceMatrix:
    """Condition on a*x_i + b*x_j, keeping every other mode.

    The two commuting x quadratures are rotated into one mode by a beam
    splitter; its partner output is traced out.
    """
    if a == 0 and b == 0:
        raise GaussianError("combination weights are both zero")
    s = state
    if a < 0:
        a, b = -a, -b
    if b < 0:
        s = apply_phase(s, j, math.pi)
        b = -b
    s = apply_beamsplitter(s, i, j, a * a / (a * a + b * b))
    keep = [k for k in range(s.n_modes) if k != j]
    s = s.submatrix(keep)
    return condition_on_homodyne(s, keep.index(i), "x")


# ------------------------------------------------------------------ entropy

def symplectic_eigenvalues(state: CovarianceMatrix) -> list[float]:
    """Symplectic spectrum in descending order, near-unit values clamped to 1."""
    m = state.matrix
    n = state.n_modes
    if n == 1:
        nus = [math.sqrt(max(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0], 0.0))]
    else:
        # local squeezing equalizes x and p scales; it is symplectic, so the spectrum is unchanged
        d = np.ones(2 * n)
        for k in range(n):
            if m[2 * k, 2 * k] > 0 and m[2 * k + 1, 2 * k + 1] > 0:
                s = (m[2 * k + 1, 2 * k + 1] / m[2 * k, 2 * k]) ** 0.25
                d[2 * k], d[2 * k + 1] = s, 1.0 / s
        m = m * np.outer(d, d)
        ev = np.linalg.eigvals(1j * symplectic_form(n) @ m)
        if not np.all(np.isfinite(ev)):
            raise GaussianError("symplectic eigenvalue computation did not converge")
        mags = np.sort(np.abs(ev))[::-1]
        nus = [float(0.5 * (mags[2 * k] + mags[2 * k + 1])) for k in range(n)]
    out = []
    for nu in nus:
        if nu < 1.0 - UNPHYSICAL_TOL:
            raise GaussianError(f"unphysical symplectic eigenvalue {nu:.12g}")
        out.append(1.0 if nu < 1.0 else nu)
    return sorted(out, reverse=True)


def bosonic_entropy(x: float) -> float:
    """g(x) = (x+1) log2(x+1) - x log2(x), with g(0) = 0."""
    if x <= 0:
        return 0.0
    return (x + 1.0) * math.log2(x + 1.0) - x * math.log2(x)


def von_neumann_entropy(state: CovarianceMatrix) -> float:
    return math.fsum(bosonic_entropy((nu - 1.0) / 2.0) for nu in symplectic_eigenvalues(state))


def is_physical(state: CovarianceMatrix) -> bool:
    try:
        nus = symplectic_eigenvalues(state)
    except GaussianError:
        return False
    return min(nus) >= 1.0 - PHYSICAL_TOL and bool(np.all(np.linalg.eigvalsh(state.matrix) > 0))


def two_mode_symplectic_eigenvalues(state: CovarianceMatrix) -> tuple[float, float]:
    """Closed form nu_{+,-} for a two-mode state."""
    if state.n_modes != 2:
        raise GaussianError("closed form applies to two-mode states only")
    A, B, C = state.block(0), state.block(1), state.block(0, 1)
    delta = np.linalg.det(A) + np.linalg.det(B) + 2 * np.linalg.det(C)
    det = np.linalg.det(state.matrix)
    root = math.sqrt(max(delta * delta - 4 * det, 0.0))
    return math.sqrt((delta + root) / 2), math.sqrt(max((delta - root) / 2, 0.0))
