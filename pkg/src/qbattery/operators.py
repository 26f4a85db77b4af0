"""Dense complex Hermitian operator algebra on a battery-first tensor product space.

The composite Hilbert space always factors as W (x) S (x) B (x) A with the
battery W as the *first* Kronecker factor, so lifting a battery operator to
the full space is a plain left Kronecker product, ``kron(F, eye(env_dim))``.

Everything here is dense and immutable after construction; the intended
scale is a total dimension D <= 64, where exact eigendecomposition is cheap.
"""

from dataclasses import dataclass

import numpy as np

HERMITICITY_TOL = 1e-10
PSD_TOL = 1e-10
TRACE_INPUT_TOL = 1e-8


class RejectedInputError(ValueError):
    """Input fails a construction precondition."""


class DimensionMismatchError(RejectedInputError):
    """Operands live on Hilbert spaces of different dimension."""


class NotPositiveSemidefiniteError(RejectedInputError):
    """An eigenvalue sits below the -1e-10 repair window."""


class NumericalIntegrityError(RuntimeError):
    """A quantity that is exact in real arithmetic failed its tolerance check."""


def _as_complex_square(mat) -> np.ndarray:
    a = np.asarray(mat, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise RejectedInputError(f"expected a square matrix, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class TensorStructure:
    """Subsystem dimensions (battery, system, bath, ancilla), battery first."""

    d_w: int
    d_s: int = 1
    d_b: int = 1
    d_a: int = 1

    def __post_init__(self):
        for name in ("d_w", "d_s", "d_b", "d_a"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise RejectedInputError(f"{name} must be a positive integer, got {value!r}")

    @property
    def dim(self) -> int:
        """Total dimension D of the composite space."""
        return self.d_w * self.d_s * self.d_b * self.d_a

    @property
    def env_dim(self) -> int:
        """Dimension of everything but the battery (S, B and A together)."""
        return self.d_s * self.d_b * self.d_a

    @classmethod
    def from_dims(cls, dims) -> "TensorStructure":
        dims = tuple(int(d) for d in dims)
        if len(dims) != 4:
            raise RejectedInputError(f"expected 4 dimensions (W,S,B,A), got {len(dims)}")
        return cls(*dims)


class HermitianOperator:
    """A dim x dim complex matrix, checked and symmetrized at construction.

    The residual max|A - A^dag| must not exceed 1e-10; within that window the
    entries are replaced by (A + A^dag)/2 so downstream algebra never sees
    accumulated asymmetry.
    """

    __slots__ = ("mat",)

    def __init__(self, mat):
        a = _as_complex_square(mat)
        residual = np.abs(a - a.conj().T).max() if a.size else 0.0
        if residual > HERMITICITY_TOL:
            raise RejectedInputError(
                f"matrix is not Hermitian: max|A - A^dag| = {residual:.3e} > {HERMITICITY_TOL}"
            )
        a = (a + a.conj().T) / 2.0
        a.setflags(write=False)
        object.__setattr__(self, "mat", a)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    @classmethod
    def identity(cls, dim: int) -> "HermitianOperator":
        return cls(np.eye(dim, dtype=complex))

    def __repr__(self):
        return f"HermitianOperator(dim={self.dim})"


class DensityMatrix:
    """Positive semidefinite, unit-trace Hermitian matrix.

    Construction symmetrizes, renormalizes the trace, and applies the PSD
    repair policy: eigenvalues in [-1e-10, 0) are clamped to zero (round-off
    from propagation), anything below -1e-10 is rejected as a genuine error.
    """

    __slots__ = ("mat",)

    def __init__(self, mat):
        a = _as_complex_square(mat)
        residual = np.abs(a - a.conj().T).max() if a.size else 0.0
        if residual > HERMITICITY_TOL:
            raise RejectedInputError(
                f"density matrix is not Hermitian: residual {residual:.3e} > {HERMITICITY_TOL}"
            )
        a = (a + a.conj().T) / 2.0
        tr = a.trace().real
        if abs(tr - 1.0) > TRACE_INPUT_TOL:
            raise RejectedInputError(f"density matrix trace {tr!r} is not 1 within {TRACE_INPUT_TOL}")
        a = a / tr
        w, u = np.linalg.eigh(a)
        if w.min() < -PSD_TOL:
            raise NotPositiveSemidefiniteError(
                f"density matrix has eigenvalue {w.min():.3e} < -{PSD_TOL}"
            )
        if w.min() < 0.0:
            w = np.clip(w, 0.0, None)
            a = (u * w) @ u.conj().T
            a = (a + a.conj().T) / 2.0
            a = a / a.trace().real
        a.setflags(write=False)
        object.__setattr__(self, "mat", a)
        p = self.purity()
        dim = a.shape[0]
        if not (1.0 / dim - 1e-10 <= p <= 1.0 + 1e-10):
            raise NumericalIntegrityError(f"purity {p!r} outside [1/{dim}, 1]")

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def purity(self) -> float:
        """Tr(rho^2), computed as the squared Frobenius norm of the entries."""
        return float((np.abs(self.mat) ** 2).sum())

    @classmethod
    def from_ket(cls, psi) -> "DensityMatrix":
        """Rank-1 projector |psi><psi| from a (normalizable) state vector."""
        v = np.asarray(psi, dtype=complex).reshape(-1)
        norm = np.linalg.norm(v)
        if norm == 0.0:
            raise RejectedInputError("cannot build a state from the zero vector")
        v = v / norm
        return cls(np.outer(v, v.conj()))

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityMatrix":
        return cls(np.eye(dim, dtype=complex) / dim)

    def __repr__(self):
        return f"DensityMatrix(dim={self.dim}, purity={self.purity():.6f})"


@dataclass(frozen=True)
class EigenDecomposition:
    """Spectral data of a Hermitian matrix: ascending eigenvalues, unitary columns."""

    eigenvalues: np.ndarray
    vectors: np.ndarray


def eig_decompose(op) -> EigenDecomposition:
    """Checked Hermitian eigendecomposition A = U diag(w) U^dag.

    Verifies reconstruction to 1e-9*(1 + max|A|) and column orthonormality
    to 1e-10 before returning, so callers can rely on the factors blindly.
    """
    a = op.mat if isinstance(op, (HermitianOperator, DensityMatrix)) else _as_complex_square(op)
    w, u = np.linalg.eigh(a)
    scale = 1.0 + (np.abs(a).max() if a.size else 0.0)
    recon = np.abs((u * w) @ u.conj().T - a).max()
    if recon > 1e-9 * scale:
        raise NumericalIntegrityError(f"eigendecomposition reconstruction error {recon:.3e}")
    ortho = np.abs(u.conj().T @ u - np.eye(a.shape[0])).max()
    if ortho > 1e-10:
        raise NumericalIntegrityError(f"eigenvector columns not orthonormal: {ortho:.3e}")
    w.setflags(write=False)
    u.setflags(write=False)
    return EigenDecomposition(eigenvalues=w, vectors=u)


def embed_battery_op(f: HermitianOperator, s: TensorStructure) -> HermitianOperator:
    """Lift a battery operator to the full space as F (x) identity on S,B,A."""
    if f.dim != s.d_w:
        raise DimensionMismatchError(f"battery operator dim {f.dim} != d_w {s.d_w}")
    return HermitianOperator(np.kron(f.mat, np.eye(s.env_dim, dtype=complex)))


def partial_trace_to_battery(rho: DensityMatrix, s: TensorStructure) -> DensityMatrix:
    """Reduced battery state, tracing out the S, B and A factors."""
    if rho.dim != s.dim:
        raise DimensionMismatchError(f"state dim {rho.dim} != structure dim {s.dim}")
    r = rho.mat.reshape(s.d_w, s.env_dim, s.d_w, s.env_dim)
    return DensityMatrix(np.einsum("iaja->ij", r))


def matrix_sqrt(rho: DensityMatrix) -> HermitianOperator:
    """Positive square root of a state via spectral decomposition.

    Eigenvalues in [-1e-10, 0) are clamped to zero; the result squares back
    to rho within 1e-9 in max norm (checked).
    """
    dec = eig_decompose(rho)
    w = dec.eigenvalues
    if w.min() < -PSD_TOL:
        raise NotPositiveSemidefiniteError(f"eigenvalue {w.min():.3e} < -{PSD_TOL}")
    w = np.clip(w, 0.0, None)
    u = dec.vectors
    root = (u * np.sqrt(w)) @ u.conj().T
    result = HermitianOperator(root)
    err = np.abs(result.mat @ result.mat - rho.mat).max()
    if err > 1e-9:
        raise NumericalIntegrityError(f"sqrt(rho)^2 deviates from rho by {err:.3e}")
    return result


def expectation(rho: DensityMatrix, a: HermitianOperator) -> float:
    """Re Tr(rho A); the imaginary part must vanish to 1e-10 (both are Hermitian)."""
    if rho.dim != a.dim:
        raise DimensionMismatchError(f"state dim {rho.dim} != operator dim {a.dim}")
    t = np.einsum("ij,ji->", rho.mat, a.mat)
    if abs(t.imag) > 1e-10 * (1.0 + abs(t.real)):
        raise NumericalIntegrityError(f"expectation has imaginary part {t.imag:.3e}")
    return float(t.real)


def commutator(a: HermitianOperator, b: HermitianOperator) -> np.ndarray:
    """AB - BA for Hermitian A, B; the result is checked to be anti-Hermitian."""
    if a.dim != b.dim:
        raise DimensionMismatchError(f"operator dims differ: {a.dim} != {b.dim}")
    c = a.mat @ b.mat - b.mat @ a.mat
    scale = 1.0 + (np.abs(c).max() if c.size else 0.0)
    residual = np.abs(c + c.conj().T).max() if c.size else 0.0
    if residual > 1e-10 * scale:
        raise NumericalIntegrityError(f"commutator not anti-Hermitian: residual {residual:.3e}")
    return c


def to_matrix_literal(mat) -> dict:
    """JSON-ready dict {dim, re, im} with row-major entry lists."""
    a = mat.mat if isinstance(mat, (HermitianOperator, DensityMatrix)) else _as_complex_square(mat)
    return {
        "dim": int(a.shape[0]),
        "re": a.real.tolist(),
        "im": a.imag.tolist(),
    }


def matrix_from_literal(obj) -> np.ndarray:
    """Parse the {dim, re, im} matrix literal format into a complex ndarray."""
    if not isinstance(obj, dict):
        raise RejectedInputError(f"matrix literal must be an object, got {type(obj).__name__}")
    try:
        dim = int(obj["dim"])
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj["im"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise RejectedInputError(f"malformed matrix literal: {exc}") from exc
    if re.shape != (dim, dim) or im.shape != (dim, dim):
        raise RejectedInputError(
            f"matrix literal arrays must be {dim}x{dim}, got re {re.shape} and im {im.shape}"
        )
    return re + 1j * im


def hermitian_from_literal(obj) -> HermitianOperator:
    return HermitianOperator(matrix_from_literal(obj))


def density_from_literal(obj) -> DensityMatrix:
    return DensityMatrix(matrix_from_literal(obj))
