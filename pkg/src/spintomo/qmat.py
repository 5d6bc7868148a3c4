"""Complex linear algebra and Pauli-basis machinery for one- and two-qubit states.

Conventions used everywhere in this package: tensor factors are ordered left
to right, the two-qubit basis is |00>, |01>, |10>, |11>, and |0> means spin
up along +z.  Entropies are returned in nats unless a function name says
bits.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

# Validation tolerances.  Callers may override per call; these are the
# package-wide defaults.
HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = -1e-10
COEFF_TOL = 1e-9

_I2 = np.eye(2, dtype=complex)
_SX = np.array([[0, 1], [1, 0]], dtype=complex)
_SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
_SZ = np.array([[1, 0], [0, -1]], dtype=complex)
_PAULIS = (_I2, _SX, _SY, _SZ)
for _p in _PAULIS:
    _p.flags.writeable = False

ALLOWED_DIMS = (2, 4, 8)

AXIS_VECTORS = {
    "x": np.array([1.0, 0.0, 0.0]),
    "y": np.array([0.0, 1.0, 0.0]),
    "z": np.array([0.0, 0.0, 1.0]),
}
for _v in AXIS_VECTORS.values():
    _v.flags.writeable = False

# The 15 nontrivial coefficient slots of a two-qubit Pauli expansion, in the
# fixed order used by design matrices and coefficient vectors.
PAULI_PAIRS = tuple((i, j) for i in range(4) for j in range(4) if (i, j) != (0, 0))


class InvalidStateError(ValueError):
    """A matrix failed density-matrix validation."""


def pauli(i: int) -> np.ndarray:
    """Return sigma_i for i in 0..3, with sigma_0 the identity."""
    if i not in (0, 1, 2, 3):
        raise ValueError(f"Pauli index must be 0..3, got {i}")
    return _PAULIS[i]


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product with the left factor acting on the leading subsystem."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("kron expects 2d arrays")
    return np.kron(a, b)


def pauli_pair(i: int, j: int) -> np.ndarray:
    """Two-qubit basis matrix sigma_i (x) sigma_j."""
    return np.kron(pauli(i), pauli(j))


# sigma_1 . sigma_2 on the two-qubit space, the exchange operator's traceless part.
SIGMA_DOT_SIGMA = sum(pauli_pair(k, k) for k in (1, 2, 3))
SIGMA_DOT_SIGMA.flags.writeable = False


def n_dot_sigma(axis: Iterable[float]) -> np.ndarray:
    """Pauli vector contracted with a real 3-vector."""
    n = np.asarray(axis, dtype=float)
    if n.shape != (3,):
        raise ValueError("axis must be a real 3-vector")
    return n[0] * _SX + n[1] * _SY + n[2] * _SZ


def unit_axis(axis, tol: float = 1e-9) -> np.ndarray:
    """Validate and return a unit 3-vector; accepts 'x'/'y'/'z' names."""
    if isinstance(axis, str):
        try:
            return AXIS_VECTORS[axis]
        except KeyError:
            raise ValueError(f"unknown axis name {axis!r}") from None
    n = np.asarray(axis, dtype=float)
    if n.shape != (3,):
        raise ValueError("axis must be a 3-vector")
    if abs(np.linalg.norm(n) - 1.0) > tol:
        raise ValueError(f"axis must be a unit vector, got norm {np.linalg.norm(n)}")
    return n


class DensityMatrix:
    """A validated quantum state: Hermitian, unit trace, positive semidefinite.

    The wrapped array is copied and frozen at construction.  Dimensions 2, 4
    and 8 are supported (one qubit, a static pair, and flying plus a static
    pair).
    """

    __slots__ = ("_mat",)

    def __init__(self, mat, *, herm_tol: float | None = None,
                 trace_tol: float | None = None, psd_tol: float | None = None):
        herm_tol = HERMITICITY_TOL if herm_tol is None else herm_tol
        trace_tol = TRACE_TOL if trace_tol is None else trace_tol
        psd_tol = PSD_TOL if psd_tol is None else psd_tol

        mat = np.array(mat, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise InvalidStateError(f"density matrix must be square, got shape {mat.shape}")
        if mat.shape[0] not in ALLOWED_DIMS:
            raise InvalidStateError(f"dimension must be one of {ALLOWED_DIMS}, got {mat.shape[0]}")
        herm_err = np.max(np.abs(mat - mat.conj().T))
        if herm_err > herm_tol:
            raise InvalidStateError(f"not Hermitian: max deviation {herm_err:.3e}")
        tr_err = abs(mat.trace() - 1.0)
        if tr_err > trace_tol:
            raise InvalidStateError(f"trace differs from 1 by {tr_err:.3e}")
        evals = np.linalg.eigvalsh(0.5 * (mat + mat.conj().T))
        if evals.min() < psd_tol:
            raise InvalidStateError(f"not positive semidefinite: min eigenvalue {evals.min():.3e}")
        self._mat = mat
        self._mat.flags.writeable = False

    @property
    def mat(self) -> np.ndarray:
        return self._mat

    @property
    def dim(self) -> int:
        return self._mat.shape[0]

    def expect(self, op: np.ndarray) -> float:
        """Expectation value of a Hermitian operator."""
        val = np.trace(self._mat @ op)
        return float(val.real)

    def __repr__(self) -> str:
        return f"DensityMatrix(dim={self.dim})"


def ket_density(psi, tol: float = 1e-12) -> DensityMatrix:
    """Density matrix |psi><psi| of a normalized state vector."""
    v = np.asarray(psi, dtype=complex).reshape(-1)
    nrm = np.linalg.norm(v)
    if abs(nrm - 1.0) > tol:
        raise InvalidStateError(f"state vector norm {nrm} differs from 1")
    return DensityMatrix(np.outer(v, v.conj()))


def polarized_qubit(axis, sign: int = +1) -> DensityMatrix:
    """Pure qubit state fully polarized along +axis or -axis."""
    if sign not in (+1, -1):
        raise ValueError("sign must be +1 or -1")
    n = unit_axis(axis)
    return DensityMatrix(0.5 * (_I2 + sign * n_dot_sigma(n)))


def maximally_mixed(dim: int) -> DensityMatrix:
    return DensityMatrix(np.eye(dim, dtype=complex) / dim)


def singlet() -> DensityMatrix:
    """The two-qubit singlet (|01> - |10>)/sqrt(2) as a density matrix."""
    v = np.array([0, 1, -1, 0], dtype=complex) / np.sqrt(2)
    return ket_density(v)


def werner(p: float) -> DensityMatrix:
    """Mixture p * singlet + (1-p) * I/4 for p in [0, 1]."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"werner weight must lie in [0, 1], got {p}")
    return DensityMatrix(p * singlet().mat + (1.0 - p) * np.eye(4) / 4.0)


@dataclass(frozen=True, eq=False)
class PauliCoeffs:
    """Coefficients a[i][j] = <sigma_i (x) sigma_j> of a two-qubit state.

    a[0][0] is fixed to 1 by normalization and every entry is bounded by 1
    in magnitude for a physical state.
    """

    a: np.ndarray

    def __post_init__(self):
        a = np.array(self.a, dtype=float)
        if a.shape != (4, 4):
            raise ValueError(f"coefficient array must be 4x4, got {a.shape}")
        if abs(a[0, 0] - 1.0) > COEFF_TOL:
            raise ValueError(f"a[0][0] must equal 1, got {a[0, 0]}")
        if np.max(np.abs(a)) > 1.0 + COEFF_TOL:
            raise ValueError(f"coefficient magnitude exceeds 1: {np.max(np.abs(a)):.6f}")
        a.flags.writeable = False
        object.__setattr__(self, "a", a)

    def vector(self) -> np.ndarray:
        """The 15 nontrivial coefficients in PAULI_PAIRS order."""
        return np.array([self.a[i, j] for i, j in PAULI_PAIRS])

    @classmethod
    def from_vector(cls, v) -> "PauliCoeffs":
        v = np.asarray(v, dtype=float)
        if v.shape != (15,):
            raise ValueError(f"expected 15 coefficients, got shape {v.shape}")
        a = np.empty((4, 4))
        a[0, 0] = 1.0
        for val, (i, j) in zip(v, PAULI_PAIRS):
            a[i, j] = val
        return cls(a)


def decompose(rho: DensityMatrix) -> PauliCoeffs:
    """Expand a two-qubit state in the Pauli product basis.

    Returns coefficients a[i][j] = trace(rho * sigma_i (x) sigma_j), so that
    rho = (1/4) sum_ij a[i][j] sigma_i (x) sigma_j.
    """
    if rho.dim != 4:
        raise ValueError(f"decompose needs a two-qubit state, got dim {rho.dim}")
    a = np.empty((4, 4))
    for i in range(4):
        for j in range(4):
            a[i, j] = np.trace(rho.mat @ pauli_pair(i, j)).real
    return PauliCoeffs(a)


def assemble_array(coeffs) -> np.ndarray:
    """Build the (possibly unphysical) matrix for a coefficient array or 15-vector."""
    if isinstance(coeffs, PauliCoeffs):
        a = coeffs.a
    else:
        arr = np.asarray(coeffs, dtype=float)
        if arr.shape == (15,):
            a = np.empty((4, 4))
            a[0, 0] = 1.0
            for val, (i, j) in zip(arr, PAULI_PAIRS):
                a[i, j] = val
        elif arr.shape == (4, 4):
            a = arr
        else:
            raise ValueError(f"expected PauliCoeffs, 15-vector or 4x4 array, got shape {arr.shape}")
    mat = np.zeros((4, 4), dtype=complex)
    for i in range(4):
        for j in range(4):
            if a[i, j] != 0.0:
                mat += a[i, j] * pauli_pair(i, j)
    return mat / 4.0


def assemble(coeffs: PauliCoeffs) -> DensityMatrix:
    """Inverse of decompose.  Raises InvalidStateError if the coefficients
    do not describe a physical state (e.g. the result is not PSD)."""
    return DensityMatrix(assemble_array(coeffs))


def ptrace(mat: np.ndarray, dims: Iterable[int], keep: Iterable[int]) -> np.ndarray:
    """Partial trace of a matrix over a tensor product of subsystems.

    Parameters
    ----------
    mat : square array of size prod(dims)
    dims : subsystem dimensions, leading factor first
    keep : indices of subsystems to keep, in increasing order
    """
    dims = list(dims)
    keep = sorted(keep)
    n = len(dims)
    mat = np.asarray(mat, dtype=complex).reshape(dims + dims)
    # Trace out the dropped subsystems from the back so axis numbers stay valid.
    dropped = [i for i in range(n) if i not in keep]
    for idx, sub in enumerate(sorted(dropped, reverse=True)):
        remaining = n - idx
        mat = np.trace(mat, axis1=sub, axis2=sub + remaining)
    d = int(np.prod([dims[i] for i in keep]))
    return mat.reshape(d, d)


def partial_trace(rho: DensityMatrix, keep: str) -> DensityMatrix:
    """Reduce a two-qubit state to one marginal.

    keep is "first" or "second".  The marginal satisfies the usual trace
    identities, e.g. trace(rho_first * sigma_z) = a[3][0].
    """
    if rho.dim != 4:
        raise ValueError(f"partial_trace needs a two-qubit state, got dim {rho.dim}")
    if keep == "first":
        reduced = ptrace(rho.mat, [2, 2], [0])
    elif keep == "second":
        reduced = ptrace(rho.mat, [2, 2], [1])
    else:
        raise ValueError(f"keep must be 'first' or 'second', got {keep!r}")
    return DensityMatrix(reduced)


class BlochVector(NamedTuple):
    x: float
    y: float
    z: float

    def norm(self) -> float:
        return float(np.sqrt(self.x**2 + self.y**2 + self.z**2))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


def bloch(rho: DensityMatrix) -> BlochVector:
    """Bloch vector (<sigma_x>, <sigma_y>, <sigma_z>) of a one-qubit state."""
    if rho.dim != 2:
        raise ValueError(f"bloch needs a one-qubit state, got dim {rho.dim}")
    return BlochVector(*(rho.expect(pauli(k)) for k in (1, 2, 3)))


def bloch_density(v) -> DensityMatrix:
    """One-qubit state with the given Bloch vector (norm must be <= 1)."""
    if isinstance(v, BlochVector):
        v = v.as_array()
    v = np.asarray(v, dtype=float)
    if v.shape != (3,):
        raise ValueError("Bloch vector must have 3 components")
    if np.linalg.norm(v) > 1.0 + COEFF_TOL:
        raise InvalidStateError(f"Bloch norm {np.linalg.norm(v):.6f} exceeds 1")
    return DensityMatrix(0.5 * (_I2 + n_dot_sigma(v)))


def von_neumann_entropy(rho: DensityMatrix) -> float:
    """Entropy -trace(rho ln rho) in nats."""
    evals = np.linalg.eigvalsh(rho.mat)
    evals = evals[evals > 1e-15]
    return float(-np.sum(evals * np.log(evals)))


def entropy_bits(rho: DensityMatrix) -> float:
    return von_neumann_entropy(rho) / np.log(2.0)


def fidelity(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Uhlmann fidelity (trace sqrt(sqrt(rho) sigma sqrt(rho)))^2."""
    if rho.dim != sigma.dim:
        raise ValueError("states must have equal dimension")
    evals, vecs = np.linalg.eigh(rho.mat)
    evals = np.clip(evals, 0.0, None)
    sqrt_rho = (vecs * np.sqrt(evals)) @ vecs.conj().T
    inner = sqrt_rho @ sigma.mat @ sqrt_rho
    ivals = np.linalg.eigvalsh(inner)
    ivals = np.clip(ivals, 0.0, None)
    f = float(np.sum(np.sqrt(ivals)) ** 2)
    return min(max(f, 0.0), 1.0)


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Half the trace norm of rho - sigma."""
    if rho.dim != sigma.dim:
        raise ValueError("states must have equal dimension")
    evals = np.linalg.eigvalsh(rho.mat - sigma.mat)
    return float(0.5 * np.sum(np.abs(evals)))


def random_ket(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random pure state vector."""
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def random_density(dim: int, rng: np.random.Generator) -> DensityMatrix:
    """Random full-rank mixed state, G G^dag normalized to unit trace."""
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    mat = g @ g.conj().T
    return DensityMatrix(mat / mat.trace())


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Gaussian matrix."""
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(g)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


# JSON round trip for complex matrices: real and imaginary parts are stored
# row major so the files are language neutral.

def cmatrix_to_json(mat: np.ndarray) -> dict:
    mat = np.asarray(mat, dtype=complex)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError("only square matrices are serialized")
    return {
        "dim": int(mat.shape[0]),
        "re": [float(x) for x in mat.real.ravel()],
        "im": [float(x) for x in mat.imag.ravel()],
    }


def cmatrix_from_json(obj: dict) -> np.ndarray:
    dim = int(obj["dim"])
    re = np.array(obj["re"], dtype=float)
    im = np.array(obj["im"], dtype=float)
    if re.size != dim * dim or im.size != dim * dim:
        raise ValueError(f"need {dim * dim} entries for each part, got {re.size}/{im.size}")
    return (re + 1j * im).reshape(dim, dim)


def density_to_json(rho: DensityMatrix) -> dict:
    return cmatrix_to_json(rho.mat)


def density_from_json(obj: dict) -> DensityMatrix:
    return DensityMatrix(cmatrix_from_json(obj))


def save_density(rho: DensityMatrix, path) -> None:
    with open(path, "w") as fh:
        json.dump(density_to_json(rho), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_density(path) -> DensityMatrix:
    with open(path) as fh:
        return density_from_json(json.load(fh))
