"""
Dense density-matrix algebra, state families, observables and the analytic
k-separability thresholds of noisy GHZ states.

Density matrices are plain complex ``numpy`` arrays of shape ``(d, d)``.
Every function that returns a state goes through :func:`check_density`
when :data:`DEBUG` is enabled.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

DEBUG = True

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-10
PPT_TOL = 1e-9

SIGMA = np.array(
    [
        [[1, 0], [0, 1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)
I2, SX, SY, SZ = SIGMA

# 3-separability thresholds for n = 6, 7 come from a linear program, not a
# closed form.
REFERENCE_BOUNDS = {(6, 3): 0.2195, (7, 3): 0.2147}


class DensityMatrixError(ValueError):
    pass


def check_density(rho, herm_tol=HERMITIAN_TOL, trace_tol=TRACE_TOL, psd_tol=PSD_TOL):
    """Raise :class:`DensityMatrixError` unless ``rho`` is a valid state."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DensityMatrixError(f"expected a square matrix, got shape {rho.shape}")
    if not np.all(np.isfinite(rho)):
        raise DensityMatrixError("non-finite entries")
    # scale the tolerances with the dimension: entries of a d x d state are O(1/d)
    # but round-off accumulates over O(d) terms in products
    d = rho.shape[0]
    slack = max(1.0, d / 16)
    if np.max(np.abs(rho - rho.conj().T)) > herm_tol * slack:
        raise DensityMatrixError("not Hermitian")
    tr = np.trace(rho)
    if abs(tr.real - 1) > trace_tol * slack or abs(tr.imag) > trace_tol * slack:
        raise DensityMatrixError(f"trace {tr} is not 1")
    if d <= 256 and hermitian_eigenvalues(rho)[0] < -psd_tol:
        raise DensityMatrixError("not positive semidefinite")
    return rho


def _checked(rho):
    if DEBUG:
        check_density(rho)
    return rho


def nqubits_of(rho):
    d = rho.shape[0]
    n = d.bit_length() - 1
    if 1 << n != d:
        raise ValueError(f"dimension {d} is not a power of two")
    return n


def dagger(m):
    return np.conj(np.swapaxes(m, -1, -2))


def kron_all(mats):
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def hermitian_eigenvalues(m, tol=1e-10):
    """Ascending eigenvalues of a Hermitian matrix (or a stack of them).

    Backed by LAPACK ``heevd``; rejects inputs that are not Hermitian within
    ``tol``.
    """
    m = np.asarray(m)
    if m.shape[-1] != m.shape[-2]:
        raise ValueError(f"expected square matrices, got shape {m.shape}")
    if m.size and np.max(np.abs(m - dagger(m))) > tol:
        raise ValueError("matrix is not Hermitian")
    return np.linalg.eigvalsh(m)


def random_ginibre_density(dim, rng):
    """rho = H / tr H with H = G G^dagger, G complex Ginibre."""
    if dim < 2:
        raise ValueError("dim must be >= 2")
    while True:
        n1 = rng.standard_normal((dim, dim))
        n2 = rng.standard_normal((dim, dim))
        g = n1 + 1j * n2
        h = g @ g.conj().T
        tr = np.trace(h).real
        if tr >= 1e-30:
            break
    rho = h / tr
    # make exactly Hermitian; the product is only Hermitian to round-off
    rho = 0.5 * (rho + rho.conj().T)
    return _checked(rho)


def random_unitary(dim, rng):
    """Haar-random unitary via QR of a complex Ginibre matrix."""
    if dim < 2:
        raise ValueError("dim must be >= 2")
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def random_pure_state(dim, rng):
    psi = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return psi / np.linalg.norm(psi)


def local_unitary_conjugate(rho, locals_, dims=None):
    """(V_1 x ... x V_n) rho (V_1 x ... x V_n)^dagger."""
    rho = np.asarray(rho)
    if dims is None:
        dims = [v.shape[0] for v in locals_]
    if len(dims) != len(locals_):
        raise ValueError("one local unitary per subsystem is required")
    for v, d in zip(locals_, dims):
        if v.shape != (d, d):
            raise ValueError(f"local operator of shape {v.shape} does not match dim {d}")
    if int(np.prod(dims)) != rho.shape[0]:
        raise ValueError(f"subsystem dims {dims} do not multiply to {rho.shape[0]}")
    u = kron_all(locals_)
    out = u @ rho @ u.conj().T
    return _checked(0.5 * (out + out.conj().T))


def partial_transpose(rho, dim_a, dim_b):
    """Transpose the second subsystem: ((a,b),(a',b')) -> ((a,b'),(a',b))."""
    rho = np.asarray(rho)
    if dim_a * dim_b != rho.shape[-1]:
        raise ValueError(f"{dim_a} x {dim_b} does not match dimension {rho.shape[-1]}")
    lead = rho.shape[:-2]
    t = rho.reshape(lead + (dim_a, dim_b, dim_a, dim_b))
    t = np.swapaxes(t, -1, -3)
    return t.reshape(lead + (dim_a * dim_b, dim_a * dim_b))


def ppt_min_eigenvalue(rho):
    """Smallest eigenvalue of the two-qubit partial transpose (vectorised)."""
    rho = np.asarray(rho)
    if rho.shape[-1] != 4:
        raise ValueError("PPT labelling is only defined for two-qubit states")
    return hermitian_eigenvalues(partial_transpose(rho, 2, 2))[..., 0]


def is_ppt_entangled(rho):
    """True when the two-qubit state is entangled (negative partial transpose)."""
    return ppt_min_eigenvalue(rho) < -PPT_TOL


def ghz_vector(n):
    psi = np.zeros(2**n, dtype=complex)
    psi[0] = psi[-1] = 1 / np.sqrt(2)
    return psi


def ghz_noisy(n, p):
    """p |GHZ_n><GHZ_n| + (1 - p) I / 2^n."""
    if not 3 <= n <= 12:
        raise ValueError("n must be in 3..12")
    if not 0 <= p <= 1:
        raise ValueError("p must be in [0, 1]")
    d = 2**n
    rho = np.eye(d, dtype=complex) * ((1 - p) / d)
    half = p / 2
    rho[0, 0] += half
    rho[-1, -1] += half
    rho[0, -1] += half
    rho[-1, 0] += half
    return _checked(rho)


def rho_s(p, theta=np.pi / 8):
    """(1 - p)/2 I_2 x rho_B + p |psi><psi| with |psi> = cos t|00> + sin t|11>."""
    if not 0 <= p <= 1:
        raise ValueError("p must be in [0, 1]")
    psi = np.zeros(4, dtype=complex)
    psi[0] = np.cos(theta)
    psi[3] = np.sin(theta)
    pure = np.outer(psi, psi.conj())
    rho_b = np.diag([np.cos(theta) ** 2, np.sin(theta) ** 2]).astype(complex)
    rho = (1 - p) / 2 * np.kron(I2, rho_b) + p * pure
    return _checked(rho)


def werner(p):
    """p |Phi+><Phi+| + (1 - p) I / 4."""
    phi = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)
    return p * np.outer(phi, phi.conj()) + (1 - p) * np.eye(4) / 4


@dataclass(frozen=True)
class SeparabilityBound:
    n: int
    k: int
    kind: str  # "formula" or "reference-table"
    value: float


def bound_k_separable(n, k):
    """White-noise threshold p <= b_k below which the noisy GHZ state is k-separable."""
    if not 2 <= k <= n:
        raise ValueError(f"no analytic bound for n={n}, k={k}")
    if k == 2:
        value = (2 ** (n - 1) - 1) / (2**n - 1)
    elif 2 * k >= n + 1:
        value = 1 / (1 + (2 * k - n) / n * 2 ** (n - 1))
    elif (n, k) in REFERENCE_BOUNDS:
        return SeparabilityBound(n, k, "reference-table", REFERENCE_BOUNDS[(n, k)])
    else:
        raise ValueError(f"no analytic bound for n={n}, k={k}")
    return SeparabilityBound(n, k, "formula", value)


def bound_general_formula(n, k):
    """The k >= (n+1)/2 expression alone, without the k = 2 special case."""
    if 2 * k < n + 1:
        raise ValueError("formula requires k >= (n+1)/2")
    return 1 / (1 + (2 * k - n) / n * 2 ** (n - 1))


@lru_cache(maxsize=None)
def pauli_basis(n):
    """All 4^n Pauli strings, lexicographic with the identity first."""
    return np.array([kron_all([SIGMA[i] for i in idx]) for idx in itertools.product(range(4), repeat=n)])


def _expectations(rho, ops):
    rho = np.asarray(rho)
    # Tr(O rho) = sum_ij O_ij rho_ji
    vals = np.einsum("kij,...ji->...k", ops, rho)
    if np.max(np.abs(vals.imag), initial=0.0) > 1e-10:
        raise ValueError("complex expectation value; input is not Hermitian")
    return vals.real


def features_pauli_full(rho, n=None):
    """All real Pauli expectations <s_i1 x ... x s_in>, length 4^n."""
    rho = np.asarray(rho)
    if n is None:
        n = rho.shape[-1].bit_length() - 1
    if n not in (2, 3):
        raise ValueError("full Pauli features are provided for 2 or 3 qubits")
    if rho.shape[-1] != 2**n:
        raise ValueError(f"state dimension {rho.shape[-1]} does not match n={n}")
    return _expectations(rho, pauli_basis(n))


@lru_cache(maxsize=None)
def _partial_ops(scheme):
    if scheme == "F1":
        ops = [np.kron(SIGMA[i], SIGMA[j]) for i in (1, 2, 3) for j in (1, 2, 3)]
    elif scheme == "F2":
        b1 = (SX + SZ) / np.sqrt(2)
        b2 = (SX - SZ) / np.sqrt(2)
        ops = [np.kron(SIGMA[i], b) for i in (1, 2, 3) for b in (b1, b2)]
    else:
        raise ValueError(f"unknown partial feature scheme {scheme!r}")
    return np.array(ops)


def features_partial(rho, scheme):
    """Correlation features F1 (9 entries) or F2 (6 entries) of a two-qubit state."""
    rho = np.asarray(rho)
    if rho.shape[-1] != 4:
        raise ValueError("partial features are defined for two-qubit states")
    return _expectations(rho, _partial_ops(scheme))


def features_ghz(rho, n=None):
    """(<M_x>, <M_z>) with M_x = X^{(x)n}, M_z = |0..0><0..0| + |1..1><1..1|.

    Computed from matrix entries directly, O(2^n).
    """
    rho = np.asarray(rho)
    d = rho.shape[-1]
    if n is None:
        n = d.bit_length() - 1
    if d != 2**n:
        raise ValueError(f"state dimension {d} does not match n={n}")
    idx = np.arange(d)
    mx = rho[..., idx, idx ^ (d - 1)].sum(axis=-1)
    mz = rho[..., 0, 0] + rho[..., d - 1, d - 1]
    vals = np.stack([mx, mz], axis=-1)
    if np.max(np.abs(vals.imag)) > 1e-10:
        raise ValueError("complex expectation value; input is not Hermitian")
    return vals.real


def ghz_observables(n):
    """Dense M_x, M_z; meant for tests and small n."""
    mx = kron_all([SX] * n)
    mz = np.zeros((2**n, 2**n), dtype=complex)
    mz[0, 0] = mz[-1, -1] = 1
    return mx, mz


def pauli_string_conjugate(rho, word):
    """P rho P^dagger for the Pauli string P = s_{w1} x ... x s_{wn}.

    A Pauli string is a signed permutation matrix, so this is an index
    permutation with phases rather than a dense product.
    """
    rho = np.asarray(rho)
    d = rho.shape[-1]
    n = len(word)
    if d != 2**n:
        raise ValueError(f"word of length {n} does not match dimension {d}")
    flip = 0
    for q, w in enumerate(word):
        if w in (1, 2):
            flip |= 1 << (n - 1 - q)
    # P|j> = phase(j) |j ^ flip>; so (P rho P^+)[i, k] = ph(j) conj(ph(l)) rho[j, l] with j = i ^ flip
    j = np.arange(d)
    phase = np.ones(d, dtype=complex)
    for q, w in enumerate(word):
        bit = (j >> (n - 1 - q)) & 1
        if w == 2:
            phase *= np.where(bit == 0, 1j, -1j)
        elif w == 3:
            phase *= np.where(bit == 0, 1, -1)
    src = j ^ flip
    ph = phase[src]
    return ph[:, None] * rho[..., src[:, None], src[None, :]] * ph.conj()[None, :]


def pure_product_density(kets):
    psi = kets[0]
    for k in kets[1:]:
        psi = np.kron(psi, k)
    return np.outer(psi, psi.conj())


def purity(rho):
    return float(np.real(np.trace(rho @ rho)))
