"""
A short tour of the state algebra: PPT verdicts along the Werner line,
local-unitary invariance of the partial-transpose spectrum, and the noisy
GHZ separability thresholds used to label the n-qubit data.

    python3 demos/quantum_algebra_tour.py
"""
import numpy as np

from entangle_ssl import qstate as qs


def werner_line():
    print("Werner states p |psi-><psi-| + (1 - p) I/4")
    for p in (0.0, 0.2, 0.33, 0.34, 0.5, 1.0):
        rho = qs.werner(p)
        print(f"  p = {p:4.2f}   min PT eigenvalue {qs.ppt_min_eigenvalue(rho):+.4f}   "
              f"entangled: {qs.is_ppt_entangled(rho)}")


def local_invariance(rng):
    rho = qs.random_ginibre_density(4, rng)
    us = [qs.random_unitary(2, rng) for _ in range(2)]
    moved = qs.local_unitary_conjugate(rho, us, [2, 2])
    a = qs.hermitian_eigenvalues(qs.partial_transpose(rho, 2, 2))
    b = qs.hermitian_eigenvalues(qs.partial_transpose(moved, 2, 2))
    print("\nA random state and a locally rotated copy")
    print("  Pauli features change:", not np.allclose(qs.features_pauli_full(rho, 2), qs.features_pauli_full(moved, 2)))
    print(f"  PT spectra agree to {np.max(np.abs(a - b)):.1e}")


def ghz_thresholds():
    print("\nWhite-noise thresholds of the n-qubit GHZ state (k-separable iff p <= b)")
    print("   n     k=2     k=3     k=4")
    for n in range(3, 8):
        row = []
        for k in (2, 3, 4):
            try:
                b = qs.bound_k_separable(n, k)
                row.append(f"{b.value:.4f}" + ("*" if b.kind == "reference-table" else " "))
            except ValueError:
                row.append("   -   ")
        print(f"  {n:2d}  " + " ".join(row))
    print("  (* numerical reference values, no closed form)")


if __name__ == "__main__":
    werner_line()
    local_invariance(np.random.default_rng(1))
    ghz_thresholds()
