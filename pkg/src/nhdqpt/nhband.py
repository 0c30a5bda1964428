"""Two-band non-Hermitian Bloch Hamiltonians and their biorthogonal eigensystems.

A Bloch Hamiltonian is H(k) = h(k)·σ with a complex 3-vector h.  Vectors are
plain numpy arrays whose leading axis holds (hx, hy, hz); any trailing axes
are batch axes (usually momentum).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

#: relative tolerance on |det H| = |ε|² used to flag exceptional points
EP_REL_TOL = 1e-9

PAULI = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)


def as_vec3(h) -> np.ndarray:
    """Return ``h`` as a complex array with leading axis of length 3."""
    arr = np.asarray(h, dtype=complex)
    if arr.shape[:1] != (3,):
        raise ValueError(f"expected leading axis of length 3, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("vector components must be finite")
    return arr


def principal_sqrt(z):
    """Principal complex square root with a deterministic cut.

    Real part is non-negative; on the cut (real part exactly zero) the
    imaginary part is taken non-negative, independent of the sign of zero.
    """
    s = np.sqrt(np.asarray(z, dtype=complex))
    return np.where((s.real == 0) & (s.imag < 0), -s, s)


def bilinear_dot(a, b):
    """Unconjugated dot product over the leading axis."""
    return np.sum(np.asarray(a) * np.asarray(b), axis=0)


def energy(h):
    """Principal root of hx² + hy² + hz²."""
    h = np.asarray(h, dtype=complex)
    return principal_sqrt(bilinear_dot(h, h))


def pick_branch(e, ref):
    """Flip the sign of ``e`` wherever ``-e`` lies closer to ``ref``."""
    e = np.asarray(e, dtype=complex)
    return np.where(np.abs(e + ref) < np.abs(e - ref), -e, e)


def bloch_matrix(h) -> np.ndarray:
    """Dense matrix h·σ; batch axes are moved to the front, shape (..., 2, 2)."""
    h = np.asarray(h, dtype=complex)
    return np.einsum("a...,aij->...ij", h, PAULI)


def max_norm(h):
    """Max-norm of the 2x2 matrix h·σ."""
    h = np.asarray(h, dtype=complex)
    off1 = np.abs(h[0] - 1j * h[1])
    off2 = np.abs(h[0] + 1j * h[1])
    return np.maximum(np.abs(h[2]), np.maximum(off1, off2))


def near_ep(h, rel_tol: float = EP_REL_TOL):
    """Mask of exceptional (or gap-closing) points: |det H| below tolerance.

    The eigenvalue itself scales like the square root of the distance to an
    exceptional point, so the test is applied to ε² = -det H.
    """
    h = np.asarray(h, dtype=complex)
    scale = max_norm(h)
    return np.abs(bilinear_dot(h, h)) <= rel_tol * np.maximum(scale, 1e-300) ** 2


class ABCDGF(NamedTuple):
    """Real parameterisation of [[G+iF, A+iB], [C+iD, -(G+iF)]]."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    G: np.ndarray
    F: np.ndarray

    @classmethod
    def from_vec3(cls, h) -> "ABCDGF":
        h = np.asarray(h, dtype=complex)
        hx, hy, hz = h
        return cls(
            A=hx.real + hy.imag,
            B=hx.imag - hy.real,
            C=hx.real - hy.imag,
            D=hx.imag + hy.real,
            G=hz.real,
            F=hz.imag,
        )

    def to_vec3(self) -> np.ndarray:
        A, B, C, D, G, F = (np.asarray(x, dtype=float) for x in self)
        return np.array(
            [
                (A + C) / 2 + 1j * (B + D) / 2,
                (D - B) / 2 + 1j * (A - C) / 2,
                G + 1j * F,
            ]
        )

    @property
    def upper(self):
        """Upper off-diagonal entry A+iB = hx - i hy."""
        return self.A + 1j * self.B

    @property
    def lower(self):
        """Lower off-diagonal entry C+iD = hx + i hy."""
        return self.C + 1j * self.D


def eigenvectors_for(h, e):
    """Right column and left row eigenvectors of h·σ for eigenvalue ``e``.

    ``e`` may be either root.  The closed form (A+iB, e-g)/√(2e(e-g)) is used,
    with e-g evaluated without cancellation; when that column degenerates
    (diagonal matrices) the equivalent column (e+g, C+iD)/√(2e(e+g)) is used.
    Returns ``(right, left)``, each with leading axis of length 2.
    """
    h = np.asarray(h, dtype=complex)
    e = np.asarray(e, dtype=complex)
    upper = h[0] - 1j * h[1]
    lower = h[0] + 1j * h[1]
    g = h[2]
    plus = e + g
    minus = e - g
    # e² - g² = upper·lower, so the smaller of e∓g is recovered stably
    with np.errstate(all="ignore"):
        minus = np.where(np.abs(minus) < np.abs(plus), upper * lower / plus, minus)
        plus = np.where(np.abs(plus) < np.abs(minus), upper * lower / minus, plus)

    use_alt = np.abs(minus) < np.abs(plus) * 1e-8
    with np.errstate(all="ignore"):
        norm = principal_sqrt(2 * e * minus)
        norm_alt = principal_sqrt(2 * e * plus)
        right = np.where(use_alt, np.array([plus, lower]) / norm_alt, np.array([upper, minus]) / norm)
        left = np.where(use_alt, np.array([plus, upper]) / norm_alt, np.array([lower, minus]) / norm)
    return right, left


@dataclass(frozen=True)
class BiorthoEigensystem:
    """Energies ±ε with right columns |u±⟩ and left rows ⟨⟨u±|.

    Arrays carry the batch shape of the input vector; eigenvectors have a
    leading axis of length 2.
    """

    e_plus: np.ndarray
    e_minus: np.ndarray
    right_plus: np.ndarray
    right_minus: np.ndarray
    left_plus: np.ndarray
    left_minus: np.ndarray
    near_ep: np.ndarray

    def projector(self, sign: int) -> np.ndarray:
        r, l = (self.right_plus, self.left_plus) if sign > 0 else (self.right_minus, self.left_minus)
        return np.einsum("i...,j...->...ij", r, l)

    def reconstruct(self) -> np.ndarray:
        ep = np.asarray(self.e_plus)[..., None, None]
        em = np.asarray(self.e_minus)[..., None, None]
        return ep * self.projector(+1) + em * self.projector(-1)


def eigensystem_2x2(h) -> BiorthoEigensystem:
    """Analytic biorthogonal eigensystem of h·σ using the principal root."""
    h = as_vec3(h)
    e = energy(h)
    rp, lp = eigenvectors_for(h, e)
    rm, lm = eigenvectors_for(h, -e)
    return BiorthoEigensystem(
        e_plus=e,
        e_minus=-e,
        right_plus=rp,
        right_minus=rm,
        left_plus=lp,
        left_minus=lm,
        near_ep=near_ep(h),
    )


@dataclass(frozen=True)
class TwoBandHamiltonian:
    """Momentum-parameterised coefficient vector k ↦ h(k).

    ``coeffs`` maps an array of momenta to a complex array of shape
    ``(3, *k.shape)``.
    """

    coeffs: Callable[[np.ndarray], np.ndarray]
    tag: str = "custom"
    params: dict = field(default_factory=dict)

    def __call__(self, k) -> np.ndarray:
        k = np.asarray(k, dtype=float)
        return np.asarray(self.coeffs(k), dtype=complex)

    def is_periodic(self, atol: float = 1e-12) -> bool:
        ends = self(np.array([-np.pi, np.pi]))
        return bool(np.allclose(ends[:, 0], ends[:, 1], rtol=0, atol=atol))

    def is_hermitian(self, k, atol: float = 1e-12) -> bool:
        return bool(np.all(np.abs(self(k).imag) < atol))

    def is_chiral(self, k, atol: float = 1e-12) -> bool:
        return bool(np.all(np.abs(self(k)[2]) < atol))

    @classmethod
    def tabulated(cls, k, h, tag: str = "tabulated") -> "TwoBandHamiltonian":
        """Periodic linear interpolation of samples ``h`` taken at ``k``."""
        k = np.asarray(k, dtype=float)
        h = as_vec3(h)

        def coeffs(q):
            out = np.empty((3,) + np.shape(q), dtype=complex)
            for a in range(3):
                out[a] = np.interp(q, k, h[a].real, period=2 * np.pi) + 1j * np.interp(
                    q, k, h[a].imag, period=2 * np.pi
                )
            return out

        return cls(coeffs, tag=tag, params={"n_samples": int(k.size)})


def make_ssh(t1: float, t2: float, gamma: float) -> TwoBandHamiltonian:
    """Non-Hermitian SSH chain: h = (t1 + t2 cos k, t2 sin k + iγ, 0)."""
    t1, t2, gamma = float(t1), float(t2), float(gamma)

    def coeffs(k):
        return np.array(
            [
                t1 + t2 * np.cos(k) + 0j,
                t2 * np.sin(k) + 1j * gamma,
                np.zeros_like(k, dtype=complex),
            ]
        )

    return TwoBandHamiltonian(coeffs, tag="ssh", params={"t1": t1, "t2": t2, "gamma": gamma})


def lindblad_effective_bloch(t1: float, t2: float, gamma: float, phi: float):
    """Bloch form of H_eff = H_SSH - iΣ L†L for L_n = √γ (c_nA + e^{iφ} c_nB).

    Returns ``(traceless, onsite)`` where ``onsite = -iγ`` multiplies the
    identity.  The off-diagonal entries are t1 + t2 e^{-ik} - iγe^{iφ} (A←B)
    and t1 + t2 e^{ik} - iγe^{-iφ} (B←A).
    """
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    t1, t2, gamma, phi = float(t1), float(t2), float(gamma), float(phi)
    hop_ab = -1j * gamma * np.exp(1j * phi)
    hop_ba = -1j * gamma * np.exp(-1j * phi)

    def coeffs(k):
        upper = t1 + t2 * np.exp(-1j * k) + hop_ab
        lower = t1 + t2 * np.exp(1j * k) + hop_ba
        return np.array([(upper + lower) / 2, (lower - upper) / 2j, np.zeros_like(k, dtype=complex)])

    model = TwoBandHamiltonian(
        coeffs, tag="lindblad_ssh", params={"t1": t1, "t2": t2, "gamma": gamma, "phi": phi}
    )
    return model, -1j * gamma


def lindblad_effective_lattice(t1: float, t2: float, gamma: float, phi: float, n_cells: int) -> np.ndarray:
    """Real-space single-particle H_eff on a periodic chain of ``n_cells``.

    Site ordering is (A_0, B_0, A_1, B_1, ...).  Each jump operator is a
    vector l_n with L_n = Σ_j l_n[j] c_j, so L_n†L_n contributes l_n* l_nᵀ.
    """
    dim = 2 * n_cells
    H = np.zeros((dim, dim), dtype=complex)
    for n in range(n_cells):
        a, b = 2 * n, 2 * n + 1
        a_next = (2 * (n + 1)) % dim
        H[a, b] += t1
        H[b, a] += t1
        H[a_next, b] += t2
        H[b, a_next] += t2
    dissipator = np.zeros_like(H)
    for n in range(n_cells):
        vec = np.zeros(dim, dtype=complex)
        vec[2 * n] = np.sqrt(gamma)
        vec[2 * n + 1] = np.sqrt(gamma) * np.exp(1j * phi)
        dissipator += np.outer(vec.conj(), vec)
    return H - 1j * dissipator
