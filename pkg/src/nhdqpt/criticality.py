"""Fisher zeros, orthogonality conditions, critical momenta/times and cusps.

Zeros of cosh(e1 z) + sinh(e1 z)·c in complex time are

    z_n = (iπ(n + ½) - atanh(c)) / e1,

and physical critical times are those zeros lying on the imaginary axis,
t_c = Im z_n.  With a = π(n + ½) and Q = atanh(c):

* biorthogonal: v_s = (Re Q, Im Q - a), Re z·|e1|² = -v_s·v_h
* non-biorthogonal: v_s = (Re Q', Im Q' + a) with Q' = atanh⟨P⟩0 = -Q,
  Re z·|e1|² = +v_s·v_h

where v_h = (Re e1, Im e1).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .loschmidt import QuenchScenario, coupling
from .nhband import energy, near_ep, pick_branch
from .qstate import Formulation, StateKind, participation

#: |coupling ∓ 1| below this is treated as a pole of atanh
POLE_TOL = 1e-12
#: |dot| below this counts as touching zero
GRAZE_TOL = 1e-12
#: accepted |Re z|·|e1|² at a refined root
ROOT_TOL = 1e-8
MAX_BRANCHES = 200


def q_factor(x):
    """Principal atanh(x) = ½ ln((1+x)/(1-x)), Im in (-π/2, π/2].

    Poles at x = ±1 are returned as NaN.
    """
    x = np.asarray(x, dtype=complex)
    pole = (np.abs(x - 1) < POLE_TOL) | (np.abs(x + 1) < POLE_TOL)
    with np.errstate(all="ignore"):
        # adding 0j turns a -0.0 imaginary part into +0.0 so the cut is fixed
        ratio = (1 + x) / (1 - x) + 0j
        q = 0.5 * np.log(ratio)
    return np.where(pole | ~np.isfinite(q), np.nan + 0j, q)


def q_factor_bio(h0, h1, nk):
    """atanh(n_k ĥ0·ĥ1)."""
    from .nhband import bilinear_dot

    h0 = np.asarray(h0, dtype=complex)
    h1 = np.asarray(h1, dtype=complex)
    return q_factor(nk * bilinear_dot(h0, h1) / (energy(h0) * energy(h1)))


def q_factor_nonbio(h0, h1, probs):
    """atanh⟨P⟩0."""
    from .loschmidt import expectation_P0

    return q_factor(expectation_P0(h0, h1, probs))


def branch_offset(n):
    return np.pi * (np.asarray(n) + 0.5)


def fisher_zeros(e1, c, n_max: int = 5):
    """Zeros z_n, n = 0..n_max-1, of cosh(e1 z) + sinh(e1 z)·c.

    ``e1`` and ``c`` may be arrays; the result has shape (n_max, *batch).
    Poles of atanh and vanishing e1 give NaN.  For the non-biorthogonal
    amplitude pass c = -⟨P⟩0.
    """
    e1 = np.asarray(e1, dtype=complex)
    q = q_factor(c)
    n = np.arange(n_max).reshape((n_max,) + (1,) * np.ndim(q))
    with np.errstate(all="ignore"):
        z = (1j * branch_offset(n) - q) / e1
    return np.where(np.abs(e1) > 0, z, np.nan + 0j)


def continued_amplitude(e1, c, z):
    """Analytic continuation cosh(e1 z) + sinh(e1 z)·c of the amplitude."""
    return np.cosh(e1 * z) + np.sinh(e1 * z) * c


def orthogonality_vectors(e1, c, n, formulation):
    """(v_s, v_h, dot) for branch ``n`` from energies and couplings."""
    q = q_factor(c)
    a = branch_offset(n)
    if Formulation(formulation) is Formulation.BIORTHOGONAL:
        vs = np.array([q.real, q.imag - a])
    else:
        qp = -q
        vs = np.array([qp.real, qp.imag + a])
    e1 = np.asarray(e1, dtype=complex)
    vh = np.array([e1.real, e1.imag])
    dot = vs[0] * vh[0] + vs[1] * vh[1]
    return vs, vh, dot


@dataclass(frozen=True)
class OrthogonalityFlow:
    n: int
    k: np.ndarray
    vs: np.ndarray
    vh: np.ndarray
    dot: np.ndarray
    formulation: Formulation


def _branch_data(scenario: QuenchScenario, k, e0=None, e1=None):
    """Energies and couplings at ``k`` with optional explicit branches.

    Pure and custom weights stay attached to the band labels of ``e0``, so
    a continued root follows the occupied band.  Gibbs weights depend on H0
    alone, so they are exchanged where ``e0`` is minus the principal root.
    """
    k = np.asarray(k, dtype=float)
    h0 = scenario.h0_model(k)
    h1 = scenario.h1_model(k)
    p0, p1 = energy(h0), energy(h1)
    e0 = p0 if e0 is None else np.asarray(e0, dtype=complex)
    e1 = p1 if e1 is None else np.asarray(e1, dtype=complex)
    probs = participation(scenario.state, h0, k)
    if scenario.state.kind is StateKind.GIBBS:
        probs = probs.swapped(np.abs(e0 - p0) > np.abs(e0 + p0))
    c = coupling(h0, h1, probs, scenario.formulation, e0, e1)
    bad = near_ep(h0) | near_ep(h1) | ~np.isfinite(c)
    return e0, e1, np.where(bad, np.nan + 0j, c)


def continued_branches(scenario: QuenchScenario, k_path):
    """Energies continued along ``k_path`` starting from the principal roots.

    At each step the sign of each root is chosen closest to the previous
    value.  Excluded points restart the continuation from principal roots.
    Returns (e0, e1, c) arrays along the path.
    """
    k_path = np.asarray(k_path, dtype=float)
    h0 = scenario.h0_model(k_path)
    h1 = scenario.h1_model(k_path)
    p0, p1 = energy(h0), energy(h1)
    bad = near_ep(h0) | near_ep(h1)
    e0, e1 = p0.copy(), p1.copy()
    for j in range(1, k_path.size):
        if bad[j] or bad[j - 1]:
            continue
        e0[j] = pick_branch(p0[j], e0[j - 1])
        e1[j] = pick_branch(p1[j], e1[j - 1])
    return _branch_data(scenario, k_path, e0, e1)


def orthogonality_flow(scenario: QuenchScenario, n: int = 0, continued: bool = False, k=None) -> OrthogonalityFlow:
    """Orthogonality vectors over the k grid (or ``k``) for branch ``n``.

    By default the principal roots label bands at each k.  With
    ``continued`` the roots are followed continuously along the path.
    """
    if n < 0:
        raise ValueError("branch index must be >= 0")
    if k is None:
        k = scenario.k_grid.points()
    if continued:
        _, e1, c = continued_branches(scenario, k)
    else:
        _, e1, c = _branch_data(scenario, k)
    vs, vh, dot = orthogonality_vectors(e1, c, n, scenario.formulation)
    return OrthogonalityFlow(n=n, k=np.asarray(k, float), vs=vs, vh=vh, dot=dot, formulation=scenario.formulation)


def _re_z_scaled(e1, c, n):
    """Re z_n·|e1|², the quantity whose zeros mark imaginary-axis crossings."""
    q = q_factor(c)
    a = branch_offset(n)
    return a * e1.imag - q.real * e1.real - q.imag * e1.imag


@dataclass
class CriticalPoint:
    """Critical momentum with its (branch, time) pairs.

    ``branches`` maps each branch index to the (e1, coupling) pair evaluated
    at the refined root, which fixes the side of any square-root cut there.
    """

    k: float
    times: list = field(default_factory=list)
    formulation: Formulation = Formulation.BIORTHOGONAL
    grazing: bool = False
    branches: dict = field(default_factory=dict)

    @property
    def first_time(self):
        return min(t for _, t in self.times) if self.times else None

    def zero(self, n: int) -> complex:
        """Fisher zero z_n on the imaginary axis for a recorded branch."""
        e1, c = self.branches[n]
        return complex((1j * branch_offset(n) - q_factor(c)) / e1)


def _wrap(k):
    k = float(np.mod(k + np.pi, 2 * np.pi) - np.pi)
    return np.pi if k <= -np.pi + 1e-9 else k


def _periodic_gap(a, b):
    d = abs(a - b) % (2 * np.pi)
    return min(d, 2 * np.pi - d)


def _bisect(scenario, n, kl, kr, e0_ref, e1_ref, f_left, tol=1e-10):
    """Bisection on Re z_n·|e1|² with roots continued from the left end."""
    kl, kr = float(kl), float(kr)
    e0_l, e1_l = e0_ref, e1_ref
    sl = np.sign(f_left)
    while kr - kl > tol:
        km = 0.5 * (kl + kr)
        e0, e1, c = _point(scenario, km, e0_l, e1_l)
        fm = _re_z_scaled(e1, c, n)
        if not np.isfinite(fm):
            return None
        if fm == 0:
            return km
        if np.sign(fm) == sl:
            kl, e0_l, e1_l = km, e0, e1
        else:
            kr = km
    return 0.5 * (kl + kr)


def _point(scenario, k, e0_ref, e1_ref):
    kk = np.array([k])
    h0 = scenario.h0_model(kk)
    h1 = scenario.h1_model(kk)
    e0 = pick_branch(energy(h0), e0_ref)
    e1 = pick_branch(energy(h1), e1_ref)
    e0, e1, c = _branch_data(scenario, kk, e0, e1)
    return e0[0], e1[0], c[0]


def _branch_count(e1, c, n_max, t_max):
    """Branches to scan: n < n_max always, more while t_c ≤ t_max is possible."""
    if t_max is None:
        return n_max
    q = q_factor(c)
    finite = np.isfinite(q) & np.isfinite(e1)
    if not np.any(finite):
        return n_max
    qmax = float(np.max(np.abs(q[finite])))
    emax = float(np.max(np.abs(e1[finite])))
    # |z_n| ≥ (a - |Q|)/|e1|, so t_c ≤ t_max needs a ≤ t_max·max|e1| + max|Q|
    n_cover = int(np.ceil((t_max * emax + qmax) / np.pi))
    return int(min(max(n_max, n_cover + 1), MAX_BRANCHES))


def critical_points(scenario: QuenchScenario, n_max: int = 5, t_max=None):
    """Critical momenta and times from zeros of Re z_n(k).

    The scan uses principal roots at every grid point.  Each step k_j → k_j+1
    is also evaluated with the roots continued from k_j; a sign change of
    that continued value brackets a root, which is bisected to
    |Δk| < 1e-10.  This catches zeros sitting exactly where the principal
    roots swap band labels, where the principal function only touches zero.
    A root is kept when |Re z_n|·|e1|² < 1e-8 with principal roots there
    and t_c = Im z_n > 0.

    Branches n < ``n_max`` are always scanned.  When ``t_max`` is given,
    further branches are scanned while they can still give t_c ≤ t_max, and
    only such times are reported for them.  Touches without a sign change
    are returned with ``grazing=True`` and no times.  Output is sorted by k.
    """
    formulation = scenario.formulation
    k = scenario.k_grid.points()
    if scenario.k_grid.endpoint:
        k = k[:-1]
    # one period plus two steps so every grid point has two successors
    loop = np.concatenate([k, k[:2] + 2 * np.pi])
    p0, p1, c_phys = _branch_data(scenario, loop)
    # values at j+1 and j+2 continued from principal roots at j
    e0a = pick_branch(p0[1:], p0[:-1])
    e1a = pick_branch(p1[1:], p1[:-1])
    _, _, c_one = _branch_data(scenario, loop[1:], e0a, e1a)
    e0b = pick_branch(p0[2:], e0a[:-1])
    e1b = pick_branch(p1[2:], e1a[:-1])
    _, _, c_two = _branch_data(scenario, loop[2:], e0b, e1b)
    n_total = _branch_count(p1, c_phys, n_max, t_max)

    found = []  # (k, n, t, grazing, (e1, c))
    n_k = k.size
    for n in range(n_total):
        f = _re_z_scaled(p1, c_phys, n)
        f1 = _re_z_scaled(e1a, c_one, n)
        f2 = _re_z_scaled(e1b, c_two, n)
        for j in range(n_k):
            fj = f[j]
            if not np.isfinite(fj) or abs(fj) <= GRAZE_TOL:
                continue
            nxt = f1[j]
            if not np.isfinite(nxt):
                continue
            if abs(nxt) > GRAZE_TOL:
                if np.sign(nxt) == np.sign(fj):
                    continue
                right = loop[j + 1]
            else:
                after = f2[j]
                if not np.isfinite(after):
                    continue
                if abs(after) <= GRAZE_TOL or np.sign(after) == np.sign(fj):
                    found.append((float(loop[j + 1]), n, None, True, None))
                    continue
                right = loop[j + 2]
            kr = _bisect(scenario, n, loop[j], right, p0[j], p1[j], fj)
            if kr is None:
                continue
            _, e1r, cr = _branch_data(scenario, np.array([kr]))
            e1r, cr = e1r[0], cr[0]
            if not np.isfinite(cr):
                continue
            if abs(_re_z_scaled(e1r, cr, n)) < ROOT_TOL:
                z = (1j * branch_offset(n) - q_factor(cr)) / e1r
                found.append((kr, n, float(z.imag), False, (complex(e1r), complex(cr))))

    points: list[CriticalPoint] = []
    for kr, n, tc, grazing, values in sorted(found, key=lambda x: (x[1], x[0])):
        if not grazing and tc <= 0:
            continue
        if not grazing and n >= n_max and (t_max is None or tc > t_max):
            continue
        kw = _wrap(kr)
        match = next((p for p in points if p.grazing == grazing and _periodic_gap(p.k, kw) < 1e-8), None)
        if match is None:
            match = CriticalPoint(k=kw, formulation=formulation, grazing=grazing)
            points.append(match)
        if tc is not None and n not in match.branches:
            match.times.append((n, tc))
            match.branches[n] = values
    for p in points:
        p.times.sort()
    # a grazing touch already recorded as a crossing is not repeated
    points = [
        p for p in points
        if not p.grazing or not any(not q.grazing and _periodic_gap(p.k, q.k) < 1e-8 for q in points)
    ]
    points.sort(key=lambda p: (p.grazing, p.k))
    return points


def detect_cusps(rate, t, threshold: float = 20.0, floor: float = 1e-10):
    """Kinks of a sampled curve as (t, slope jump) pairs.

    A cusp is a local maximum of the absolute second difference that exceeds
    both ``threshold`` times its median and the absolute ``floor``.  The
    jump magnitude is the second difference divided by the time step.
    """
    rate = np.asarray(rate, dtype=float)
    t = np.asarray(t, dtype=float)
    if rate.size < 5:
        raise ValueError("cusp detection needs at least 5 samples")
    dt = t[1] - t[0]
    d2 = np.abs(rate[2:] - 2 * rate[1:-1] + rate[:-2])
    level = max(threshold * float(np.median(d2)), floor)
    out = []
    for i in range(d2.size):
        left = d2[i - 1] if i > 0 else -np.inf
        right = d2[i + 1] if i + 1 < d2.size else -np.inf
        if d2[i] > level and d2[i] > left and d2[i] >= right:
            out.append((float(t[i + 1]), float(d2[i] / dt)))
    return out
