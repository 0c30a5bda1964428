"""Winding numbers of planar flows and the chiral-quench invariants.

Windings are sums of principal angle increments divided by 2π.  For a chiral
model h = (dx, dy, 0) the off-diagonal entries are dx - i dy (upper) and
dx + i dy (lower).  Orientation conventions:

* ``nu1_hermitian`` is the winding of arg(dx + i dy), so the SSH chain with
  t1 < t2 gives +1.
* ``nu0_nonhermitian`` is (w_lower - w_upper)/2 with w_upper, w_lower the
  windings of arg(dx - i dy) and arg(dx + i dy); it reduces to
  ``nu1_hermitian`` for real d.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .criticality import continued_branches, critical_points, orthogonality_vectors
from .errors import PreconditionError, WindingError
from .loschmidt import KGrid, QuenchScenario
from .nhband import TwoBandHamiltonian, near_ep

ZERO_TOL = 1e-12
ALIAS_TOL = 1e-6
QUANT_TOL = 1e-9


@dataclass(frozen=True)
class PlanarFlow:
    """Samples (k, v) of a real 2-vector field; ``vectors`` has shape (2, N)."""

    k: np.ndarray
    vectors: np.ndarray
    closed: bool = True

    @classmethod
    def from_complex(cls, k, z, closed: bool = True) -> "PlanarFlow":
        z = np.asarray(z, dtype=complex)
        return cls(np.asarray(k, float), np.array([z.real, z.imag]), closed)


def angle_increments(flow: PlanarFlow) -> np.ndarray:
    """Principal angle steps between neighbours (and back to the start if closed)."""
    v = np.asarray(flow.vectors, dtype=float)
    norms = np.hypot(v[0], v[1])
    small = np.flatnonzero(norms <= ZERO_TOL)
    if small.size:
        raise WindingError(f"flow vanishes at k = {flow.k[small[0]]!r}", k=float(flow.k[small[0]]))
    z = v[0] + 1j * v[1]
    seq = np.concatenate([z, z[:1]]) if flow.closed else z
    steps = np.angle(seq[1:] / seq[:-1])
    bad = np.flatnonzero(np.abs(steps) >= np.pi - ALIAS_TOL)
    if bad.size:
        raise WindingError(
            f"angle step of {steps[bad[0]]:.3f} rad after k = {flow.k[bad[0]]!r}; use a denser grid",
            k=float(flow.k[bad[0]]),
        )
    return steps


def winding_of_flow(flow: PlanarFlow) -> float:
    """Total angle swept by the flow divided by 2π."""
    return float(np.sum(angle_increments(flow)) / (2 * np.pi))


def unwrapped_angle(k, z) -> np.ndarray:
    """Continuous angle of ``z`` along k, starting from the principal value."""
    z = np.asarray(z, dtype=complex)
    flow = PlanarFlow.from_complex(k, z, closed=False)
    steps = angle_increments(flow)
    return np.angle(z[0]) + np.concatenate([[0.0], np.cumsum(steps)])


def _grid_k(grid) -> np.ndarray:
    if grid is None:
        grid = KGrid()
    if isinstance(grid, KGrid):
        return grid.points()
    return np.asarray(grid, dtype=float)


def _closed(k) -> bool:
    # a grid that already contains both ends of the zone needs no closing step
    return not np.isclose(k[-1] - k[0], 2 * np.pi)


def _off_diagonals(model: TwoBandHamiltonian, k):
    h = model(k)
    if np.any(np.abs(h[2]) > ZERO_TOL):
        raise PreconditionError("model is not chiral (hz must vanish)", k=float(k[np.argmax(np.abs(h[2]))]))
    return h, h[0] - 1j * h[1], h[0] + 1j * h[1]


def nu1_hermitian(model: TwoBandHamiltonian, grid=None) -> float:
    """Winding of arg(dx + i dy) for a gapped Hermitian chiral model."""
    k = _grid_k(grid)
    h, _, lower = _off_diagonals(model, k)
    if np.any(np.abs(h.imag) > ZERO_TOL):
        raise PreconditionError("model is not Hermitian", k=float(k[np.argmax(np.abs(h.imag).max(axis=0))]))
    gap = np.abs(lower)
    if np.any(gap <= ZERO_TOL):
        raise PreconditionError("gap closes", k=float(k[np.argmin(gap)]))
    return winding_of_flow(PlanarFlow.from_complex(k, lower, closed=_closed(k)))


def nu0_nonhermitian(model: TwoBandHamiltonian, grid=None) -> float:
    """Half the difference of the windings of the two off-diagonal entries."""
    k = _grid_k(grid)
    h, upper, lower = _off_diagonals(model, k)
    ep = near_ep(h) | (np.abs(upper) <= ZERO_TOL) | (np.abs(lower) <= ZERO_TOL)
    if np.any(ep):
        raise PreconditionError("exceptional point on the grid", k=float(k[np.argmax(ep)]))
    closed = _closed(k)
    w_upper = winding_of_flow(PlanarFlow.from_complex(k, upper, closed=closed))
    w_lower = winding_of_flow(PlanarFlow.from_complex(k, lower, closed=closed))
    return (w_lower - w_upper) / 2


def spectral_winding(k, z) -> float:
    """(1/2π)∫ Im(z'/z) dk with a spectral derivative on a periodic grid.

    Independent cross-check of ``winding_of_flow`` for smooth flows sampled
    on [k0, k0 + 2π) without the endpoint.
    """
    z = np.asarray(z, dtype=complex)
    n = z.size
    freqs = np.fft.fftfreq(n, d=1.0 / n)
    if n % 2 == 0:
        freqs[n // 2] = 0.0
    dz = np.fft.ifft(1j * freqs * np.fft.fft(z))
    return float(np.mean((dz / z).imag))


@dataclass(frozen=True)
class ChiralQuenchFlow:
    """Prequench vector R e^{iφ0} and unit postquench vector d̂1 along k."""

    k: np.ndarray
    ratio: np.ndarray
    phase: np.ndarray
    pre: np.ndarray
    post: np.ndarray
    dot: np.ndarray


def chiral_quench_flow(h0_model: TwoBandHamiltonian, h1_model: TwoBandHamiltonian, grid=None) -> ChiralQuenchFlow:
    """Vectors whose orthogonality marks ⟨P⟩0 = 0 in a chiral pure-state quench.

    R = ((C²+D²)/(A²+B²))^{1/4} and φ0 is half the difference of the
    unwrapped angles of the lower and upper prequench off-diagonal entries,
    each starting from its principal value at the first k.
    """
    k = _grid_k(grid)
    h0, upper, lower = _off_diagonals(h0_model, k)
    ep = near_ep(h0) | (np.abs(upper) <= ZERO_TOL) | (np.abs(lower) <= ZERO_TOL)
    if np.any(ep):
        raise PreconditionError("exceptional point in the prequench model", k=float(k[np.argmax(ep)]))
    h1, _, lower1 = _off_diagonals(h1_model, k)
    if np.any(np.abs(h1.imag) > ZERO_TOL):
        raise PreconditionError("postquench model is not Hermitian", k=float(k[np.argmax(np.abs(h1.imag).max(axis=0))]))
    gap = np.abs(lower1)
    if np.any(gap <= ZERO_TOL):
        raise PreconditionError("postquench gap closes", k=float(k[np.argmin(gap)]))
    ratio = (np.abs(lower) ** 2 / np.abs(upper) ** 2) ** 0.25
    phase = (unwrapped_angle(k, lower) - unwrapped_angle(k, upper)) / 2
    pre = np.array([ratio * np.cos(phase), ratio * np.sin(phase)])
    unit = lower1 / gap
    post = np.array([unit.real, unit.imag])
    return ChiralQuenchFlow(k=k, ratio=ratio, phase=phase, pre=pre, post=post, dot=pre[0] * post[0] + pre[1] * post[1])


@dataclass(frozen=True)
class WindingReport:
    w_s: float
    w_h: float
    delta_w: float
    nu0: Optional[float] = None
    nu1: Optional[float] = None
    delta_nu: Optional[float] = None
    sufficient_dqpt: bool = False
    branch: int = 0


def is_chiral_quench(scenario: QuenchScenario, k=None) -> bool:
    """True when both models are chiral and the postquench one is Hermitian."""
    if k is None:
        k = scenario.k_grid.points()
    h0 = scenario.h0_model(k)
    h1 = scenario.h1_model(k)
    return bool(np.all(np.abs(h0[2]) <= ZERO_TOL) and np.all(np.abs(h1[2]) <= ZERO_TOL) and np.all(np.abs(h1.imag) <= ZERO_TOL))


def flow_windings(scenario: QuenchScenario, n: int = 0, count=None):
    """Windings (w_s, w_h) of the orthogonality vectors over [-π, π].

    Roots are followed continuously from the principal values at -π, so the
    flows may end rotated relative to their start and windings need not be
    integers.
    """
    if count is None:
        count = scenario.k_grid.count
    k = np.linspace(-np.pi, np.pi, count)
    _, e1, c = continued_branches(scenario, k)
    vs, vh, _ = orthogonality_vectors(e1, c, n, scenario.formulation)
    if not (np.all(np.isfinite(vs)) and np.all(np.isfinite(vh))):
        return float("nan"), float("nan")
    w_s = winding_of_flow(PlanarFlow(k, vs, closed=False))
    w_h = winding_of_flow(PlanarFlow(k, vh, closed=False))
    return w_s, w_h


def _snap(value, step):
    """Round ``value`` to the nearest multiple of ``step`` when within tolerance."""
    snapped = round(value / step) * step
    return snapped if abs(snapped - value) < QUANT_TOL else value


def winding_report(scenario: QuenchScenario, n: int = 0) -> WindingReport:
    """Flow windings for branch ``n`` plus chiral invariants when applicable."""
    try:
        w_s, w_h = flow_windings(scenario, n)
    except WindingError:
        w_s, w_h = float("nan"), float("nan")
    delta_w = w_s - w_h
    sufficient = bool(np.isfinite(delta_w) and abs(delta_w) >= 0.5 - QUANT_TOL)
    if not is_chiral_quench(scenario):
        return WindingReport(w_s, w_h, delta_w, sufficient_dqpt=sufficient, branch=n)
    k = scenario.k_grid.points()
    nu0 = _snap(nu0_nonhermitian(scenario.h0_model, k), 0.5)
    nu1 = _snap(nu1_hermitian(scenario.h1_model, k), 1.0)
    delta_nu = nu1 - nu0
    sufficient = abs(delta_nu) >= 0.5 - QUANT_TOL
    return WindingReport(w_s, w_h, delta_w, nu0, nu1, delta_nu, bool(sufficient), n)


def check_sufficiency(scenario: QuenchScenario, n_max: int = 5) -> bool:
    """True unless the report promises a DQPT and no critical point exists."""
    report = winding_report(scenario)
    if not report.sufficient_dqpt:
        return True
    return any(not p.grazing for p in critical_points(scenario, n_max))
