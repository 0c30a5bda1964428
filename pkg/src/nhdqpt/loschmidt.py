"""Per-mode Loschmidt amplitudes, echoes and the rate function.

Every per-mode amplitude has the form cos(e1 t) + i sin(e1 t)·c, where e1 is
the postquench energy and c a complex coupling fixed by the initial state:

* biorthogonal: c = n_k ĥ0·ĥ1 (bilinear dot of unit vectors)
* non-biorthogonal: c = -⟨P⟩0, the self-normalised expectation of Ĥ1

The overall trace factor p_plus + p_minus is dropped, so amplitudes equal 1
at t = 0.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .nhband import TwoBandHamiltonian, bilinear_dot, eigenvectors_for, energy, near_ep
from .qstate import Formulation, InitialStateSpec, ParticipationProbs, mixed_nk, participation

#: echo values at or below this are clamped before taking the logarithm
ECHO_FLOOR = 1e-300


class Normalization(str, Enum):
    NONE = "none"
    SELF_NORM = "self_norm"
    BIORTHO_NORM = "biortho_norm"


def apply_bloch(h, v):
    """(h·σ) v for column vectors ``v`` with leading axis of length 2."""
    hx, hy, hz = h
    upper = hx - 1j * hy
    lower = hx + 1j * hy
    return np.array([hz * v[0] + upper * v[1], lower * v[0] - hz * v[1]])


def _energies(h0, h1, e0, e1):
    if e0 is None:
        e0 = energy(h0)
    if e1 is None:
        e1 = energy(h1)
    return np.asarray(e0, dtype=complex), np.asarray(e1, dtype=complex)


def self_normalized_states(h0, e0=None):
    """Unit-norm right eigenvectors (plus, minus) of h0·σ for energies ±e0."""
    h0 = np.asarray(h0, dtype=complex)
    if e0 is None:
        e0 = energy(h0)
    out = []
    for sign in (1, -1):
        r, _ = eigenvectors_for(h0, sign * e0)
        with np.errstate(all="ignore"):
            out.append(r / np.sqrt(np.sum(np.abs(r) ** 2, axis=0)))
    return tuple(out)


def expectation_P0(h0, h1, probs: ParticipationProbs, e0=None, e1=None):
    """Self-normalised expectation Σ p̃± ⟨ũ±|Ĥ1|ũ±⟩ over the prequench bands.

    ``e0`` and ``e1`` select the square-root branches; ``probs`` must be
    labelled consistently with ``e0``.
    """
    h0 = np.asarray(h0, dtype=complex)
    h1 = np.asarray(h1, dtype=complex)
    e0, e1 = _energies(h0, h1, e0, e1)
    pp, pm = probs
    total = pp + pm
    if np.any(total == 0):
        raise ValueError("p_plus + p_minus must not vanish")
    u_plus, u_minus = self_normalized_states(h0, e0)
    with np.errstate(all="ignore"):
        ev_plus = np.sum(u_plus.conj() * apply_bloch(h1, u_plus), axis=0) / e1
        ev_minus = np.sum(u_minus.conj() * apply_bloch(h1, u_minus), axis=0) / e1
        return (pp * ev_plus + pm * ev_minus) / total


def coupling(h0, h1, probs: ParticipationProbs, formulation, e0=None, e1=None):
    """State coupling c in cos(e1 t) + i sin(e1 t)·c."""
    h0 = np.asarray(h0, dtype=complex)
    h1 = np.asarray(h1, dtype=complex)
    e0, e1 = _energies(h0, h1, e0, e1)
    if Formulation(formulation) is Formulation.BIORTHOGONAL:
        with np.errstate(all="ignore"):
            return mixed_nk(probs) * bilinear_dot(h0, h1) / (e0 * e1)
    return -expectation_P0(h0, h1, probs, e0, e1)


def amplitude_from_coupling(e1, c, t):
    e1t = np.asarray(e1) * np.asarray(t)
    return np.cos(e1t) + 1j * np.sin(e1t) * c


def amplitude_bio(h0, h1, nk, t):
    """Biorthogonal amplitude cos(h1 t) + i sin(h1 t)·n_k ĥ0·ĥ1."""
    h0 = np.asarray(h0, dtype=complex)
    h1 = np.asarray(h1, dtype=complex)
    e0, e1 = energy(h0), energy(h1)
    return amplitude_from_coupling(e1, nk * bilinear_dot(h0, h1) / (e0 * e1), t)


def amplitude_bio_pure(h0, h1, t):
    """Zero-temperature biorthogonal amplitude (n_k = 1)."""
    return amplitude_bio(h0, h1, 1.0, t)


def amplitude_bio_infT(h1, t):
    """Infinite-temperature amplitude cos(h1 t)."""
    return amplitude_from_coupling(energy(np.asarray(h1, dtype=complex)), 0.0, t)


def amplitude_nonbio(h0, h1, probs: ParticipationProbs, t):
    """Non-biorthogonal amplitude cos(h1 t) - i sin(h1 t)·⟨P⟩0."""
    h1 = np.asarray(h1, dtype=complex)
    return amplitude_from_coupling(energy(h1), -expectation_P0(h0, h1, probs), t)


def evolution_operator(h1, t):
    """cos(h1 t)𝟙 - i sin(h1 t)Ĥ1 as an array of shape (..., 2, 2)."""
    h1 = np.asarray(h1, dtype=complex)
    e1 = energy(h1)
    et = e1 * t
    unit = h1 / e1
    sig = np.einsum("a...,aij->...ij", unit, _PAULI)
    eye = np.eye(2)
    return np.cos(et)[..., None, None] * eye - 1j * np.sin(et)[..., None, None] * sig


_PAULI = np.array([[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=complex)


def _dense(h):
    return np.einsum("a,aij->ij", np.asarray(h, dtype=complex), _PAULI)


def oracle_evolution(h1, t):
    """exp(-i H1 t) for a single vector by dense diagonalisation."""
    vals, vecs = np.linalg.eig(_dense(h1))
    return vecs @ np.diag(np.exp(-1j * vals * t)) @ np.linalg.inv(vecs)


def oracle_density(h0, probs, formulation):
    """Band-diagonal 2x2 density matrix built from a dense eigensolver.

    The eigenvalue closer to the principal energy +h0 receives ``p_plus``.
    """
    pp, pm = (complex(p) for p in probs)
    vals, vecs = np.linalg.eig(_dense(h0))
    ref = complex(energy(np.asarray(h0, dtype=complex)))
    order = [0, 1] if abs(vals[0] - ref) <= abs(vals[1] - ref) else [1, 0]
    right = vecs[:, order]
    if Formulation(formulation) is Formulation.BIORTHOGONAL:
        left = np.linalg.inv(right)
        return pp * np.outer(right[:, 0], left[0]) + pm * np.outer(right[:, 1], left[1])
    right = right / np.linalg.norm(right, axis=0)
    return pp * np.outer(right[:, 0], right[:, 0].conj()) + pm * np.outer(right[:, 1], right[:, 1].conj())


def oracle_amplitude(h0, h1, probs, formulation, t, normalize: bool = True) -> complex:
    """Tr[ρ U(t)] for one mode with dense linear algebra.

    With ``normalize`` the result is divided by p_plus + p_minus, matching
    the dropped-factor convention of the analytic amplitudes.
    """
    rho = oracle_density(h0, probs, formulation)
    value = np.trace(rho @ oracle_evolution(h1, t))
    if normalize:
        value = value / (complex(probs[0]) + complex(probs[1]))
    return complex(value)


@dataclass(frozen=True)
class KGrid:
    """Uniform momentum grid; by default the periodic grid on [-π, π)."""

    count: int = 2001
    k_min: float = -np.pi
    k_max: float = np.pi
    endpoint: bool = False

    def __post_init__(self):
        if self.count < 3:
            raise ValueError(f"k grid needs at least 3 points, got {self.count}")
        if not self.k_max > self.k_min:
            raise ValueError("k grid needs k_max > k_min")

    def points(self) -> np.ndarray:
        return np.linspace(self.k_min, self.k_max, self.count, endpoint=self.endpoint)

    @property
    def span(self) -> float:
        return self.k_max - self.k_min


@dataclass(frozen=True)
class TGrid:
    """Uniform time grid on [0, t_max] including both ends."""

    count: int = 2000
    t_max: float = 16.0

    def __post_init__(self):
        if self.count < 2:
            raise ValueError(f"t grid needs at least 2 points, got {self.count}")
        if not self.t_max > 0:
            raise ValueError("tGrid: tMax must be > 0")

    def points(self) -> np.ndarray:
        return np.linspace(0.0, self.t_max, self.count)

    @property
    def step(self) -> float:
        return self.t_max / (self.count - 1)


@dataclass(frozen=True)
class QuenchScenario:
    """Quench from ``h0_model`` to ``h1_model`` starting in ``state``.

    ``onsite1`` is a scalar energy added to the postquench Hamiltonian as a
    multiple of the identity; it only rescales amplitudes by e^{-i onsite t}.
    """

    h0_model: TwoBandHamiltonian
    h1_model: TwoBandHamiltonian
    state: InitialStateSpec = field(default_factory=InitialStateSpec)
    k_grid: KGrid = field(default_factory=KGrid)
    t_grid: TGrid = field(default_factory=TGrid)
    onsite1: complex = 0.0

    @property
    def formulation(self) -> Formulation:
        return self.state.formulation

    def mode_data(self, k=None):
        """Vectors, principal energies and weights on ``k`` (grid by default)."""
        if k is None:
            k = self.k_grid.points()
        h0 = self.h0_model(k)
        h1 = self.h1_model(k)
        probs = participation(self.state, h0, k)
        return ModeData(k=np.asarray(k, float), h0=h0, h1=h1, e0=energy(h0), e1=energy(h1), probs=probs)


@dataclass(frozen=True)
class ModeData:
    k: np.ndarray
    h0: np.ndarray
    h1: np.ndarray
    e0: np.ndarray
    e1: np.ndarray
    probs: ParticipationProbs

    @property
    def excluded(self) -> np.ndarray:
        pp, pm = self.probs
        return near_ep(self.h0) | near_ep(self.h1) | ~np.isfinite(pp) | ~np.isfinite(pm)


@dataclass(frozen=True)
class AmplitudeSeries:
    """Amplitude and echo factors on a (t, k) grid; rows are times."""

    k: np.ndarray
    t: np.ndarray
    amplitude: np.ndarray
    echo: np.ndarray
    normalization: Normalization
    excluded_k: np.ndarray
    k_span: float = 2 * np.pi

    @property
    def excluded_k_count(self) -> int:
        return int(np.count_nonzero(self.excluded_k))

    @property
    def excluded_cells(self) -> int:
        return int(np.count_nonzero(~np.isfinite(self.echo)))

    @property
    def clamped_cells(self) -> int:
        with np.errstate(invalid="ignore"):
            return int(np.count_nonzero(self.echo <= 0))


def _echo_rows(t_rows, md: ModeData, c, formulation, normalization, onsite, weights, pre):
    et = np.multiply.outer(t_rows, md.e1)
    cos, sin = np.cos(et), np.sin(et)
    amp = (cos + 1j * sin * c) * np.exp(-1j * onsite * t_rows)[:, None]
    if normalization is Normalization.NONE:
        return amp, np.abs(amp) ** 2
    envelope = np.abs(np.exp(-1j * onsite * t_rows))[:, None] ** 2
    denom = np.zeros(et.shape)
    if normalization is Normalization.SELF_NORM:
        for w, (ket, hket) in zip(weights, pre):
            norm_sq = sum(np.abs(cos * ket[j] - 1j * sin * hket[j]) ** 2 for j in range(2))
            denom = denom + w * norm_sq
    else:
        # pre holds ⟨⟨u_m|Ĥ1|u_n⟩ for (m, n) in band order
        for n, w in enumerate(weights):
            col = 0.0
            for m in range(2):
                delta = 1.0 if m == n else 0.0
                col = col + np.abs(cos * delta - 1j * sin * pre[m][n]) ** 2
            denom = denom + w * col
    denom = denom * envelope
    with np.errstate(all="ignore"):
        echo = np.abs(amp) ** 2 / denom
    echo = np.where((denom > 0) & np.isfinite(denom), echo, np.nan)
    return amp, echo


def echo_series(
    scenario: QuenchScenario,
    normalization: Normalization = Normalization.SELF_NORM,
    threads: int = 1,
    chunk: int = 128,
) -> AmplitudeSeries:
    """Amplitude and echo factors over the scenario's (t, k) grid.

    Self-norm divides by Σ_n w_n ‖U ũ_n‖², with weights w_n = |p_n|² / Σ|p|²
    and ũ_n the unit right eigenvectors of H0, in both formulations.
    Biortho-norm divides by Σ_n w_n Σ_m |⟨⟨u_m|U|u_n⟩|².  Both equal 1 at
    t = 0.  Results do not depend on ``threads``.
    """
    normalization = Normalization(normalization)
    formulation = scenario.formulation
    md = scenario.mode_data()
    excluded = md.excluded
    c = coupling(md.h0, md.h1, md.probs, formulation, md.e0, md.e1)
    excluded = excluded | ~np.isfinite(c)
    c = np.where(excluded, np.nan, c)

    pp, pm = md.probs
    with np.errstate(all="ignore"):
        wsum = np.abs(pp) ** 2 + np.abs(pm) ** 2
        weights = [np.abs(pp) ** 2 / wsum, np.abs(pm) ** 2 / wsum]

    pre = None
    if normalization is Normalization.SELF_NORM:
        with np.errstate(all="ignore"):
            pre = [(u, apply_bloch(md.h1, u) / md.e1) for u in self_normalized_states(md.h0, md.e0)]
    elif normalization is Normalization.BIORTHO_NORM:
        rp, lp = eigenvectors_for(md.h0, md.e0)
        rm, lm = eigenvectors_for(md.h0, -md.e0)
        lefts, rights = (lp, lm), (rp, rm)
        with np.errstate(all="ignore"):
            pre = [[np.sum(lefts[m] * apply_bloch(md.h1, rights[n]), axis=0) / md.e1 for n in range(2)] for m in range(2)]

    t = scenario.t_grid.points()
    nt, nk = t.size, md.k.size
    amplitude = np.empty((nt, nk), dtype=complex)
    echo = np.empty((nt, nk))
    onsite = complex(scenario.onsite1)

    def work(start):
        stop = min(start + chunk, nt)
        with np.errstate(all="ignore"):
            a, e = _echo_rows(t[start:stop], md, c, formulation, normalization, onsite, weights, pre)
        amplitude[start:stop] = a
        echo[start:stop] = e

    starts = range(0, nt, chunk)
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, starts))
    else:
        for s in starts:
            work(s)
    echo[:, excluded] = np.nan
    amplitude[:, excluded] = np.nan
    return AmplitudeSeries(
        k=md.k,
        t=t,
        amplitude=amplitude,
        echo=echo,
        normalization=normalization,
        excluded_k=excluded,
        k_span=scenario.k_grid.span,
    )


def rate_function(series: AmplitudeSeries) -> np.ndarray:
    """λ(t) = -(1/4π) ∫ dk ln(echo) by the periodic trapezoid rule.

    Non-finite cells are dropped and the remaining weights renormalised;
    echo values at or below zero are clamped to ``ECHO_FLOOR``.
    """
    echo = series.echo
    valid = np.isfinite(echo)
    with np.errstate(all="ignore"):
        logs = np.log(np.maximum(np.where(valid, echo, 1.0), ECHO_FLOOR))
    logs = np.where(valid, logs, 0.0)
    counts = np.count_nonzero(valid, axis=1)
    with np.errstate(all="ignore"):
        mean = np.sum(logs, axis=1) / counts
    return np.where(counts > 0, -series.k_span / (4 * np.pi) * mean, np.nan)
