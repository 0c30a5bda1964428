"""Initial-state descriptions: pure, Gibbs, infinite-temperature or custom.

Per-mode states are band diagonal.  ``p_plus`` weights the band with energy
+h0 and ``p_minus`` the band with energy -h0, where h0 is the principal root.
Excluded modes (near exceptional points or Gibbs poles) carry NaN.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, NamedTuple, Optional

import numpy as np

from .nhband import energy, near_ep


class Formulation(str, Enum):
    BIORTHOGONAL = "biorthogonal"
    NON_BIORTHOGONAL = "non_biorthogonal"


class StateKind(str, Enum):
    PURE_GROUND = "pure_ground"
    PURE_EXCITED = "pure_excited"
    GIBBS = "gibbs"
    INFINITE_T = "infinite_t"
    CUSTOM = "custom"


class ParticipationProbs(NamedTuple):
    p_plus: np.ndarray
    p_minus: np.ndarray

    def swapped(self, mask) -> "ParticipationProbs":
        """Exchange the two weights wherever ``mask`` is true."""
        return ParticipationProbs(
            np.where(mask, self.p_minus, self.p_plus),
            np.where(mask, self.p_plus, self.p_minus),
        )


@dataclass(frozen=True)
class InitialStateSpec:
    """Kind of initial state plus the formulation used to build it.

    ``custom`` maps an array of momenta to ``(p_plus, p_minus)``.
    """

    kind: StateKind = StateKind.PURE_GROUND
    formulation: Formulation = Formulation.BIORTHOGONAL
    beta: Optional[float] = None
    custom: Optional[Callable[[np.ndarray], tuple]] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", StateKind(self.kind))
        object.__setattr__(self, "formulation", Formulation(self.formulation))
        if self.kind is StateKind.GIBBS:
            if self.beta is None or not np.isfinite(self.beta) or self.beta <= 0:
                raise ValueError(f"Gibbs state needs beta > 0, got {self.beta}")
        if self.kind is StateKind.CUSTOM and self.custom is None:
            raise ValueError("custom state needs a probability function")


def gibbs_nk(h0, beta: float):
    """tanh(β h0) with h0 the principal energy of the prequench vector.

    Modes near an exceptional point of H0, or where cosh(β h0) vanishes, are
    returned as NaN.
    """
    if not beta > 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    h0 = np.asarray(h0, dtype=complex)
    e0 = energy(h0)
    with np.errstate(all="ignore"):
        cosh = np.cosh(beta * e0)
        nk = np.tanh(beta * e0)
    bad = near_ep(h0) | (np.abs(cosh) < 1e-12) | ~np.isfinite(nk)
    return np.where(bad, np.nan + 0j, nk)


def participation(spec: InitialStateSpec, h0, k=None) -> ParticipationProbs:
    """Per-mode weights (p_plus, p_minus) for the state ``spec``.

    ``k`` is only needed for custom states.
    """
    h0 = np.asarray(h0, dtype=complex)
    shape = h0.shape[1:]
    bad = near_ep(h0)
    kind = spec.kind
    if kind is StateKind.PURE_GROUND:
        pp, pm = np.zeros(shape, complex), np.ones(shape, complex)
    elif kind is StateKind.PURE_EXCITED:
        pp, pm = np.ones(shape, complex), np.zeros(shape, complex)
    elif kind is StateKind.INFINITE_T:
        pp, pm = np.full(shape, 0.5 + 0j), np.full(shape, 0.5 + 0j)
    elif kind is StateKind.GIBBS:
        nk = gibbs_nk(h0, spec.beta)
        pp, pm = 0.5 * (1 - nk), 0.5 * (1 + nk)
    else:
        if k is None:
            raise ValueError("custom states need the momenta k")
        pp, pm = spec.custom(np.asarray(k, dtype=float))
        pp = np.broadcast_to(np.asarray(pp, dtype=complex), shape).copy()
        pm = np.broadcast_to(np.asarray(pm, dtype=complex), shape).copy()
    bad = bad | (np.abs(pp + pm) == 0)
    nan = np.nan + 0j
    return ParticipationProbs(np.where(bad, nan, pp), np.where(bad, nan, pm))


def mixed_nk(probs: ParticipationProbs):
    """Effective occupation (p_minus - p_plus) / (p_plus + p_minus)."""
    pp, pm = probs
    with np.errstate(all="ignore"):
        return (pm - pp) / (pp + pm)
