from __future__ import annotations

import numpy as np
import pytest

from nhdqpt.loschmidt import QuenchScenario
from nhdqpt.nhband import TwoBandHamiltonian, make_ssh
from nhdqpt.qstate import Formulation, InitialStateSpec, StateKind

# lines recorded by the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def ssh_quench(t1, t2=1.0, gamma0=1.5, gamma1=0.0, kind=StateKind.PURE_GROUND,
               formulation=Formulation.NON_BIORTHOGONAL, **kw):
    state = InitialStateSpec(kind=kind, formulation=formulation, beta=kw.pop("beta", None))
    return QuenchScenario(make_ssh(t1, t2, gamma0), make_ssh(t1, t2, gamma1), state, **kw)


def random_vec(rng, re=1.0, im=0.5, min_norm=0.1):
    """Random complex 3-vector away from exceptional points."""
    while True:
        h = rng.uniform(-re, re, 3) + 1j * rng.uniform(-im, im, 3)
        if abs(np.sqrt(np.sum(h * h))) > min_norm:
            return h


def random_trig(rng, order, complex_coeffs):
    """Chiral model with random Fourier coefficients up to ``order``."""
    a = rng.normal(size=(2, 2 * order + 1))
    if complex_coeffs:
        a = a + 1j * rng.normal(size=a.shape) * 0.5
    m = np.arange(-order, order + 1)

    def coeffs(k):
        k = np.asarray(k, dtype=float)
        phases = np.exp(1j * np.multiply.outer(k, m))
        dx, dy = phases @ a[0], phases @ a[1]
        if not complex_coeffs:
            dx, dy = dx.real, dy.real
        return np.array([dx, dy, np.zeros_like(dx)])

    return TwoBandHamiltonian(coeffs)


def gapped_models(rng, count, complex_coeffs):
    """Random chiral Fourier models whose off-diagonal entries stay above 0.3."""
    out = []
    while len(out) < count:
        model = random_trig(rng, 2, complex_coeffs)
        h = model(np.linspace(-np.pi, np.pi, 2001, endpoint=False))
        upper, lower = h[0] - 1j * h[1], h[0] + 1j * h[1]
        if min(np.abs(upper).min(), np.abs(lower).min()) > 0.3:
            out.append(model)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
