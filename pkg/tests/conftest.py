import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from temporeach.bounder import QueryTiming
from temporeach.expressions import Scale, StateVar, Sum, ControlVar
from temporeach.geometry import Hyperrect
from temporeach.model import Layer, NeuralNet, SystemSpec

# keep the suite fully deterministic
settings.register_profile(
    "deterministic",
    derandomize=True,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("deterministic")


def lin_comb(coeffs, ucoeffs=()):
    """Expression for sum_j coeffs[j]*x_j + sum_j ucoeffs[j]*u_j."""
    terms = [Scale(float(c), StateVar(j)) for j, c in enumerate(coeffs) if c != 0]
    terms += [Scale(float(c), ControlVar(j)) for j, c in enumerate(ucoeffs) if c != 0]
    if not terms:
        terms = [Scale(0.0, StateVar(0))]
    expr = terms[0]
    for t in terms[1:]:
        expr = Sum(expr, t)
    return expr


def linear_system(A, B=None, K=None, name="linear"):
    """x' = A x + B u with a one-layer linear controller u = K x (optional)."""
    A = np.asarray(A, dtype=float)
    d = A.shape[0]
    if B is None:
        update = tuple(lin_comb(A[i]) for i in range(d))
        return SystemSpec(name=name, state_dim=d, control_dim=0,
                          update=update, controller=None)
    B = np.asarray(B, dtype=float)
    K = np.asarray(K, dtype=float)
    m = B.shape[1]
    update = tuple(lin_comb(A[i], B[i]) for i in range(d))
    net = NeuralNet((Layer(K, np.zeros(m), "linear"),))
    return SystemSpec(name=name, state_dim=d, control_dim=m,
                      update=update, controller=net)


def identity_system(d=2):
    return SystemSpec(name="identity", state_dim=d, control_dim=0,
                      update=tuple(StateVar(i) for i in range(d)),
                      controller=None)


def closed_form_linear_boxes(M, x0: Hyperrect, n: int):
    """Exact per-step template boxes for x' = M x: center M^t c, radius |M^t| r."""
    c = x0.center
    r = 0.5 * x0.widths
    Mk = np.eye(M.shape[0])
    boxes = []
    for _ in range(n):
        Mk = M @ Mk
        ck = Mk @ c
        rk = np.abs(Mk) @ r
        boxes.append(Hyperrect(ck - rk, ck + rk))
    return boxes


class ScriptedBackend:
    """Scheduler test double: trivial sets, costs charged to the clock,
    optional per-call status script."""

    def __init__(self, cost_fn=lambda h: float(h), statuses=None):
        self.cost_fn = cost_fn
        self.statuses = list(statuses) if statuses else None
        self.calls = []
        self._last = None

    def symbolic_reach(self, q, x_start, t_start, clock):
        from temporeach.bounder import QueryStatus

        self.calls.append((t_start, q.h))
        cost = float(self.cost_fn(q.h))
        clock.advance(cost)
        if self.statuses:
            tag = self.statuses[min(len(self.calls) - 1, len(self.statuses) - 1)]
            self._last = QueryStatus(tag)
        else:
            self._last = QueryStatus.NOMINAL
        data = {t_start + q.h: QueryTiming(time=cost, steps=q.h)}
        return data, [x_start] * q.h

    def status(self, q):
        if self._last is None:
            raise RuntimeError("status before any call")
        return self._last


@pytest.fixture()
def pendulum():
    from temporeach import fixtures

    return fixtures.load("pendulum")
