"""Shared independent reference implementations written as plain loops."""
import math
import re
import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from logitmfg.errors import CflWarning

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def expq_scalar(z, q):
    if q == 1.0:
        return math.exp(z)
    b = 1.0 + (1.0 - q) * z
    if b <= 0:
        if q > 1:
            raise ArithmeticError("out of domain")
        return 0.0
    return b ** (1.0 / (1.0 - q))


def lnq_scalar(y, q):
    if q == 1.0:
        return math.log(y)
    return (y ** (1.0 - q) - 1.0) / (1.0 - q)


def naive_kernel(v, q, eta, dx):
    """K[m][l] = exp_q((v_m - v_l)/eta) / sum_o exp_q((v_o - v_l)/eta) dx."""
    n = len(v)
    K = [[0.0] * n for _ in range(n)]
    for l in range(n):
        den = 0.0
        for o in range(n):
            den += expq_scalar((v[o] - v[l]) / eta, q) * dx
        for m in range(n):
            K[m][l] = expq_scalar((v[m] - v[l]) / eta, q) / den
    return K


def naive_transport(mu, v, q, eta, dt, dx):
    """mu'_l = mu_l + dt (sum_m K[l][m]^q mu_m dx - (sum_m K[m][l]^q dx) mu_l)."""
    n = len(mu)
    K = naive_kernel(v, q, eta, dx)
    out = []
    for l in range(n):
        inflow = 0.0
        outflow = 0.0
        for m in range(n):
            inflow += K[l][m] ** q * mu[m] * dx
            outflow += K[m][l] ** q * dx
        out.append(mu[l] + dt * (inflow - outflow * mu[l]))
    return np.array(out)


def naive_hjb(phi_next, u, q, eta, delta, dt, dx):
    n = len(phi_next)
    out = []
    for l in range(n):
        s = 0.0
        for m in range(n):
            s += expq_scalar((phi_next[m] - phi_next[l]) / eta, q) * dx
        out.append(phi_next[l] + dt * (eta * lnq_scalar(s, q) - delta * phi_next[l] + delta * u[l]))
    return np.array(out)


def classical_logit_kernel(v, eta, dx):
    """Unshifted softmax: every column equals exp(v/eta) / sum exp(v/eta) dx."""
    w = [math.exp(x / eta) for x in v]
    tot = sum(w) * dx
    col = [x / tot for x in w]
    return np.array([[col[m]] * len(v) for m in range(len(v))])


@pytest.fixture(autouse=True)
def _quiet_cfl():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CflWarning)
        yield


# -- one summary line per acceptance criterion ---------------------------------

_CRITERIA = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid or report.when not in ("setup", "call"):
        return
    name = report.nodeid.split("::")[-1]
    if not name.startswith("test_criterion_"):
        return
    num = int(re.match(r"test_criterion_(\d+)", name).group(1))
    prev = _CRITERIA.get(num, "PASS")
    if report.failed or (report.when == "setup" and report.skipped):
        _CRITERIA[num] = "FAIL"
    elif report.when == "call":
        _CRITERIA[num] = prev


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        terminalreporter.write_line(f"criterion {num:2d}: {_CRITERIA[num]}")
