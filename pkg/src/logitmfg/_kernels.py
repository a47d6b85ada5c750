"""Compiled inner loops shared by the GLD and MFG solvers.

For a value vector ``v`` (a utility slice or a value-function slice) the
deformed-softmax transition kernel is

    phi[m, l] = E(v_m - v_l) / D_l,   D_l = sum_o E(v_o - v_l) dx,

with ``E(z) = exp_q(z / eta)``. Kernel matrices are never materialized in
the solver loops: the column normalizers ``D`` are computed in one pass and
the transport update in a second pass. All reductions run in ascending index
order, so the parallel variants are bit-identical to the serial ones.

For q != 1 the per-slice normalizer array holds D itself; for q == 1 it holds
log D (the classical kernel is column independent and is evaluated in
shifted, overflow-free form).

When ``1/(1-q)`` is an integer k the powers are unrolled at compile time
(E = b^k, E^q = b^(k-1)); otherwise ``pow`` is used with E^q = E / b.
"""
from __future__ import annotations

import math
import threading

import os

import numba
import numpy as np

if "NUMBA_THREADING_LAYER" not in os.environ:
    # skip the TBB probe (and its version warning); workqueue is always present
    numba.config.THREADING_LAYER = "workqueue"

_INT_TOL = 1e-9
_lock = threading.Lock()
_cache: dict = {}


@numba.njit(inline="always")
def _ipow(b, k):
    r = 1.0
    x = b
    while k > 0:
        if k & 1:
            r *= x
        x *= x
        k >>= 1
    return r


def kernel_mode(q: float):
    """Return ``(mode, k)`` for the compiled kernels selected by ``q``."""
    if q == 1.0:
        return "exp", 0
    a = 1.0 / (1.0 - q)
    k = round(a)
    if k != 0 and abs(a - k) < _INT_TOL:
        return "int", int(k)
    return "pow", 0


def _elementwise(mode, k):
    """Build ``ev(b)`` = E and ``evq(b)`` = E^q as functions of the base b."""
    if mode == "int":
        kq = k - 1
        if k > 0:
            @numba.njit(inline="always")
            def ev(b, a):
                return _ipow(b, k)

            @numba.njit(inline="always")
            def evq(b, a):
                return _ipow(b, kq)
        else:
            @numba.njit(inline="always")
            def ev(b, a):
                return 1.0 / _ipow(b, -k)

            @numba.njit(inline="always")
            def evq(b, a):
                return 1.0 / _ipow(b, -kq)
    else:
        @numba.njit(inline="always")
        def ev(b, a):
            if b <= 0.0:
                return 0.0
            return b**a

        @numba.njit(inline="always")
        def evq(b, a):
            if b <= 0.0:
                return 0.0
            return b**a / b

    return ev, evq


class KernelSet:
    """Compiled functions for one ``(q-mode, parallel)`` combination.

    ``colsum(v, c, q, eta, dx, Z) -> bad``
        normalizers for slice ``v``; ``bad`` counts out-of-domain bases (q > 1).
    ``transport(v, Z, mu, c, q, eta, dt, dx, out) -> bad``
        explicit mass update driven by the kernel of ``v``.
    ``hjb(v_next, u, c, q, eta, delta, dt, dx, Z, out) -> bad``
        one explicit backward value-function step; stores the normalizers of
        ``v_next`` in ``Z``.
    ``backward_sweep(Phi, U, Z, c, q, eta, delta, dt, dx) -> bad``
    ``forward_sweep(Phi, Z, M, c, q, eta, dt, dx) -> bad``
    """

    def __init__(self, q: float, parallel: bool):
        self.mode, self.k = kernel_mode(q)
        self.parallel = parallel
        self.check_domain = q > 1.0
        build = _build_exp if self.mode == "exp" else _build_deformed
        fns = build(self.mode, self.k, self.check_domain, parallel)
        self.colsum, self.transport, self.hjb, self.backward_sweep, self.forward_sweep = fns


def get_kernels(q: float, parallel: bool = False) -> KernelSet:
    mode, k = kernel_mode(q)
    key = (mode, k, q > 1.0, bool(parallel))
    with _lock:
        ks = _cache.get(key)
        if ks is None:
            ks = KernelSet(q, bool(parallel))
            _cache[key] = ks
    return ks


def _sweeps(colsum, transport, hjb):
    @numba.njit
    def backward_sweep(Phi, U, Z, c, q, eta, delta, dt, dx):
        nt = Phi.shape[0] - 1
        bad = 0
        for k in range(nt - 1, -1, -1):
            bad += hjb(Phi[k + 1], U[k], c, q, eta, delta, dt, dx, Z[k + 1], Phi[k])
        bad += colsum(Phi[0], c, q, eta, dx, Z[0])
        return bad

    @numba.njit
    def forward_sweep(Phi, Z, M, c, q, eta, dt, dx):
        nt = Phi.shape[0] - 1
        bad = 0
        for k in range(nt):
            bad += transport(Phi[k], Z[k], M[k], c, q, eta, dt, dx, M[k + 1])
        return bad

    return backward_sweep, forward_sweep


def _build_deformed(mode, k, check_domain, parallel):
    ev, evq = _elementwise(mode, k)

    @numba.njit(inline="always")
    def base(b):
        if check_domain:
            return b if b > 0.0 else 1.0
        return max(b, 0.0)

    @numba.njit(inline="always")
    def count_bad(b):
        if check_domain and b <= 0.0:
            return 1
        return 0

    if parallel:
        # one row per l, reduced sequentially in m
        @numba.njit(parallel=True)
        def colsum(v, c, q, eta, dx, Z):
            n = v.shape[0]
            a = 1.0 / (1.0 - q)
            bad = 0
            for l in numba.prange(n):
                vl = v[l]
                s = 0.0
                nb = 0
                for m in range(n):
                    b = 1.0 + c * (v[m] - vl)
                    nb += count_bad(b)
                    s += ev(base(b), a)
                Z[l] = s * dx
                bad += nb
            return bad

        @numba.njit(parallel=True)
        def transport(v, Z, mu, c, q, eta, dt, dx, out):
            n = v.shape[0]
            a = 1.0 / (1.0 - q)
            Dq = np.empty(n)
            w = np.empty(n)
            for m in range(n):
                Dq[m] = Z[m] ** q
                w[m] = mu[m] / Dq[m]
            bad = 0
            for l in numba.prange(n):
                vl = v[l]
                s_out = 0.0
                s_in = 0.0
                nb = 0
                for m in range(n):
                    t = c * (v[m] - vl)
                    nb += count_bad(1.0 + t) + count_bad(1.0 - t)
                    s_out += evq(base(1.0 + t), a)
                    s_in += evq(base(1.0 - t), a) * w[m]
                out[l] = mu[l] + dt * (s_in * dx - (s_out / Dq[l]) * dx * mu[l])
                bad += nb
            return bad

    else:
        # m outermost with per-l accumulators: each l still sums in ascending m
        # (bit-identical to the row form) but the inner loop vectorizes
        @numba.njit
        def colsum(v, c, q, eta, dx, Z):
            n = v.shape[0]
            a = 1.0 / (1.0 - q)
            acc = np.zeros(n)
            bad = 0
            for m in range(n):
                vm = v[m]
                for l in range(n):
                    b = 1.0 + c * (vm - v[l])
                    if check_domain:
                        bad += count_bad(b)
                    acc[l] += ev(base(b), a)
            for l in range(n):
                Z[l] = acc[l] * dx
            return bad

        @numba.njit
        def transport(v, Z, mu, c, q, eta, dt, dx, out):
            n = v.shape[0]
            a = 1.0 / (1.0 - q)
            Dq = np.empty(n)
            w = np.empty(n)
            for m in range(n):
                Dq[m] = Z[m] ** q
                w[m] = mu[m] / Dq[m]
            acc_out = np.zeros(n)
            acc_in = np.zeros(n)
            bad = 0
            for m in range(n):
                vm = v[m]
                wm = w[m]
                for l in range(n):
                    t = c * (vm - v[l])
                    if check_domain:
                        bad += count_bad(1.0 + t) + count_bad(1.0 - t)
                    acc_out[l] += evq(base(1.0 + t), a)
                    acc_in[l] += evq(base(1.0 - t), a) * wm
            for l in range(n):
                out[l] = mu[l] + dt * (acc_in[l] * dx - (acc_out[l] / Dq[l]) * dx * mu[l])
            return bad

    @numba.njit
    def hjb(v_next, u, c, q, eta, delta, dt, dx, Z, out):
        bad = colsum(v_next, c, q, eta, dx, Z)
        g = 1.0 - q
        for l in range(v_next.shape[0]):
            lnq = (Z[l] ** g - 1.0) / g
            out[l] = v_next[l] + dt * (eta * lnq - delta * v_next[l] + delta * u[l])
        return bad

    return (colsum, transport, hjb) + _sweeps(colsum, transport, hjb)


def _build_exp(mode, k, check_domain, parallel):
    prange = numba.prange if parallel else range

    @numba.njit
    def _shifted(v, eta, dx, s):
        n = v.shape[0]
        vmax = v[0]
        for m in range(1, n):
            if v[m] > vmax:
                vmax = v[m]
        S = 0.0
        for m in range(n):
            s[m] = math.exp((v[m] - vmax) / eta)
            S += s[m] * dx
        return vmax, S

    @numba.njit(parallel=parallel)
    def colsum(v, c, q, eta, dx, Z):
        n = v.shape[0]
        s = np.empty(n)
        vmax, S = _shifted(v, eta, dx, s)
        logS = math.log(S)
        for l in prange(n):
            Z[l] = (vmax - v[l]) / eta + logS
        return 0

    @numba.njit(parallel=parallel)
    def transport(v, Z, mu, c, q, eta, dt, dx, out):
        n = v.shape[0]
        s = np.empty(n)
        vmax, S = _shifted(v, eta, dx, s)
        s_out = 0.0
        mass = 0.0
        for m in range(n):
            s_out += s[m] / S
            mass += mu[m]
        for l in prange(n):
            out[l] = mu[l] + dt * ((s[l] / S) * mass * dx - s_out * dx * mu[l])
        return 0

    @numba.njit
    def hjb(v_next, u, c, q, eta, delta, dt, dx, Z, out):
        colsum(v_next, c, q, eta, dx, Z)
        for l in range(v_next.shape[0]):
            out[l] = v_next[l] + dt * (eta * Z[l] - delta * v_next[l] + delta * u[l])
        return 0

    return (colsum, transport, hjb) + _sweeps(colsum, transport, hjb)
