"""Compiled inner loop for the built-in dropping policies.

The kernel is distribution-agnostic: it consumes pre-drawn chunks of
inter-arrival and service durations produced by the stochastic module, so the
variate streams (and therefore the results) are bit-identical to the plain
event engine.  The Python wrapper refills chunks and assembles outputs.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

# Return codes of _run_chunk.
ARR_REFILL = 0
SRV_REFILL = 1
DONE_TARGET = 2
DONE_TIME = 3
DONE_DRAIN = 4

# Policy codes (must match simulation._BUILTIN_KERNEL_CODES).
KEEP_OLD = 0
KEEP_FRESH = 1
IAA = 2

_ARR_CHUNK = 1 << 22
_SRV_CHUNK = 1 << 20


@njit(cache=True)
def _run_chunk(
    ia,
    srv,
    no_more_arrivals,
    fstate,
    istate,
    buf_gen,
    buf_pred,
    occupancy,
    out_gen,
    out_dlv,
    B,
    pol,
    eps,
    target_total,
    horizon,
):
    clock = fstate[0]
    next_arr = fstate[1]
    dep = fstate[2]
    ts = fstate[3]
    dmax = fstate[4]
    busy = istate[0]
    blen = istate[1]
    generated = istate[2]
    dropped = istate[3]
    delivered = istate[4]
    a = 0
    s = 0
    n = 0
    code = DONE_DRAIN
    inf = np.inf

    while True:
        if math.isnan(next_arr):
            if a >= ia.size:
                if no_more_arrivals:
                    next_arr = inf
                else:
                    code = ARR_REFILL
                    break
            else:
                next_arr = clock + ia[a]
                a += 1
        dep_t = dep if busy == 1 else inf
        t_next = dep_t if dep_t <= next_arr else next_arr
        if t_next == inf:
            code = DONE_DRAIN
            break
        if horizon > 0.0 and t_next > horizon:
            clock = horizon
            code = DONE_TIME
            break
        if busy == 1 and dep_t <= next_arr:
            # Departure: the buffered tail (if any) starts service next.
            if blen > 0 and s >= srv.size:
                code = SRV_REFILL
                break
            clock = dep_t
            out_gen[n] = ts
            out_dlv[n] = clock
            n += 1
            delivered += 1
            if ts > dmax:
                dmax = ts
            busy = 0
            if target_total > 0 and delivered >= target_total:
                code = DONE_TARGET
                break
            if blen > 0:
                blen -= 1
                ts = buf_gen[blen]
                dep = clock + srv[s]
                s += 1
                busy = 1
        else:
            # Arrival.
            if busy == 0 and s >= srv.size:
                code = SRV_REFILL
                break
            clock = next_arr
            next_arr = np.nan
            gen = clock
            generated += 1
            occupancy[blen + busy] += 1
            if busy == 0:
                busy = 1
                ts = gen
                dep = clock + srv[s]
                s += 1
            elif blen < B:
                pred = dmax
                if ts > pred:
                    pred = ts
                if blen > 0 and buf_gen[blen - 1] > pred:
                    pred = buf_gen[blen - 1]
                buf_gen[blen] = gen
                buf_pred[blen] = pred
                blen += 1
            else:
                dropped += 1
                if pol == KEEP_OLD:
                    pass
                elif pol == KEEP_FRESH:
                    pred = dmax
                    if ts > pred:
                        pred = ts
                    if blen > 1 and buf_gen[blen - 2] > pred:
                        pred = buf_gen[blen - 2]
                    buf_gen[blen - 1] = gen
                    buf_pred[blen - 1] = pred
                else:
                    if B == 1:
                        tb = buf_gen[0]
                        if tb - ts < gen - tb + eps:
                            pred = dmax
                            if ts > pred:
                                pred = ts
                            buf_gen[0] = gen
                            buf_pred[0] = pred
                    else:
                        victim = 0
                        best = buf_gen[0] - buf_pred[0]
                        for i in range(1, blen):
                            gap = buf_gen[i] - buf_pred[i]
                            if gap < best:
                                best = gap
                                victim = i
                        latest = buf_gen[blen - 1]
                        if ts > latest:
                            latest = ts
                        if dmax > latest:
                            latest = dmax
                        if gen - latest + eps < best:
                            pass  # new packet is the victim
                        else:
                            vg = buf_gen[victim]
                            vp = buf_pred[victim]
                            if victim < blen - 1 and buf_pred[victim + 1] == vg:
                                buf_pred[victim + 1] = vp
                            for i in range(victim, blen - 1):
                                buf_gen[i] = buf_gen[i + 1]
                                buf_pred[i] = buf_pred[i + 1]
                            pred = dmax
                            if ts > pred:
                                pred = ts
                            if blen > 1 and buf_gen[blen - 2] > pred:
                                pred = buf_gen[blen - 2]
                            buf_gen[blen - 1] = gen
                            buf_pred[blen - 1] = pred

    fstate[0] = clock
    fstate[1] = next_arr
    fstate[2] = dep
    fstate[3] = ts
    fstate[4] = dmax
    istate[0] = busy
    istate[1] = blen
    istate[2] = generated
    istate[3] = dropped
    istate[4] = delivered
    return code, n, a, s


def run_compiled(arrivals, services, B, pol_code, eps, target_total, horizon):
    """Drive the kernel, refilling variate chunks until the run completes.

    Returns the raw pieces a DeliveryTrace is built from: delivered gen/dlv
    arrays, counters, in-system count, end time and occupancy histogram.
    """
    fstate = np.array([0.0, np.nan, 0.0, 0.0, -np.inf], dtype=np.float64)
    istate = np.zeros(5, dtype=np.int64)
    buf_gen = np.zeros(B, dtype=np.float64)
    buf_pred = np.zeros(B, dtype=np.float64)
    occupancy = np.zeros(B + 2, dtype=np.int64)

    ia = arrivals.take(_ARR_CHUNK)
    srv = services.take(_SRV_CHUNK)
    no_more_arr = ia.size == 0
    gen_parts: list[np.ndarray] = []
    dlv_parts: list[np.ndarray] = []

    while True:
        out_gen = np.empty(srv.size + 2, dtype=np.float64)
        out_dlv = np.empty(srv.size + 2, dtype=np.float64)
        code, n, a, s = _run_chunk(
            ia,
            srv,
            no_more_arr,
            fstate,
            istate,
            buf_gen,
            buf_pred,
            occupancy,
            out_gen,
            out_dlv,
            B,
            pol_code,
            eps,
            target_total,
            horizon,
        )
        if n:
            gen_parts.append(out_gen[:n].copy())
            dlv_parts.append(out_dlv[:n].copy())
        ia = ia[a:]
        srv = srv[s:]
        if code == ARR_REFILL:
            ia = arrivals.take(_ARR_CHUNK)
            if ia.size == 0:
                no_more_arr = True
        elif code == SRV_REFILL:
            fresh = services.take(_SRV_CHUNK)
            if fresh.size == 0:
                raise RuntimeError("service variates exhausted while a packet awaited service")
            srv = np.concatenate((srv, fresh)) if srv.size else fresh
        else:
            break

    gen = np.concatenate(gen_parts) if gen_parts else np.zeros(0, dtype=np.float64)
    dlv = np.concatenate(dlv_parts) if dlv_parts else np.zeros(0, dtype=np.float64)
    busy, blen, generated, dropped, delivered = (int(v) for v in istate)
    in_system = blen + busy
    end_time = horizon if code == DONE_TIME else float(fstate[0])
    return gen, dlv, generated, dropped, delivered, in_system, end_time, occupancy
