"""Pure numpy selection trial loop; fallback twin of the compiled kernel.

Consumes the selection stream draw for draw like the compiled version (per
trial: ``gsize`` uniforms for the partial Fisher-Yates draw, then, in redraw
mode only, ``gsize * num_bs`` uniforms for per-path phases followed by
``gsize * num_bs`` standard normals for per-path gains, both node-major), so
both backends produce identical node selections and verdict sequences from
equal seeds.  Interference sums here use numpy reductions, whose last-bit
rounding can differ from the compiled sequential sums; values agree to ~1e-12
relative.
"""

from __future__ import annotations

import math

import numpy as np

BACKEND = "ref"


def run_trials(gen, pool, cmat, smat, afix, redraw_mu, redraw_sigma, gamma,
               thresholds, group_sizes, max_trials, want_log):
    """Run approval trials until every group is approved or the trial cap hits.

    Parameters
    ----------
    gen : np.random.Generator for the selection stream (mutated).
    pool : candidate node ids; copied, caller's array untouched.
    cmat, smat : (M, num_bs) cos/sin tables of sync-phase differences,
        indexed by absolute node id; used in fixed mode only.
    afix : (M, num_bs) fixed shadowing gains, or None for redraw mode, where
        every trial draws an independent uniform phase and an independent gain
        exp(redraw_mu + redraw_sigma * z) per node-BS path.
    gamma : linear target SNR; per-trial INR = (gamma/gsize) * (sx^2 + sy^2).
    thresholds : (num_bs,) linear INR limits; reject if any INR is above its
        limit, verdict = lowest offending BS index, -1 when approved.
    group_sizes : nodes per group, in approval order.
    max_trials : total trial cap; exceeding it returns converged=False.
    want_log : keep per-trial verdicts, INR rows, and group membership.
    """
    pool_work = np.array(pool, dtype=np.intp)
    n = pool_work.size
    sizes = [int(g) for g in group_sizes]
    thr = np.asarray(thresholds, dtype=np.float64)
    nbs = thr.size
    if sum(sizes) > n:
        raise ValueError("pool too small for the requested groups")
    fixed = afix is not None
    if fixed:
        # precompute gain-weighted tables: per-trial work shrinks to a gather+sum
        ac = np.asarray(afix) * np.asarray(cmat)
        as_ = np.asarray(afix) * np.asarray(smat)

    verdicts: list[int] = []
    inr_rows: list[np.ndarray] = []
    group_rows: list[np.ndarray] = []
    max_gsize = max(sizes)

    start = 0
    trials = 0
    converged = True
    for gsize in sizes:
        scale = gamma / gsize
        while True:
            if trials >= max_trials:
                converged = False
                break
            u = gen.random(gsize)
            for i in range(gsize):
                pos = start + i
                j = pos + int(u[i] * (n - pos))
                if j >= n:
                    j = n - 1
                pool_work[pos], pool_work[j] = pool_work[j], pool_work[pos]
            group = pool_work[start:start + gsize]
            if fixed:
                sx = ac[group, :].sum(axis=0)
                sy = as_[group, :].sum(axis=0)
            else:
                theta = math.tau * gen.random((gsize, nbs))
                z = gen.standard_normal((gsize, nbs))
                gains = np.exp(redraw_mu + redraw_sigma * z)
                sx = (gains * np.cos(theta)).sum(axis=0)
                sy = (gains * np.sin(theta)).sum(axis=0)
            inr = scale * (sx * sx + sy * sy)
            over = np.nonzero(inr > thr)[0]
            verdict = int(over[0]) if over.size else -1
            trials += 1
            if want_log:
                verdicts.append(verdict)
                inr_rows.append(inr)
                if gsize < max_gsize:
                    padded = np.full(max_gsize, -1, dtype=np.intp)
                    padded[:gsize] = group
                    group_rows.append(padded)
                else:
                    group_rows.append(group.copy())
            if verdict < 0:
                start += gsize
                break
        if not converged:
            break

    return {
        "converged": converged,
        "trials": trials,
        "selected": pool_work[:start].copy(),
        "verdicts": np.array(verdicts, dtype=np.int16) if want_log else None,
        "inr_log": (np.array(inr_rows, dtype=np.float64).reshape(len(inr_rows), nbs)
                    if want_log else None),
        "groups": (np.array(group_rows, dtype=np.intp).reshape(len(group_rows), max_gsize)
                   if want_log else None),
    }
