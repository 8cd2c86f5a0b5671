# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled selection trial loop.

Draw-for-draw compatible with the numpy fallback: per trial it consumes
``gsize`` uniforms (partial Fisher-Yates) and, in redraw mode, ``gsize *
num_bs`` uniforms for per-path phases followed by ``gsize * num_bs`` standard
normals for per-path gains, node-major, through the same PCG64 bit stream the
Generator object wraps.  Node selections and verdict sequences are therefore
identical across backends for equal seeds.

Interference sums accumulate sequentially over the group in node order, one
victim at a time; the replay path reproduces these sums bit for bit.
"""

import numpy as np

cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport cos as c_cos
from libc.math cimport exp as c_exp
from libc.math cimport sin as c_sin
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport (random_standard_normal,
                                           random_standard_uniform)

cnp.import_array()

BACKEND = "fast"

cdef double TWO_PI = 6.283185307179586


def run_trials(object gen, object pool, object cmat, object smat, object afix,
               double redraw_mu, double redraw_sigma, double gamma,
               object thresholds, object group_sizes, object max_trials,
               bint want_log):
    """Same contract as the fallback's run_trials; see _ref.py."""
    cdef cnp.ndarray pool_arr = np.array(pool, dtype=np.intp)
    cdef Py_ssize_t[::1] pw = pool_arr
    cdef cnp.ndarray cm_arr = np.ascontiguousarray(cmat, dtype=np.float64)
    cdef cnp.ndarray sm_arr = np.ascontiguousarray(smat, dtype=np.float64)
    cdef double[:, ::1] cmv = cm_arr
    cdef double[:, ::1] smv = sm_arr
    cdef bint fixed = afix is not None
    cdef cnp.ndarray af_arr
    if fixed:
        af_arr = np.ascontiguousarray(afix, dtype=np.float64)
    else:
        af_arr = np.zeros((1, 1), dtype=np.float64)
    cdef double[:, ::1] afv = af_arr
    cdef cnp.ndarray thr_arr = np.ascontiguousarray(thresholds, dtype=np.float64)
    cdef double[::1] thr = thr_arr
    cdef cnp.ndarray gs_arr = np.array(group_sizes, dtype=np.intp)
    cdef Py_ssize_t[::1] gs = gs_arr

    cdef Py_ssize_t n = pw.shape[0]
    cdef Py_ssize_t nbs = thr.shape[0]
    cdef Py_ssize_t ngroups = gs.shape[0]
    cdef long long cap_trials = int(max_trials)
    cdef Py_ssize_t max_gsize = 0
    cdef Py_ssize_t total = 0
    cdef Py_ssize_t g
    for g in range(ngroups):
        if gs[g] > max_gsize:
            max_gsize = gs[g]
        total += gs[g]
    if total > n:
        raise ValueError("pool too small for the requested groups")
    if cmv.shape[1] != nbs or smv.shape[1] != nbs:
        raise ValueError("phase tables must have one column per BS")

    # scratch: redrawn gains and phase cos/sin (node-major), per-trial INR row
    cdef cnp.ndarray scratch_arr = np.empty((max_gsize, nbs), dtype=np.float64)
    cdef double[:, ::1] scratch = scratch_arr
    cdef cnp.ndarray pc_arr = np.empty((max_gsize, nbs), dtype=np.float64)
    cdef double[:, ::1] pc = pc_arr
    cdef cnp.ndarray ps_arr = np.empty((max_gsize, nbs), dtype=np.float64)
    cdef double[:, ::1] ps = ps_arr
    cdef cnp.ndarray inr_row_arr = np.empty(nbs, dtype=np.float64)
    cdef double[::1] inr_row = inr_row_arr

    # log buffers, doubling growth
    cdef Py_ssize_t cap = 1024 if want_log else 0
    verd_arr = np.empty(cap, dtype=np.int16)
    inr_arr = np.empty((cap, nbs), dtype=np.float64)
    grp_arr = np.empty((cap, max_gsize), dtype=np.intp)
    cdef short[::1] verd_v = verd_arr
    cdef double[:, ::1] inr_v = inr_arr
    cdef Py_ssize_t[:, ::1] grp_v = grp_arr

    bit_generator = gen.bit_generator
    capsule = bit_generator.capsule
    cdef const char *capsule_name = "BitGenerator"
    cdef bitgen_t *rng = <bitgen_t *> PyCapsule_GetPointer(capsule, capsule_name)
    if rng == NULL:
        raise RuntimeError("could not access the generator's bit stream")

    cdef Py_ssize_t start = 0
    cdef long long trials = 0
    cdef bint converged = True
    cdef Py_ssize_t gsize, i, d, pos, j, node, tmp
    cdef int verdict
    cdef double u, th, sx, sy, a, inr_d, scale

    with bit_generator.lock:
        for g in range(ngroups):
            gsize = gs[g]
            scale = gamma / gsize
            while True:
                if trials >= cap_trials:
                    converged = False
                    break
                for i in range(gsize):
                    pos = start + i
                    u = random_standard_uniform(rng)
                    j = pos + <Py_ssize_t>(u * (n - pos))
                    if j >= n:
                        j = n - 1
                    tmp = pw[pos]
                    pw[pos] = pw[j]
                    pw[j] = tmp
                if not fixed:
                    for i in range(gsize):
                        for d in range(nbs):
                            th = TWO_PI * random_standard_uniform(rng)
                            pc[i, d] = c_cos(th)
                            ps[i, d] = c_sin(th)
                    for i in range(gsize):
                        for d in range(nbs):
                            scratch[i, d] = c_exp(
                                redraw_mu + redraw_sigma * random_standard_normal(rng))
                verdict = -1
                for d in range(nbs):
                    sx = 0.0
                    sy = 0.0
                    if fixed:
                        for i in range(gsize):
                            node = pw[start + i]
                            a = afv[node, d]
                            sx += a * cmv[node, d]
                            sy += a * smv[node, d]
                    else:
                        for i in range(gsize):
                            a = scratch[i, d]
                            sx += a * pc[i, d]
                            sy += a * ps[i, d]
                    inr_d = scale * (sx * sx + sy * sy)
                    inr_row[d] = inr_d
                    if verdict < 0 and inr_d > thr[d]:
                        verdict = d
                trials += 1
                if want_log:
                    if <Py_ssize_t> trials > cap:
                        cap = cap * 2
                        verd_arr, inr_arr, grp_arr = _grow(
                            verd_arr, inr_arr, grp_arr, cap)
                        verd_v = verd_arr
                        inr_v = inr_arr
                        grp_v = grp_arr
                    pos = <Py_ssize_t> trials - 1
                    verd_v[pos] = <short> verdict
                    for d in range(nbs):
                        inr_v[pos, d] = inr_row[d]
                    for i in range(gsize):
                        grp_v[pos, i] = pw[start + i]
                    for i in range(gsize, max_gsize):
                        grp_v[pos, i] = -1
                if verdict < 0:
                    start += gsize
                    break
            if not converged:
                break

    cdef Py_ssize_t nt = <Py_ssize_t> trials
    return {
        "converged": bool(converged),
        "trials": int(trials),
        "selected": pool_arr[:start].copy(),
        "verdicts": verd_arr[:nt].copy() if want_log else None,
        "inr_log": inr_arr[:nt].copy() if want_log else None,
        "groups": grp_arr[:nt].copy() if want_log else None,
    }


def _grow(verd, inr, grp, Py_ssize_t cap):
    nv = np.empty(cap, dtype=np.int16)
    nv[:verd.shape[0]] = verd
    ni = np.empty((cap, inr.shape[1]), dtype=np.float64)
    ni[:inr.shape[0]] = inr
    ng = np.empty((cap, grp.shape[1]), dtype=np.intp)
    ng[:grp.shape[0]] = grp
    return nv, ni, ng
