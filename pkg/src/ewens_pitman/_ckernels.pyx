# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Chinese-restaurant kernels.

Every function here has a line-for-line twin in ``_pykernels.py``; both draw
uniforms from the numpy bit generator in the same order, so the two backends
return identical results for identical generators.

Modes: 0 = element array with rejection, 1 = element array with a linear scan
over blocks, 2 = counts only (linear scan over the distinct sizes present).
"""
from libc.math cimport exp, log, log1p
from libc.stdint cimport int64_t
from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from numpy.random cimport bitgen_t

import numpy as np


cdef struct State:
    int64_t n
    int64_t k
    int64_t max_size
    int64_t n_present
    int64_t *element_block
    int64_t *block_sizes
    int64_t *counts
    int64_t *present
    int64_t *present_pos


cdef bitgen_t *_bitgen(object rng) except NULL:
    capsule = rng.bit_generator.capsule
    if not PyCapsule_IsValid(capsule, "BitGenerator"):
        raise ValueError("rng does not expose a numpy BitGenerator capsule")
    return <bitgen_t *> PyCapsule_GetPointer(capsule, "BitGenerator")


cdef inline void _add_size(State *st, int64_t s) noexcept nogil:
    st.counts[s] += 1
    if st.counts[s] == 1:
        st.present_pos[s] = st.n_present
        st.present[st.n_present] = s
        st.n_present += 1
    if s > st.max_size:
        st.max_size = s


cdef inline void _remove_size(State *st, int64_t s) noexcept nogil:
    cdef int64_t pos, last
    st.counts[s] -= 1
    if st.counts[s] == 0:
        pos = st.present_pos[s]
        last = st.present[st.n_present - 1]
        st.present[pos] = last
        st.present_pos[last] = pos
        st.present_pos[s] = -1
        st.n_present -= 1


cdef inline void _reset(State *st, int mode) noexcept nogil:
    cdef int64_t i
    for i in range(st.max_size + 2):
        st.counts[i] = 0
        st.present_pos[i] = -1
    st.n_present = 0
    st.max_size = 0
    st.n = 1
    st.k = 1
    if mode != 2:
        st.element_block[0] = 0
        st.block_sizes[0] = 1
    _add_size(st, 1)


cdef inline int64_t _step(State *st, double alpha, double theta, int mode,
                          bitgen_t *rng) noexcept nogil:
    """Add element n+1; return the old size of the joined block, 0 if new."""
    cdef double u = rng.next_double(rng.state)
    cdef double v, acc
    cdef int64_t n = st.n
    cdef int64_t j, b, s, i
    if u * (n + theta) < alpha * st.k + theta:
        if mode != 2:
            st.block_sizes[st.k] = 1
            st.element_block[n] = st.k
        st.k += 1
        _add_size(st, 1)
        st.n = n + 1
        return 0
    if mode == 0:
        while True:
            j = <int64_t> (rng.next_double(rng.state) * n)
            if j >= n:
                j = n - 1
            b = st.element_block[j]
            s = st.block_sizes[b]
            if rng.next_double(rng.state) * s < s - alpha:
                break
    elif mode == 1:
        v = rng.next_double(rng.state) * (n - alpha * st.k)
        acc = 0.0
        b = st.k - 1
        for i in range(st.k):
            acc += st.block_sizes[i] - alpha
            if v < acc:
                b = i
                break
        s = st.block_sizes[b]
    else:
        v = rng.next_double(rng.state) * (n - alpha * st.k)
        acc = 0.0
        s = st.present[st.n_present - 1]
        for i in range(st.n_present):
            acc += st.counts[st.present[i]] * (st.present[i] - alpha)
            if v < acc:
                s = st.present[i]
                break
    if mode != 2:
        st.element_block[n] = b
        st.block_sizes[b] = s + 1
    _remove_size(st, s)
    _add_size(st, s + 1)
    st.n = n + 1
    return s


cdef inline bint _consistent(State *st) noexcept nogil:
    cdef int64_t r, total = 0, blocks = 0
    for r in range(1, st.max_size + 1):
        total += r * st.counts[r]
        blocks += st.counts[r]
    return total == st.n and blocks == st.k


class _Buffers:
    def __init__(self, n_target, mode):
        self.counts = np.zeros(n_target + 2, dtype=np.int64)
        self.present = np.zeros(n_target + 2, dtype=np.int64)
        self.present_pos = np.full(n_target + 2, -1, dtype=np.int64)
        if mode != 2:
            self.element_block = np.zeros(n_target, dtype=np.int64)
            self.block_sizes = np.zeros(n_target, dtype=np.int64)
        else:
            self.element_block = np.zeros(1, dtype=np.int64)
            self.block_sizes = np.zeros(1, dtype=np.int64)


cdef void _bind(State *st, object buf):
    cdef int64_t[::1] c = buf.counts
    cdef int64_t[::1] p = buf.present
    cdef int64_t[::1] pp = buf.present_pos
    cdef int64_t[::1] eb = buf.element_block
    cdef int64_t[::1] bs = buf.block_sizes
    st.counts = &c[0]
    st.present = &p[0]
    st.present_pos = &pp[0]
    st.element_block = &eb[0]
    st.block_sizes = &bs[0]
    st.max_size = 0


def simulate(double alpha, double theta, int64_t n_target, checkpoints,
             int d, rng, int mode=0, bint keep_state=False):
    """Run one trajectory to ``n_target``.

    Returns ``(records, state)``: ``records[c] = (n, K, K_1, ..., K_d)`` at each
    checkpoint, and ``state = (element_block, block_sizes, size_counts)`` when
    ``keep_state`` (``None`` entries in counts-only mode).
    """
    cdef int64_t[::1] cps = np.ascontiguousarray(checkpoints, dtype=np.int64)
    cdef Py_ssize_t m = cps.shape[0], c = 0, r
    cdef int64_t[:, ::1] rec
    cdef State st
    cdef bitgen_t *bg = _bitgen(rng)
    cdef bint bad = False
    records = np.zeros((m, 2 + d), dtype=np.int64)
    rec = records
    buf = _Buffers(n_target, mode)
    _bind(&st, buf)
    with rng.bit_generator.lock, nogil:
        _reset(&st, mode)
        while True:
            while c < m and cps[c] == st.n:
                if not _consistent(&st):
                    bad = True
                rec[c, 0] = st.n
                rec[c, 1] = st.k
                for r in range(1, d + 1):
                    if r <= st.max_size:
                        rec[c, 1 + r] = st.counts[r]
                c += 1
            if st.n >= n_target or bad:
                break
            _step(&st, alpha, theta, mode, bg)
    if bad:
        raise RuntimeError("partition invariants violated at a checkpoint")
    state = None
    if keep_state:
        counts = buf.counts[: st.max_size + 1].copy()
        if mode == 2:
            state = (None, None, counts)
        else:
            state = (buf.element_block[: st.n].copy(),
                     buf.block_sizes[: st.k].copy(), counts)
    return records, state


def simulate_martingale(double alpha, double theta, int64_t n_target, int r,
                        checkpoints, rng, b, double sibuya_r, int mode=0):
    """Track ``S_{r,n}``, ``log a_{r,n}`` and realized squared increments of M.

    ``b[i]`` holds the coefficient of ``K_{i,n}`` (index 0 unused). Increments
    are measured on ``M / n_target^(r - alpha)``. Rows of the result are
    ``(n, K, S, log_a, qv_scaled)``.
    """
    cdef int64_t[::1] cps = np.ascontiguousarray(checkpoints, dtype=np.int64)
    cdef double[::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t m = cps.shape[0], c = 0
    cdef double[:, ::1] rec
    cdef State st
    cdef bitgen_t *bg = _bitgen(rng)
    cdef double sgn = -1.0 if r % 2 else 1.0
    cdef double shift = sgn * sibuya_r * theta / alpha
    cdef double log_scale = (r - alpha) * log(<double> n_target)
    cdef double log_a = 0.0, s_val, m_old, m_new, qv = 0.0
    cdef int64_t nn, i
    records = np.zeros((m, 5), dtype=np.float64)
    rec = records
    buf = _Buffers(max(n_target, r), mode)
    _bind(&st, buf)
    with rng.bit_generator.lock, nogil:
        _reset(&st, mode)
        s_val = sgn * sibuya_r * st.k
        for i in range(1, r + 1):
            s_val += bv[i] * st.counts[i]
        while True:
            while c < m and cps[c] == st.n:
                rec[c, 0] = st.n
                rec[c, 1] = st.k
                rec[c, 2] = s_val
                rec[c, 3] = log_a
                rec[c, 4] = qv
                c += 1
            if st.n >= n_target:
                break
            m_old = exp(log_a - log_scale) * (s_val + shift)
            nn = st.n
            _step(&st, alpha, theta, mode, bg)
            if nn >= r:
                log_a += log1p((r - alpha) / (nn + alpha + theta - r))
            s_val = sgn * sibuya_r * st.k
            for i in range(1, r + 1):
                s_val += bv[i] * st.counts[i]
            m_new = exp(log_a - log_scale) * (s_val + shift)
            qv += (m_new - m_old) * (m_new - m_old)
    return records


def sample_counts(double alpha, double theta, int64_t n, int64_t replicates,
                  rng, int mode=0):
    """``replicates`` independent partitions of [n] from one stream.

    Row ``j`` holds ``(K_n, K_{1,n}, ..., K_{n,n})``.
    """
    cdef State st
    cdef bitgen_t *bg = _bitgen(rng)
    cdef int64_t j, r
    cdef int64_t[:, ::1] out_v
    out = np.zeros((replicates, n + 1), dtype=np.int64)
    out_v = out
    buf = _Buffers(n, mode)
    _bind(&st, buf)
    with rng.bit_generator.lock, nogil:
        for j in range(replicates):
            _reset(&st, mode)
            while st.n < n:
                _step(&st, alpha, theta, mode, bg)
            out_v[j, 0] = st.k
            for r in range(1, st.max_size + 1):
                out_v[j, r] = st.counts[r]
    return out
