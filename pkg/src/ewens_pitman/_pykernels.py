"""Pure-Python twin of ``_ckernels.pyx``.

Same algorithms, same order of uniform draws, same floating-point expressions,
so a generator seeded identically yields identical output from either backend.
Uniforms are pulled from the generator in blocks; the values seen are exactly
the sequence ``next_double`` would produce, though the generator is left
further advanced than after the compiled kernel.
"""
from __future__ import annotations

import math

import numpy as np

_BLOCK = 4096


class _Uniforms:
    def __init__(self, rng):
        self.rng = rng
        self.buf = []
        self.pos = 0

    def __call__(self):
        if self.pos == len(self.buf):
            self.buf = self.rng.random(_BLOCK).tolist()
            self.pos = 0
        u = self.buf[self.pos]
        self.pos += 1
        return u


class _State:
    __slots__ = (
        "n", "k", "max_size", "element_block", "block_sizes", "counts",
        "present", "present_pos", "mode",
    )

    def __init__(self, size, mode):
        self.mode = mode
        self.counts = [0] * (size + 2)
        self.present = []
        self.present_pos = [-1] * (size + 2)
        self.element_block = [0] * size if mode != 2 else None
        self.block_sizes = [0] * size if mode != 2 else None
        self.max_size = 0
        self.reset()

    def reset(self):
        for i in range(self.max_size + 2):
            self.counts[i] = 0
            self.present_pos[i] = -1
        self.present = []
        self.max_size = 0
        self.n = 1
        self.k = 1
        if self.mode != 2:
            self.element_block[0] = 0
            self.block_sizes[0] = 1
        self.add_size(1)

    def add_size(self, s):
        self.counts[s] += 1
        if self.counts[s] == 1:
            self.present_pos[s] = len(self.present)
            self.present.append(s)
        if s > self.max_size:
            self.max_size = s

    def remove_size(self, s):
        self.counts[s] -= 1
        if self.counts[s] == 0:
            pos = self.present_pos[s]
            last = self.present[-1]
            self.present[pos] = last
            self.present_pos[last] = pos
            self.present_pos[s] = -1
            self.present.pop()

    def consistent(self):
        c = self.counts
        total = sum(r * c[r] for r in range(1, self.max_size + 1))
        blocks = sum(c[1 : self.max_size + 1])
        return total == self.n and blocks == self.k


def _step(st, alpha, theta, mode, uniform):
    u = uniform()
    n = st.n
    if u * (n + theta) < alpha * st.k + theta:
        if mode != 2:
            st.block_sizes[st.k] = 1
            st.element_block[n] = st.k
        st.k += 1
        st.add_size(1)
        st.n = n + 1
        return 0
    if mode == 0:
        eb, bs = st.element_block, st.block_sizes
        while True:
            j = int(uniform() * n)
            if j >= n:
                j = n - 1
            b = eb[j]
            s = bs[b]
            if uniform() * s < s - alpha:
                break
    elif mode == 1:
        v = uniform() * (n - alpha * st.k)
        acc = 0.0
        b = st.k - 1
        bs = st.block_sizes
        for i in range(st.k):
            acc += bs[i] - alpha
            if v < acc:
                b = i
                break
        s = bs[b]
    else:
        v = uniform() * (n - alpha * st.k)
        acc = 0.0
        s = st.present[-1]
        for size in st.present:
            acc += st.counts[size] * (size - alpha)
            if v < acc:
                s = size
                break
    if mode != 2:
        st.element_block[n] = b
        st.block_sizes[b] = s + 1
    st.remove_size(s)
    st.add_size(s + 1)
    st.n = n + 1
    return s


def simulate(alpha, theta, n_target, checkpoints, d, rng, mode=0, keep_state=False):
    cps = [int(c) for c in checkpoints]
    records = np.zeros((len(cps), 2 + d), dtype=np.int64)
    uniform = _Uniforms(rng)
    st = _State(int(n_target), mode)
    c = 0
    while True:
        while c < len(cps) and cps[c] == st.n:
            if not st.consistent():
                raise RuntimeError("partition invariants violated at a checkpoint")
            records[c, 0] = st.n
            records[c, 1] = st.k
            for r in range(1, min(d, st.max_size) + 1):
                records[c, 1 + r] = st.counts[r]
            c += 1
        if st.n >= n_target:
            break
        _step(st, alpha, theta, mode, uniform)
    state = None
    if keep_state:
        counts = np.array(st.counts[: st.max_size + 1], dtype=np.int64)
        if mode == 2:
            state = (None, None, counts)
        else:
            state = (
                np.array(st.element_block[: st.n], dtype=np.int64),
                np.array(st.block_sizes[: st.k], dtype=np.int64),
                counts,
            )
    return records, state


def simulate_martingale(alpha, theta, n_target, r, checkpoints, rng, b, sibuya_r, mode=0):
    cps = [int(c) for c in checkpoints]
    bv = [float(x) for x in b]
    records = np.zeros((len(cps), 5), dtype=np.float64)
    uniform = _Uniforms(rng)
    st = _State(max(int(n_target), r), mode)
    sgn = -1.0 if r % 2 else 1.0
    shift = sgn * sibuya_r * theta / alpha
    log_scale = (r - alpha) * math.log(float(n_target))
    log_a = 0.0
    qv = 0.0

    def s_of():
        s = sgn * sibuya_r * st.k
        for i in range(1, r + 1):
            s += bv[i] * st.counts[i]
        return s

    s_val = s_of()
    c = 0
    while True:
        while c < len(cps) and cps[c] == st.n:
            records[c] = (st.n, st.k, s_val, log_a, qv)
            c += 1
        if st.n >= n_target:
            break
        m_old = math.exp(log_a - log_scale) * (s_val + shift)
        nn = st.n
        _step(st, alpha, theta, mode, uniform)
        if nn >= r:
            log_a += math.log1p((r - alpha) / (nn + alpha + theta - r))
        s_val = s_of()
        m_new = math.exp(log_a - log_scale) * (s_val + shift)
        qv += (m_new - m_old) * (m_new - m_old)
    return records


def sample_counts(alpha, theta, n, replicates, rng, mode=0):
    out = np.zeros((replicates, n + 1), dtype=np.int64)
    uniform = _Uniforms(rng)
    st = _State(int(n), mode)
    for j in range(replicates):
        st.reset()
        while st.n < n:
            _step(st, alpha, theta, mode, uniform)
        out[j, 0] = st.k
        out[j, 1 : st.max_size + 1] = st.counts[1 : st.max_size + 1]
    return out
