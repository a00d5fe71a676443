"""Sequential (Chinese restaurant) construction of Ewens-Pitman partitions.

Element n+1 starts a new block with probability (alpha K_n + theta)/(n + theta)
and otherwise joins block i with probability (n_i - alpha)/(n + theta).

:func:`step` is a readable pure-Python implementation operating on a
:class:`PartitionState`. :func:`run` drives the compiled kernel (or its Python
twin) and only materialises checkpoints.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational

import numpy as np

from ._backend import kernels
from .exceptions import ParameterError

__all__ = [
    "ModelParams",
    "PartitionState",
    "TrajectoryRecord",
    "init",
    "step",
    "run",
    "geometric_schedule",
    "resolve_mode",
    "MODE_REJECTION",
    "MODE_SCAN",
    "MODE_COUNTS",
]

MODE_REJECTION, MODE_SCAN, MODE_COUNTS = 0, 1, 2
# above this alpha the rejection loop retries too often; scan blocks instead
SCAN_ALPHA = 0.95
_MODES = {"auto": None, "rejection": 0, "scan": 1, "counts": 2}


@dataclass(frozen=True)
class ModelParams:
    """Model parameters ``(alpha, theta)``.

    ``alpha`` and ``theta`` may be floats or exact rationals (``Fraction`` or
    ``int``); exact inputs select the rational backend of the moment formulae.
    """

    alpha: float | Fraction
    theta: float | Fraction

    def __post_init__(self):
        a, t = self.alpha, self.theta
        if not (math.isfinite(float(a)) and math.isfinite(float(t))):
            raise ParameterError("alpha and theta must be finite")
        if not 0 <= a < 1:
            raise ParameterError(f"alpha must lie in [0, 1), got {a}")
        if not t > -a:
            raise ParameterError(f"theta must exceed -alpha, got theta={t}, alpha={a}")

    @property
    def asymptotic_regime(self) -> bool:
        return self.alpha > 0 and self.alpha + self.theta > 0

    @property
    def is_exact(self) -> bool:
        return all(
            isinstance(x, Rational) and not isinstance(x, bool)
            for x in (self.alpha, self.theta)
        )

    @property
    def a(self) -> float:
        return float(self.alpha)

    @property
    def t(self) -> float:
        return float(self.theta)

    def exact(self) -> tuple[Fraction, Fraction]:
        """``(alpha, theta)`` as fractions (floats at their binary value)."""
        from .numerics import as_fraction

        return as_fraction(self.alpha), as_fraction(self.theta)

    def require_asymptotic(self):
        if not self.asymptotic_regime:
            raise ParameterError(
                f"operation needs alpha > 0 and alpha + theta > 0, got {self}"
            )


@dataclass
class PartitionState:
    """Mutable partition of [n].

    ``size_counts[r]`` is K_{r,n} (dense, index 0 unused). ``element_block``
    and ``block_sizes`` are ``None`` for a counts-only state.
    """

    n: int
    k_total: int
    size_counts: list[int]
    element_block: list[int] | None = None
    block_sizes: list[int] | None = None

    @classmethod
    def from_counts(cls, counts) -> "PartitionState":
        """Counts-only state from ``{r: K_r}`` or a dense sequence indexed by r."""
        if isinstance(counts, dict):
            top = max((r for r, c in counts.items() if c), default=0)
            dense = [0] * (top + 1)
            for r, c in counts.items():
                if c:
                    if r < 1 or c < 0:
                        raise ValueError(f"invalid size/count pair ({r}, {c})")
                    dense[r] = int(c)
        else:
            dense = [int(c) for c in counts]
            if dense:
                dense[0] = 0
            if any(c < 0 for c in dense):
                raise ValueError("counts must be nonnegative")
        n = sum(r * c for r, c in enumerate(dense))
        k = sum(dense)
        return cls(n=n, k_total=k, size_counts=dense)

    def count(self, r: int) -> int:
        return self.size_counts[r] if 0 < r < len(self.size_counts) else 0

    def counts_prefix(self, d: int) -> np.ndarray:
        return np.array([self.count(r) for r in range(1, d + 1)], dtype=np.int64)

    def present_sizes(self) -> list[int]:
        return [r for r, c in enumerate(self.size_counts) if r and c]

    def check(self):
        c = self.size_counts
        if sum(r * x for r, x in enumerate(c)) != self.n or sum(c[1:]) != self.k_total:
            raise AssertionError("size_counts inconsistent with n or K")
        if self.block_sizes is not None:
            hist = np.bincount(self.element_block[: self.n], minlength=self.k_total)
            if list(hist) != list(self.block_sizes[: self.k_total]):
                raise AssertionError("block_sizes inconsistent with element_block")
            by_size = np.bincount(self.block_sizes[: self.k_total], minlength=len(c))
            if list(by_size[1:]) != list(c[1:]) + [0] * (len(by_size) - len(c)):
                raise AssertionError("size_counts inconsistent with block_sizes")


@dataclass
class TrajectoryRecord:
    """Checkpoint rows ``(n, K, K_1, ..., K_d)``."""

    d: int
    rows: np.ndarray
    final_state: PartitionState | None = field(default=None, repr=False)

    def __post_init__(self):
        if len(self.rows) > 1 and not np.all(np.diff(self.rows[:, 0]) > 0):
            raise ValueError("checkpoint n values must be strictly increasing")

    @property
    def n(self) -> np.ndarray:
        return self.rows[:, 0]

    @property
    def K(self) -> np.ndarray:
        return self.rows[:, 1]

    @property
    def counts(self) -> np.ndarray:
        return self.rows[:, 2:]

    def to_csv(self, fh=None) -> str | None:
        """Write the trajectory CSV; returns the text if ``fh`` is None."""
        out = io.StringIO() if fh is None else fh
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["n", "K"] + [f"K{r}" for r in range(1, self.d + 1)])
        for row in self.rows:
            w.writerow([int(x) for x in row])
        return out.getvalue() if fh is None else None


def init(params: ModelParams) -> PartitionState:
    """Partition of [1]: a single block of size one."""
    if not isinstance(params, ModelParams):
        raise ParameterError("init needs a ModelParams instance")
    return PartitionState(
        n=1, k_total=1, size_counts=[0, 1], element_block=[0], block_sizes=[1]
    )


def resolve_mode(alpha: float, mode="auto") -> int:
    if isinstance(mode, str):
        if mode not in _MODES:
            raise ParameterError(f"unknown sampler mode {mode!r}")
        mode = _MODES[mode]
    if mode is None:
        return MODE_SCAN if alpha > SCAN_ALPHA else MODE_REJECTION
    if mode not in (0, 1, 2):
        raise ParameterError(f"unknown sampler mode {mode!r}")
    return mode


def _bump(counts: list[int], s: int):
    # move one block from size s to s + 1 (s = 0 means a new block)
    if s:
        counts[s] -= 1
    if s + 1 >= len(counts):
        counts.append(0)
    counts[s + 1] += 1


def step(state: PartitionState, params: ModelParams, rng: np.random.Generator,
         mode="auto") -> PartitionState:
    """Add element n+1 in place and return the state.

    In the rejection and scan modes this reproduces the compiled kernel draw for
    draw. The counts-only mode scans sizes in increasing order, so it has the
    same law but not the same realisation.
    """
    a, t = params.a, params.t
    n, k = state.n, state.k_total
    counts = state.size_counts
    m = resolve_mode(a, mode)
    if state.element_block is None:
        m = MODE_COUNTS
    if rng.random() * (n + t) < a * k + t:
        if m != MODE_COUNTS:
            state.element_block.append(k)
            state.block_sizes.append(1)
        state.k_total = k + 1
        _bump(counts, 0)
        state.n = n + 1
        return state
    if m == MODE_REJECTION:
        eb, bs = state.element_block, state.block_sizes
        while True:
            j = min(int(rng.random() * n), n - 1)
            b = eb[j]
            s = bs[b]
            if rng.random() * s < s - a:
                break
    elif m == MODE_SCAN:
        v = rng.random() * (n - a * k)
        acc = 0.0
        b = k - 1
        for i, size in enumerate(state.block_sizes):
            acc += size - a
            if v < acc:
                b = i
                break
        s = state.block_sizes[b]
    else:
        v = rng.random() * (n - a * k)
        acc = 0.0
        sizes = state.present_sizes()
        s = sizes[-1]
        for size in sizes:
            acc += counts[size] * (size - a)
            if v < acc:
                s = size
                break
    if m != MODE_COUNTS:
        state.element_block.append(b)
        state.block_sizes[b] = s + 1
    _bump(counts, s)
    state.n = n + 1
    return state


def geometric_schedule(n_target: int, ratio: float = 2.0, start: int = 1) -> list[int]:
    """Checkpoints ``ceil(start * ratio^j)`` up to ``n_target``, plus ``n_target``."""
    if ratio <= 1:
        raise ParameterError("schedule ratio must exceed 1")
    out = []
    j = 0
    while True:
        c = math.ceil(start * ratio**j)
        if c >= n_target:
            break
        if not out or c > out[-1]:
            out.append(c)
        j += 1
    out.append(n_target)
    return out


def _seeded(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def run(params: ModelParams, n_target: int, checkpoints=None, d: int = 5, rng=None,
        mode="auto", keep_state: bool = False) -> TrajectoryRecord:
    """Simulate one trajectory to ``n_target`` and record checkpoints.

    ``rng`` is a numpy Generator or a seed. ``checkpoints`` defaults to the
    geometric schedule with ratio 2. The result is a deterministic function of
    the generator state.
    """
    if n_target < 1:
        raise ParameterError("n_target must be at least 1")
    if d < 1:
        raise ParameterError("depth d must be at least 1")
    cps = geometric_schedule(n_target) if checkpoints is None else sorted(set(checkpoints))
    if cps and (cps[0] < 1 or cps[-1] > n_target):
        raise ParameterError("checkpoints must lie in [1, n_target]")
    m = resolve_mode(params.a, mode)
    rows, st = kernels.simulate(params.a, params.t, n_target, cps, d, _seeded(rng),
                                m, keep_state)
    final = None
    if keep_state:
        eb, bs, counts = st
        final = PartitionState(
            n=n_target,
            k_total=int(counts.sum()),
            size_counts=counts.tolist(),
            element_block=None if eb is None else eb.tolist(),
            block_sizes=None if bs is None else bs.tolist(),
        )
    return TrajectoryRecord(d=d, rows=rows, final_state=final)
