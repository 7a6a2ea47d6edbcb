"""Bit-level deterministic interference channel, exact and enumerable.

Each of K users sends n_d bits.  At receiver j the own bits land on
levels 0..n_d-1 (top bit at level n_d-1) and every interferer's bits land
on levels n_c-n_d..n_c-1 (bits shifted below level 0 are lost); levels
add mod 2 across contributors.  With n_c >= 2*n_d the two bands are
disjoint, so each receiver reads its own bits and the mod-2 sum of the
interfering bits with zero error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .zp_codes import EnumerationTooLarge

EXHAUSTION_CAP_BITS = 24


class RegimeViolation(ValueError):
    """Level bands overlap; disjoint-band decoding is undefined."""


@dataclass(frozen=True)
class DetChannelConfig:
    K: int
    n_d: int  # direct-link bit levels
    n_c: int  # cross-link bit levels

    def __post_init__(self):
        if self.K < 2:
            raise ValueError("K must be >= 2")
        if self.n_d < 1:
            raise ValueError("n_d must be >= 1")
        if self.n_c < 0:
            raise ValueError("n_c must be >= 0")

    @property
    def q(self) -> int:
        """Received levels."""
        return max(self.n_d, self.n_c)

    @property
    def very_strong(self) -> bool:
        # n_c = 0 is the no-interference baseline, vacuously very strong.
        return self.n_c == 0 or self.n_c >= 2 * self.n_d

    @property
    def gdof_ratio(self) -> float:
        return self.n_c / self.n_d


@dataclass(frozen=True)
class DetSignal:
    """One channel use: per-user inputs (K x n_d) and per-receiver outputs (K x q)."""

    inputs: np.ndarray
    outputs: np.ndarray

    def __post_init__(self):
        for name in ("inputs", "outputs"):
            arr = np.asarray(getattr(self, name), dtype=np.int64)
            if np.any((arr != 0) & (arr != 1)):
                raise ValueError(f"{name} must be 0/1 bits")
            object.__setattr__(self, name, arr)


def _validate_inputs(cfg: DetChannelConfig, inputs) -> np.ndarray:
    arr = np.asarray(inputs, dtype=np.int64)
    if arr.shape != (cfg.K, cfg.n_d):
        raise ValueError(f"inputs must be K x n_d = {cfg.K} x {cfg.n_d}, got {arr.shape}")
    if np.any((arr != 0) & (arr != 1)):
        raise ValueError("inputs must be 0/1 bits")
    return arr


def det_output(cfg: DetChannelConfig, inputs) -> np.ndarray:
    """Receiver outputs, K x q bit array; bit index == level index."""
    x = _validate_inputs(cfg, inputs)
    y = np.zeros((cfg.K, cfg.q), dtype=np.int64)
    for j in range(cfg.K):
        y[j, : cfg.n_d] ^= x[j]
        if cfg.n_c > 0:
            inter = (x.sum(axis=0) - x[j]) & 1  # mod-2 sum over interferers, per bit
            b0 = max(0, cfg.n_d - cfg.n_c)  # bits below level 0 are lost
            y[j, cfg.n_c - cfg.n_d + b0 : cfg.n_c] ^= inter[b0:]
    return y


def det_decode(cfg: DetChannelConfig, y_j) -> tuple[np.ndarray, np.ndarray]:
    """Read (own bits, interference level-sum bits) from disjoint bands.

    Exact and zero-error, but only defined when the bands are disjoint
    (n_c >= 2*n_d, or n_c = 0 with no interference band at all).
    """
    if not cfg.very_strong:
        raise RegimeViolation(
            f"levels overlap: n_c={cfg.n_c} < 2*n_d={2 * cfg.n_d}"
        )
    y = np.asarray(y_j, dtype=np.int64)
    if y.shape != (cfg.q,):
        raise ValueError(f"output length {y.shape} != q={cfg.q}")
    own = y[: cfg.n_d].copy()
    if cfg.n_c == 0:
        return own, np.zeros(0, dtype=np.int64)
    return own, y[cfg.n_c - cfg.n_d : cfg.n_c].copy()


def _all_input_bits(cfg: DetChannelConfig) -> np.ndarray:
    """(2^(K*n_d), K, n_d) bit array covering every input tuple."""
    total_bits = cfg.K * cfg.n_d
    t = np.arange(1 << total_bits, dtype=np.uint32)[:, None]
    bits = ((t >> np.arange(total_bits, dtype=np.uint32)) & 1).astype(np.uint8)
    return bits.reshape(-1, cfg.K, cfg.n_d)


def det_capacity_check(cfg: DetChannelConfig, cap_bits: int = EXHAUSTION_CAP_BITS) -> bool:
    """True iff every receiver recovers its own n_d bits with zero error.

    Exhaustive over all 2^(K*n_d) input tuples: receiver j is zero-error
    iff no two tuples with different own bits collide on y_j (no decoder,
    however clever, can beat that).  When the level bands are disjoint the
    result is cross-checked against det_decode.
    """
    total_bits = cfg.K * cfg.n_d
    if total_bits > cap_bits:
        raise EnumerationTooLarge(f"K*n_d = {total_bits} bits exceeds cap {cap_bits}")
    bits = _all_input_bits(cfg)
    n_d, n_c, q = cfg.n_d, cfg.n_c, cfg.q
    level_weights = 1 << np.arange(q, dtype=np.int64)
    ok = True
    for j in range(cfg.K):
        y = np.zeros((bits.shape[0], q), dtype=np.uint8)
        y[:, :n_d] ^= bits[:, j, :]
        if n_c > 0:
            inter = (
                (bits.sum(axis=1, dtype=np.int64) - bits[:, j, :]) & 1
            ).astype(np.uint8)
            b0 = max(0, n_d - n_c)
            y[:, n_c - n_d + b0 : n_c] ^= inter[:, b0:]
        y_int = y.astype(np.int64) @ level_weights
        own_int = bits[:, j, :].astype(np.int64) @ level_weights[:n_d]
        keys = y_int << n_d | own_int
        if np.unique(keys).size != np.unique(y_int).size:
            ok = False
            break
        if cfg.very_strong:
            # disjoint bands: the direct read-off must match ground truth
            if np.any(y[:, :n_d] != bits[:, j, :]):
                raise AssertionError("disjoint-band read-off disagrees with ground truth")
    return ok


def level_diagram(cfg: DetChannelConfig) -> str:
    """ASCII picture of which bits land on which level, per receiver."""
    lines = [f"K={cfg.K}, n_d={cfg.n_d}, n_c={cfg.n_c}, q={cfg.q}, "
             f"ratio n_c/n_d = {cfg.gdof_ratio:g}, very_strong = {cfg.very_strong}"]
    for j in range(cfg.K):
        lines.append(f"receiver {j + 1}:")
        for lvl in range(cfg.q - 1, -1, -1):
            contrib = []
            if lvl < cfg.n_d:
                contrib.append(f"X{j + 1}[{lvl}]")
            if cfg.n_c > 0:
                b = lvl - (cfg.n_c - cfg.n_d)
                if 0 <= b < cfg.n_d and lvl < cfg.n_c:
                    others = [f"X{u + 1}[{b}]" for u in range(cfg.K) if u != j]
                    contrib.append(" ^ ".join(others))
            lines.append(f"  level {lvl} | " + (" ^ ".join(contrib) if contrib else "-"))
    return "\n".join(lines)
