"""Shell shaping, exact closest-vector decoding and codebook construction.

The decoder enumerates the p^k codeword cosets of the lattice; within one
coset the nearest point has a closed form (componentwise rounding), so the
global nearest point is exact at cost p^k.  Codebooks are the shifted
lattice intersected with a spherical shell between radii sqrt(nP') and
sqrt(nP).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .zp_codes import (
    ConstructionALattice,
    EnumerationTooLarge,
    enumerate_codewords,
    fundamental_volume,
)

DECODE_COST_CAP = 1 << 20

# Cap on candidate box points examined while enumerating one codebook.
CODEBOOK_ENUM_CAP = 1 << 24

SHIFT_STREAM = 1


class DecodeCostExceeded(ValueError):
    """p^k exceeds the per-query decoding cost cap."""


def shell_volume(n: int, P: float, P_prime: float = 0.0) -> float:
    """Volume of {x in R^n : n*P' <= |x|^2 <= n*P}.

    c_n [(nP)^(n/2) - (nP')^(n/2)] with c_n = pi^(n/2) / Gamma(n/2 + 1).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not P > P_prime >= 0:
        raise ValueError(f"invalid shell: need P > P' >= 0, got P={P}, P'={P_prime}")
    c_n = math.pi ** (n / 2) / math.gamma(n / 2 + 1)
    return c_n * ((n * P) ** (n / 2) - (n * P_prime) ** (n / 2))


@dataclass(frozen=True, eq=False)
class ShapingShell:
    """Spherical shell between radii sqrt(n*P') and sqrt(n*P)."""

    n: int
    P: float
    P_prime: float = 0.0

    def __post_init__(self):
        shell_volume(self.n, self.P, self.P_prime)  # validates

    @property
    def outer_radius(self) -> float:
        return math.sqrt(self.n * self.P)

    @property
    def inner_radius(self) -> float:
        return math.sqrt(self.n * self.P_prime)

    def volume(self) -> float:
        return shell_volume(self.n, self.P, self.P_prime)

    def contains(self, x) -> bool:
        r2 = float(np.sum(np.asarray(x, dtype=float) ** 2))
        return self.n * self.P_prime <= r2 <= self.n * self.P


def _round_half_down(x: np.ndarray) -> np.ndarray:
    # Nearest integer; exact halves go down, which keeps tied coset
    # minimizers lexicographically smallest.
    return np.ceil(x - 0.5)


def _lex_min_index(points: np.ndarray, d2: np.ndarray) -> int:
    best = d2.min()
    idx = np.nonzero(d2 == best)[0]
    if idx.size == 1:
        return int(idx[0])
    rows = points[idx]
    order = np.lexsort(rows.T[::-1])  # first coordinate is primary key
    return int(idx[order[0]])


def nearest_lattice_point(
    lat: ConstructionALattice,
    target,
    scale: float = 1.0,
    codewords: np.ndarray | None = None,
    cost_cap: int = DECODE_COST_CAP,
) -> np.ndarray:
    """Exact closest point of scale * gamma * Lambda_C to `target`.

    For each codeword c the per-coset minimizer is
    scale*gamma*(c + p*round((target/(scale*gamma) - c)/p)) componentwise;
    the global argmin over cosets is exact.  Ties break to the
    lexicographically smallest point.  `codewords` may carry a precomputed
    enumeration to amortize repeated decodes against one lattice.
    """
    if scale == 0:
        raise ValueError("scale must be nonzero")
    t = np.asarray(target, dtype=float)
    if t.shape != (lat.n,):
        raise ValueError(f"target length {t.shape} != n={lat.n}")
    if codewords is None:
        if lat.p**lat.k > cost_cap:
            raise DecodeCostExceeded(f"p^k = {lat.p**lat.k} exceeds cap {cost_cap}")
        codewords = enumerate_codewords(lat.code, cap=cost_cap)
    cell = abs(scale) * lat.gamma
    Z = _round_half_down((t / cell - codewords) / lat.p)
    cand = cell * (codewords + lat.p * Z)
    d2 = ((cand - t) ** 2).sum(axis=1)
    return cand[_lex_min_index(cand, d2)].copy()


def required_size(n: int, R: float) -> int:
    """Smallest codebook size achieving rate R over n uses: ceil(2^(nR))."""
    return int(math.ceil(2.0 ** (n * R) - 1e-9))


@dataclass(frozen=True, eq=False)
class Codebook:
    """Shifted lattice points inside a shaping shell, in lexicographic order.

    R is the target message rate, R_prime the lattice rate implied by the
    volume ratio V_S / V = 2^(n R').  A sound design keeps R < R'
    (rate_chain_ok); degenerate shells still build, they just flag it.
    `shortfall` flags a codebook smaller than ceil(2^(nR)).
    """

    lattice: ConstructionALattice
    shift: np.ndarray
    shell: ShapingShell
    codewords: np.ndarray
    R: float
    R_prime: float = field(init=False)
    rate_chain_ok: bool = field(init=False)
    shortfall: bool = field(init=False)

    def __post_init__(self):
        shift = np.asarray(self.shift, dtype=float)
        pts = np.asarray(self.codewords, dtype=float).reshape(-1, self.lattice.n)
        object.__setattr__(self, "shift", shift)
        object.__setattr__(self, "codewords", pts)
        if self.R < 0:
            raise ValueError("R must be nonnegative")
        V = fundamental_volume(self.lattice)
        R_prime = math.log2(self.shell.volume() / V) / self.lattice.n
        object.__setattr__(self, "R_prime", R_prime)
        object.__setattr__(self, "rate_chain_ok", self.R < R_prime)
        object.__setattr__(
            self, "shortfall", len(pts) < required_size(self.lattice.n, self.R)
        )

    def __len__(self) -> int:
        return len(self.codewords)

    @property
    def message_count(self) -> int:
        """Messages actually usable: min(|C|, ceil(2^(nR)))."""
        return min(len(self.codewords), required_size(self.lattice.n, self.R))

    def index_of(self, x, decimals: int = 9) -> int | None:
        """Index of codeword equal to x (within rounding), else None."""
        table = getattr(self, "_index_table", None)
        if table is None:
            table = {
                tuple(np.round(row, decimals)): i
                for i, row in enumerate(self.codewords)
            }
            object.__setattr__(self, "_index_table", table)
        return table.get(tuple(np.round(np.asarray(x, dtype=float), decimals)))


def build_codebook(
    lat: ConstructionALattice,
    shift,
    shell: ShapingShell,
    R: float,
    enum_cap: int = CODEBOOK_ENUM_CAP,
) -> Codebook:
    """Enumerate (gamma*Lambda_C + shift) inside the shell, exactly.

    Per coset the points within the outer radius live in a small integer
    box, scanned exhaustively; shell membership is then checked exactly.
    Points come out sorted lexicographically.  Raises EnumerationTooLarge
    when the candidate count passes enum_cap.
    """
    s = np.asarray(shift, dtype=float)
    if s.shape != (lat.n,) or shell.n != lat.n:
        raise ValueError("shift/shell dimension mismatch with lattice")
    cosets = enumerate_codewords(lat.code)
    g, p, n = lat.gamma, lat.p, lat.n
    r_out = shell.outer_radius
    lo_b = (-r_out - s) / (g * p)
    hi_b = (r_out - s) / (g * p)
    chunks = []
    examined = 0
    for c in cosets:
        lo = np.ceil(lo_b - c / p - 1e-9).astype(np.int64)
        hi = np.floor(hi_b - c / p + 1e-9).astype(np.int64)
        if np.any(hi < lo):
            continue
        counts = hi - lo + 1
        examined += int(np.prod(counts))
        if examined > enum_cap:
            raise EnumerationTooLarge(
                f"codebook enumeration passed {enum_cap} candidate points"
            )
        axes = [np.arange(l, h + 1) for l, h in zip(lo, hi)]
        Z = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
        X = g * (c + p * Z) + s
        r2 = (X**2).sum(axis=1)
        keep = (r2 >= n * shell.P_prime) & (r2 <= n * shell.P)
        if np.any(keep):
            chunks.append(X[keep])
    if chunks:
        pts = np.vstack(chunks)
        pts = pts[np.lexsort(pts.T[::-1])]
    else:
        pts = np.zeros((0, n))
    return Codebook(lattice=lat, shift=s, shell=shell, codewords=pts, R=R)


def find_shift(
    lat: ConstructionALattice,
    shell: ShapingShell,
    R: float,
    trials: int = 64,
    seed: int = 0,
) -> tuple[np.ndarray, Codebook]:
    """Search random shifts in [0, gamma*p)^n for a codebook of >= 2^(nR) points.

    Returns the first shift that reaches the target size, else the largest
    codebook found (best effort; check Codebook.shortfall).  Deterministic
    given seed.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng([seed, SHIFT_STREAM])
    need = required_size(lat.n, R)
    best = None
    for _ in range(trials):
        s = rng.uniform(0.0, lat.gamma * lat.p, size=lat.n)
        cb = build_codebook(lat, s, shell, R)
        if len(cb) >= need:
            return s, cb
        if best is None or len(cb) > len(best[1]):
            best = (s, cb)
    return best


def message_codebook(cb: Codebook) -> Codebook:
    """The sub-codebook actually assigned to messages at rate R.

    Takes min(|C|, ceil(2^(nR))) codewords, evenly strided through the
    lexicographic order so the message set spreads across the shell
    instead of clustering in one corner.  Deterministic.
    """
    m = cb.message_count
    if m == len(cb):
        return cb
    idx = (np.arange(m) * len(cb)) // m
    return Codebook(
        lattice=cb.lattice,
        shift=cb.shift,
        shell=cb.shell,
        codewords=cb.codewords[idx],
        R=cb.R,
    )


def nearest_codeword(cb: Codebook, y) -> tuple[int, np.ndarray]:
    """Exhaustive nearest-neighbor decode; ties go to the smallest index."""
    if len(cb) == 0:
        raise ValueError("empty codebook")
    y = np.asarray(y, dtype=float)
    d2 = ((cb.codewords - y) ** 2).sum(axis=1)
    idx = int(np.argmin(d2))  # first minimum = smallest index
    return idx, cb.codewords[idx].copy()


def codebook_to_csv(cb: Codebook, path) -> None:
    """One codeword per row, index first column."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index"] + [f"x{i}" for i in range(cb.lattice.n)])
        for i, row in enumerate(cb.codewords):
            writer.writerow([i] + [repr(float(v)) for v in row])
