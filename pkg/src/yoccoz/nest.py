"""The enhanced nest I_0 ⊃ I_1 ⊃ ... of critical puzzle pieces.

All pieces here are critical pieces anchored at one critical point c, so a
piece is determined by its depth and every pullback along the orbit of c
adds the pullback time to the depth:

* ν(I): the smallest ν with f^ν(c) ∈ I, at most b² critical pieces among
  U_j = Comp_{f^j c} f^{-(ν-j)}(I), 0 <= j < ν, and U_0 ∩ PC ⊂ A(I);
* A(I) = Comp_c f^{-ν}(L_{f^ν c}(I)),  B(I) = Comp_c f^{-ν}(I);
* I_{n+1} = Γ^T(B(A(I_n))) with T = 5b.

The integers p_n = depth(I_{n+1}) - depth(I_n) and r(I_n) are exact; r is
taken over the postcritical truncation.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field

from .errors import HorizonExhausted, InvalidArgument, YoccozError
from .puzzle import first_entry, return_time, smallest_successor
from .validation import check_fitted

INT64_MAX = 2 ** 63 - 1


@dataclass(frozen=True)
class NuData:
    nu: int
    entry: int              # first entry time of f^ν(c) back into I
    depth_A: int
    depth_B: int
    critical_hits: int


@dataclass
class NestLevel:
    n: int
    depth: int
    nu: int | None = None
    nu_B: int | None = None
    p: int | None = None
    r: int | None = None
    depth_A: int | None = None
    depth_BA: int | None = None
    critical_hits: int | None = None
    mu: float | None = None
    fat: float | None = None
    rho: float | None = None


@dataclass
class NestRecord:
    critical: int
    T: int
    b: int
    levels: list
    horizon: int
    n_pc: int
    stopped: str | None = None
    partial_power: int | None = None
    checks: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    pieces: list = field(default_factory=list, repr=False)
    chains: list = field(default_factory=list, repr=False)   # I_n ⊃ A ⊃ BA ⊃ Γ(BA) ⊃ ... per level

    @property
    def p(self):
        return [lv.p for lv in self.levels if lv.p is not None]

    @property
    def depths(self):
        return [lv.depth for lv in self.levels]

    def to_json(self):
        return {
            "critical": self.critical, "T": self.T, "b": self.b,
            "horizon": self.horizon, "n_pc": self.n_pc,
            "r_over": "postcritical truncation",
            "stopped": self.stopped, "partial_power": self.partial_power,
            "levels": [asdict(lv) for lv in self.levels],
            "checks": self.checks, "notes": self.notes,
            "chain_depths": [[q.depth for q in ch] for ch in self.chains],
        }

    def to_csv(self):
        buf = io.StringIO()
        cols = ["n", "depth", "nu", "nu_B", "p", "r", "critical_hits", "mu", "fat", "rho"]
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for lv in self.levels:
            d = asdict(lv)
            w.writerow(["" if d[c] is None else d[c] for c in cols])
        return buf.getvalue()

    def golden(self):
        """The (ν_n, p_n) table in the byte format of the regression file."""
        lines = ["n,nu,p"]
        for lv in self.levels:
            if lv.p is not None:
                lines.append(f"{lv.n},{lv.nu},{lv.p}")
        return "\n".join(lines) + "\n"


def _eng(puzzle):
    check_fitted(puzzle, "engine_")
    return puzzle.engine_


def critical_hits(puzzle, ci, depth, nu):
    """#{0 <= j < ν : U_j contains a critical point}, U_j the depth
    depth+ν-j piece of f^j(c)."""
    eng = _eng(puzzle)
    count = 1                       # U_0 contains c
    for cj in range(len(eng.crit)):
        lcp = eng.lcp(ci, cj)
        for j in range(1, nu):
            need = depth + nu - j
            if j + lcp[j] < j + need + 1:
                continue
            if eng.contains_orbit_point(eng.critical_piece(cj, need), ci, j):
                count += 1
                break
    return count


def _pc_condition(puzzle, ci, depth_U0, depth_A):
    """U_0 ∩ PC ⊂ A over the postcritical truncation."""
    eng = _eng(puzzle)
    U0 = eng.critical_piece(ci, depth_U0)
    A = eng.critical_piece(ci, depth_A)
    for cj in range(len(eng.crit)):
        h = eng.horizon(cj)
        stop = min(eng.n_pc, h - depth_A) + 1
        if stop <= 1:
            raise HorizonExhausted("no room for the postcritical check", horizon=h)
        for t in eng.orbit_hits(U0, cj, 1, stop):
            if not eng.contains_orbit_point(A, cj, t):
                return False
    return True


def nu_of(puzzle, piece, ci=0, horizon=None):
    """ν(I) with its entry time, the depths of A(I) and B(I) and the count of
    critical pieces along the pullback."""
    eng = _eng(puzzle)
    if piece.ref != (ci, 0):
        raise InvalidArgument("nu_of expects a critical piece anchored at the critical point")
    b = len(eng.crit)
    m = piece.depth
    h = eng.horizon(ci) if horizon is None else min(horizon, eng.horizon(ci))
    stop = h - m + 1
    if stop <= 1:
        raise HorizonExhausted(f"no room to look for returns to depth {m}", horizon=h)
    for nu in eng.orbit_hits(piece, ci, 1, stop):
        hits = critical_hits(puzzle, ci, m, nu)
        if hits > b * b:
            continue
        k, _ = first_entry(puzzle, ci, nu, piece, horizon=h)
        depth_A = m + nu + k
        if depth_A > h:
            raise HorizonExhausted(f"A(I) at depth {depth_A} is beyond the horizon", horizon=h)
        if _pc_condition(puzzle, ci, m + nu, depth_A):
            return NuData(nu, k, depth_A, m + nu, hits)
    raise HorizonExhausted(f"no admissible ν for the depth-{m} piece at horizon {h}", horizon=h)


def op_A(puzzle, piece, ci=0, horizon=None):
    d = nu_of(puzzle, piece, ci, horizon)
    return _eng(puzzle).critical_piece(ci, d.depth_A), d


def op_B(puzzle, piece, ci=0, horizon=None):
    d = nu_of(puzzle, piece, ci, horizon)
    return _eng(puzzle).critical_piece(ci, d.depth_B), d


def build_nest(puzzle, levels=5, ci=0, I0=None, horizon=None, boxmap=None):
    """Build up to ``levels`` steps I_n -> I_{n+1}.  The nest stops cleanly
    when a search exhausts the horizon; the Γ power reached is recorded."""
    from .boxmap import find_w_piece

    eng = _eng(puzzle)
    if levels < 0:
        raise InvalidArgument("levels must be non-negative")
    b = len(eng.crit)
    T = 5 * b
    if I0 is None:
        if boxmap is not None:
            vi = boxmap.critical_assignment[ci]["V"]
            I0 = eng.critical_piece(ci, boxmap.V[vi].depth)
        else:
            I0 = find_w_piece(puzzle, ci).piece
    h = eng.horizon(ci) if horizon is None else min(horizon, eng.horizon(ci))
    rec = NestRecord(ci, T, b, [NestLevel(0, I0.depth)], h, eng.n_pc)
    rec.pieces.append(I0)
    I = I0
    for n in range(levels):
        cur = rec.levels[-1]
        try:
            A, dA = op_A(puzzle, I, ci, h)
            BA, dB = op_B(puzzle, A, ci, h)
        except HorizonExhausted as exc:
            rec.stopped = f"level {n}: {exc}"
            break
        cur.nu, cur.depth_A, cur.nu_B, cur.depth_BA = dA.nu, dA.depth_A, dB.nu, dB.depth_B
        P = BA
        power = 0
        chain = [I, A, BA]
        rec.chains.append(chain)
        try:
            for _ in range(T):
                P = smallest_successor(puzzle, P, ci, h)
                chain.append(P)
                power += 1
        except HorizonExhausted as exc:
            rec.stopped = f"level {n}: Γ power {power} of {T}: {exc}"
            rec.partial_power = power
            break
        p = P.depth - I.depth
        if p > INT64_MAX:
            raise YoccozError("pullback time overflows 64 bits")
        cur.p = p
        cur.critical_hits = critical_hits(puzzle, ci, I.depth, p)
        nxt = NestLevel(n + 1, P.depth)
        try:
            nxt.r = return_time(puzzle, P, ci, h)
        except HorizonExhausted:
            nxt.r = None
        rec.levels.append(nxt)
        rec.pieces.append(P)
        I = P
    try:
        rec.levels[0].r = return_time(puzzle, I0, ci, h)
    except HorizonExhausted:
        pass
    rec.checks = lemma_checks(rec)
    return rec


def lemma_checks(rec):
    """The exact integer inequalities 3 r(I_{n+1}) >= p_n and
    p_{n+1} >= 2 p_n on every built level."""
    out = []
    lv = rec.levels
    for i in range(len(lv) - 1):
        p, r = lv[i].p, lv[i + 1].r
        if p is None:
            continue
        if r is not None:
            out.append({"n": i, "check": "3r(I_{n+1}) >= p_n", "lhs": 3 * r, "rhs": p,
                        "pass": 3 * r >= p})
        if i + 1 < len(lv) and lv[i + 1].p is not None:
            q = lv[i + 1].p
            out.append({"n": i, "check": "p_{n+1} >= 2p_n", "lhs": q, "rhs": 2 * p,
                        "pass": q >= 2 * p})
    return out


def p_window(nest, n, M):
    """P_{n,M} = p_{n-1} + ... + p_{n-M}."""
    p = [lv.p for lv in nest.levels]
    if M < 1 or n <= M - 1 or n > len(p) or n - M < 0:
        raise InvalidArgument(f"P_(n,M) needs 1 <= M <= n; got n={n}, M={M}")
    window = p[n - M:n]
    if any(x is None for x in window):
        raise InvalidArgument(f"levels {n - M}..{n - 1} are not all built")
    return sum(window)


def write_nest(rec, out_dir):
    """nest.json and nest.csv in ``out_dir``."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "nest.json"), "w") as fh:
        json.dump(rec.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(out_dir, "nest.csv"), "w") as fh:
        fh.write(rec.to_csv())
