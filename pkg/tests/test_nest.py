import json

import pytest

from yoccoz.errors import InvalidArgument
from yoccoz.nest import NestLevel, NestRecord, build_nest, lemma_checks, nu_of, p_window, write_nest


def _record(ps, rs):
    levels = [NestLevel(n, 0, p=p, r=r) for n, (p, r) in enumerate(zip(ps, rs))]
    return NestRecord(0, 5, 1, levels, 10 ** 6, 10 ** 6)


def test_fibonacci_first_level(fib_nest):
    lv = fib_nest.levels[0]
    assert (lv.depth, lv.nu, lv.p) == (3, 8, 4181)
    assert fib_nest.depths[1] == 4184
    assert fib_nest.chains[0][0].depth == 3 and fib_nest.chains[0][-1].depth == 4184


def test_fibonacci_golden_prefix(fib_nest, golden):
    assert fib_nest.golden() == (golden / "fibonacci_nest.csv").read_text()


def test_chain_is_nested(fib_nest):
    depths = [q.depth for q in fib_nest.chains[0]]
    assert depths == sorted(depths) and len(set(depths)) == len(depths)
    # I, A(I), B(A(I)) then T = 5 successor steps
    assert len(depths) == 3 + fib_nest.T


def test_built_levels_pass_integer_checks(fib_nest):
    assert fib_nest.checks and all(c["pass"] for c in fib_nest.checks)


def test_stop_is_recorded(fib_nest):
    # the second level needs orbit lengths far past the horizon
    assert fib_nest.stopped is not None and "level 1" in fib_nest.stopped


def test_nu_needs_critical_anchor(fib_puzzle):
    e = fib_puzzle.engine_
    with pytest.raises(InvalidArgument):
        nu_of(fib_puzzle, e.orbit_piece(0, 1, 3))


def test_zero_levels(fib_puzzle):
    rec = build_nest(fib_puzzle, levels=0)
    assert len(rec.levels) == 1 and rec.golden() == "n,nu,p\n"


def test_lemma_checks_exact():
    rec = _record([3, 6, 13], [None, 1, 1])
    out = {(c["n"], c["check"]): c["pass"] for c in lemma_checks(rec)}
    assert out[(0, "3r(I_{n+1}) >= p_n")] is True
    assert out[(1, "3r(I_{n+1}) >= p_n")] is False
    assert out[(0, "p_{n+1} >= 2p_n")] is True
    assert out[(1, "p_{n+1} >= 2p_n")] is True


def test_p_window():
    rec = _record([1, 2, 4, 8], [None] * 4)
    assert p_window(rec, 3, 2) == 6
    with pytest.raises(InvalidArgument):
        p_window(rec, 1, 2)


def test_write_nest(tmp_path, fib_nest):
    write_nest(fib_nest, tmp_path)
    data = json.loads((tmp_path / "nest.json").read_text())
    assert data["levels"][0]["p"] == 4181
    assert (tmp_path / "nest.csv").read_text().splitlines()[0].startswith("n,depth,nu")
