import io

import numpy as np
import pytest

from yoccoz.angles import RationalAngle
from yoccoz.errors import InvalidArgument
from yoccoz.poly import Polynomial, green_array
from yoccoz.rays import (landing_point, rays_land_together, read_rays_jsonl,
                         separating_fixed_cycles, trace_ray, write_rays_jsonl)

from oracles import joukowski_landing

CHEB = Polynomial.quadratic(-2)


@pytest.mark.parametrize("theta", ["0", "1/3", "2/3", "1/2", "1/6", "1/5"])
def test_chebyshev_landing(theta):
    z, ok = landing_point(CHEB, theta)
    assert ok
    assert abs(z - joukowski_landing(float(RationalAngle(theta)))) < 1e-6


def test_trace_follows_potential():
    ray = trace_ray(CHEB, "1/7", 1e-3)
    g, _ = green_array(CHEB, ray.trace)
    assert np.allclose(g, ray.potentials, rtol=1e-6)
    assert np.all(np.diff(ray.potentials) < 0)


def test_trace_rejects_bad_potential():
    with pytest.raises(InvalidArgument):
        trace_ray(CHEB, "1/3", 0.0)
    with pytest.raises(InvalidArgument):
        trace_ray(CHEB, "1/3", 1e6)


def test_co_landing_rays():
    assert rays_land_together(CHEB, "1/3", "2/3")
    assert not rays_land_together(CHEB, "1/3", "1/6")


def test_airplane_alpha_rays():
    (z, angles), = separating_fixed_cycles(Polynomial.quadratic("-1.7548776662466927"))
    assert [str(a) for a in angles] == ["1/3", "2/3"]
    assert z.real == pytest.approx((1 - (1 - 4 * -1.7548776662466927) ** 0.5) / 2, abs=1e-9)


def test_jsonl_round_trip():
    rays = [trace_ray(CHEB, a, 1e-2) for a in ("1/3", "1/5")]
    buf = io.StringIO()
    write_rays_jsonl(rays, buf)
    back = read_rays_jsonl(io.StringIO(buf.getvalue()))
    assert [str(r.angle) for r in back] == ["1/3", "1/5"]
    assert np.allclose(back[0].trace, rays[0].trace)
