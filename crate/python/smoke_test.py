"""Smoke test for the sabr_mc extension.

Build and install first, e.g.

    pip install --no-build-isolation ./crates/python
    python python/smoke_test.py
"""

import math

import sabr_mc


def main():
    p = sabr_mc.SabrParams.builtin("case1")
    assert (p.f0, p.beta, p.rho) == (1.0, 0.3, -0.8), p

    fs = sabr_mc.simulate_terminal(p, 10.0, 1.0, 20000, seed=1)
    assert len(fs) == 20000 and min(fs) >= 0.0
    mean = sum(fs) / len(fs)
    sd = math.sqrt(sum((f - mean) ** 2 for f in fs) / (len(fs) - 1))
    assert abs(mean - 1.0) < 4 * sd / math.sqrt(len(fs)), mean
    atm = sabr_mc.call_price(fs, 1.0)
    assert abs(atm - 0.28502) < 0.02, atm
    assert fs == sabr_mc.simulate_terminal(p, 10.0, 1.0, 20000, seed=1)

    zero_rho = sabr_mc.SabrParams(0.05, 0.4, 0.6, 0.3, 0.0)
    a = sabr_mc.simulate_terminal(zero_rho, 1.0, 0.5, 2000, seed=3, scheme="cev")
    b = sabr_mc.simulate_terminal(zero_rho, 1.0, 0.5, 2000, seed=3, scheme="islah")
    assert a == b

    c = sabr_mc.CevParams(0.5, 1.0, 0.25)
    assert 0.0 < c.absorption_prob() < 0.1
    assert abs(c.survival(1e-12) + c.absorption_prob() - 1.0) < 1e-9
    draws = c.sample(10000, 7)
    assert abs(sum(draws) / len(draws) - 1.0) < 0.03

    m = sabr_mc.cond_moments(0.4, 0.0)
    assert abs(m["mu"] - 1.0550797132392546) < 1e-13, m
    v, s, k = sabr_mc.small_time_stats(0.01)
    assert abs(v * math.sqrt(3) / 0.01 - 1.0) < 1e-12

    rows = sabr_mc.run_config('case = "case3"\nn_paths = 2000\nn_reps = 2\n')
    assert len(rows) == 6
    assert all(r["bias"] is not None and abs(r["bias"]) < 0.01 for r in rows), rows

    for bad in (
        lambda: sabr_mc.SabrParams(1.0, 0.25, 0.3, 1.5, 0.0),
        lambda: sabr_mc.run_config("h = 'abc'"),
        lambda: sabr_mc.simulate_terminal(p, 10.0, 1.0, 10, scheme="nope"),
    ):
        try:
            bad()
        except ValueError:
            pass
        else:
            raise AssertionError("expected ValueError")

    print("sabr_mc smoke test passed")


if __name__ == "__main__":
    main()
