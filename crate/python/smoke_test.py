"""Smoke test for the Python bindings.

    maturin build --release -m crates/python/Cargo.toml
    pip install target/wheels/trustcons-*.whl
    python python/smoke_test.py
"""

import math

import trustcons


def main():
    topo = trustcons.Topology.paper(15)
    assert (topo.n_legit, topo.n_malicious) == (15, 15)
    assert topo.neighbors(0)[:4] == [1, 9, 11, 14]

    v, rho2 = trustcons.Topology.paper().spectral(10.0)
    assert all(abs(x - 1 / 15) < 1e-12 for x in v)
    assert abs(rho2 - 0.88649137) < 1e-6
    nominal = topo.nominal_value(trustcons.PAPER_INITIAL_VALUES)
    assert abs(nominal - sum(trustcons.PAPER_INITIAL_VALUES) / 15) < 1e-12

    path = trustcons.Topology(3, [(0, 1), (1, 2)])
    assert abs(path.spectral(1.0)[1] - 0.5) < 1e-10

    assert abs(trustcons.lambert_w0(1.0) - 0.5671432904097838) < 1e-12
    assert abs(trustcons.hoeffding_legit(0, 0.5) - math.exp(-0.5)) < 1e-15
    b99 = trustcons.bennett_legit(99, 0.05, 0.4**2 / 12)
    assert abs(b99 / 0.0073590056559715697 - 1) < 1e-8
    prob, gl, gm, dmax = trustcons.deviation_bounds(15, 0.4, 0.05, 10_000)
    assert abs(dmax / 3.654458150132801e-15 - 1) < 1e-8
    assert abs(dmax - 2 * (gl + gm)) < 1e-25

    s = trustcons.Scenario.paper(n_malicious=5, ell=0.4, attack="drift", t0=50, horizon=100, trials=4)
    s.seed = 7
    trace = s.simulate()
    assert len(trace) == 1 + 150 - 49
    assert trace.t[0] == 49
    assert trace.max_decomposition_error() < 1e-12
    assert trace.to_csv().startswith("t,agent,x,x_tilde,phi\n")

    mc = s.monte_carlo()
    assert mc["trials"] == 4 and len(mc["mean_deviation"]) == len(trace)
    assert s.summary_csv() == s.summary_csv()

    report = s.bounds(delta=0.05, horizon=60)
    assert len(report["misclassification"]) == 61

    small = trustcons.Scenario.from_toml('t0 = 3\nhorizon = 10\n[topology]\nn_malicious = 2\n')
    assert small.simulate().settling_step is None or small.simulate().settling_step >= 2

    try:
        trustcons.Scenario.from_toml("kappa = -1")
    except ValueError as e:
        assert "kappa" in str(e)
    else:
        raise AssertionError("bad config accepted")

    print("python smoke test: ok")


if __name__ == "__main__":
    main()
