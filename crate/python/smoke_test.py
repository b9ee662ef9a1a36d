"""Smoke test for the pluridyn extension module.

Build first: pip install --no-build-isolation ./crates/py
"""

import tempfile

import pluridyn_py as pd


def main():
    f = pd.ProjectiveMap.power_map(2, 2)
    assert (f.k, f.degree) == (2, 2)
    g, bound = f.green([1 + 0j, 0.5j, -0.3 + 0j])
    assert abs(g) < 1e-12, g

    text = f.to_text()
    assert pd.ProjectiveMap.parse(text).content_hash() == f.content_hash()

    x = f.iterate([1 + 0j, 0.5 + 0j, 0.25 + 0j], 2)
    assert max(abs(c) for c in x) == 1.0
    assert abs(x[1] - 0.0625) < 1e-15

    p = pd.ProjectiveMap.perturbed_power_map(0.05)
    min_ratio, _ = p.validate(200, 1)
    assert min_ratio > 0
    margin = pd.check_cone(p, 0.2, samples=500, seed=1)
    assert margin > 0

    pts = p.mu_sample(3, 16, seed=2)
    assert len(pts) == 16 and all(len(z) == 3 for z in pts)

    with tempfile.TemporaryDirectory() as out:
        assert pd.run_cli(["validate-map", "--nodes", "200", "--out", out]) == 0
        assert pd.run_cli(["no-such-command"]) == 3

    print("smoke test ok")


if __name__ == "__main__":
    main()
