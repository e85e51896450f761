"""Smoke test for the torus_hardy extension module.

Build and install first:  maturin develop -m crates/python/Cargo.toml
"""

import cmath
import json
import math
from pathlib import Path

import torus_hardy as th

ROOT = Path(__file__).resolve().parents[1]


def close(a, b, tol=1e-12):
    return abs(a - b) <= tol * (1 + abs(b))


def main():
    lex = th.Order("lex", 2)
    assert lex.sign([0, 1]) == 1 and lex.sign([1, -5]) == 1 and lex.sign([-1, 9]) == -1
    assert lex.compare([0, 0], [0, 0]) == 0
    quad = th.Order("quad:2/1", 2)
    assert quad.sign([1, -1]) == -1  # 1 − √2 < 0

    f = th.TrigPoly(2, {(1, 0): 1 + 0j, (0, -2): 0.5j, (0, 0): 2})
    t = [0.3, -1.1]
    expected = cmath.exp(1j * t[0]) + 0.5j * cmath.exp(-2j * t[1]) + 2
    assert close(f.evaluate(t), expected)
    g = f * f.conjugate()
    assert close(g.mean().real, f.l2_norm() ** 2)

    plus = th.project(f, "plus", lex, 4)
    minus = th.project(f, "minus", lex, 4)
    assert th.is_analytic(plus, lex, 4) and not th.is_analytic(f, lex, 4)
    assert (plus + minus - f).l2_norm() == 0.0

    q = th.TrigPoly.random([(-5, 5), (-5, 5)], seed=3, real=True)
    assert th.hilbert_identity_residual(q, lex, 5) <= 1e-12
    assert th.hilbert(q, lex, 5).l2_norm() <= q.l2_norm() + 1e-12

    assert th.kernel_hilbert_error(th.TrigPoly.random([(-8, 8), (-8, 8)], seed=1), 64) <= 1e-3

    # The 8×8 section with symbol χ₋₁ + χ₋₂ has norm equal to the golden ratio.
    phi = th.TrigPoly(1, {(-1,): 1, (-2,): 1})
    golden = (1 + math.sqrt(5)) / 2
    assert close(th.hankel_norm(phi, [(0, 7)], [(-8, -1)], th.Order("lex", 1)), golden, 1e-8)

    e = th.hadamard_set(2, 11)
    assert e[-1] == 1024
    assert th.k_constant(e) == (2, 1)

    cfg = json.loads((ROOT / "configs" / "lacunary-k.json").read_text())
    cfg["trials"] = 5
    report = json.loads(th.run_experiment(json.dumps(cfg)))
    assert report["pass"] and report["summary"]["k"] == 2
    try:
        th.run_experiment('{"kind": "riesz"}')
    except ValueError:
        pass
    else:
        raise AssertionError("malformed config accepted")

    print("python smoke test: ok")


if __name__ == "__main__":
    main()
