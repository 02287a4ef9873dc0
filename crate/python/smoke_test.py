"""Smoke test for the cartan extension module.

Build it first:  pip install --no-build-isolation -e crates/py
"""

import json
import math

import cartan


def close(a, b, tol):
    return abs(a - b) <= tol


def main():
    g = cartan.GroupElement(0.3, -0.2, 0.1, 0.5, -0.4)
    e = g * g.inverse()
    assert max(abs(c) for c in e.to_list()) <= 1e-12
    assert cartan.bracket([1, 0, 0, 0, 0], [0, 1, 0, 0, 0]) == [0, 0, 1, 0, 0]

    disc = cartan.ConvexBody.disc(1.0)
    assert close(disc.gauge([0.6, 0.8]), 1.0, 1e-12)
    assert close(disc.polar_area(), math.pi, 1e-12)
    square = cartan.ConvexBody.unit_square()
    assert len(square.corner_angles()) == 4
    same = cartan.ConvexBody.from_json(square.to_json())
    assert same.vertices() == square.vertices()

    # Unit circle: the projection closes after 2π and encloses area π.
    phi = [1.0, 0.0, 1.0, 0.0, 0.0]
    sol = cartan.Solution(phi, disc)
    assert sol.case == "periodic", sol.label()
    l = cartan.period(phi, disc)
    assert close(l, 2 * math.pi, 1e-9)
    n = 201
    grid = [l * i / (n - 1) for i in range(n)]
    tr = sol.reconstruct(grid)
    assert close(tr["x"][-1], 0.0, 1e-8) and close(tr["y"][-1], 0.0, 1e-8)
    assert close(abs(tr["z"][-1]), math.pi, 1e-8)

    run = cartan.integrate_hamiltonian(phi, disc, grid, 1e-10)
    dev = max(abs(a - b) for k in "xyzvw" for a, b in zip(tr[k], run[k]))
    assert dev <= 1e-6, dev

    try:
        cartan.ConvexBody.disc(-1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("negative radius accepted")

    config = json.dumps({"body": {"type": "disc", "radius": 1}, "phi": phi, "T": l, "nodes": 51})
    csv, meta = cartan.run_config(config)
    assert csv.splitlines()[0] == cartan.CSV_HEADER
    assert len(csv.splitlines()) == 52
    assert json.loads(meta)["case"]["case"] == "periodic"

    try:
        cartan.run_config('{"body": {"type": "disc"}}')
    except ValueError:
        pass
    else:
        raise AssertionError("malformed config accepted")

    print("ok")


if __name__ == "__main__":
    main()
