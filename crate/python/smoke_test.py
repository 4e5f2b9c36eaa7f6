"""Quick end-to-end check of the pyhislr extension module."""

import math

import pyhislr


def frob(rows):
    return math.sqrt(sum(v * v for row in rows for v in row))


def sub(a, b):
    return [[x - y for x, y in zip(ra, rb)] for ra, rb in zip(a, b)]


def main():
    assert pyhislr.soft_threshold(3.0, 1.0) == 2.0
    assert pyhislr.soft_threshold(-0.5, 1.0) == 0.0

    m = [[3.0, 0.0], [0.0, 1.0]]
    assert max(abs(v) for row in sub(pyhislr.svt(m, 1.5), [[1.5, 0.0], [0.0, 0.0]]) for v in row) < 1e-12

    z = pyhislr.prox_hier([[3.0], [0.0], [0.5]], 1.0, 0.0, [2, 1])
    assert z == [[2.0], [0.0], [0.0]], z

    inst = pyhislr.generate_synthetic(seed=4, active_class=2)
    dictionary = inst["dictionary"]
    assert len(dictionary) == 70 and dictionary.dim == 100
    assert dictionary.labels[2] == "c3"

    config = pyhislr.SolverConfig(outer_iters=300)
    dec = pyhislr.admm_solve(inst["y"], dictionary, config)
    assert dec.iterations == 300
    assert dec.final_rank == 1
    assert dec.final_feasibility < 1e-2 * frob(inst["y"])

    res = pyhislr.classify(inst["y"], dictionary, config)
    assert res.label == "c3" and res.predicted == 2, res.residuals
    slr = pyhislr.classify(inst["y"], dictionary, pyhislr.SolverConfig(model="slr", outer_iters=300))
    assert slr.predicted == 2

    try:
        pyhislr.SolverConfig(lambda_l=-1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("negative lambda accepted")

    print("pyhislr smoke test passed")


if __name__ == "__main__":
    main()
