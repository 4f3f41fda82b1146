import os
import subprocess
import sys

import numpy as np
import pytest

from _oracles import random_general_qp
from fastbench import kernels
from fastbench.dynamics import GRAVITY

backends = kernels.available_backends()
needs_compiled = pytest.mark.skipif("cython" not in backends, reason="compiled extension not built")


def _args(model, rng):
    tree = model.tree
    q = rng.uniform(-1.0, 1.0, tree.nq)
    v = rng.normal(size=tree.nq)
    a = rng.normal(size=tree.nq)
    return tree, q, v, a, model.frame_index(model.foot_frame)


@needs_compiled
@pytest.mark.parametrize("name", ["branched", "decart_model", "serial_model", "pendulum"])
def test_kernels_agree(name, request, rng):
    model = request.getfixturevalue(name)
    py, cy = backends["python"], backends["cython"]
    for _ in range(20):
        tree, q, v, a, body = _args(model, rng)
        for fn, args in [
            ("placements", (tree, q)),
            ("rnea", (tree, q, v, a, GRAVITY)),
            ("crba", (tree, q)),
            ("jacobian", (tree, q, body)),
            ("bias_acceleration", (tree, q, v, body)),
            ("dynamics_terms", (tree, q, v, body, GRAVITY)),
        ]:
            out_py, out_cy = getattr(py, fn)(*args), getattr(cy, fn)(*args)
            if not isinstance(out_py, tuple):
                out_py, out_cy = (out_py,), (out_cy,)
            for x, y in zip(out_py, out_cy):
                np.testing.assert_allclose(np.asarray(y), np.asarray(x), rtol=0, atol=1e-12, err_msg=fn)


@needs_compiled
def test_qp_solvers_agree(rng):
    py, cy = backends["python"], backends["cython"]
    for _ in range(200):
        H, g, C, d = random_general_qp(rng, 6, 14)
        x1, l1, s1, it1, act1 = py.solve_qp(H, g, C, d)
        x2, l2, s2, it2, act2 = cy.solve_qp(H, g, C, d)
        assert s1 == s2
        if s1 == kernels.QP_OPTIMAL:
            assert list(act1) == list(act2)
            np.testing.assert_allclose(x2, x1, atol=1e-10)
            np.testing.assert_allclose(l2, l1, atol=1e-8)


@needs_compiled
def test_default_backend_is_compiled():
    assert kernels.BACKEND == "cython"


def test_pure_python_fallback_is_selectable():
    env = dict(os.environ, FASTBENCH_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import fastbench; print(fastbench.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_solvers_reject_indefinite_hessian():
    H = np.array([[1.0, 0.0], [0.0, -1.0]])
    for kb in backends.values():
        with pytest.raises(np.linalg.LinAlgError):
            kb.solve_qp(H, np.zeros(2), np.zeros((0, 2)), np.zeros(0))
