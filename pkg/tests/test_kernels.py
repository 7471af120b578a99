import os
import subprocess
import sys

import numpy as np
import pytest

from forgeqse import _kernels_py, kernels
from forgeqse.casci import DeterminantBasis
from forgeqse.chemio import random_integrals
from forgeqse.operators import pauli_matrix

compiled = pytest.importorskip("forgeqse._kernels", reason="compiled kernels not built")


def test_dispatch_prefers_compiled():
    expected = "python" if os.environ.get("FORGEQSE_PURE_PYTHON") else "cython"
    assert kernels.BACKEND == expected


def test_pure_python_switch():
    env = {**os.environ, "FORGEQSE_PURE_PYTHON": "1"}
    code = "from forgeqse import kernels; print(kernels.BACKEND)"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_pauli_expectations_agree_with_dense():
    rng = np.random.default_rng(0)
    n = 4
    bra = rng.normal(size=16) + 1j * rng.normal(size=16)
    ket = rng.normal(size=16) + 1j * rng.normal(size=16)
    xs = rng.integers(0, 16, 30)
    zs = rng.integers(0, 16, 30)
    dense = np.array([bra.conj() @ pauli_matrix(int(x), int(z), n).toarray() @ ket for x, z in zip(xs, zs)])
    for impl in (compiled, _kernels_py):
        assert np.allclose(impl.pauli_expectations(bra, ket, xs, zs), dense, atol=1e-12)


def test_parity_expectations_agree():
    rng = np.random.default_rng(1)
    weights = rng.random(32)
    masks = rng.integers(0, 32, 20)
    a = compiled.parity_expectations(weights, masks)
    b = _kernels_py.parity_expectations(weights, masks)
    signs = np.array([[(-1) ** bin(i & int(m)).count("1") for m in masks] for i in range(32)])
    assert np.allclose(a, b) and np.allclose(a, weights @ signs)


@pytest.mark.parametrize("n,ne", [(3, 2), (4, 4), (5, 6)])
def test_casci_elements_agree(n, ne):
    ints = random_integrals(n, ne, seed=n)
    dets = DeterminantBasis(n, ne // 2, ne // 2).combined()
    size = dets.size

    def dense(impl):
        rows, cols, vals = impl.casci_elements(dets, ints.h, ints.g, n)
        out = np.zeros((size, size))
        np.add.at(out, (np.asarray(rows), np.asarray(cols)), np.asarray(vals))
        return out

    assert np.allclose(dense(compiled), dense(_kernels_py), atol=1e-12)
    for i, j in [(0, 0), (0, size - 1), (1, 2)]:
        a = compiled.slater_condon(int(dets[i]), int(dets[j]), ints.h, ints.g, n)
        b = _kernels_py.slater_condon(int(dets[i]), int(dets[j]), ints.h, ints.g, n)
        assert a == pytest.approx(b, abs=1e-12)
