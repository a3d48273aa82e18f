from __future__ import annotations

import numpy as np
import pytest

from molmask.dataset import GeneratorConfig, generate_synthetic
from molmask.nn import kernels
from molmask.nn.tensor import Tensor


def numeric_grad(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central differences of the scalar function ``f`` at ``x`` (modified in place, restored)."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        fp = f()
        x[i] = old - h
        fm = f()
        x[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g


def rel_error(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b)) / max(1e-8, np.max(np.abs(a)) + np.max(np.abs(b))))


def check_grads(build, inputs: list[Tensor], probe: np.ndarray | None = None, h: float = 1e-5) -> float:
    """Max relative error between autograd and finite differences.

    ``build`` maps the input tensors to an output tensor; the scalar loss is
    ``sum(out * probe)`` with a fixed random probe so every output entry counts.
    """
    out = build(*inputs)
    if probe is None:
        probe = np.random.default_rng(123).normal(size=out.shape)

    def loss_value() -> float:
        return float((build(*inputs).data * probe).sum())

    for t in inputs:
        t.grad = None
    from molmask.nn import tensor as T

    T.sum(T.mul(out, Tensor(probe))).backward()
    worst = 0.0
    for t in inputs:
        num = numeric_grad(loss_value, t.data, h)
        worst = max(worst, rel_error(t.grad, num))
    return worst


@pytest.fixture(params=kernels.available_backends())
def backend(request):
    old = kernels.BACKEND
    kernels.set_backend(request.param)
    yield request.param
    kernels.set_backend(old)


@pytest.fixture(scope="session")
def small_dataset():
    return generate_synthetic(GeneratorConfig(count=120, seed=11))


def equivariance_error(model, mol, rng) -> float:
    """Largest change in per-atom predictions when atoms are relabelled.

    Masks a random subset, permutes the molecule (new atom k is old perm[k])
    and compares each masked atom's distribution with its image.
    """
    from molmask.corruption import mask_atoms

    n = mol.n_atoms
    k = int(rng.integers(1, min(n, 4) + 1))
    masked = rng.choice(n, size=k, replace=False)
    perm = rng.permutation(n)
    inv = np.argsort(perm)
    cm = mask_atoms(mol, masked)
    cm_p = mask_atoms(mol.permute(perm), inv[masked])
    p, q = model.predict([cm, cm_p])
    row_of = {atom: r for r, atom in enumerate(cm_p.masked)}
    worst = 0.0
    for r, atom in enumerate(cm.masked):
        worst = max(worst, float(np.abs(p[r] - q[row_of[int(inv[atom])]]).max()))
    return worst


# one line per acceptance criterion, printed after the test run
ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES[number] = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
