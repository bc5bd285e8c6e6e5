import sys

import numpy as np
import pytest

from wavegcn import _backend
from wavegcn.graph import Graph


@pytest.fixture(params=["python", "cython"] if _backend.BACKEND == "cython" else ["python"])
def backend(request):
    previous = _backend.use(request.param)
    yield request.param
    _backend.use(previous)


def random_graph(n, rng, p=None):
    """Erdos-Renyi graph plus a random spanning path (always connected)."""
    if n < 2:
        return Graph.from_edges(n, [])
    p = p if p is not None else min(1.0, 4.0 / n)
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(len(iu)) < p
    perm = rng.permutation(n)
    path = np.sort(np.stack([perm[:-1], perm[1:]], axis=1), axis=1)
    e = np.concatenate([np.stack([iu[keep], ju[keep]], axis=1), path])
    return Graph.from_edges(n, np.unique(e, axis=0))


def dense_haar_oracle(h):
    """W assembled row by row from the pair lists (independent of haar.forward)."""
    n = h.n
    s = 1.0 / np.sqrt(2.0)
    M = np.eye(n)
    rows = []
    for lv in h.levels:
        pg = lv.pair_graph
        nf = M.shape[0]
        det = np.zeros((len(pg.pairs), nf))
        avg = np.zeros((pg.n_coarse, nf))
        for k, (i, j) in enumerate(pg.pairs.tolist()):
            det[k, i], det[k, j] = s, -s
            avg[k, i], avg[k, j] = s, s
        if pg.orphan is not None:
            avg[len(pg.pairs), pg.orphan] = 1.0
        rows.append(det @ M)
        M = avg @ M
    rows.append(M)
    return np.vstack(rows)


def central_difference(fun, x, h=1e-6):
    """Gradient of scalar ``fun`` at array ``x`` by central differences."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        old = x[idx]
        x[idx] = old + h
        fp = fun(x)
        x[idx] = old - h
        fm = fun(x)
        x[idx] = old
        grad[idx] = (fp - fm) / (2 * h)
    return grad


def rel_err(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(mod.RESULTS):
        ok, detail = mod.RESULTS[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
