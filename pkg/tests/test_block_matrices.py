"""Auxiliary linear-algebra facts behind the decoupling, checked exactly.

Items 1 to 3 run on the stage matrices of random circuits with exact integer
rank; item 4 on random SPD matrices; item 5 on random block lower triangular
integer assemblies.  The ``item_*`` functions are reused by the acceptance
suite.
"""

import numpy as np
import pytest

from circuits import random_circuit
from mnadec import exact
from mnadec.basis import build_split_chain
from mnadec.errors import AssumptionViolation
from mnadec.graph import incidence_reduced
from mnadec.netlist import Kind

CASCADE = (Kind.VS, Kind.C, Kind.VC, Kind.R, Kind.L)


def _chain(seed):
    c = random_circuit(seed, controlled=bool(seed % 2))
    try:
        return build_split_chain(c)
    except AssumptionViolation:
        return None


def item_1(seed):
    """``A^T P`` has full column rank; it is square and regular when ``A^T``
    has full row rank.  Returns the number of stages checked, or ``None``."""
    chain = _chain(seed)
    if chain is None:
        return None
    checked = 0
    for st in chain.stages[:4]:
        at = st.incidence.to_dense().T
        p = st.basis.P.to_dense()
        atp = at @ p
        if exact.rank(atp) != p.shape[1]:
            raise AssertionError(f"seed {seed}, {st.kind}: A^T P lacks full column rank")
        if exact.rank(at) == at.shape[0]:
            if atp.shape[0] != atp.shape[1] or exact.det(atp) == 0:
                raise AssertionError(f"seed {seed}, {st.kind}: A^T P is not regular")
        checked += 1
    return checked


def item_2(seed):
    """``A V`` is regular when ``A^T`` has full column rank (inductor stage)."""
    chain = _chain(seed)
    if chain is None:
        return None
    st = chain.stages[4]
    a = st.incidence.to_dense()
    if exact.rank(a) != a.shape[0]:
        return None
    av = a @ st.basis.V.to_dense()
    if av.shape[0] != av.shape[1] or exact.det(av) == 0:
        raise AssertionError(f"seed {seed}: A V is not regular")
    return 1


def item_3(seed):
    """If ``[A_1 .. A_n]`` has full row rank then ``Q_{n-1}^T .. Q_1^T A_n`` does too."""
    chain = _chain(seed)
    if chain is None:
        return None
    c = chain.circuit
    checked = 0
    q = None
    for n, kind in enumerate(CASCADE):
        a_n = incidence_reduced(c, kind).to_dense()
        union = incidence_reduced(c, CASCADE[:n + 1]).to_dense()
        prod = a_n.T if q is None else (q.T @ a_n).T
        if exact.rank(union) == union.shape[0]:
            if exact.rank(prod) != prod.shape[1]:
                raise AssertionError(f"seed {seed}: cascade product at {kind} loses rank")
            checked += 1
        if n < 4:
            stage_q = chain.stages[n].basis.Q.to_dense()
            q = stage_q if q is None else q @ stage_q
    return checked


def item_4(seed):
    """``B^T A B`` is SPD for SPD ``A`` and full-column-rank ``B``; returns min eig."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 9))
    k = int(rng.integers(1, n + 1))
    r = rng.normal(size=(n, n))
    a = r @ r.T + 1e-3 * np.eye(n)
    while True:
        b = rng.integers(-1, 2, size=(n, k))
        if exact.rank(b) == k:
            break
    m = b.T @ a @ b
    return float(np.linalg.eigvalsh(0.5 * (m + m.T)).min())


def item_5(seed):
    """A block lower triangular matrix with regular diagonal blocks is regular.

    Returns ``(det, product of diagonal determinants)``.
    """
    rng = np.random.default_rng(seed)
    sizes = list(rng.integers(0, 4, size=int(rng.integers(1, 6))))
    n = int(sum(sizes))
    m = np.zeros((n, n), dtype=np.int64)
    dets = []
    off = 0
    for s in sizes:
        while True:
            blk = rng.integers(-2, 3, size=(s, s))
            d = exact.det(blk)
            if d != 0:
                break
        dets.append(d)
        m[off:off + s, off:off + s] = blk
        m[off + s:, off:off + s] = rng.integers(-3, 4, size=(n - off - s, s))
        off += s
    return exact.det(m), int(np.prod(dets, dtype=object)) if dets else 1


N_INSTANCES = 100


def count_instances(fun, need=N_INSTANCES, start=0, limit=2000):
    """Run ``fun`` over seeds until ``need`` instances were actually checked."""
    done = 0
    seed = start
    while done < need:
        if seed - start > limit:
            raise AssertionError(f"only {done} applicable instances in {limit} seeds")
        if fun(seed):
            done += 1
        seed += 1
    return done


class TestBlockMatrixFacts:
    @pytest.mark.parametrize("item", [item_1, item_2, item_3], ids=["item1", "item2", "item3"])
    def test_exact_rank_items(self, item):
        assert count_instances(item) == N_INSTANCES

    def test_item_4(self):
        assert min(item_4(s) for s in range(N_INSTANCES)) > 0

    def test_item_5(self):
        for s in range(N_INSTANCES):
            d, prod = item_5(s)
            assert d != 0 and d == prod

    def test_item_1_without_full_row_rank(self):
        # several voltage-source components: P still gives full column rank
        from mnadec import parse_netlist

        c = parse_netlist("V1 1 0 DC 1\nV2 2 3 DC 1\nR1 1 2 1\nR2 3 0 1\n")
        st = build_split_chain(c).stages[0]
        at = st.incidence.to_dense().T
        assert exact.rank(at @ st.basis.P.to_dense()) == st.basis.P.shape[1]
