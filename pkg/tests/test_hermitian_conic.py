import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from drab.hermitian_conic import (Affine, ConeKind, ProblemBuilder, SolveStatus, bordered,
                                  herm_basis, herm_embed, herm_unvec, herm_vec, solve)


def rand_herm(rng, N):
    A = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
    return 0.5 * (A + A.conj().T)


def test_herm_vec_identity():
    v = herm_vec(np.eye(2))
    np.testing.assert_array_equal(np.sort(v), [0, 0, 1, 1])
    assert np.linalg.norm(v) == pytest.approx(np.sqrt(2))


def test_herm_vec_rejects_non_hermitian():
    with pytest.raises(ValueError):
        herm_vec(np.array([[1, 2], [0, 1]]))
    with pytest.raises(ValueError):
        herm_embed(np.array([[1j, 0], [0, 1]]))


def test_herm_vec_isometry_linearity_round_trip(rng):
    for _ in range(200):
        N = int(rng.integers(1, 10))
        X, Y = rand_herm(rng, N), rand_herm(rng, N)
        vx, vy = herm_vec(X), herm_vec(Y)
        assert vx.size == N * N
        assert abs(np.linalg.norm(vx) - np.linalg.norm(X)) <= 1e-12 * np.linalg.norm(X)
        np.testing.assert_allclose(herm_vec(X + Y), vx + vy, atol=1e-13)
        ip = np.real(np.trace(X @ Y))
        assert abs(vx @ vy - ip) <= 1e-11 * max(1.0, np.linalg.norm(X) * np.linalg.norm(Y))
        np.testing.assert_allclose(herm_unvec(vx), X, atol=1e-13)


def test_herm_basis_is_orthonormal():
    B = herm_basis(4)
    G = np.real(np.einsum("kij,lij->kl", B.conj(), B))
    np.testing.assert_allclose(G, np.eye(16), atol=1e-14)


def test_embed_identity_and_trace(rng):
    np.testing.assert_array_equal(herm_embed(np.eye(3)), np.eye(6))
    X = rand_herm(rng, 5)
    E = herm_embed(X)
    np.testing.assert_array_equal(E, E.T)
    assert np.trace(E) == pytest.approx(2 * np.real(np.trace(X)))


def test_embed_eigenvalues_doubled():
    U = np.linalg.qr(np.array([[1, 1j], [1j, 2]]))[0]
    X = U @ np.diag([3.0, 1.0]) @ U.conj().T
    X = 0.5 * (X + X.conj().T)
    np.testing.assert_allclose(np.linalg.eigvalsh(herm_embed(X)), [1, 1, 3, 3], atol=1e-12)


@given(arrays(np.float64, (4, 4), elements=st.floats(-5, 5)),
       arrays(np.float64, (4, 4), elements=st.floats(-5, 5)))
@settings(max_examples=100)
def test_embed_preserves_psd(A, B):
    X = (A + 1j * B) @ (A + 1j * B).conj().T - 3.0 * np.eye(4)
    X = 0.5 * (X + X.conj().T)
    ex = np.linalg.eigvalsh(X)
    ee = np.linalg.eigvalsh(herm_embed(X))
    np.testing.assert_allclose(np.repeat(ex, 2), ee, atol=1e-9 * max(1, np.abs(ex).max()))
    assert (ex[0] >= 0) == (ee[0] >= 0) or abs(ex[0]) < 1e-9


def test_affine_value_and_helpers():
    b = ProblemBuilder()
    X = b.herm("X", 2)
    v = b.cvec("v", 2)
    t = b.real("t")
    x = np.arange(1.0, b.n + 1)
    Xv = X.value(x)
    np.testing.assert_allclose(Xv, Xv.conj().T)
    assert X.trace().value(x) == pytest.approx(np.trace(Xv))
    M = np.array([[1, 2j], [-2j, 3]])
    assert X.inner(M).value(x) == pytest.approx(np.real(np.trace(Xv @ M)))
    a = np.array([1 + 1j, 2])
    assert v.vdot(a).value(x) == pytest.approx(np.real(np.vdot(a, v.value(x))))
    S = (t * np.eye(2)).value(x)
    np.testing.assert_allclose(S, x[-1] * np.eye(2))
    B = bordered(X, v, t).value(x)
    np.testing.assert_allclose(B[:2, :2], Xv)
    np.testing.assert_allclose(B[:2, 2], v.value(x))
    np.testing.assert_allclose(B[2, :2], v.value(x).conj())
    assert B[2, 2] == x[-1]
    with pytest.raises(TypeError):
        t * t


def test_decode_matches_variables():
    b = ProblemBuilder()
    b.herm("X", 3)
    b.cvec("v", 2)
    b.real("s")
    b.minimize(Affine.constant(0.0))
    p = b.build()
    x = np.random.default_rng(0).standard_normal(p.n_vars)
    vals = p.decode(x)
    assert vals["X"].shape == (3, 3) and vals["v"].shape == (2,) and isinstance(vals["s"], float)
    np.testing.assert_allclose(herm_vec(vals["X"]), x[p.variables["X"].slice])


def test_soc_sanity():
    b = ProblemBuilder()
    t = b.real("t")
    b.add_soc(t, Affine.constant(np.array([3.0, 4.0])))
    b.minimize(t)
    sol = solve(b.build())
    assert sol.status is SolveStatus.OPTIMAL
    assert sol.objective_value == pytest.approx(5.0, abs=1e-7)


@pytest.mark.parametrize("backend", ["clarabel", "cvxopt", "auto"])
def test_psd_sanity(backend):
    b = ProblemBuilder()
    X = b.herm("X", 2)
    b.add_psd(X - np.eye(2))
    b.minimize(X.trace().real)
    sol = solve(b.build(), backend=backend)
    assert sol.optimal
    assert sol.objective_value == pytest.approx(2.0, abs=1e-7)
    assert sol.max_violation <= 10 * sol.solver_tolerance


@pytest.mark.parametrize("backend", ["clarabel", "cvxopt"])
def test_infeasible_lmi(backend):
    b = ProblemBuilder()
    X = b.herm("X", 2)
    b.add_psd(X - np.eye(2))
    b.add_psd(-X)
    b.minimize(X.trace().real)
    assert solve(b.build(), backend=backend).status is SolveStatus.INFEASIBLE


def test_unbounded_and_equality():
    b = ProblemBuilder()
    t = b.real("t")
    b.add_nonneg(-t)
    b.minimize(t)
    assert solve(b.build()).status is SolveStatus.UNBOUNDED
    b = ProblemBuilder()
    t = b.real("t")
    s = b.real("s")
    b.add_zero(t + s - 3.0)
    b.add_nonneg(s - 1.0)
    b.minimize(t + 2 * s)
    for backend in ("clarabel", "cvxopt"):
        sol = solve(b.build(), backend=backend)
        assert sol.objective_value == pytest.approx(4.0, abs=1e-6)


def test_lambda_max_epigraph(rng):
    A = rand_herm(rng, 4)
    b = ProblemBuilder()
    s = b.lambda_max_epigraph("s", Affine.constant(A))
    b.minimize(s)
    sol = solve(b.build())
    assert sol.objective_value == pytest.approx(np.linalg.eigvalsh(A)[-1], abs=1e-7)


def test_frobenius_epigraph(rng):
    A = rand_herm(rng, 3)
    b = ProblemBuilder()
    X = b.herm("X", 3)
    t = b.frob_epigraph("t", X - A)
    b.add_psd(X)
    b.minimize(t)
    vals, vecs = np.linalg.eigh(A)
    # distance from A to the PSD cone is the norm of its negative eigenvalues
    expected = np.linalg.norm(np.clip(vals, None, 0))
    assert solve(b.build()).objective_value == pytest.approx(expected, abs=1e-6)


def test_solver_failure_is_reported_not_raised():
    b = ProblemBuilder()
    X = b.herm("X", 3)
    b.add_psd(X)
    b.minimize(X.trace().real)
    sol = solve(b.build(), max_iter=0, backend="clarabel")
    assert sol.status is SolveStatus.NUMERICAL_LIMIT
    assert np.isnan(sol.objective_value)
    with pytest.raises(ValueError):
        solve(b.build(), backend="mosek")


def parse_dump(text):
    lines = text.strip().splitlines()
    n = int(lines[0].split()[1])
    body = [ln for ln in lines if not ln.startswith(("VAR", "OBJ"))]
    obj = next(ln for ln in lines if ln.startswith("OBJ")).split()
    c = np.zeros(n)
    for tok in obj[2:]:
        j, v = tok.split(":")
        c[int(j)] = float(v)
    cons = []
    for ln in body:
        head, terms, consts = ln.split("|")
        kind, dim, _ = head.split()
        rows = []
        for tok in terms.split():
            i, j, v = tok.split(":")
            rows.append((int(i), int(j), float(v)))
        g = {int(i): float(v) for i, v in (t.split(":") for t in consts.split())}
        cons.append((kind, int(dim), rows, g))
    return n, float(obj[1]), c, cons


def test_dump_round_trips(instance2):
    from drab.dro_builders import build_main_relaxation

    _, _, _, _, _, d1, d2 = instance2
    p = build_main_relaxation(d1, d2)
    text = p.dump()
    n, c0, c, cons = parse_dump(text)
    assert n == p.n_vars and c0 == p.c0
    np.testing.assert_array_equal(c, p.c)
    assert len(cons) == len(p.constraints)
    for (kind, dim, rows, g), con in zip(cons, p.constraints):
        assert kind == con.kind.value.upper() and dim == con.dim
        F = sp.coo_matrix(([v for _, _, v in rows], ([i for i, _, _ in rows],
                                                     [j for _, j, _ in rows])),
                          shape=con.F.shape)
        assert abs(F - con.F).max() == 0
        gg = np.zeros(con.F.shape[0])
        for i, v in g.items():
            gg[i] = v
        np.testing.assert_array_equal(gg, con.g)
    assert {con.kind for con in p.constraints} >= {ConeKind.PSD, ConeKind.SOC, ConeKind.NONNEG}
