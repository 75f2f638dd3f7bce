import numpy as np
import pytest

from secindex import (
    ContractError,
    PencilSelection,
    Realization,
    assemble,
    generate_random_instance,
    invariant_zeros,
    normalrank,
    null_direction,
    rank_at,
)
from oracles import symbolic_pencil_zeros


def test_assemble_disturbance_only_at_zero(ex_c):
    sel = PencilSelection.disturbance_only(ex_c)
    M = assemble(sel, 0.0)
    expected = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert np.array_equal(M.real, expected)
    assert np.all(M.imag == 0)


def test_assemble_ex_c_full_at_one(ex_c):
    M = assemble(PencilSelection.full(ex_c), 1.0)
    assert np.array_equal(M.real, [[-1.0, 1.0, 1.0, 0.0], [1.0, 0.0, 0.0, 1.0]])


def test_assemble_full_shape(ex_a):
    sel = PencilSelection.full(ex_a)
    M = assemble(sel, 0.7 + 0.3j)
    assert M.shape == (ex_a.n + ex_a.p, ex_a.n + ex_a.o + ex_a.m)


def test_rank_at_trivial():
    assert rank_at(np.zeros((3, 4))) == 0
    assert rank_at(np.eye(4)) == 4


def test_rank_at_near_singular():
    # sigma_2 = det / sigma_1 ~ 5e-15, far below the relative cutoff.
    M = np.array([[1.0, 1.0], [1.0, 1.0 + 1e-14]])
    s = np.linalg.svd(M, compute_uv=False)
    assert s[1] == pytest.approx(5e-15, rel=1.0)
    assert rank_at(M) == 1


def test_normalrank_examples(ex_a, ex_c):
    # Disturbance-free pencil has full column rank at generic frequencies.
    assert normalrank(PencilSelection.disturbance_only(ex_a)) == ex_a.n
    # Duplicated column: appending attack channel 1 does not raise the rank.
    assert normalrank(PencilSelection.disturbance_only(ex_c)) == 2
    assert normalrank(PencilSelection.single(ex_c, 1)) == 2
    assert normalrank(PencilSelection.full(ex_a)) == 6


def test_normalrank_seed_independent(ex_a, ex_c):
    for sel in (
        PencilSelection.full(ex_a),
        PencilSelection.disturbance_only(ex_c),
        PencilSelection.single(ex_c, 2),
    ):
        assert normalrank(sel, seed=0) == normalrank(sel, seed=1)
    for seed in range(6):
        mod = generate_random_instance((3, 1, 2, 2), seed=seed)
        sel = PencilSelection.full(mod)
        assert normalrank(sel, seed=0) == normalrank(sel, seed=1)


def test_invariant_zeros_sensor_case(ex_a):
    zset = invariant_zeros(PencilSelection.full(ex_a))
    assert not zset.generically_rank_deficient
    zs = sorted(rec.z.real for rec in zset.zeros)
    assert np.allclose(zs, [2.0, 3.0, 4.0], atol=1e-8)
    assert all(rec.persistent for rec in zset.zeros)
    assert all(rec.verified for rec in zset.zeros)


def test_invariant_zeros_deficient_flag(ex_c):
    zset = invariant_zeros(PencilSelection.single(ex_c, 1))
    assert zset.generically_rank_deficient
    assert zset.zeros == ()


def test_invariant_zeros_single_state_sensor():
    mod = Realization(A=[[0.5]], Bd=np.zeros((1, 0)), Ba=[[0.0]], C=[[1.0]],
                      Dd=np.zeros((1, 0)), Da=[[1.0]])
    zset = invariant_zeros(PencilSelection.full(mod))
    assert len(zset.zeros) == 1
    rec = zset.zeros[0]
    assert rec.z == pytest.approx(0.5, abs=1e-9)
    assert not rec.persistent


def test_zero_verification_invariant(ex_a):
    sel = PencilSelection.full(ex_a)
    zset = invariant_zeros(sel)
    for rec in zset.zeros:
        assert rank_at(assemble(sel, rec.z)) <= zset.normalrank - 1
        assert rec.rank_at_z < zset.normalrank


def test_zeros_conjugate_closure():
    rng = np.random.default_rng(5)
    found_complex = 0
    for seed in range(30):
        mod = generate_random_instance((3, 0, 2, 2), seed=seed)
        zset = invariant_zeros(PencilSelection.full(mod))
        zs = [rec.z for rec in zset.zeros]
        for z in zs:
            if abs(z.imag) > 1e-8:
                found_complex += 1
                assert any(abs(np.conj(z) - w) <= 1e-8 for w in zs)
    assert found_complex > 0  # the check must have exercised complex pairs


def test_zeros_match_symbolic_determinant_oracle():
    # Square pencils (p = o + |S|) on integer entries: the zero finder must
    # agree with the exact determinant roots to 1e-6.
    checked = 0
    for seed in range(40):
        if checked >= 12:
            break
        n, o, m = 3, 1, 2
        p = o + m
        if p > n:
            continue
        try:
            mod = generate_random_instance((n, o, m, p), seed=seed)
        except Exception:
            continue
        sel = PencilSelection.full(mod)
        zset = invariant_zeros(sel)
        if zset.generically_rank_deficient:
            continue
        exact = symbolic_pencil_zeros(mod, tuple(range(1, m + 1)))
        got = [rec.z for rec in zset.zeros]
        for z in got:
            assert any(abs(z - w) <= 1e-6 for w in exact), (seed, z, exact)
        for w in exact:
            assert any(abs(z - w) <= 1e-6 for z in got), (seed, w, got)
        checked += 1
    assert checked >= 8


def test_null_direction_ex_a(ex_a):
    dirs = null_direction(PencilSelection.full(ex_a), 2.0)
    assert len(dirs) == 1
    d = dirs[0]
    assert d.basis_dim == 1
    # x0 proportional to e1, a0 proportional to -(1,1,1) = -C e1.
    x0 = d.x0 / d.x0[np.argmax(np.abs(d.x0))]
    assert np.allclose(x0, [1.0, 0.0, 0.0], atol=1e-9)
    ratio = d.a0 / d.x0[0]
    assert np.allclose(ratio, [-1.0, -1.0, -1.0], atol=1e-9)
    assert d.d0.size == 0


def test_null_direction_ex_c_duplicate_columns(ex_c):
    dirs = null_direction(PencilSelection.single(ex_c, 1), 1.5)
    assert len(dirs) == 1
    v = np.concatenate([dirs[0].x0, dirs[0].d0, dirs[0].a0])
    v = v / v[2]
    assert np.allclose(v, [0.0, -1.0, 1.0], atol=1e-9)
    M = assemble(PencilSelection.single(ex_c, 1), 1.5)
    assert np.linalg.norm(M @ np.array([0.0, -1.0, 1.0])) == 0.0


def test_null_direction_full_rank_errors(ex_a):
    with pytest.raises(ContractError):
        null_direction(PencilSelection.disturbance_only(ex_a), 7.0)
