import numpy as np
import pytest

from secindex import (
    Alpha,
    ContractError,
    PolynomialMatrix,
    Realization,
    StructuralError,
    Trace,
    apply_filter,
    attack_residual_realization,
    design_residual_generator,
    generate_random_instance,
    left_invertible,
    left_nullspace,
    security_index,
    simulate,
    transfer_eval,
)
from oracles import toeplitz_left_invertible


def _random_models(count, dims_pool, seed0=0, radius=None):
    out = []
    seed = seed0
    while len(out) < count:
        dims = dims_pool[seed % len(dims_pool)]
        try:
            out.append(generate_random_instance(dims, seed=seed, spectral_radius_target=radius))
        except Exception:
            pass
        seed += 1
    return out


def test_polynomial_matrix_degree_is_tight():
    pm = PolynomialMatrix((np.eye(2), np.zeros((2, 2))))
    assert pm.degree == 0
    pm = PolynomialMatrix((np.zeros((1, 2)), np.array([[1.0, 0.0]])))
    assert pm.degree == 1
    assert np.any(pm.coeffs[-1])


def test_left_nullspace_no_disturbances(ex_a):
    N = left_nullspace(ex_a)
    assert N.degree == 0
    assert np.array_equal(N.coeffs[0], np.eye(3))


def test_left_nullspace_static_selector():
    # Pure sensor disturbance on output 1: annihilator spans the selector
    # rows that drop it.
    mod = Realization(A=0.5 * np.eye(2), Bd=np.zeros((2, 1)), Ba=np.eye(2),
                      C=np.eye(2), Dd=[[1.0], [0.0]], Da=np.eye(2))
    N = left_nullspace(mod)
    assert N.degree == 0
    assert N.rows == 1
    row = N.coeffs[0][0]
    assert abs(row[0]) <= 1e-10
    assert abs(row[1]) == pytest.approx(1.0, abs=1e-10)


def test_left_nullspace_saturated_disturbances(ex_c):
    N = left_nullspace(ex_c)
    assert N.rows == 0
    gen = design_residual_generator(ex_c)
    assert gen.m_dprime == 0
    assert gen.residual_rows == 0


def test_annihilation_identity_random_models():
    for mod in _random_models(12, [(3, 1, 2, 2), (4, 2, 2, 3), (2, 1, 1, 2)], seed0=50):
        N = left_nullspace(mod)
        if N.rows == 0:
            continue
        assert N.degree <= mod.n
        rng = np.random.default_rng(1)
        eigs = mod.eigenvalues()
        for _ in range(8):
            z = complex(rng.uniform(1.1, 3.0), rng.uniform(-2.0, 2.0))
            if np.min(np.abs(eigs - z)) < 1e-6:
                continue
            Nz = N.eval(z)
            Gd = transfer_eval(mod, z, "disturbance")
            bound = 1e-8 * max(np.linalg.norm(Nz) * np.linalg.norm(Gd), 1e-30)
            assert np.linalg.norm(Nz @ Gd) <= bound


def test_design_ex_a_static_identity(ex_a):
    gen = design_residual_generator(ex_a)
    assert gen.delay == 0
    assert gen.m_prime == 0
    assert gen.m_dprime == 3
    assert np.allclose(gen.delta_impulse[0], np.eye(3))
    for D in gen.delta_impulse[1:]:
        assert np.allclose(D, 0.0)


def test_design_attacks_inside_disturbance_range():
    # Attack signature equal to a scaled disturbance signature: the residual
    # map vanishes identically.
    mod = Realization(A=[[0.5, 0.1], [0.0, 0.4]], Bd=[[1.0], [2.0]],
                      Ba=[[2.0], [4.0]], C=np.eye(2), Dd=[[1.0], [0.0]],
                      Da=[[2.0], [0.0]])
    gen = design_residual_generator(mod)
    assert gen.m_dprime == 0
    assert gen.residual_rows == 1
    for D in gen.delta_impulse:
        assert np.abs(D).max() <= 1e-9


def test_truncation_too_short(ex_a):
    with pytest.raises(ContractError):
        design_residual_generator(ex_a, L_imp=2)


def test_completion_makes_full_rank():
    for mod in _random_models(6, [(3, 1, 2, 2), (4, 2, 3, 3)], seed0=7):
        gen = design_residual_generator(mod)
        rng = np.random.default_rng(0)
        for _ in range(4):
            z = complex(rng.uniform(1.2, 2.5), rng.uniform(-1.5, 1.5))
            if np.min(np.abs(mod.eigenvalues() - z)) < 1e-6:
                continue
            R = np.vstack([gen.annihilator.eval(z), gen.completion.coeffs[0].astype(complex)])
            s = np.linalg.svd(R, compute_uv=False)
            assert s[-1] > 1e-8 * s[0]


def test_delta_impulse_matches_filtered_markov():
    # The truncated impulse response must reproduce the filtered response of
    # an impulse attack from rest, sample by sample.  (Schur instances: the
    # identity is exact in reals, and floats then agree to roundoff of the
    # bounded intermediates.)
    for mod in _random_models(6, [(3, 1, 2, 2), (2, 1, 2, 2)], seed0=31, radius=0.8):
        gen = design_residual_generator(mod)
        if gen.residual_rows == 0:
            continue
        N = gen.L_imp
        for j in range(mod.m):
            a = np.zeros((N, mod.m))
            a[0, j] = 1.0
            y, _ = simulate(mod, None, None, Trace(a), N)
            r = apply_filter(gen, y)
            conv = np.array([gen.delta_impulse[k][:, j] for k in range(N)])
            assert np.abs(r.data - conv).max() <= 1e-9 * max(np.abs(conv).max(), 1.0)


def test_apply_filter_identity(ex_a):
    gen = design_residual_generator(ex_a)
    rng = np.random.default_rng(5)
    y = Trace(rng.standard_normal((20, 3)))
    r = apply_filter(gen, y)
    assert np.array_equal(r.data, y.data)
    assert apply_filter(gen, Trace.zeros(10, 3)).max_norm() == 0.0


def test_apply_filter_reproduces_attack(ex_a):
    gen = design_residual_generator(ex_a)
    rng = np.random.default_rng(6)
    a = Trace(rng.standard_normal((15, 3)))
    y, _ = simulate(ex_a, None, None, a, 15)
    r = apply_filter(gen, y)
    assert np.allclose(r.data, a.data)


def test_decoupling_simulated():
    rng = np.random.default_rng(8)
    for mod in _random_models(10, [(3, 1, 2, 2), (4, 2, 2, 3), (2, 1, 1, 2)],
                              seed0=100, radius=0.8):
        gen = design_residual_generator(mod)
        if gen.residual_rows == 0:
            continue
        N = 50
        d = Trace(rng.standard_normal((N, mod.o)))
        y, _ = simulate(mod, np.zeros(mod.n), d, None, N)
        r = apply_filter(gen, y)
        tail = r.data[gen.delay:]
        assert np.linalg.norm(tail, axis=1).max() <= 1e-8 * d.max_norm()


def test_attack_sensitivity():
    rng = np.random.default_rng(9)
    hits = 0
    for mod in _random_models(10, [(3, 1, 2, 2), (4, 2, 2, 3)], seed0=200, radius=0.8):
        gen = design_residual_generator(mod)
        if gen.m_dprime < 1:
            continue
        N = 60
        a = np.zeros((N, mod.m))
        ch = int(rng.integers(0, mod.m))
        a[:, ch] = 1.0  # persistent constant attack
        y, _ = simulate(mod, np.zeros(mod.n), None, Trace(a), N)
        r = apply_filter(gen, y)
        if np.linalg.norm(gen.delta_eval(1.0 + 0j)[:, ch]) < 1e-6:
            continue  # this channel is invisible in the residual
        hits += 1
        assert r.max_norm() > 1e-3 * 1.0
    assert hits >= 5


def test_left_invertible_examples(ex_a):
    assert left_invertible(([[0.0]], [[1.0]], [[1.0]], [[0.0]]))
    # Two identical columns are never left invertible.
    assert not left_invertible(([[0.0]], [[1.0, 1.0]], [[1.0]], [[0.0, 0.0]]))
    gen = design_residual_generator(ex_a)
    sub = [D[:, [0, 1]] for D in gen.delta_impulse]
    assert left_invertible(sub)


def test_left_invertible_matches_toeplitz_oracle():
    rng = np.random.default_rng(12)
    agree = 0
    for trial in range(30):
        n = int(rng.integers(1, 4))
        m = int(rng.integers(1, 3))
        p = int(rng.integers(m, 4))
        A = rng.integers(-2, 3, size=(n, n)).astype(float)
        rho = np.max(np.abs(np.linalg.eigvals(A)))
        if rho > 1e-9:
            A *= 0.8 / rho
        B = rng.integers(-2, 3, size=(n, m)).astype(float)
        C = rng.integers(-2, 3, size=(p, n)).astype(float)
        D = rng.integers(-2, 3, size=(p, m)).astype(float)
        if trial % 2 == 1 and m == 2:
            B[:, 1] = B[:, 0]
            D[:, 1] = D[:, 0]
        got = left_invertible((A, B, C, D))
        want = toeplitz_left_invertible(A, B, C, D)
        assert got == want, (trial, got, want)
        agree += 1
    assert agree == 30


def test_residual_realization_preserves_index(ex_a):
    gen = design_residual_generator(ex_a)
    delta_real = attack_residual_realization(gen)
    for i in (1, 2, 3):
        assert security_index(delta_real, i).alpha == Alpha.finite(3)


def test_residual_realization_rejects_empty(ex_c):
    gen = design_residual_generator(ex_c)
    with pytest.raises(StructuralError):
        attack_residual_realization(gen)
