import numpy as np
import pytest

from secindex import (
    ContractError,
    InputError,
    Realization,
    StructuralError,
    Trace,
    apply_filter,
    counterexample_pair,
    design_residual_generator,
    generate_random_instance,
    identify,
    remove_transient,
    security_index,
    simulate,
    subset_inversion,
)


def _schur_sensor_instance(seed, n=3, o=1, p=3):
    """Schur plant with identity sensor attacks and a nontrivial annihilator."""
    rng = np.random.default_rng(seed)
    for trial in range(40):
        base = generate_random_instance((n, o, p, p), seed=seed * 100 + trial,
                                        spectral_radius_target=float(rng.uniform(0.5, 0.8)))
        mod = Realization(A=base.A, Bd=base.Bd, Ba=np.zeros((n, p)), C=base.C,
                          Dd=base.Dd, Da=np.eye(p))
        gen = design_residual_generator(mod)
        if gen.m_dprime >= 1:
            return mod, gen
    raise RuntimeError("no usable instance found")


def test_remove_transient_pure_transient():
    mod, gen = _schur_sensor_instance(1)
    rng = np.random.default_rng(3)
    N = 80
    y, _ = simulate(mod, rng.standard_normal(mod.n), None, None, N)
    r = apply_filter(gen, y)
    r_prime = remove_transient(mod, gen, r)
    assert np.linalg.norm(r_prime.data) <= 1e-8 * max(np.linalg.norm(r.data), 1e-300)


def test_remove_transient_never_grows():
    mod, gen = _schur_sensor_instance(2)
    rng = np.random.default_rng(4)
    N = 60
    a = Trace(rng.standard_normal((N, mod.m)))
    y, _ = simulate(mod, np.zeros(mod.n), None, a, N)
    r = apply_filter(gen, y)
    r_prime = remove_transient(mod, gen, r)
    assert np.linalg.norm(r_prime.data) <= np.linalg.norm(r.data) + 1e-12


def test_remove_transient_hidden_attack(ex_a):
    # The undetectable witness produces an identically zero residual, so the
    # transient-free residual is zero as well.
    gen = design_residual_generator(ex_a)
    res = security_index(ex_a, 1)
    from secindex import synthesize_attack

    a, d, x0 = synthesize_attack(res.witness, 40)
    y, _ = simulate(ex_a, x0, d, a, 40)
    r = apply_filter(gen, y)
    r_prime = remove_transient(ex_a, gen, r)
    assert np.linalg.norm(r_prime.data) <= 1e-6 * max(np.linalg.norm(a.data), 1.0)


def test_remove_transient_short_trace(ex_a):
    gen = design_residual_generator(ex_a)
    with pytest.raises(InputError):
        remove_transient(ex_a, gen, Trace.zeros(5, 3))


def test_subset_inversion_identity_channel(ex_a):
    gen = design_residual_generator(ex_a)
    N = 60
    sig = np.sin(0.3 * np.arange(N))
    r = np.zeros((N, 3))
    r[:, 1] = sig
    est = subset_inversion(gen, (2,), Trace(r))
    window = slice(gen.delay, N - gen.L_imp)
    assert est.residual <= 1e-10
    assert np.allclose(est.signal.data[window, 0], sig[window], atol=1e-8)
    # Wrong support: the fit cannot explain the energy on channel 2.
    est_bad = subset_inversion(gen, (1,), Trace(r))
    assert est_bad.residual > 1e-2


def test_subset_inversion_round_trip_random():
    mod, gen = _schur_sensor_instance(5)
    rng = np.random.default_rng(6)
    N = 120
    a = np.zeros((N, mod.m))
    a[:, 0] = np.cos(0.2 * np.arange(N)) + 0.5
    y, _ = simulate(mod, np.zeros(mod.n), None, Trace(a), N)
    r = apply_filter(gen, y)
    est = subset_inversion(gen, (1,), r)
    window = slice(gen.delay, N - gen.L_imp)
    err = np.linalg.norm(est.signal.data[window, 0] - a[window, 0])
    assert err <= 1e-6 * np.linalg.norm(a[window, 0])


def test_subset_inversion_rejects_invisible_channel():
    # Attack column inside the disturbance range: its residual column is
    # identically zero, hence not left invertible.
    mod = Realization(A=[[0.5, 0.1], [0.0, 0.4]], Bd=[[1.0], [2.0]],
                      Ba=[[2.0, 0.0], [4.0, 1.0]], C=np.eye(2),
                      Dd=[[1.0], [0.0]], Da=[[2.0, 0.0], [0.0, 1.0]])
    gen = design_residual_generator(mod)
    assert gen.residual_rows == 1
    with pytest.raises(StructuralError):
        subset_inversion(gen, (1,), Trace.zeros(60, 1))


def test_identify_single_channel(ex_a):
    gen = design_residual_generator(ex_a)
    N = 80
    a = np.zeros((N, 3))
    a[:, 1] = 1.0 + 0.3 * np.cos(0.4 * np.arange(N))
    y, _ = simulate(ex_a, np.zeros(3), None, Trace(a), N)
    r = apply_filter(gen, y)
    r_prime = remove_transient(ex_a, gen, r)
    out = identify(gen, r_prime, q=1)
    assert out.accepted
    assert out.support == (2,)
    window = slice(gen.delay, N - gen.L_imp)
    err = np.linalg.norm(out.estimate.data[window, 1] - a[window, 1])
    assert err <= 1e-6 * np.linalg.norm(a[window, 1])
    assert out.consistency_residual <= 1e-6


def test_identify_empty_residual(ex_a):
    gen = design_residual_generator(ex_a)
    out = identify(gen, Trace.zeros(60, 3), q=2)
    assert not out.accepted
    assert out.support == ()
    assert out.subsets_tried == 0


def test_identify_budget_guard(ex_a):
    gen = design_residual_generator(ex_a)
    with pytest.raises(ContractError):
        identify(gen, Trace.zeros(60, 3), q=0)


def test_identify_reports_ambiguity(ex_a):
    # Feed the first half of an output-identical pair: both the J-side
    # (with transient) and the K-side (from rest) explain the residual, so
    # the search must refuse to pick one.
    res = security_index(ex_a, 1)
    pair = counterexample_pair(ex_a, 1, res.witness, q=2, horizon=60)
    y, _ = simulate(ex_a, pair[0].x0, pair[0].d, pair[0].a, 60)
    gen = design_residual_generator(ex_a)
    r = apply_filter(gen, y)
    r_prime = remove_transient(ex_a, gen, r)
    out = identify(gen, r_prime, q=2)
    assert not out.accepted
    assert len(out.ambiguous_supports) >= 2
    supports = set(out.ambiguous_supports)
    assert (3,) in supports  # the K-side explanation
    assert any(len(s) == 2 for s in supports)  # a J-side explanation


def test_identify_complexity_bound():
    mod, gen = _schur_sensor_instance(7)
    rng = np.random.default_rng(8)
    N = 100
    a = np.zeros((N, mod.m))
    a[:, 2] = 1.0
    y, _ = simulate(mod, rng.standard_normal(mod.n), None, Trace(a), N)
    r = apply_filter(gen, y)
    r_prime = remove_transient(mod, gen, r)
    from math import comb

    for q in (1, 2):
        out = identify(gen, r_prime, q=q)
        assert out.subsets_tried <= sum(comb(mod.m, j) for j in range(1, q + 1))


def test_identify_weak_mode_channel_agreement():
    # Channel 1 exactly duplicates the disturbance signature, so it is
    # invisible in the residual (maskable at budget 1); the sensor channels
    # remain identifiable, and an accepted estimate must be right on the
    # channel it names.
    mod = Realization(
        A=[[0.5, 0.1, 0.0], [0.1, 0.4, 0.1], [0.0, 0.1, 0.3]],
        Bd=[[1.0], [0.0], [0.0]],
        Ba=[[1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]],
        C=np.eye(3),
        Dd=[[0.0], [0.0], [1.0]],
        Da=[[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]],
    )
    gen = design_residual_generator(mod)
    assert gen.residual_rows == 2
    rng = np.random.default_rng(9)
    N = 120
    a = np.zeros((N, 3))
    a[:, 1] = 1.0 + 0.2 * np.sin(0.3 * np.arange(N))
    d = Trace(rng.standard_normal((N, 1)))
    y, _ = simulate(mod, rng.standard_normal(3), d, Trace(a), N)
    r = apply_filter(gen, y)
    r_prime = remove_transient(mod, gen, r)
    out = identify(gen, r_prime, q=1)
    assert out.accepted
    assert out.support == (2,)
    window = slice(gen.delay, N - gen.L_imp)
    err = np.linalg.norm(out.estimate.data[window, 1] - a[window, 1])
    assert err <= 1e-4 * np.linalg.norm(a[window, 1])
