import numpy as np
import pytest

from secindex import (
    AttackPattern,
    ContractError,
    InputError,
    NumericError,
    Realization,
    Trace,
    generate_random_instance,
    read_trace_csv,
    simulate,
    synthesize_attack,
    validate,
    verify_undetectable,
    write_trace_csv,
)


def _ex_a_witness() -> AttackPattern:
    # Hand-exact masking direction: x0 = e1, a0 = -C e1 = -(1,1,1) at z0 = 2.
    return AttackPattern(
        z0=2.0,
        x0=[1.0, 0.0, 0.0],
        d0=[],
        a0=[-1.0, -1.0, -1.0],
        support=(1, 2, 3),
        target=1,
    )


def test_simulate_zero_inputs(ex_b):
    y, x = simulate(ex_b, None, None, None, 10)
    assert y.max_norm() == 0.0
    assert np.all(x == 0)


def test_simulate_geometric_decay():
    mod = Realization(A=[[0.5]], Bd=np.zeros((1, 0)), Ba=[[0.0]], C=[[1.0]],
                      Dd=np.zeros((1, 0)), Da=[[1.0]])
    y, _ = simulate(mod, [1.0], None, None, 12)
    assert np.allclose(y.data[:, 0], 0.5 ** np.arange(12))


def test_simulate_ex_a_witness_silent(ex_a):
    pat = _ex_a_witness()
    a, d, x0 = synthesize_attack(pat, 30)
    y, _ = simulate(ex_a, x0, d, a, 30)
    assert y.max_norm() <= 1e-6 * 2.0**30


def test_simulate_channel_mismatch(ex_a):
    with pytest.raises(InputError):
        simulate(ex_a, None, Trace.zeros(10, 1), None, 10)


def test_simulate_short_trace(ex_a):
    with pytest.raises(InputError):
        simulate(ex_a, None, None, Trace.zeros(5, 3), 10)


def test_simulate_overflow_reports_step():
    mod = Realization(A=[[10.0]], Bd=np.zeros((1, 0)), Ba=[[0.0]], C=[[1.0]],
                      Dd=np.zeros((1, 0)), Da=[[1.0]])
    with pytest.raises(NumericError, match="k="):
        simulate(mod, [1.0], None, None, 400)


def test_superposition():
    rng = np.random.default_rng(2)
    for seed in range(8):
        mod = generate_random_instance((3, 1, 2, 2), seed=seed, spectral_radius_target=0.9)
        N = 25
        x0 = rng.standard_normal(3)
        d = Trace(rng.standard_normal((N, 1)))
        a = Trace(rng.standard_normal((N, 2)))
        y_all, _ = simulate(mod, x0, d, a, N)
        y_x, _ = simulate(mod, x0, None, None, N)
        y_d, _ = simulate(mod, None, d, None, N)
        y_a, _ = simulate(mod, None, None, a, N)
        combined = y_x.data + y_d.data + y_a.data
        scale = max(np.abs(y_all.data).max(), 1.0)
        assert np.abs(y_all.data - combined).max() <= 1e-12 * scale


def test_masking_identity(ex_c):
    # For the duplicate-column witness the disturbance response cancels the
    # attack response sample by sample.
    N = 20
    k = np.arange(N)
    a = Trace(np.column_stack([1.5**k, np.zeros(N)]))
    d = Trace((-(1.5**k))[:, None])
    y_d, _ = simulate(ex_c, None, d, None, N)
    y_a, _ = simulate(ex_c, None, None, a, N)
    assert np.abs(y_d.data + y_a.data).max() <= 1e-9 * 1.5**N


def test_verify_exact_ex_a(ex_a):
    ok, peak = verify_undetectable(ex_a, _ex_a_witness(), 50, "exact")
    assert ok
    assert peak <= 1e-6 * 2.0**50


def test_verify_detects_perturbed_initial_state(ex_a):
    pat = _ex_a_witness()
    a, d, x0 = synthesize_attack(pat, 30)
    y, _ = simulate(ex_a, x0 + np.array([0.0, 0.1, 0.0]), d, a, 30)
    scale = max(a.max_norm(), float(np.linalg.norm(x0)))
    assert y.max_norm() > 1e-3 * scale


def test_verify_asymptotic_schur(ex_b):
    # Small-amplitude eigenmode pattern: operator-known zero initial state
    # leaves only a decaying transient.
    pat = AttackPattern(
        z0=0.2,
        x0=[0.01, 0.0, 0.0],
        d0=[],
        a0=[-0.01, -0.01, -0.01],
        support=(1, 2, 3),
        target=1,
    )
    ok, peak = verify_undetectable(ex_b, pat, 60, "asymptotic")
    assert ok
    assert peak <= 0.1


def test_verify_asymptotic_requires_schur(ex_a):
    with pytest.raises(ContractError):
        verify_undetectable(ex_a, _ex_a_witness(), 30, "asymptotic")


def test_synthesize_constant_at_unit_frequency():
    pat = AttackPattern(z0=1.0, x0=[0.0], d0=[-1.0], a0=[1.0, 0.0],
                        support=(1,), target=1)
    a, d, x0 = synthesize_attack(pat, 8)
    assert np.allclose(a.data, np.tile(a.data[0], (8, 1)))
    assert np.allclose(d.data, np.tile(d.data[0], (8, 1)))


def test_generate_random_instance_contract():
    mod = generate_random_instance((2, 1, 2, 2), seed=4, spectral_radius_target=0.5)
    rep = validate(mod)
    assert rep.passed and rep.is_schur
    mod = generate_random_instance((3, 0, 3, 3), seed=4, spectral_radius_target=2.0)
    rep = validate(mod)
    assert rep.passed and not rep.is_schur


def test_generate_random_instance_deterministic():
    a = generate_random_instance((3, 1, 2, 2), seed=9)
    b = generate_random_instance((3, 1, 2, 2), seed=9)
    assert np.array_equal(a.A, b.A) and np.array_equal(a.Da, b.Da)


def test_trace_csv_round_trip(tmp_path):
    trace = Trace(np.array([[1.0, -2.5], [0.125, 3.0], [1e-17, 4.0]]))
    path = tmp_path / "t.csv"
    write_trace_csv(path, trace, prefix="y")
    back = read_trace_csv(path)
    assert back.channels == 2
    assert np.array_equal(back.data, trace.data)
    assert path.read_text().splitlines()[0] == "y1,y2"
