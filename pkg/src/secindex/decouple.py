"""Disturbance-decoupling residual generation.

A polynomial row vector ``N(z)`` annihilates the disturbance path when
``N(z) G_d(z) = 0`` as a rational identity.  Collecting a minimal-degree
basis of such rows gives the top block of a square post-filter

    R(z) = [ z^{-delta} N(z) ]
           [     F            ]

of full normal rank, so that filtering the measurements produces a residual
``r`` that is exactly decoupled from every disturbance and driven only by
the attack through ``Delta(z) = z^{-delta} N(z) G_a(z)``.

The annihilator is computed over a common-denominator polynomial form of
``G_d`` (via the Faddeev-LeVerrier adjugate recursion), searching degrees
``delta = 0, 1, ..., n`` with a block-Toeplitz null-space computation and
keeping every row at the lowest degree where it appears.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import DEFAULT_TOL, Tolerances
from .errors import ContractError, InputError, NumericError, StructuralError
from .model import Realization, transfer_eval
from .pencil import sample_points
from .sim import Trace

__all__ = [
    "PolynomialMatrix",
    "ResidualGenerator",
    "left_nullspace",
    "design_residual_generator",
    "left_invertible",
    "apply_filter",
    "attack_residual_realization",
]


@dataclass(frozen=True)
class PolynomialMatrix:
    """Real matrix polynomial ``N(z) = sum_j coeffs[j] z^j``.

    The stored degree is tight: the leading coefficient matrix is nonzero
    (except for the zero polynomial, which is kept at degree 0).
    """

    coeffs: tuple[np.ndarray, ...]

    def __post_init__(self):
        if not self.coeffs:
            raise InputError("a polynomial matrix needs at least one coefficient")
        mats = []
        shape = None
        for c in self.coeffs:
            arr = np.asarray(c, dtype=float)
            if arr.ndim != 2:
                raise InputError("polynomial coefficients must be 2-D matrices")
            if shape is None:
                shape = arr.shape
            elif arr.shape != shape:
                raise InputError("polynomial coefficients must share one shape")
            arr = arr.copy()
            arr.flags.writeable = False
            mats.append(arr)
        # Tighten the degree.
        while len(mats) > 1 and not np.any(mats[-1]):
            mats.pop()
        object.__setattr__(self, "coeffs", tuple(mats))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def rows(self) -> int:
        return self.coeffs[0].shape[0]

    @property
    def cols(self) -> int:
        return self.coeffs[0].shape[1]

    def eval(self, z: complex) -> np.ndarray:
        acc = np.zeros((self.rows, self.cols), dtype=complex)
        power = 1.0 + 0.0j
        for c in self.coeffs:
            acc += c * power
            power *= z
        return acc

    @classmethod
    def identity(cls, size: int) -> "PolynomialMatrix":
        return cls((np.eye(size),))

    @classmethod
    def constant(cls, mat: np.ndarray) -> "PolynomialMatrix":
        return cls((np.asarray(mat, dtype=float),))

    def to_json(self) -> list:
        return [c.tolist() for c in self.coeffs]


def _char_poly_adjugate(A: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Faddeev-LeVerrier recursion for ``det(zI - A)`` and ``adj(zI - A)``.

    Returns ``(phi, B)`` where ``phi[j]`` is the coefficient of ``z^j`` in
    the characteristic polynomial and ``adj(zI - A) = sum_k B[k] z^{n-1-k}``.
    """
    n = A.shape[0]
    coeffs_desc = [1.0]  # a_0 = 1, then a_1 ... a_n
    B = [np.eye(n)]
    a_prev = -np.trace(A @ B[0]) / 1.0
    coeffs_desc.append(float(a_prev))
    for k in range(2, n + 1):
        Bk = A @ B[-1] + coeffs_desc[-1] * np.eye(n)
        B.append(Bk)
        ak = -np.trace(A @ Bk) / k
        coeffs_desc.append(float(ak))
    phi = np.array(coeffs_desc[::-1])  # phi[j] multiplies z^j
    return phi, B


def _polynomialized_transfer(model: Realization, block: str) -> list[np.ndarray]:
    """Coefficients ``T_j`` with ``G(z) = (sum_j T_j z^j) / det(zI - A)``."""
    if block == "disturbance":
        Bm, Dm = model.Bd, model.Dd
    else:
        Bm, Dm = model.Ba, model.Da
    phi, adj = _char_poly_adjugate(model.A)
    n = model.n
    T = []
    for j in range(n + 1):
        term = phi[j] * Dm
        if j <= n - 1:
            term = term + model.C @ adj[n - 1 - j] @ Bm
        T.append(np.asarray(term, dtype=float))
    return T


def _null_basis(M: np.ndarray, tol: Tolerances) -> np.ndarray:
    """Orthonormal right-null-space basis (columns) of ``M``."""
    rows, cols = M.shape
    if cols == 0:
        return np.zeros((0, 0))
    if rows == 0:
        return np.eye(cols)
    _, s, Vh = np.linalg.svd(M, full_matrices=True)
    cutoff = tol.rtol * (s[0] if s.size else 0.0) * max(rows, cols)
    rank = int(np.count_nonzero(s > cutoff))
    return Vh[rank:].conj().T


def _transfer_normalrank(
    model: Realization, blocks: tuple[str, ...], tol: Tolerances, seed: int
) -> int:
    """Normal rank of the concatenated transfer blocks, by sampling."""
    pts = sample_points(model.eigenvalues(), tol, seed)
    best = 0
    for z in pts:
        G = np.hstack([transfer_eval(model, z, b, tol) for b in blocks])
        if G.size == 0:
            return 0
        s = np.linalg.svd(G, compute_uv=False)
        cutoff = tol.rtol * s[0] * max(G.shape)
        best = max(best, int(np.count_nonzero(s > cutoff)))
    return best


def left_nullspace(
    model: Realization, tol: Tolerances = DEFAULT_TOL, seed: int = 0
) -> PolynomialMatrix:
    """Minimal-degree polynomial basis of the left null space of ``G_d``.

    With no disturbances the annihilator is the identity (nothing to
    annihilate).  Otherwise candidate degrees ``delta = 0 .. n`` are
    searched; at each degree the coefficient rows solving the block-Toeplitz
    annihilation system are collected, and a row found at a lower degree is
    never replaced by a higher-degree one.  The search stops once
    ``p - normalrank(G_d)`` independent rows are available.

    Raises
    ------
    NumericError
        If the row count is not reached by degree ``n``, which contradicts
        the degree bound and indicates numerical breakdown.
    """
    p = model.p
    if model.o == 0:
        return PolynomialMatrix.identity(p)
    m_prime = _transfer_normalrank(model, ("disturbance",), tol, seed)
    target = p - m_prime
    if target == 0:
        return PolynomialMatrix((np.zeros((0, p)),))
    T = _polynomialized_transfer(model, "disturbance")
    n, o = model.n, model.o
    # Generic probe frequencies for row-independence bookkeeping.
    probe = sample_points(model.eigenvalues(), tol, seed + 17, n_samples=2)
    accepted_rows: list[np.ndarray] = []  # each (deg+1, p) coefficient stack
    accepted_eval: list[np.ndarray] = []  # evaluations at the probe points

    def row_eval(stack: np.ndarray) -> np.ndarray:
        return np.concatenate(
            [sum(stack[j] * z**j for j in range(stack.shape[0])) for z in probe]
        )

    for delta in range(n + 1):
        K = np.zeros(((delta + 1) * p, (delta + n + 1) * o))
        for j in range(delta + 1):
            for k in range(n + 1):
                K[j * p : (j + 1) * p, (j + k) * o : (j + k + 1) * o] = T[k]
        basis = _null_basis(K.T, tol)  # columns: candidate coefficient rows
        for col in basis.T:
            stack = np.real(col).reshape(delta + 1, p)
            ev = row_eval(stack)
            trial = np.vstack(accepted_eval + [ev]) if accepted_eval else ev[None, :]
            s = np.linalg.svd(trial, compute_uv=False)
            cutoff = tol.rtol * s[0] * max(trial.shape)
            if int(np.count_nonzero(s > cutoff)) == len(accepted_rows) + 1:
                accepted_rows.append(stack)
                accepted_eval.append(ev)
                if len(accepted_rows) == target:
                    break
        if len(accepted_rows) == target:
            break
    if len(accepted_rows) != target:
        raise NumericError(
            f"annihilator search reached degree {n} with "
            f"{len(accepted_rows)}/{target} rows; numerical breakdown"
        )
    deg_max = max(stack.shape[0] - 1 for stack in accepted_rows)
    coeffs = [np.zeros((target, p)) for _ in range(deg_max + 1)]
    for r, stack in enumerate(accepted_rows):
        for j in range(stack.shape[0]):
            coeffs[j][r] = stack[j]
    return PolynomialMatrix(tuple(coeffs))


@dataclass(frozen=True)
class ResidualGenerator:
    """Disturbance-decoupled residual filter and its attack-to-residual map.

    ``annihilator`` holds ``N(z)`` (``p - m_prime`` rows); ``delay`` is the
    causality normalization exponent so the implemented filter is
    ``z^{-delay} N(z)``.  ``delta_impulse`` is the truncated impulse
    response of ``Delta(z) = z^{-delay} N(z) G_a(z)``, and ``completion``
    carries the constant rows that make the full filter square with full
    normal rank.
    """

    model: Realization
    annihilator: PolynomialMatrix
    delay: int
    m_prime: int
    m_dprime: int
    delta_impulse: tuple[np.ndarray, ...]
    completion: PolynomialMatrix

    @property
    def residual_rows(self) -> int:
        return self.annihilator.rows

    @property
    def L_imp(self) -> int:
        return len(self.delta_impulse)

    def delta_eval(self, z: complex, support: tuple[int, ...] | None = None) -> np.ndarray:
        """Rational evaluation of ``Delta(z)`` (columns of ``support`` only)."""
        Ga = transfer_eval(self.model, z, "attack")
        full = (complex(z) ** (-self.delay)) * (self.annihilator.eval(z) @ Ga)
        if support is None:
            return full
        return full[:, [j - 1 for j in support]]

    def delta_normalrank(
        self, tol: Tolerances = DEFAULT_TOL, seed: int = 0
    ) -> int:
        """Normal rank of the attack-to-residual map by sampling.

        Singular values are cut off relative to the product scale of the
        factors, so a map that vanishes by exact cancellation ranks zero
        instead of ranking its own roundoff junk.
        """
        if self.residual_rows == 0:
            return 0
        pts = sample_points(self.model.eigenvalues(), tol, seed)
        best = 0
        for z in pts:
            Nz = self.annihilator.eval(z)
            Ga = transfer_eval(self.model, z, "attack", tol)
            Dz = Nz @ Ga
            s = np.linalg.svd(Dz, compute_uv=False)
            ref = max(float(s[0]) if s.size else 0.0,
                      np.linalg.norm(Nz) * np.linalg.norm(Ga))
            cutoff = tol.rtol * ref * max(Dz.shape)
            best = max(best, int(np.count_nonzero(s > cutoff)))
        return best


def _attack_markov(model: Realization, count: int) -> list[np.ndarray]:
    out = [np.asarray(model.Da, dtype=float)]
    Ak_Ba = model.Ba
    for _ in range(1, count):
        out.append(model.C @ Ak_Ba)
        Ak_Ba = model.A @ Ak_Ba
    return out


def design_residual_generator(
    model: Realization,
    L_imp: int | None = None,
    tol: Tolerances = DEFAULT_TOL,
    seed: int = 0,
) -> ResidualGenerator:
    """Build the residual generator: annihilator, ranks, impulse map, filter.

    Parameters
    ----------
    model : Realization
    L_imp : int, optional
        Truncation length of the attack-to-residual impulse response;
        defaults to ``4 (n + delta) + 8`` and must be at least
        ``delta + n + 1``.

    Raises
    ------
    ContractError
        If the requested truncation is too short.
    NumericError
        If the designed annihilator fails its verification (rational
        annihilation identity, rank of the completed filter, or the rank
        balance of the attack-to-residual map).
    """
    N = left_nullspace(model, tol, seed)
    delta = N.degree
    if L_imp is None:
        L_imp = 4 * (model.n + delta) + 8
    if L_imp < delta + model.n + 1:
        raise ContractError(
            f"impulse truncation L_imp={L_imp} shorter than delta+n+1={delta + model.n + 1}"
        )
    m_prime = _transfer_normalrank(model, ("disturbance",), tol, seed)
    both = _transfer_normalrank(model, ("disturbance", "attack"), tol, seed)
    m_dprime = both - m_prime
    pts = sample_points(model.eigenvalues(), tol, seed + 5)
    if model.o > 0 and N.rows > 0:
        for z in pts:
            Gd = transfer_eval(model, z, "disturbance", tol)
            Nz = N.eval(z)
            err = np.linalg.norm(Nz @ Gd)
            bound = tol.annihilation_tol * max(
                np.linalg.norm(Nz) * np.linalg.norm(Gd), 1e-300
            )
            if err > bound:
                raise NumericError(
                    f"annihilation identity violated at z={z}: |N G_d| = {err:.3e}"
                )
    # Impulse response of z^{-delta} N(z) G_a(z).
    H = _attack_markov(model, L_imp + delta + 1)
    D_seq = []
    for l in range(L_imp):
        acc = np.zeros((N.rows, model.m))
        for j in range(delta + 1):
            idx = l - delta + j
            if 0 <= idx < len(H):
                acc = acc + N.coeffs[j] @ H[idx]
        D_seq.append(acc)
    # Verify the rank balance of the attack-to-residual map; cut off the
    # singular values against the product scale of the factors so exact
    # cancellation ranks zero.
    if N.rows == 0:
        delta_rank = 0
    else:
        delta_rank = 0
        for z in pts:
            Nz = N.eval(z)
            Ga = transfer_eval(model, z, "attack", tol)
            Dz = Nz @ Ga
            if Dz.size:
                s = np.linalg.svd(Dz, compute_uv=False)
                ref = max(float(s[0]) if s.size else 0.0,
                          np.linalg.norm(Nz) * np.linalg.norm(Ga))
                cutoff = tol.rtol * ref * max(Dz.shape)
                delta_rank = max(delta_rank, int(np.count_nonzero(s > cutoff)))
    if delta_rank != m_dprime:
        raise NumericError(
            f"attack-to-residual normal rank {delta_rank} does not match "
            f"the rank balance m''={m_dprime}"
        )
    # Complete the filter to a square system of full normal rank.
    comp_rows = model.p - N.rows
    if comp_rows == 0:
        completion = PolynomialMatrix((np.zeros((0, model.p)),))
    else:
        rng = np.random.default_rng(seed + 23)
        z_ref = pts[0]
        completion = None
        for _ in range(tol.completion_retries):
            F = rng.standard_normal((comp_rows, model.p))
            if N.rows > 0:
                Nz = N.eval(z_ref)
                q, _ = np.linalg.qr(Nz.conj().T)  # columns span row space
                F = np.real(F - (F @ q) @ q.conj().T)
            ok = True
            for z in pts:
                stacked = np.vstack([N.eval(z), F.astype(complex)])
                s = np.linalg.svd(stacked, compute_uv=False)
                cutoff = tol.rtol * s[0] * max(stacked.shape)
                if int(np.count_nonzero(s > cutoff)) != model.p:
                    ok = False
                    break
            if ok:
                completion = PolynomialMatrix.constant(F)
                break
        if completion is None:
            raise NumericError("could not complete the filter to full normal rank")
    return ResidualGenerator(
        model=model,
        annihilator=N,
        delay=delta,
        m_prime=m_prime,
        m_dprime=m_dprime,
        delta_impulse=tuple(D_seq),
        completion=completion,
    )


def left_invertible(
    system,
    tol: Tolerances = DEFAULT_TOL,
    seed: int = 0,
    ref_scale: float | None = None,
) -> bool:
    """Left invertibility of a linear map: normal rank equals input count.

    ``system`` may be a state-space 4-tuple ``(A, B, C, D)``, a
    :class:`~secindex.model.Realization` (its attack path is used), or a
    sequence of impulse-response matrices (a finite-response map in the
    delay operator).  ``ref_scale`` supplies an absolute magnitude
    reference for impulse responses extracted from a larger map, so that a
    column living at roundoff level ranks zero.
    """
    if isinstance(system, Realization):
        system = (system.A, system.Ba, system.C, system.Da)
    if isinstance(system, tuple) and len(system) == 4:
        A, B, C, D = (np.asarray(x, dtype=float) for x in system)
        m_in = B.shape[1]
        if m_in == 0:
            return True
        pts = sample_points(np.linalg.eigvals(A), tol, seed)
        best = 0
        for z in pts:
            G = C @ np.linalg.solve(z * np.eye(A.shape[0]) - A, B.astype(complex)) + D
            s = np.linalg.svd(G, compute_uv=False)
            cutoff = tol.rtol * (s[0] if s.size else 0.0) * max(G.shape)
            best = max(best, int(np.count_nonzero(s > cutoff)))
        return best == m_in
    impulse = [np.atleast_2d(np.asarray(M, dtype=float)) for M in system]
    if not impulse:
        raise InputError("empty impulse response")
    rows, cols = impulse[0].shape
    if cols == 0:
        return True
    if rows == 0:
        return False
    pts = sample_points(np.array([]), tol, seed)
    best = 0
    for z in pts:
        G = sum(M * complex(z) ** (-l) for l, M in enumerate(impulse))
        s = np.linalg.svd(G, compute_uv=False)
        ref = max(float(s[0]) if s.size else 0.0, ref_scale or 0.0)
        cutoff = tol.rtol * ref * max(G.shape)
        best = max(best, int(np.count_nonzero(s > cutoff)))
    return best == cols


def apply_filter(gen: ResidualGenerator, y: Trace) -> Trace:
    """Run the causal residual filter ``z^{-delay} N(z)`` over a trace.

    The filter starts at rest: samples before k = 0 are taken as zero, so
    ``r(k) = sum_j N_j y(k - delay + j)``.  The first ``delay`` samples are
    warm-up and should be excluded from downstream scoring whenever the
    supplied trace does not itself start at rest.
    """
    if y.channels != gen.model.p:
        raise InputError(
            f"trace has {y.channels} channels, filter expects p={gen.model.p}"
        )
    N = len(y)
    delta = gen.delay
    out = np.zeros((N, gen.residual_rows))
    coeffs = gen.annihilator.coeffs
    for j in range(delta + 1):
        # Contribution of N_j y(k - delta + j) for every k at once.
        shift = delta - j
        if shift < N:
            out[shift:] += y.data[: N - shift] @ coeffs[j].T
    return Trace(out)


def attack_residual_realization(gen: ResidualGenerator) -> Realization:
    """State-space realization of the attack-to-residual map.

    Cascades the plant's attack path with the FIR filter ``z^{-delta} N(z)``
    by keeping the plant state and a ``delta``-deep output delay line.  The
    plant state is retained on purpose: the initial-state freedom of the
    original system is what lets attacks hide, so index computations on the
    residual map must be run on this (non-minimal) realization.
    """
    mod = gen.model
    N = gen.annihilator
    delta = gen.delay
    rows = gen.residual_rows
    if rows == 0:
        raise StructuralError("residual map has no rows; nothing to realize")
    n, p, m = mod.n, mod.p, mod.m
    size = n + delta * p
    A = np.zeros((size, size))
    A[:n, :n] = mod.A
    B = np.zeros((size, m))
    B[:n] = mod.Ba
    if delta > 0:
        # Delay line holds y(k-delta) ... y(k-1), shifting each step.
        A[n : n + (delta - 1) * p, n + p : n + delta * p] = np.eye((delta - 1) * p)
        A[n + (delta - 1) * p : n + delta * p, :n] = mod.C
        B[n + (delta - 1) * p : n + delta * p] = mod.Da
    N_lead = N.coeffs[delta]  # delay == N.degree by construction
    C = np.zeros((rows, size))
    C[:, :n] = N_lead @ mod.C
    for j in range(delta):
        C[:, n + j * p : n + (j + 1) * p] = N.coeffs[j]
    D = N_lead @ mod.Da
    return Realization(
        A=A, Bd=np.zeros((size, 0)), Ba=B, C=C, Dd=np.zeros((rows, 0)), Da=D
    )
