"""Sparse attack reconstruction from decoupled residual traces.

The pipeline mirrors how an operator would consume the residual: remove
the part of the residual explained by an unknown initial state (the
transient span is known from the plant and filter), then try every
candidate support up to the attacker budget, invert the attack-to-residual
map on that support by stacking its impulse response into a block-Toeplitz
least-squares problem, and accept a support whose reconstruction explains
the residual.

Because the initial state is unknown, consistency is always scored in the
transient-deflated sense: the candidate attack and a free transient are
fitted jointly, so a correct support explains the residual to working
precision even when the trace carries a large transient.  When more than
one support explains the residual with genuinely different attack signals
(which happens exactly when the budget reaches half the security index),
the ambiguity is reported instead of silently resolved.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .config import DEFAULT_TOL, Tolerances
from .decouple import ResidualGenerator, apply_filter, left_invertible
from .errors import ContractError, InputError, StructuralError
from .model import Realization
from .sim import Trace

__all__ = [
    "TransientModel",
    "SubsetEstimate",
    "IdentificationResult",
    "build_transient_model",
    "remove_transient",
    "subset_inversion",
    "identify",
]


@dataclass(frozen=True)
class TransientModel:
    """Sampled span of initial-state responses seen through the filter.

    ``mode_basis`` stacks one filtered homogeneous response per kept state
    direction: entry ``[j]`` is the residual trace produced by ``x(0) = v_j``
    with zero inputs.  Directions whose sampled responses are linearly
    dependent are pruned.
    """

    mode_basis: tuple[np.ndarray, ...]  # each (horizon, residual_rows)
    horizon: int
    kept_states: tuple[int, ...]

    def stacked(self, rows: np.ndarray) -> np.ndarray:
        """Basis signals restricted to sample indices ``rows``, vectorized."""
        if not self.mode_basis:
            return np.zeros((rows.size * 0, 0))
        cols = [b[rows].reshape(-1) for b in self.mode_basis]
        return np.column_stack(cols)


def build_transient_model(
    model: Realization,
    gen: ResidualGenerator,
    horizon: int,
    tol: Tolerances = DEFAULT_TOL,
) -> TransientModel:
    """Filtered homogeneous responses for every state basis direction.

    Each response is normalized to unit energy: only its direction matters
    for fitting, and unstable plants would otherwise let fast modes dwarf
    slow ones and defeat the dependence pruning.
    """
    responses = []
    rows = gen.residual_rows
    for j in range(model.n):
        x = np.zeros(model.n)
        x[j] = 1.0
        y = np.empty((horizon, model.p))
        for k in range(horizon):
            y[k] = model.C @ x
            x = model.A @ x
        filtered = apply_filter(gen, Trace(y)).data
        norm = np.linalg.norm(filtered)
        responses.append(filtered / norm if norm > 0 else filtered)
    kept: list[int] = []
    kept_cols: list[np.ndarray] = []
    for j, resp in enumerate(responses):
        col = resp.reshape(-1)
        if np.linalg.norm(col) == 0.0:
            continue
        trial = np.column_stack(kept_cols + [col]) if kept_cols else col[:, None]
        s = np.linalg.svd(trial, compute_uv=False)
        cutoff = tol.rtol * (s[0] if s.size else 0.0) * max(trial.shape)
        if int(np.count_nonzero(s > cutoff)) == len(kept_cols) + 1:
            kept.append(j)
            kept_cols.append(col)
    return TransientModel(
        mode_basis=tuple(responses[j] for j in kept),
        horizon=horizon,
        kept_states=tuple(kept),
    )


def _transient_fit(
    model: Realization,
    gen: ResidualGenerator,
    r: Trace,
    tol: Tolerances,
) -> tuple[Trace, float, TransientModel]:
    """Least-squares transient removal; returns (residual, fitted energy, basis)."""
    horizon = len(r)
    tm = build_transient_model(model, gen, horizon, tol)
    target = r.data.reshape(-1)
    if not tm.mode_basis:
        return Trace(r.data.copy()), 0.0, tm
    B = tm.stacked(np.arange(horizon))
    coeffs, *_ = np.linalg.lstsq(B, target, rcond=None)
    fitted = B @ coeffs
    r_prime = (target - fitted).reshape(r.data.shape)
    return Trace(r_prime), float(np.linalg.norm(fitted)), tm


def remove_transient(
    model: Realization,
    gen: ResidualGenerator,
    r: Trace,
    tol: Tolerances = DEFAULT_TOL,
) -> Trace:
    """Subtract the best initial-state explanation from a residual trace.

    The result is the least-squares fit residual: identically zero (up to
    roundoff) when the trace is a pure transient, unchanged when the trace
    is orthogonal to the transient span, and never larger than the input.

    Raises
    ------
    InputError
        If the trace is shorter than ``n + delay + 10`` samples.
    """
    if r.channels != gen.residual_rows:
        raise InputError(
            f"residual trace has {r.channels} channels, expected {gen.residual_rows}"
        )
    if len(r) < model.n + gen.delay + 10:
        raise InputError(
            f"trace too short: need at least n + delay + 10 = {model.n + gen.delay + 10} samples"
        )
    r_prime, _, _ = _transient_fit(model, gen, r, tol)
    return r_prime


@dataclass(frozen=True)
class SubsetEstimate:
    """Attack estimate on one candidate support."""

    support: tuple[int, ...]
    signal: Trace  # len(support) channels
    residual: float
    condition: float
    conditioning_warning: bool


def _toeplitz_stack(
    impulse: tuple[np.ndarray, ...], support: tuple[int, ...], n_out: int, n_in: int
) -> np.ndarray:
    """Block-banded convolution operator of the support columns."""
    rows = impulse[0].shape[0]
    s = len(support)
    cols_idx = [j - 1 for j in support]
    T = np.zeros((n_out * rows, n_in * s))
    for l, D in enumerate(impulse):
        Dl = D[:, cols_idx]
        if not np.any(Dl):
            continue
        for kin in range(n_in):
            kout = kin + l
            if kout >= n_out:
                break
            T[kout * rows : (kout + 1) * rows, kin * s : (kin + 1) * s] = Dl
    return T


def subset_inversion(
    gen: ResidualGenerator,
    support,
    r_prime: Trace,
    transient: TransientModel | None = None,
    tol: Tolerances = DEFAULT_TOL,
) -> SubsetEstimate:
    """Least-squares attack reconstruction on a fixed support.

    Stacks the block-Toeplitz convolution operator of the support columns'
    impulse response over the trace window (the filter starts at rest) and
    solves for the input samples.  When a transient basis is supplied, the
    transient coefficients are fitted jointly so the returned residual
    measures only what the support genuinely cannot explain.

    Raises
    ------
    StructuralError
        If the support's attack-to-residual map is not left invertible.
    """
    support = tuple(sorted(int(j) for j in support))
    if not support:
        raise InputError("support must contain at least one channel")
    for j in support:
        if not 1 <= j <= gen.model.m:
            raise InputError(f"channel {j} out of range 1..{gen.model.m}")
    if r_prime.channels != gen.residual_rows:
        raise InputError(
            f"residual trace has {r_prime.channels} channels, expected {gen.residual_rows}"
        )
    sub_impulse = [D[:, [j - 1 for j in support]] for D in gen.delta_impulse]
    full_scale = max(float(np.abs(D).max()) for D in gen.delta_impulse)
    if not left_invertible(sub_impulse, tol, ref_scale=full_scale):
        raise StructuralError(
            f"attack-to-residual map is not left invertible on support {support}"
        )
    N = len(r_prime)
    delta = gen.delay
    rows = gen.residual_rows
    solve_rows = np.arange(delta, N)
    score_rows = np.arange(delta, max(delta, N - gen.L_imp))
    T_full = _toeplitz_stack(gen.delta_impulse, support, N, N)
    # Restrict equations to the solve window.
    row_mask = np.zeros(N * rows, dtype=bool)
    for k in solve_rows:
        row_mask[k * rows : (k + 1) * rows] = True
    A_mat = T_full[row_mask]
    rhs = r_prime.data.reshape(-1)[row_mask]
    if transient is not None and transient.mode_basis:
        B = transient.stacked(solve_rows)
        A_aug = np.hstack([A_mat, B])
    else:
        A_aug = A_mat
    sv = np.linalg.svd(A_aug, compute_uv=False)
    if sv.size:
        # Trailing input samples are structurally underdetermined (their
        # response falls past the window); condition the solvable part only.
        cutoff = tol.rtol * sv[0] * max(A_aug.shape)
        rank = int(np.count_nonzero(sv > cutoff))
        condition = float(sv[0] / sv[rank - 1]) if rank > 0 else np.inf
    else:
        condition = np.inf
    sol, *_ = np.linalg.lstsq(A_aug, rhs, rcond=None)
    u = sol[: N * len(support)]
    estimate = u.reshape(N, len(support))
    # Score only the trusted window: past warm-up, clear of truncation edge.
    score_mask = np.zeros(N * rows, dtype=bool)
    for k in score_rows:
        score_mask[k * rows : (k + 1) * rows] = True
    misfit_full = np.zeros(N * rows)
    misfit_full[row_mask] = rhs - A_aug @ sol
    denom = np.linalg.norm(r_prime.data.reshape(-1)[score_mask])
    num = np.linalg.norm(misfit_full[score_mask])
    residual = float(num / denom) if denom > 0 else 0.0
    return SubsetEstimate(
        support=support,
        signal=Trace(estimate),
        residual=residual,
        condition=condition,
        conditioning_warning=condition > tol.cond_limit,
    )


@dataclass(frozen=True)
class IdentificationResult:
    """Outcome of the sparse-attack search over all supports up to a budget."""

    accepted: bool
    support: tuple[int, ...]
    estimate: Trace
    consistency_residual: float
    subsets_tried: int
    ambiguous_supports: tuple[tuple[int, ...], ...] = ()


def _pad_estimate(est: SubsetEstimate, m: int) -> np.ndarray:
    full = np.zeros((len(est.signal), m))
    for idx, j in enumerate(est.support):
        full[:, j - 1] = est.signal.data[:, idx]
    return full


def identify(
    gen: ResidualGenerator,
    r_prime: Trace,
    q: int,
    scale: float | None = None,
    tol: Tolerances = DEFAULT_TOL,
) -> IdentificationResult:
    """Search supports of size up to ``q`` for one explaining the residual.

    Supports are enumerated lexicographically by increasing cardinality;
    supersets of a support that already passed are skipped (they explain
    the residual trivially).  A support passes when its joint
    attack-plus-transient fit leaves a relative misfit at most
    ``consistency_tol`` on the trusted window.  If every passing support
    reproduces the same attack signal the lexicographically first one is
    accepted; genuinely different explanations are reported as an ambiguity
    with ``accepted = False``.

    ``scale`` is the reference magnitude for the empty-trace test (defaults
    to the residual's own peak).
    """
    if q < 1:
        raise ContractError("budget q must be at least 1")
    m = gen.model.m
    N = len(r_prime)
    peak = float(np.max(np.abs(r_prime.data))) if r_prime.data.size else 0.0
    ref = peak if scale is None else float(scale)
    if peak <= tol.noise_floor * max(ref, 1e-300) or peak == 0.0:
        return IdentificationResult(
            accepted=False,
            support=(),
            estimate=Trace.zeros(N, m),
            consistency_residual=0.0,
            subsets_tried=0,
        )
    transient = build_transient_model(gen.model, gen, N, tol)
    tried = 0
    passing: list[SubsetEstimate] = []
    for size in range(1, min(q, m) + 1):
        for combo in combinations(range(1, m + 1), size):
            if any(set(p.support).issubset(combo) for p in passing):
                continue
            tried += 1
            try:
                est = subset_inversion(gen, combo, r_prime, transient, tol)
            except StructuralError:
                continue
            if est.residual <= tol.consistency_tol:
                passing.append(est)
    if not passing:
        return IdentificationResult(
            accepted=False,
            support=(),
            estimate=Trace.zeros(N, m),
            consistency_residual=0.0,
            subsets_tried=tried,
        )
    # Distinct supports may still describe the same attack; compare the
    # padded signals on the trusted window.
    first = passing[0]
    pad_first = _pad_estimate(first, m)
    window = slice(gen.delay, max(gen.delay, N - gen.L_imp))
    base = np.linalg.norm(pad_first[window])
    disagreeing = []
    for other in passing[1:]:
        diff = np.linalg.norm(_pad_estimate(other, m)[window] - pad_first[window])
        if diff > 1e-3 * max(base, 1e-300):
            disagreeing.append(other.support)
    if disagreeing:
        return IdentificationResult(
            accepted=False,
            support=(),
            estimate=Trace.zeros(N, m),
            consistency_residual=first.residual,
            subsets_tried=tried,
            ambiguous_supports=tuple([first.support] + disagreeing),
        )
    return IdentificationResult(
        accepted=True,
        support=first.support,
        estimate=Trace(pad_first),
        consistency_residual=first.residual,
        subsets_tried=tried,
    )
