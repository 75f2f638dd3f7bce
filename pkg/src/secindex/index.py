"""Per-channel security indices with undetectable-attack witnesses.

The security index ``alpha_i`` of attack channel ``i`` is the smallest
number of attack channels that must be corrupted simultaneously so that a
persistent exponential attack ``a(k) = z0^k a0`` with ``a0_i != 0`` can be
masked by some disturbance and initial state, i.e. so that the stacked
direction lies in the null space of the Rosenbrock pencil at some ``z0``
with ``|z0| >= 1``.

The exact search enumerates candidate supports by increasing cardinality
(lexicographic within a cardinality) and decides feasibility per support:

* if adding column ``i`` never raises the pencil's normal rank, the channel
  can hide at *any* frequency and a witness is extracted at a sample point
  outside the unit circle;
* otherwise only the isolated frequencies where the pencil loses rank can
  carry a null vector, so the persistent rank-drop frequencies are
  enumerated and a direction targeting channel ``i`` is extracted where one
  exists.

A greedy column-growing variant provides a cheap upper bound, and
:func:`synthesize_attack` turns any witness into real signals that solve
the plant equations with identically zero output.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .config import DEFAULT_TOL, Tolerances
from .errors import ContractError, InputError
from .model import Realization
from .pencil import (
    PencilSelection,
    _candidate_roots,
    _polish_candidate,
    assemble,
    invariant_zeros,
    normalrank,
    pencil_parts,
    rank_at,
    sample_points,
)
from .sim import Trace, exponential_signals

__all__ = [
    "Alpha",
    "AttackPattern",
    "SecurityIndexResult",
    "feasible_on_support",
    "security_index",
    "security_index_greedy",
    "synthesize_attack",
    "single_channel_critical",
]


@dataclass(frozen=True)
class Alpha:
    """A security-index value: finite, infinite, or a truncated lower bound.

    ``lower_bound(k)`` records that the search was cut off at budget ``k``
    without finding a feasible support, so the true index exceeds ``k``.
    """

    kind: str  # "finite" | "infinite" | "lower_bound"
    value: int | None = None

    @classmethod
    def finite(cls, value: int) -> "Alpha":
        if value < 1:
            raise InputError("finite security indices are at least 1")
        return cls("finite", int(value))

    @classmethod
    def infinite(cls) -> "Alpha":
        return cls("infinite", None)

    @classmethod
    def lower_bound(cls, k: int) -> "Alpha":
        return cls("lower_bound", int(k))

    @property
    def is_finite(self) -> bool:
        return self.kind == "finite"

    def to_json(self):
        if self.kind == "finite":
            return self.value
        if self.kind == "infinite":
            return "inf"
        return {"lower_bound": self.value}

    def __str__(self) -> str:
        if self.kind == "finite":
            return str(self.value)
        if self.kind == "infinite":
            return "inf"
        return f">{self.value}"


@dataclass(frozen=True)
class AttackPattern:
    """Witness of an undetectable exponential attack targeting one channel.

    ``a0`` is the full m-vector attack direction; ``support`` is its
    support as 1-based channel indices and always contains ``target``.
    Together with ``x0`` and ``d0`` the direction annihilates the full
    pencil at ``z0``.
    """

    z0: complex
    x0: np.ndarray
    d0: np.ndarray
    a0: np.ndarray
    support: tuple[int, ...]
    target: int

    def __post_init__(self):
        for name in ("x0", "d0", "a0"):
            arr = np.asarray(getattr(self, name), dtype=complex).reshape(-1)
            if not np.all(np.isfinite(arr.real)) or not np.all(np.isfinite(arr.imag)):
                raise InputError(f"pattern vector {name!r} contains NaN or Inf")
            arr = arr.copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "z0", complex(self.z0))
        object.__setattr__(self, "support", tuple(int(j) for j in self.support))
        object.__setattr__(self, "target", int(self.target))
        if self.target not in self.support:
            raise InputError("pattern target channel must belong to its support")

    def persistent(self, tol: Tolerances = DEFAULT_TOL) -> bool:
        return abs(self.z0) >= 1.0 - tol.boundary_tol

    def check_support(self, tol: Tolerances = DEFAULT_TOL) -> bool:
        """Support field matches the numerical support of ``a0``."""
        scale = np.linalg.norm(self.a0)
        if scale == 0:
            return False
        actual = tuple(
            int(j + 1) for j in range(self.a0.size) if abs(self.a0[j]) > tol.support_tol * scale
        )
        return actual == self.support

    def residual(self, model: Realization) -> float:
        """Relative pencil residual of the stacked witness direction."""
        sel = PencilSelection.full(model)
        M = assemble(sel, self.z0)
        v = np.concatenate([self.x0, self.d0, self.a0])
        nv = np.linalg.norm(v)
        if nv == 0:
            return np.inf
        return float(np.linalg.norm(M @ v) / nv)


@dataclass(frozen=True)
class SecurityIndexResult:
    """Outcome of a per-channel security-index computation."""

    channel: int
    alpha: Alpha
    witness: AttackPattern | None
    method: str  # "exact" | "greedy_upper_bound"
    subsets_examined: int
    elapsed: float
    critical: bool = False


def _attack_column(model: Realization, channel: int) -> np.ndarray:
    j = channel - 1
    return np.concatenate([model.Ba[:, j], model.Da[:, j]]).astype(complex)


def _solve_with_rank_cutoff(
    M: np.ndarray, b: np.ndarray, tol: Tolerances
) -> tuple[np.ndarray, float]:
    """Min-norm least squares using the package rank cutoff for truncation.

    Truncating at the same threshold as :func:`~secindex.pencil.rank_at`
    keeps the solvability decision consistent with the rank tests: the
    relative residual is small exactly when ``b`` lies in the numerical
    range of ``M``.
    """
    if M.shape[1] == 0:
        return np.zeros(0, dtype=complex), float(
            np.linalg.norm(b) / max(np.linalg.norm(b), 1e-300)
        )
    U, s, Vh = np.linalg.svd(M, full_matrices=False)
    cutoff = tol.rtol * (s[0] if s.size else 0.0) * max(M.shape)
    inv = np.where(s > cutoff, 1.0 / np.where(s > cutoff, s, 1.0), 0.0)
    w = Vh.conj().T @ (inv * (U.conj().T @ b))
    nb = np.linalg.norm(b)
    resid = float(np.linalg.norm(M @ w - b) / nb) if nb > 0 else 0.0
    return w, resid


def _extract_pattern(
    model: Realization,
    channel: int,
    support: tuple[int, ...],
    z: complex,
    tol: Tolerances,
) -> AttackPattern | None:
    """Null direction with a nonzero coordinate on ``channel``, if one exists.

    Solves the pencil columns without channel ``i`` against ``-col_i`` in the
    least-squares sense; a small residual certifies that column ``i`` lies in
    the range, and the solution vector is the masking direction.
    """
    rest = tuple(j for j in support if j != channel)
    sel_small = PencilSelection(model, rest)
    M_small = assemble(sel_small, z)
    col = _attack_column(model, channel)
    col_norm = np.linalg.norm(col)
    if col_norm == 0.0:
        w = np.zeros(M_small.shape[1], dtype=complex)
        resid = 0.0
    else:
        w, resid = _solve_with_rank_cutoff(M_small, -col, tol)
    if resid > tol.null_tol:
        return None
    # Zero out roundoff-level coordinates: structured witnesses (exactly
    # sparse directions) then simulate exactly instead of leaking junk onto
    # fast plant modes.
    if col_norm > 0.0:
        w_scale = max(np.max(np.abs(w)), 1.0)
        cleaned = np.where(np.abs(w) > 1e-12 * w_scale, w, 0.0)
        if np.linalg.norm(M_small @ cleaned + col) / col_norm <= tol.null_tol:
            w = cleaned
    n, o = model.n, model.o
    a_sel = np.zeros(len(support), dtype=complex)
    pos = support.index(channel)
    small_a = w[n + o :]
    k = 0
    for idx in range(len(support)):
        if idx == pos:
            a_sel[idx] = 1.0
        else:
            a_sel[idx] = small_a[k]
            k += 1
    v = np.concatenate([w[:n], w[n : n + o], a_sel])
    v = v / np.linalg.norm(v)
    x0 = v[:n]
    d0 = v[n : n + o]
    a0 = np.zeros(model.m, dtype=complex)
    for idx, j in enumerate(support):
        a0[j - 1] = v[n + o + idx]
    a_scale = np.linalg.norm(a0)
    if a_scale == 0 or abs(a0[channel - 1]) < tol.target_tol * a_scale:
        return None
    actual_support = tuple(
        int(j + 1) for j in range(model.m) if abs(a0[j]) > tol.support_tol * a_scale
    )
    if channel not in actual_support:
        return None
    return AttackPattern(
        z0=complex(z), x0=x0, d0=d0, a0=a0, support=actual_support, target=channel
    )


def single_channel_critical(
    model: Realization, channel: int, tol: Tolerances = DEFAULT_TOL, seed: int = 0
) -> bool:
    """Normal-rank equality making channel ``i`` maskable at any frequency.

    True when appending the channel's signature column to the
    disturbance-only pencil does not raise the normal rank; a cardinality-one
    undetectable attack on the channel then exists at every frequency.
    """
    if not 1 <= channel <= model.m:
        raise InputError(f"channel {channel} out of range 1..{model.m}")
    nr_d = normalrank(PencilSelection.disturbance_only(model), tol, seed)
    nr_i = normalrank(PencilSelection.single(model, channel), tol, seed)
    return nr_i == nr_d


def _persistent_candidates(
    model: Realization,
    support: tuple[int, ...],
    tol: Tolerances,
    seed: int,
    nr_big: int,
) -> list[complex]:
    """Persistent frequencies at which the support pencil may lose rank."""
    sel = PencilSelection(model, support)
    if nr_big == sel.n_cols:
        zset = invariant_zeros(sel, tol, seed)
        cands = [rec.z for rec in zset.persistent_zeros()]
    else:
        polished, _ = _candidate_roots(sel, tol, seed, nr_big)
        cands = [z for z in polished if abs(z) >= 1.0 - tol.boundary_tol]
    # Deterministic order, deduplicated.
    cands.sort(key=lambda w: (round(w.real, 9), round(w.imag, 9)))
    out: list[complex] = []
    for z in cands:
        if not any(abs(z - w) <= tol.zero_merge_tol for w in out):
            out.append(z)
    return out


def feasible_on_support(
    model: Realization,
    channel: int,
    support,
    tol: Tolerances = DEFAULT_TOL,
    seed: int = 0,
) -> AttackPattern | None:
    """Witness of an undetectable persistent attack confined to ``support``.

    Returns a pattern iff some frequency with ``|z0| >= 1`` admits a pencil
    null direction whose attack block is supported inside ``support`` with a
    nonzero coordinate on ``channel``; returns None when the support is
    infeasible.
    """
    support = tuple(sorted(int(j) for j in support))
    if channel not in support:
        raise InputError("support must contain the targeted channel")
    sel_big = PencilSelection(model, support)
    rest = tuple(j for j in support if j != channel)
    sel_small = PencilSelection(model, rest)
    nr_big = normalrank(sel_big, tol, seed)
    nr_small = normalrank(sel_small, tol, seed)
    if nr_big == nr_small:
        # The channel column is generically dependent: any frequency outside
        # the unit circle carries a witness.
        for z in sample_points(model.eigenvalues(), tol, seed):
            pat = _extract_pattern(model, channel, support, z, tol)
            if pat is not None:
                return pat
    M0_big, E_big = pencil_parts(sel_big)
    M0_small, E_small = pencil_parts(sel_small)
    for z in _persistent_candidates(model, support, tol, seed, nr_big):
        r_big = rank_at(M0_big - z * E_big, tol)
        r_small = rank_at(M0_small - z * E_small, tol)
        if r_big != r_small:
            continue
        pat = _extract_pattern(model, channel, support, z, tol)
        if pat is None:
            # One more polish pass against the big pencil before giving up.
            z2 = _polish_candidate(M0_big, E_big, z)
            if abs(z2) >= 1.0 - tol.boundary_tol:
                pat = _extract_pattern(model, channel, support, z2, tol)
        if pat is not None:
            return pat
    return None


def _supports_of_size(m: int, channel: int, size: int) -> list[tuple[int, ...]]:
    others = [j for j in range(1, m + 1) if j != channel]
    supports = [tuple(sorted((channel,) + combo)) for combo in combinations(others, size - 1)]
    supports.sort()
    return supports


def security_index(
    model: Realization,
    channel: int,
    q_max: int | None = None,
    tol: Tolerances = DEFAULT_TOL,
    seed: int = 0,
) -> SecurityIndexResult:
    """Exact security index of one attack channel, with witness.

    Supports containing the channel are enumerated by increasing
    cardinality, lexicographically within each cardinality; the first
    feasible support wins, which makes the reported support deterministic.
    When no support up to ``q_max`` is feasible the result is infinite if
    the whole channel set was searched (``q_max = m``) and a truncated
    lower bound otherwise.

    Parameters
    ----------
    model : Realization
    channel : int
        Target channel, 1-based.
    q_max : int, optional
        Search budget, at most ``m`` (defaults to ``m``).
    """
    if not 1 <= channel <= model.m:
        raise InputError(f"channel {channel} out of range 1..{model.m}")
    q_max = model.m if q_max is None else int(q_max)
    if not 1 <= q_max <= model.m:
        raise InputError(f"q_max must lie in 1..m={model.m}")
    start = time.perf_counter()
    critical = single_channel_critical(model, channel, tol, seed)
    examined = 0
    for size in range(1, q_max + 1):
        for support in _supports_of_size(model.m, channel, size):
            examined += 1
            pat = feasible_on_support(model, channel, support, tol, seed)
            if pat is not None:
                alpha = Alpha.finite(len(pat.support))
                return SecurityIndexResult(
                    channel=channel,
                    alpha=alpha,
                    witness=pat,
                    method="exact",
                    subsets_examined=examined,
                    elapsed=time.perf_counter() - start,
                    critical=critical,
                )
    alpha = Alpha.infinite() if q_max == model.m else Alpha.lower_bound(q_max)
    return SecurityIndexResult(
        channel=channel,
        alpha=alpha,
        witness=None,
        method="exact",
        subsets_examined=examined,
        elapsed=time.perf_counter() - start,
        critical=critical,
    )


def security_index_greedy(
    model: Realization,
    channel: int,
    tol: Tolerances = DEFAULT_TOL,
    seed: int = 0,
) -> SecurityIndexResult:
    """Greedy upper bound on the security index.

    Grows the support from the target channel, at each step adding the
    column whose inclusion most reduces the residual of projecting the
    target column onto the pencil range over the persistent candidate
    frequencies.  Any finite answer comes with a verified witness and is
    therefore a sound upper bound; on failure a truncated marker is
    returned rather than a finite claim.
    """
    if not 1 <= channel <= model.m:
        raise InputError(f"channel {channel} out of range 1..{model.m}")
    start = time.perf_counter()
    critical = single_channel_critical(model, channel, tol, seed)
    sel_full = PencilSelection.full(model)
    nr_full = normalrank(sel_full, tol, seed)
    cands = _persistent_candidates(
        model, sel_full.attack_support, tol, seed, nr_full
    )
    if nr_full < sel_full.n_cols:
        cands = list(sample_points(model.eigenvalues(), tol, seed)) + cands
    examined = 0
    support = (channel,)
    col = _attack_column(model, channel)
    while cands:
        examined += 1
        for z in cands:
            pat = _extract_pattern(model, channel, support, z, tol)
            if pat is not None:
                return SecurityIndexResult(
                    channel=channel,
                    alpha=Alpha.finite(len(pat.support)),
                    witness=pat,
                    method="greedy_upper_bound",
                    subsets_examined=examined,
                    elapsed=time.perf_counter() - start,
                    critical=critical,
                )
        if len(support) == model.m:
            break
        # Add the column giving the best projection of the target column
        # onto the remaining pencil range at the most favorable frequency.
        best_j, best_score = None, np.inf
        for j in range(1, model.m + 1):
            if j in support:
                continue
            trial = tuple(sorted(support + (j,)))
            rest = tuple(t for t in trial if t != channel)
            sel_rest = PencilSelection(model, rest)
            score = np.inf
            for z in cands:
                M = assemble(sel_rest, z)
                if np.linalg.norm(col) == 0.0:
                    score = 0.0
                    break
                _, resid = _solve_with_rank_cutoff(M, -col, tol)
                score = min(score, resid)
            if score < best_score - 1e-15:
                best_j, best_score = j, score
        if best_j is None:
            break
        support = tuple(sorted(support + (best_j,)))
    return SecurityIndexResult(
        channel=channel,
        alpha=Alpha.lower_bound(model.m),
        witness=None,
        method="greedy_upper_bound",
        subsets_examined=examined,
        elapsed=time.perf_counter() - start,
        critical=critical,
    )


def synthesize_attack(
    pattern: AttackPattern, horizon: int, tol: Tolerances = DEFAULT_TOL
) -> tuple[Trace, Trace, np.ndarray]:
    """Real attack and disturbance signals realizing a witness pattern.

    For a complex witness frequency the conjugate solution is superposed,
    yielding ``2 Re(z0^k v)`` which solves the real plant equations exactly;
    for a real frequency the signals are real multiples of ``z0^k``.
    Returns ``(attack_trace, disturbance_trace, x0)``.
    """
    if horizon < 1:
        raise InputError("horizon must be at least 1")
    if pattern.z0 == 0:
        raise InputError("witness frequency must be nonzero")
    a_scale = np.linalg.norm(pattern.a0)
    if a_scale == 0 or not pattern.check_support(tol):
        raise InputError("pattern support does not match its attack direction")
    # Rotate the global phase so the targeted coordinate is real positive;
    # at a real frequency this also realifies the whole direction.  An
    # essentially-real direction gets an exactly real rotation so that no
    # roundoff-level imaginary junk leaks into the signals.
    stacked = np.concatenate([pattern.x0, pattern.d0, pattern.a0])
    target_coord = pattern.a0[pattern.target - 1]
    if np.max(np.abs(stacked.imag)) <= 1e-12 * np.max(np.abs(stacked)):
        rot = 1.0 if target_coord.real >= 0 else -1.0
    else:
        rot = np.exp(-1j * np.angle(target_coord))
    x0 = pattern.x0 * rot
    d0 = pattern.d0 * rot
    a0 = pattern.a0 * rot
    signals = exponential_signals(pattern.z0, {"a": a0, "d": d0}, horizon)
    x0_real = 2.0 * np.real(x0)
    a = Trace(signals["a"])
    d = Trace(signals["d"]) if pattern.d0.size else Trace.zeros(horizon, 0)
    return a, d, x0_real
