"""Rosenbrock system-matrix pencils: assembly, ranks, zeros, null spaces.

For a plant realization and an ordered subset ``S`` of attack columns, the
pencil

    P_S(z) = [ A - zI   Bd   Ba[:, S] ]
             [   C      Dd   Da[:, S] ]

loses column rank exactly at the frequencies where an exponential solution
can travel through the selected channels without showing up in the output.
This module computes numerical ranks, the normal rank (maximum rank over
all frequencies), the finite frequencies where the rank drops (invariant
zeros), and orthonormal bases of the null space at a given frequency.

Zeros are found by determinant interpolation: the pencil is compressed to a
square matrix by independent random orthonormal maps, each compressed
determinant is interpolated from its values on a circle of nodes, and the
polynomial roots are kept only when the rank of the *original* pencil
verifiably drops there.  Candidates are refined by a Rayleigh-quotient
iteration on the smallest singular triplet before verification.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import DEFAULT_TOL, Tolerances
from .errors import ContractError, InputError, NumericError
from .model import Realization

__all__ = [
    "PencilSelection",
    "ZeroRecord",
    "ZeroSet",
    "NullDirection",
    "assemble",
    "pencil_parts",
    "rank_at",
    "normalrank",
    "sample_points",
    "invariant_zeros",
    "rank_drop_candidates",
    "null_direction",
]


@dataclass(frozen=True)
class PencilSelection:
    """A plant together with the ordered attack columns included in the pencil.

    ``attack_support`` uses 1-based channel indices, must be strictly
    increasing and duplicate-free, and may be empty (disturbance-only
    pencil), a singleton, or the full channel set.
    """

    model: Realization
    attack_support: tuple[int, ...] = ()

    def __post_init__(self):
        support = tuple(int(i) for i in self.attack_support)
        m = self.model.m
        for i in support:
            if not 1 <= i <= m:
                raise InputError(f"attack channel {i} out of range 1..{m}")
        if any(a >= b for a, b in zip(support, support[1:])):
            raise InputError("attack support must be strictly increasing")
        object.__setattr__(self, "attack_support", support)

    @classmethod
    def disturbance_only(cls, model: Realization) -> "PencilSelection":
        return cls(model, ())

    @classmethod
    def single(cls, model: Realization, channel: int) -> "PencilSelection":
        return cls(model, (channel,))

    @classmethod
    def full(cls, model: Realization) -> "PencilSelection":
        return cls(model, tuple(range(1, model.m + 1)))

    @property
    def n_cols(self) -> int:
        mod = self.model
        return mod.n + mod.o + len(self.attack_support)

    @property
    def n_rows(self) -> int:
        return self.model.n + self.model.p


@dataclass(frozen=True)
class ZeroRecord:
    """One verified frequency where the pencil loses column rank."""

    z: complex
    rank_at_z: int
    persistent: bool
    verified: bool
    multiplicity: int = 1


@dataclass(frozen=True)
class ZeroSet:
    """All finite rank-drop frequencies of a pencil, or the deficiency flag.

    When the pencil lacks full column normal rank every frequency admits a
    null vector; ``generically_rank_deficient`` is set and ``zeros`` is
    empty in that case.
    """

    normalrank: int
    zeros: tuple[ZeroRecord, ...]
    generically_rank_deficient: bool

    def persistent_zeros(self) -> tuple[ZeroRecord, ...]:
        return tuple(rec for rec in self.zeros if rec.persistent)


def pencil_parts(sel: PencilSelection) -> tuple[np.ndarray, np.ndarray]:
    """Constant and shift parts ``(M0, E)`` so that ``P(z) = M0 - z E``."""
    mod = sel.model
    cols = [c - 1 for c in sel.attack_support]
    top = np.hstack([mod.A, mod.Bd, mod.Ba[:, cols]])
    bottom = np.hstack([mod.C, mod.Dd, mod.Da[:, cols]])
    M0 = np.vstack([top, bottom])
    E = np.zeros_like(M0)
    E[: mod.n, : mod.n] = np.eye(mod.n)
    return M0, E


def assemble(sel: PencilSelection, z: complex) -> np.ndarray:
    """The pencil evaluated at ``z``, exactly as blocked (no balancing)."""
    M0, E = pencil_parts(sel)
    return M0.astype(complex) - complex(z) * E


def rank_at(M: np.ndarray, tol: Tolerances = DEFAULT_TOL) -> int:
    """SVD numerical rank under the package-wide tolerance convention."""
    M = np.asarray(M)
    if not np.all(np.isfinite(M.real)) or (
        np.iscomplexobj(M) and not np.all(np.isfinite(M.imag))
    ):
        raise InputError("rank_at requires finite entries")
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    cutoff = tol.rtol * s[0] * max(M.shape)
    return int(np.count_nonzero(s > cutoff))


def sample_points(
    eigvals: np.ndarray,
    tol: Tolerances = DEFAULT_TOL,
    seed: int = 0,
    n_samples: int | None = None,
    radii: tuple[float, ...] | None = None,
) -> np.ndarray:
    """Frequencies for normal-rank sampling: random angles on fixed circles.

    Points falling within ``pole_tol`` of a supplied eigenvalue are
    redrawn.  Deterministic for a fixed seed.
    """
    n_samples = tol.n_rank_samples if n_samples is None else n_samples
    radii = tol.rank_sample_radii if radii is None else radii
    rng = np.random.default_rng(seed)
    eigvals = np.asarray(eigvals, dtype=complex)
    pts = []
    for j in range(n_samples):
        radius = radii[j % len(radii)]
        for _ in range(100):
            z = radius * np.exp(2j * np.pi * rng.uniform())
            if eigvals.size == 0 or np.min(np.abs(eigvals - z)) > tol.pole_tol:
                pts.append(z)
                break
        else:  # pragma: no cover - needs pathological pole coverage
            raise NumericError("could not sample a frequency away from all poles")
    return np.asarray(pts)


def normalrank(
    sel: PencilSelection, tol: Tolerances = DEFAULT_TOL, seed: int = 0
) -> int:
    """Maximum pencil rank over the sampled frequencies."""
    pts = sample_points(sel.model.eigenvalues(), tol, seed)
    return max(rank_at(assemble(sel, z), tol) for z in pts)


def _orthonormal_compression(rng, big: int, small: int) -> np.ndarray:
    """Real (small, big) matrix with orthonormal rows."""
    q, _ = np.linalg.qr(rng.standard_normal((big, small)))
    return q.T


def _det_poly_roots(
    Msq0: np.ndarray, Esq: np.ndarray, deg: int, radius: float
) -> np.ndarray | None:
    """Roots of ``det(Msq0 - z Esq)`` via interpolation on scaled unity roots.

    Returns None when the determinant is numerically identically zero.
    """
    size = Msq0.shape[0]
    if size == 0:
        return np.array([], dtype=complex)
    nodes_count = deg + 1
    omega = np.exp(2j * np.pi * np.arange(nodes_count) / nodes_count)
    nodes = radius * omega
    vals = np.array([np.linalg.det(Msq0 - z * Esq) for z in nodes])
    scale = np.max(np.abs(vals))
    # A numerically singular determinant evaluates to roundoff of the order
    # eps times the Hadamard bound; below a small multiple of that the
    # polynomial is identically zero for our purposes.
    hadamard = float(np.prod(np.linalg.norm(np.abs(Msq0) + radius * np.abs(Esq), axis=1)))
    if scale <= 1e-12 * max(hadamard, 1e-300):
        return None
    # vals_j = sum_k (c_k radius^k) e^{+2 pi i jk/M}; the forward FFT kernel
    # carries the conjugate exponent, so it inverts this relation.
    coeffs = np.fft.fft(vals) / nodes_count  # c_k radius^k
    coeffs = coeffs / radius ** np.arange(nodes_count)
    if np.max(np.abs(coeffs.imag)) <= 1e-9 * np.max(np.abs(coeffs)):
        coeffs = coeffs.real.astype(complex)
    # Trim numerically-zero leading coefficients before companion roots.
    mags = np.abs(coeffs)
    keep = nodes_count - 1
    while keep > 0 and mags[keep] <= 1e-10 * mags.max():
        keep -= 1
    if keep == 0:
        return np.array([], dtype=complex)
    return np.roots(coeffs[: keep + 1][::-1])


def _polish_candidate(
    M0: np.ndarray, E: np.ndarray, z: complex, iters: int = 8
) -> complex:
    """Refine a rank-drop candidate by Rayleigh iteration on sigma_min."""
    M0c = M0.astype(complex)
    Ec = E.astype(complex)

    def smin(zz):
        s = np.linalg.svd(M0c - zz * Ec, compute_uv=False)
        return s[-1] if s.size else 0.0

    best_z, best_s = z, smin(z)
    zz = z
    for _ in range(iters):
        U, s, Vh = np.linalg.svd(M0c - zz * Ec, full_matrices=False)
        u = U[:, -1]
        v = Vh[-1].conj()
        denom = u.conj() @ Ec @ v
        if abs(denom) < 1e-14:
            break
        zz = (u.conj() @ M0c @ v) / denom
        if not np.isfinite(zz) or abs(zz) > 1e8:
            break
        s_new = smin(zz)
        if s_new < best_s:
            best_z, best_s = zz, s_new
        else:
            break
    return complex(best_z)


def _cluster(values: list[complex], radius: float) -> list[list[complex]]:
    """Greedy clustering of complex values by distance to cluster mean."""
    clusters: list[list[complex]] = []
    for z in sorted(values, key=lambda w: (w.real, w.imag)):
        for cl in clusters:
            if abs(np.mean(cl) - z) <= radius:
                cl.append(z)
                break
        else:
            clusters.append([z])
    return clusters


def _candidate_roots(
    sel: PencilSelection,
    tol: Tolerances,
    seed: int,
    nr: int,
) -> tuple[list[complex], list[list[complex]]]:
    """Polished rank-drop candidates plus the raw roots per compression."""
    mod = sel.model
    M0, E = pencil_parts(sel)
    rows, cols = M0.shape
    if nr == 0:
        return [], []
    rng = np.random.default_rng(seed + 1)
    raw: list[complex] = [complex(z) for z in mod.eigenvalues()]
    per_comp: list[list[complex]] = []
    deg = min(mod.n, nr)
    for _ in range(tol.n_compressions):
        roots = None
        for _attempt in range(3):
            left = M0
            right_shift = E
            if cols > nr:
                V = _orthonormal_compression(rng, cols, nr).T  # (cols, nr)
                left = M0 @ V
                right_shift = E @ V
            if rows > nr:
                W = _orthonormal_compression(rng, rows, nr)
                left = W @ left
                right_shift = W @ right_shift
            roots = _det_poly_roots(left, right_shift, deg, tol.interp_radius)
            if roots is not None:
                break
        if roots is None:
            continue
        per_comp.append([complex(z) for z in roots])
        raw.extend(complex(z) for z in roots)
    # Multiple roots split symmetrically around the true location; cluster
    # means at a coarse scale recover them before polishing.
    for cl in _cluster(raw, 1e-4):
        if len(cl) > 1:
            raw.append(complex(np.mean(cl)))
    polished = [_polish_candidate(M0, E, z) for z in raw]
    return polished, per_comp


def rank_drop_candidates(
    sel: PencilSelection,
    tol: Tolerances = DEFAULT_TOL,
    seed: int = 0,
    normalrank_hint: int | None = None,
) -> list[complex]:
    """Unverified candidate frequencies where the pencil rank may drop.

    Handles both full-column-normal-rank pencils (row compression to a
    square determinant) and generically deficient ones (column compression
    to the normal-rank dimension first).  Plant eigenvalues are always
    included as candidates because output-decoupled modes drop rank exactly
    there; every candidate is polished before being returned.  Callers must
    verify the rank drop against the original pencil.
    """
    nr = normalrank(sel, tol, seed) if normalrank_hint is None else normalrank_hint
    polished, _ = _candidate_roots(sel, tol, seed, nr)
    return polished


def invariant_zeros(
    sel: PencilSelection, tol: Tolerances = DEFAULT_TOL, seed: int = 0
) -> ZeroSet:
    """All finite frequencies where a full-normal-rank pencil drops rank.

    If the pencil lacks full column normal rank, the zero list is empty and
    ``generically_rank_deficient`` is set instead (every frequency admits a
    null vector).  Every returned zero has been re-verified by an SVD rank
    computation on the original pencil; for real plant data the list is
    closed under conjugation.
    """
    nr = normalrank(sel, tol, seed)
    if nr < sel.n_cols:
        return ZeroSet(normalrank=nr, zeros=(), generically_rank_deficient=True)
    M0, E = pencil_parts(sel)
    cands, per_comp = _candidate_roots(sel, tol, seed, nr)
    verified = [z for z in cands if rank_at(M0 - z * E, tol) < nr]
    if not verified:
        return ZeroSet(normalrank=nr, zeros=(), generically_rank_deficient=False)
    entries: list[tuple[complex, int]] = []  # (zero, multiplicity)
    for cl in _cluster(verified, tol.zero_merge_tol):
        rep = complex(np.mean(cl))
        if abs(rep.imag) <= tol.pairing_tol:
            rep = complex(rep.real, 0.0)
        # Multiplicity: the largest number of interpolation roots any single
        # compression placed inside this cluster.
        mult = 1
        for roots in per_comp:
            near = sum(1 for r in roots if abs(r - rep) <= max(tol.zero_merge_tol, 1e-4))
            mult = max(mult, near)
        entries.append((rep, mult))
    # Enforce conjugate closure for real plant data.
    for idx, (z, mult) in enumerate(list(entries)):
        if z.imag <= tol.pairing_tol:
            continue
        match = None
        for jdx, (w, _) in enumerate(entries):
            if abs(np.conj(z) - w) <= tol.pairing_tol:
                match = jdx
                break
        if match is not None:
            mid = (z + np.conj(entries[match][0])) / 2.0
            entries[idx] = (mid, mult)
            entries[match] = (complex(np.conj(mid)), entries[match][1])
        else:
            conj_z = complex(np.conj(z))
            if rank_at(M0 - conj_z * E, tol) < nr:
                entries.append((conj_z, mult))
    records = []
    seen: list[complex] = []
    for z, mult in entries:
        if any(abs(z - w) <= tol.zero_merge_tol for w in seen):
            continue
        seen.append(z)
        rank_z = rank_at(M0 - z * E, tol)
        if rank_z >= nr:
            continue
        records.append(
            ZeroRecord(
                z=complex(z),
                rank_at_z=rank_z,
                persistent=bool(abs(z) >= 1.0 - tol.boundary_tol),
                verified=True,
                multiplicity=int(mult),
            )
        )
    records.sort(key=lambda r: (round(r.z.real, 9), round(r.z.imag, 9)))
    return ZeroSet(normalrank=nr, zeros=tuple(records), generically_rank_deficient=False)


@dataclass(frozen=True)
class NullDirection:
    """One orthonormal null-space basis vector of a pencil at a frequency.

    The stacked vector is partitioned into the state part ``x0``, the
    disturbance part ``d0``, and the coordinates ``a0`` of the selected
    attack columns.  ``basis_dim`` is the nullity at this frequency.
    """

    z: complex
    x0: np.ndarray
    d0: np.ndarray
    a0: np.ndarray
    basis_dim: int


def null_direction(
    sel: PencilSelection, z: complex, tol: Tolerances = DEFAULT_TOL
) -> list[NullDirection]:
    """Orthonormal basis of the pencil null space at ``z``.

    Raises
    ------
    ContractError
        If the pencil has full column rank at ``z``.
    """
    M = assemble(sel, z)
    rows, cols = M.shape
    _, s, Vh = np.linalg.svd(M, full_matrices=True)
    if s.size:
        cutoff = tol.rtol * s[0] * max(rows, cols)
        rank = int(np.count_nonzero(s > cutoff))
    else:
        rank = 0
    nullity = cols - rank
    if nullity == 0:
        raise ContractError(f"pencil has full column rank {rank} at z={z}")
    mod = sel.model
    out = []
    for j in range(rank, cols):
        v = Vh[j].conj()
        residual = np.linalg.norm(M @ v)
        if residual > tol.null_tol * max(1.0, np.linalg.norm(M, ord=2)):
            raise NumericError(
                f"null vector residual {residual:.3e} exceeds tolerance at z={z}"
            )
        out.append(
            NullDirection(
                z=complex(z),
                x0=v[: mod.n],
                d0=v[mod.n : mod.n + mod.o],
                a0=v[mod.n + mod.o :],
                basis_dim=nullity,
            )
        )
    return out
