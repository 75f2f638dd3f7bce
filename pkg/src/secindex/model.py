"""Discrete-time plant models with disturbance and attack signatures.

The central object is :class:`Realization`, the six-matrix state-space
description

    x(k+1) = A x(k) + Bd d(k) + Ba a(k)
    y(k)   = C x(k) + Dd d(k) + Da a(k)

with ``n`` states, ``o`` disturbance channels, ``m`` attack channels and
``p`` measurements.  Disturbances are unknown free signals; attacks are the
adversary-controlled inputs whose visibility in ``y`` the rest of the
package analyzes.

The module also owns the JSON on-disk format for models and the structural
validation that the analysis modules assume: distinct disturbance and
attack signatures (full column rank of the stacked input blocks) and a
full-row-rank output map.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import DEFAULT_TOL, Tolerances
from .errors import InputError, PoleProximityError, StructuralError

__all__ = [
    "Realization",
    "ValidationReport",
    "RankCheck",
    "validate",
    "transfer_eval",
    "load_model",
    "save_model",
]


def _as_matrix(value, name: str, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    """Coerce ``value`` to a read-only 2-D float array, checking shape."""
    arr = np.asarray(value, dtype=float)
    if arr.size == 0:
        # Empty blocks encode o = 0; give them an explicit 2-D shape.
        arr = arr.reshape((rows if rows is not None else 0, 0))
    if arr.ndim != 2:
        raise StructuralError(f"matrix {name!r} must be 2-D, got ndim={arr.ndim}")
    if rows is not None and arr.shape[0] != rows:
        raise StructuralError(
            f"matrix {name!r} has {arr.shape[0]} rows, expected {rows}"
        )
    if cols is not None and arr.shape[1] != cols:
        raise StructuralError(
            f"matrix {name!r} has {arr.shape[1]} columns, expected {cols}"
        )
    if not np.all(np.isfinite(arr)):
        raise InputError(f"matrix {name!r} contains NaN or Inf entries")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Realization:
    """State-space plant with disturbance and attack input signatures.

    Parameters
    ----------
    A : (n, n) array_like
        State matrix.
    Bd : (n, o) array_like
        Disturbance input matrix; an empty array encodes ``o = 0``.
    Ba : (n, m) array_like
        Attack input matrix.
    C : (p, n) array_like
        Output matrix.
    Dd : (p, o) array_like
        Disturbance feedthrough.
    Da : (p, m) array_like
        Attack feedthrough.
    channel_labels : sequence of str, optional
        Names for the ``m`` attack channels.

    Raises
    ------
    StructuralError
        If the six blocks do not share consistent dimensions.
    InputError
        If any entry is NaN or Inf.

    Notes
    -----
    Instances are immutable (arrays are stored read-only), so they are safe
    to share across threads.  Rank assumptions are *not* enforced here; use
    :func:`validate` to check them.
    """

    A: np.ndarray
    Bd: np.ndarray
    Ba: np.ndarray
    C: np.ndarray
    Dd: np.ndarray
    Da: np.ndarray
    channel_labels: tuple[str, ...] | None = None

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        n = A.shape[0]
        if n < 1 or A.shape[1] != n:
            raise StructuralError(f"matrix 'A' must be square with n >= 1, got {A.shape}")
        Bd = _as_matrix(self.Bd, "Bd", rows=n)
        Ba = _as_matrix(self.Ba, "Ba", rows=n)
        m = Ba.shape[1]
        if m < 1:
            raise StructuralError("at least one attack channel is required (m >= 1)")
        C = _as_matrix(self.C, "C", cols=n)
        p = C.shape[0]
        if p < 1:
            raise StructuralError("at least one measurement is required (p >= 1)")
        Dd = _as_matrix(self.Dd, "Dd", rows=p, cols=Bd.shape[1])
        Da = _as_matrix(self.Da, "Da", rows=p, cols=m)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "Bd", Bd)
        object.__setattr__(self, "Ba", Ba)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "Dd", Dd)
        object.__setattr__(self, "Da", Da)
        if self.channel_labels is not None:
            labels = tuple(str(s) for s in self.channel_labels)
            if len(labels) != m:
                raise StructuralError(
                    f"got {len(labels)} channel labels for m={m} attack channels"
                )
            object.__setattr__(self, "channel_labels", labels)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def o(self) -> int:
        return self.Bd.shape[1]

    @property
    def m(self) -> int:
        return self.Ba.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.A)

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(self.eigenvalues())))

    def to_dict(self) -> dict:
        doc = {
            "A": self.A.tolist(),
            "Bd": self.Bd.tolist() if self.o > 0 else [],
            "Ba": self.Ba.tolist(),
            "C": self.C.tolist(),
            "Dd": self.Dd.tolist() if self.o > 0 else [],
            "Da": self.Da.tolist(),
        }
        if self.channel_labels is not None:
            doc["labels"] = list(self.channel_labels)
        return doc


@dataclass(frozen=True)
class RankCheck:
    """Outcome of a single named rank assumption."""

    name: str
    expected_rank: int
    measured_rank: int
    tolerance: float
    passed: bool


@dataclass(frozen=True)
class ValidationReport:
    """Structural validation summary for a :class:`Realization`."""

    passed: bool
    violated_assumptions: tuple[RankCheck, ...]
    checks: tuple[RankCheck, ...]
    spectral_radius: float
    is_schur: bool
    eigenvalues: tuple[complex, ...]

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "checks": [
                {
                    "name": c.name,
                    "expected_rank": c.expected_rank,
                    "measured_rank": c.measured_rank,
                    "tolerance": c.tolerance,
                    "passed": c.passed,
                }
                for c in self.checks
            ],
            "violated_assumptions": [c.name for c in self.violated_assumptions],
            "spectral_radius": self.spectral_radius,
            "is_schur": self.is_schur,
            "eigenvalues": [{"re": z.real, "im": z.imag} for z in self.eigenvalues],
        }


def _numerical_rank(mat: np.ndarray, tol: Tolerances) -> tuple[int, float]:
    """Numerical rank and the absolute threshold that produced it."""
    if mat.size == 0:
        return 0, 0.0
    s = np.linalg.svd(mat, compute_uv=False)
    cutoff = tol.rtol * s[0] * max(mat.shape)
    return int(np.count_nonzero(s > cutoff)), float(cutoff)


def validate(model: Realization, tol: Tolerances = DEFAULT_TOL) -> ValidationReport:
    """Check the rank assumptions and stability classification of a model.

    Three named checks are evaluated: the stacked disturbance signature
    ``[Bd; Dd]`` must have rank ``o`` (vacuously true when ``o = 0``), the
    stacked attack signature ``[Ba; Da]`` must have rank ``m``, and ``C``
    must have rank ``p``.  The report also carries the eigenvalues of ``A``
    and whether the plant is Schur (every eigenvalue modulus strictly below
    ``1 - boundary_tol``).

    The function is pure: it never mutates the model and is deterministic
    for a fixed input.
    """
    checks = []
    if model.o > 0:
        stacked = np.vstack([model.Bd, model.Dd])
        rank, cutoff = _numerical_rank(stacked, tol)
        checks.append(
            RankCheck("disturbance_signature_rank", model.o, rank, cutoff, rank == model.o)
        )
    else:
        checks.append(RankCheck("disturbance_signature_rank", 0, 0, 0.0, True))
    stacked = np.vstack([model.Ba, model.Da])
    rank, cutoff = _numerical_rank(stacked, tol)
    checks.append(RankCheck("attack_signature_rank", model.m, rank, cutoff, rank == model.m))
    rank, cutoff = _numerical_rank(model.C, tol)
    checks.append(RankCheck("output_matrix_rank", model.p, rank, cutoff, rank == model.p))

    eigs = model.eigenvalues()
    order = np.lexsort((eigs.imag, eigs.real))
    eigs = eigs[order]
    rho = float(np.max(np.abs(eigs)))
    is_schur = bool(np.all(np.abs(eigs) < 1.0 - tol.boundary_tol))
    violated = tuple(c for c in checks if not c.passed)
    return ValidationReport(
        passed=not violated,
        violated_assumptions=violated,
        checks=tuple(checks),
        spectral_radius=rho,
        is_schur=is_schur,
        eigenvalues=tuple(complex(z) for z in eigs),
    )


def transfer_eval(
    model: Realization,
    z: complex,
    block: str = "attack",
    tol: Tolerances = DEFAULT_TOL,
) -> np.ndarray:
    """Evaluate the disturbance or attack transfer matrix at a frequency.

    Returns ``C (zI - A)^{-1} B + D`` for the selected input block, computed
    through a linear solve (no explicit inverse is formed).

    Parameters
    ----------
    model : Realization
    z : complex
        Evaluation frequency; must not lie within ``pole_tol`` of an
        eigenvalue of ``A``.
    block : {"attack", "disturbance"}

    Raises
    ------
    PoleProximityError
        If ``z`` is within ``pole_tol`` of a plant pole; the exception
        carries the nearest eigenvalue.
    """
    if block == "attack":
        B, D = model.Ba, model.Da
    elif block == "disturbance":
        B, D = model.Bd, model.Dd
    else:
        raise InputError(f"unknown transfer block {block!r}")
    z = complex(z)
    if not (np.isfinite(z.real) and np.isfinite(z.imag)):
        raise InputError("evaluation frequency must be finite")
    eigs = model.eigenvalues()
    dist = np.abs(eigs - z)
    nearest = int(np.argmin(dist))
    if dist[nearest] < tol.pole_tol:
        raise PoleProximityError(
            f"z={z} is within {tol.pole_tol} of the pole {eigs[nearest]}",
            complex(eigs[nearest]),
        )
    if B.shape[1] == 0:
        return np.zeros((model.p, 0), dtype=complex)
    shifted = z * np.eye(model.n) - model.A.astype(complex)
    X = np.linalg.solve(shifted, B.astype(complex))
    return model.C.astype(complex) @ X + D.astype(complex)


def load_model(path) -> Realization:
    """Read a model from its JSON file format.

    The document must carry the keys ``A``, ``Bd``, ``Ba``, ``C``, ``Dd``,
    ``Da`` as row-major 2-D arrays of finite doubles (empty arrays encode
    ``o = 0``) plus an optional ``labels`` array of attack-channel names.
    """

    def _reject_constant(token):
        raise InputError(f"model file contains non-finite literal {token!r}")

    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh, parse_constant=_reject_constant)
        except json.JSONDecodeError as exc:
            raise InputError(f"model file is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise InputError("model file must contain a JSON object")
    missing = [k for k in ("A", "Bd", "Ba", "C", "Dd", "Da") if k not in doc]
    if missing:
        raise InputError(f"model file is missing keys: {', '.join(missing)}")
    labels = doc.get("labels")
    return Realization(
        A=doc["A"], Bd=doc["Bd"], Ba=doc["Ba"], C=doc["C"], Dd=doc["Dd"], Da=doc["Da"],
        channel_labels=labels,
    )


def save_model(model: Realization, path) -> None:
    """Write a model in the JSON file format understood by :func:`load_model`."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
