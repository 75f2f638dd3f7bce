"""Detectability and identifiability thresholds against an attacker budget.

Given the per-channel security indices and a budget ``q`` (the number of
channels the attacker can corrupt simultaneously), each channel falls on
one side of two thresholds:

* an undetectable attack targeting the channel exists iff ``q >= alpha_i``;
* every budget-``q`` persistent attack is i-identifiable iff
  ``q < alpha_i / 2``;

and the whole system is identifiable iff the second condition holds for
every channel.  Truncated index bounds can leave a threshold undecidable;
such entries are reported as unknown (None) rather than guessed.

:func:`counterexample_pair` makes the ``q >= alpha_i / 2`` failure mode
concrete: it splits an undetectable witness into two attacks with disjoint
supports that produce identical outputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import DEFAULT_TOL, Tolerances
from .errors import ContractError, InputError
from .index import Alpha, AttackPattern, SecurityIndexResult, synthesize_attack
from .model import Realization
from .sim import Trace

__all__ = [
    "ChannelClassification",
    "SystemClassification",
    "SignalSet",
    "classify",
    "counterexample_pair",
]


def _budget_reaches_alpha(alpha: Alpha, q: int) -> bool | None:
    """Three-valued answer to ``q >= alpha``."""
    if alpha.kind == "finite":
        return q >= alpha.value
    if alpha.kind == "infinite":
        return False
    # alpha > k only: decidable when the budget cannot reach past the bound.
    if q <= alpha.value:
        return False
    return None


def _identifiable_under(alpha: Alpha, q: int) -> bool | None:
    """Three-valued answer to ``q < alpha / 2``."""
    if alpha.kind == "finite":
        return 2 * q < alpha.value
    if alpha.kind == "infinite":
        return True
    if 2 * q <= alpha.value:  # alpha >= value + 1 > 2q
        return True
    return None


@dataclass(frozen=True)
class ChannelClassification:
    channel: int
    alpha: Alpha
    undetectable_attack_exists: bool | None
    all_attacks_i_identifiable: bool | None
    asymptotic_variant: bool


@dataclass(frozen=True)
class SystemClassification:
    channels: tuple[ChannelClassification, ...]
    all_attacks_identifiable: bool | None
    q: int
    semantics: str  # "exact" | "asymptotic"

    def to_dict(self) -> dict:
        def tv(v):
            return "unknown" if v is None else v

        return {
            "q": self.q,
            "semantics": self.semantics,
            "all_attacks_identifiable": tv(self.all_attacks_identifiable),
            "channels": [
                {
                    "channel": c.channel,
                    "alpha": c.alpha.to_json(),
                    "undetectable_attack_exists": tv(c.undetectable_attack_exists),
                    "all_attacks_i_identifiable": tv(c.all_attacks_i_identifiable),
                    "asymptotic_variant": c.asymptotic_variant,
                }
                for c in self.channels
            ],
        }


def classify(
    alphas: list[SecurityIndexResult],
    q: int,
    semantics: str = "exact",
    is_schur: bool | None = None,
) -> SystemClassification:
    """Threshold classification of every channel against a budget.

    ``semantics="asymptotic"`` states the conclusions for an operator who
    knows the initial state, which is only meaningful for Schur plants;
    requesting it with ``is_schur=False`` is a hypothesis violation.
    """
    if q < 0:
        raise InputError("budget q must be nonnegative")
    if semantics not in ("exact", "asymptotic"):
        raise InputError(f"unknown semantics {semantics!r}")
    if semantics == "asymptotic" and not is_schur:
        raise ContractError("asymptotic semantics requires a Schur state matrix")
    chans = []
    for res in sorted(alphas, key=lambda r: r.channel):
        undet = _budget_reaches_alpha(res.alpha, q)
        ident = _identifiable_under(res.alpha, q)
        chans.append(
            ChannelClassification(
                channel=res.channel,
                alpha=res.alpha,
                undetectable_attack_exists=undet,
                all_attacks_i_identifiable=ident,
                asymptotic_variant=semantics == "asymptotic",
            )
        )
    idents = [c.all_attacks_i_identifiable for c in chans]
    if any(v is False for v in idents):
        overall: bool | None = False
    elif all(v is True for v in idents):
        overall = True
    else:
        overall = None
    return SystemClassification(
        channels=tuple(chans),
        all_attacks_identifiable=overall,
        q=q,
        semantics=semantics,
    )


@dataclass(frozen=True)
class SignalSet:
    """One (attack, disturbance, initial-state) triple."""

    a: Trace
    d: Trace
    x0: np.ndarray


def counterexample_pair(
    model: Realization,
    channel: int,
    witness: AttackPattern,
    q: int,
    horizon: int = 50,
    tol: Tolerances = DEFAULT_TOL,
) -> tuple[SignalSet, SignalSet]:
    """Two distinct signal sets with identical outputs, defeating budget ``q``.

    The witness support ``I`` is split into ``J`` (containing the target,
    taking the extra element when ``|I|`` is odd) and ``K``; the first set
    plays the witness restricted to ``J`` together with its masking
    disturbance and initial state, the second plays the negated remainder
    with zero disturbance and zero initial state.  Because the full witness
    produces identically zero output, both sets excite the output in
    exactly the same way while differing on the target channel.
    """
    alpha = len(witness.support)
    need = (alpha + 1) // 2
    if q < need:
        raise ContractError(
            f"budget q={q} is below ceil(alpha/2)={need}; no counterexample exists"
        )
    if channel != witness.target or channel not in witness.support:
        raise InputError("witness does not target the requested channel")
    others = [j for j in witness.support if j != channel]
    J = tuple(sorted([channel] + others[: need - 1]))
    K = tuple(sorted(others[need - 1 :]))
    a_full, d_full, x0 = synthesize_attack(witness, horizon, tol)
    mask_J = np.zeros(model.m)
    for j in J:
        mask_J[j - 1] = 1.0
    mask_K = 1.0 - mask_J
    a1 = Trace(a_full.data * mask_J)
    a2 = Trace(-a_full.data * mask_K)
    first = SignalSet(a=a1, d=d_full, x0=x0)
    second = SignalSet(
        a=a2, d=Trace.zeros(horizon, model.o), x0=np.zeros(model.n)
    )
    return first, second
