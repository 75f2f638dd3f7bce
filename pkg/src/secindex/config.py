"""Numerical tolerance and sampling policy shared across the package.

All rank decisions, boundary tests, and sampling schemes read their
thresholds from a single :class:`Tolerances` value so that a whole analysis
run is governed by one consistent policy.  The defaults below are the
package-wide convention; callers may pass a modified copy to any operation.
"""

from __future__ import annotations

from dataclasses import dataclass, replace


@dataclass(frozen=True)
class Tolerances:
    """Tolerance and sampling policy for the numerical kernels.

    Attributes
    ----------
    rtol : float
        Relative singular-value cutoff for numerical rank: the rank of a
        matrix is the number of singular values above
        ``rtol * sigma_max * max(rows, cols)``.
    boundary_tol : float
        Slack for unit-circle decisions.  ``|z| >= 1 - boundary_tol`` counts
        as persistent; an eigenvalue is Schur-stable when its modulus is
        below ``1 - boundary_tol``.
    null_tol : float
        Residual bound for accepting a unit-norm null vector of a pencil.
    pairing_tol : float
        Matching distance for conjugate-pair symmetry of computed zeros.
    zero_merge_tol : float
        Clustering radius when merging zero candidates across random
        compressions.
    target_tol : float
        Relative magnitude below which an attack coordinate is considered
        zero (the direction does not target that channel).
    support_tol : float
        Relative magnitude used when reading the support off an attack
        direction.
    consistency_tol : float
        Relative residual bound for accepting an attack estimate.
    noise_floor : float
        Relative signal level under which a residual trace is treated as
        empty (nothing to identify).
    pole_tol : float
        Minimum distance from a plant eigenvalue for transfer-function
        evaluation and for the normal-rank sample points.
    annihilation_tol : float
        Relative bound when verifying that the designed annihilator kills
        the disturbance path.
    cond_limit : float
        Condition-number threshold above which least-squares inversions
        carry a conditioning warning.
    n_rank_samples : int
        Number of frequencies sampled when estimating normal rank.
    rank_sample_radii : tuple of float
        Circle radii (all > 1) on which the sample frequencies are drawn.
    n_compressions : int
        Independent random compressions used by the zero finder.
    interp_radius : float
        Circle radius for the determinant interpolation nodes.
    completion_retries : int
        Fresh random draws allowed when completing the residual filter to a
        square system of full normal rank.
    """

    rtol: float = 1e-10
    boundary_tol: float = 1e-9
    null_tol: float = 1e-8
    pairing_tol: float = 1e-8
    zero_merge_tol: float = 1e-7
    target_tol: float = 1e-9
    support_tol: float = 1e-9
    consistency_tol: float = 1e-6
    noise_floor: float = 1e-10
    pole_tol: float = 1e-6
    annihilation_tol: float = 1e-8
    cond_limit: float = 1e12
    n_rank_samples: int = 8
    rank_sample_radii: tuple[float, ...] = (1.3, 1.7)
    n_compressions: int = 3
    interp_radius: float = 2.0
    completion_retries: int = 5

    def with_rtol(self, rtol: float) -> "Tolerances":
        return replace(self, rtol=rtol)


DEFAULT_TOL = Tolerances()
