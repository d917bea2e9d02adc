"""Certified quadratic fixed-point solver.

Solves u = B(u, u) + L(u) + R by Picard iteration from u = 0 in any
normed space whose elements support ``+`` and ``-``.  The admissibility
condition (1 - c2)^2 > 4 c1 ||R|| yields the ball radius x1, the outer
root x2, and the contraction rate gamma = 1 - sqrt((c2-1)^2 - 4 c1 ||R||)
= 2 c1 x1 + c2; the solver certifies that every iterate stays inside the
x1-ball and that observed step ratios respect gamma.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

from .errors import ConditionViolated, InvalidConstants, NoConvergence

__all__ = ["QuadraticProblem", "FixedPointCertificate", "check_condition", "solve"]

_PROBE_SLACK = 1e-9
_RATIO_SLACK = 0.05


def check_condition(c1: float, c2: float, r_norm: float) -> tuple[bool, float, float]:
    """Admissibility test; returns (ok, x1, x2) with roots from the quadratic formula.

    Strict inequality is required: the boundary 4 c1 ||R|| = (1 - c2)^2
    is rejected because the contraction rate degenerates to 1 there.
    """
    if not c1 > 0:
        raise InvalidConstants(f"c1 must be positive, got {c1}")
    if not (0 <= c2 < 1):
        raise InvalidConstants(f"c2 must lie in [0, 1), got {c2}")
    if r_norm < 0:
        raise InvalidConstants(f"r_norm must be nonnegative, got {r_norm}")
    disc = (1.0 - c2) ** 2 - 4.0 * c1 * r_norm
    if disc <= 0:
        return False, math.nan, math.nan
    root = math.sqrt(disc)
    x1 = (1.0 - c2 - root) / (2.0 * c1)
    x2 = (1.0 - c2 + root) / (2.0 * c1)
    return True, x1, x2


@dataclass(frozen=True)
class QuadraticProblem:
    """One instance u = B(u, u) + L(u) + R with caller-certified constants.

    ``probes`` are optional sample elements used to spot-check that the
    supplied constants actually dominate the maps; the solver never
    infers constants itself.
    """

    bilinear: Callable[[Any, Any], Any]
    linear: Callable[[Any], Any]
    source: Any
    zero: Any
    norm: Callable[[Any], float]
    c1: float
    c2: float
    r_norm: float
    probes: Sequence[Any] = ()
    # optional fused evaluation of u -> B(u,u) + L(u) + R; must agree with the
    # three-term sum (callers assert this), it only saves repeated passes
    combined: Callable[[Any], Any] | None = None

    def __post_init__(self) -> None:
        if not self.c1 > 0:
            raise InvalidConstants(f"c1 must be positive, got {self.c1}")
        if not (0 <= self.c2 < 1):
            raise InvalidConstants(f"c2 must lie in [0, 1), got {self.c2}")
        if self.r_norm < 0:
            raise InvalidConstants(f"r_norm must be nonnegative, got {self.r_norm}")

    def validate_constants(self) -> None:
        """Check ||B(u,v)|| <= c1 ||u|| ||v|| and ||L(u)|| <= c2 ||u|| on the probes."""
        probes = list(self.probes)
        norms = [self.norm(u) for u in probes]
        for u, nu in zip(probes, norms):
            lu = self.norm(self.linear(u))
            if lu > self.c2 * nu + _PROBE_SLACK * max(1.0, self.c2 * nu):
                raise InvalidConstants(
                    f"linear bound violated on probe: ||L(u)||={lu:.6g} > c2*||u||={self.c2 * nu:.6g}"
                )
        for i, (u, nu) in enumerate(zip(probes, norms)):
            for v, nv in zip(probes[i:], norms[i:]):
                bound = self.c1 * nu * nv
                buv = self.norm(self.bilinear(u, v))
                if buv > bound + _PROBE_SLACK * max(1.0, bound):
                    raise InvalidConstants(
                        f"bilinear bound violated on probe: ||B(u,v)||={buv:.6g} > c1*||u||*||v||={bound:.6g}"
                    )


@dataclass(frozen=True)
class FixedPointCertificate:
    """Solve certificate: ball radii, contraction rate, and the observed run."""

    x1: float
    x2: float
    gamma: float
    iterations: int
    final_residual: float
    residuals: tuple[float, ...] = field(default=(), repr=False)

    @property
    def ratios(self) -> tuple[float, ...]:
        r = self.residuals
        return tuple(r[i] / r[i - 1] for i in range(1, len(r)) if r[i - 1] > 0)


def solve(problem: QuadraticProblem, tol: float, max_iter: int):
    """Picard-iterate the quadratic map inside the certified ball.

    Returns (solution, certificate).  Raises ConditionViolated when the
    admissibility condition fails or an iterate escapes the ball, and
    NoConvergence when max_iter steps do not reach ``tol``.
    """
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    ok, x1, x2 = check_condition(problem.c1, problem.c2, problem.r_norm)
    if not ok:
        raise ConditionViolated(
            f"(1-c2)^2 > 4*c1*||R|| fails: c1={problem.c1:.6g} c2={problem.c2:.6g} "
            f"r_norm={problem.r_norm:.6g}"
        )
    problem.validate_constants()
    gamma = 2.0 * problem.c1 * x1 + problem.c2

    u = problem.zero
    ball = x1 + tol
    residuals: list[float] = []
    prev_diff = None
    for it in range(1, max_iter + 1):
        if problem.combined is not None:
            u_next = problem.combined(u)
        else:
            u_next = problem.bilinear(u, u) + problem.linear(u) + problem.source
        diff = problem.norm(u_next - u)
        residuals.append(diff)
        norm_next = problem.norm(u_next)
        if norm_next > ball * (1.0 + 1e-9) + 1e-15:
            raise ConditionViolated(
                f"iterate escaped the certified ball: ||u_{it}||={norm_next:.6g} > x1={x1:.6g}"
            )
        if prev_diff is not None and diff > tol and prev_diff > 0:
            ratio = diff / prev_diff
            if ratio > gamma + _RATIO_SLACK:
                raise ConditionViolated(
                    f"contraction ratio {ratio:.6g} exceeds gamma+{_RATIO_SLACK}={gamma + _RATIO_SLACK:.6g}"
                )
        u = u_next
        if diff <= tol:
            cert = FixedPointCertificate(
                x1=x1,
                x2=x2,
                gamma=gamma,
                iterations=it,
                final_residual=diff,
                residuals=tuple(residuals),
            )
            return u, cert
        prev_diff = diff
    raise NoConvergence(
        f"no convergence to tol={tol:.3g} in {max_iter} iterations "
        f"(last residual {residuals[-1]:.6g}, gamma={gamma:.4g})"
    )
