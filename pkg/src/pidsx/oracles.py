"""Slow-but-sure reference implementations.

Nothing in the production paths depends on this module; it exists so tests
(and the CLI self-check command) can confront the engine with independently
computed values:

* :func:`brute_force_discrete_i_sx` evaluates the discrete definition by raw
  set enumeration, with exact rational arithmetic where the table is exact.
* :func:`thickening_mc_conditional` rejection-samples the joint law inside a
  shrunken neighbourhood of the union event and estimates the target density
  empirically, validating the measure-zero conditioning rule.
* :func:`finite_difference` checks analytic derivatives with Richardson-
  extrapolated central differences along the unnormalized perturbation path.
* :func:`affine_transform` builds the transformed spec and realization map
  used by the invariance checks.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import CapExceeded, InsufficientAcceptance, UndefinedPoint, ValidationError
from .lattice import Antichain, Collection
from .model import (
    DiscreteTable,
    DistributionSpec,
    Gaussian,
    Mixture,
    MixtureComponent,
    VariableSchema,
    blend,
)

MAX_BRUTE_FORCE_OUTCOMES = 10 ** 6


def _thread_cap() -> int:
    raw = os.environ.get("PIDSX_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# Discrete brute force
# ---------------------------------------------------------------------------

def brute_force_discrete_i_sx(spec: DistributionSpec, antichain, realization) -> float:
    """Local shared information by exhaustive outcome enumeration.

    Scans every table entry and tests union-event membership directly (no
    inclusion-exclusion), so it shares no logic with the engine path.
    """
    law = spec.law
    if not isinstance(law, DiscreteTable):
        raise ValidationError("brute force oracle requires a fully discrete law")
    size = 1
    for var in spec.variables:
        size *= len(var.alphabet)
    if size > MAX_BRUTE_FORCE_OUTCOMES:
        raise CapExceeded(f"outcome space of {size} exceeds the oracle cap")

    alpha = antichain if isinstance(antichain, Antichain) else Antichain.reduced(antichain)
    point = spec.check_point(realization)
    s_values, t_value = point[:spec.n_sources], point[spec.target_index]
    members = [tuple(c.indices) for c in alpha]

    def in_union(outcome) -> bool:
        return any(
            all(outcome[j - 1] == s_values[j - 1] for j in col)
            for col in members
        )

    zero = Fraction(0) if law.is_rational else 0.0
    p_t = zero
    p_r = zero
    p_tr = zero
    for outcome, mass in law.entries.items():
        hit_t = outcome[spec.target_index] == t_value
        hit_r = in_union(outcome)
        if hit_t:
            p_t = p_t + mass
        if hit_r:
            p_r = p_r + mass
        if hit_t and hit_r:
            p_tr = p_tr + mass

    if p_t == 0:
        raise UndefinedPoint("target value carries no mass")
    if p_r == 0:
        return math.inf
    if p_tr == 0:
        return -math.inf
    ratio = (p_tr / p_r) / p_t
    return math.log2(ratio if isinstance(ratio, Fraction) else float(ratio))


def brute_force_union_probability(spec: DistributionSpec, antichain, s_values):
    """P(union event) by direct membership scan (oracle for the engine's
    inclusion-exclusion)."""
    law = spec.law
    if not isinstance(law, DiscreteTable):
        raise ValidationError("union probability oracle requires a discrete law")
    alpha = antichain if isinstance(antichain, Antichain) else Antichain.reduced(antichain)
    members = [tuple(c.indices) for c in alpha]
    total = Fraction(0) if law.is_rational else 0.0
    for outcome, mass in law.entries.items():
        if any(all(outcome[j - 1] == s_values[j - 1] for j in col) for col in members):
            total = total + mass
    return total


# ---------------------------------------------------------------------------
# Thickening Monte Carlo
# ---------------------------------------------------------------------------

@dataclass
class ThickeningEstimate:
    """Empirical conditional target density at the query points."""

    density: np.ndarray
    stderr: np.ndarray
    accepted: int
    epsilon: float


def thickening_mc_conditional(spec: DistributionSpec, event, epsilon: float,
                              samples: int, seed: int, query_points,
                              bandwidth: float | None = None) -> ThickeningEstimate:
    """Estimate the conditional target density by rejection sampling.

    Every pinned continuous variable accepts draws inside a Mahalanobis ball
    of radius ``epsilon`` (in the variable's own marginal scale, matching the
    engine's thickening convention); discrete pins accept exact matches.  The
    target density among accepted draws is estimated with a Gaussian-kernel
    KDE (continuous target) or empirical frequencies (discrete target).
    """
    from .aggregate import sample_joint

    if not 1e-4 <= epsilon <= 1e-1:
        raise ValidationError("epsilon must lie in [1e-4, 1e-1]")
    if samples < 10 ** 5:
        raise ValidationError("need at least 1e5 samples")

    alpha = event.antichain
    s_values = tuple(event.source_values)
    members = [tuple(c.indices) for c in alpha]
    scales = _pin_scales(spec)

    n_chains = _thread_cap()
    per_chain = samples // n_chains + (samples % n_chains > 0)
    accepted_values = []
    for chain in range(n_chains):
        rng = np.random.Generator(np.random.Philox(key=seed, counter=chain))
        draws = sample_joint(spec, per_chain, rng)
        for r in draws:
            point = spec.check_point(r)
            if _accepted(spec, point, members, s_values, epsilon, scales):
                accepted_values.append(point[spec.target_index])
    n_acc = len(accepted_values)
    if n_acc < 100:
        raise InsufficientAcceptance(f"only {n_acc} draws inside the thickened event")

    target = spec.target
    if target.is_discrete:
        dens, err = [], []
        for t in query_points:
            k = sum(1 for v in accepted_values if v == t)
            p = k / n_acc
            dens.append(p)
            err.append(math.sqrt(max(p * (1 - p), 1e-300) / n_acc))
        return ThickeningEstimate(np.array(dens), np.array(err), n_acc, epsilon)

    values = np.array([v if isinstance(v, float) else v[0] for v in accepted_values])
    if target.dimension != 1:
        raise ValidationError("continuous KDE oracle supports 1-D targets")
    if bandwidth is None:
        bandwidth = 1.06 * values.std() * n_acc ** (-1 / 5)
    dens, err = [], []
    for t in query_points:
        kernel = np.exp(-0.5 * ((values - float(t)) / bandwidth) ** 2) \
            / (bandwidth * math.sqrt(2 * math.pi))
        dens.append(float(kernel.mean()))
        err.append(float(kernel.std(ddof=1) / math.sqrt(n_acc)))
    return ThickeningEstimate(np.array(dens), np.array(err), n_acc, epsilon)


def _pin_scales(spec):
    """Cholesky factors of each continuous variable's marginal covariance."""
    from .model import marginal, _sole_gaussian

    out = {}
    for i, var in enumerate(spec.variables):
        if var.is_discrete or i >= spec.n_sources:
            continue
        g = _sole_gaussian(marginal(spec, [var.name]))
        out[i] = np.linalg.cholesky(g.cov)
    return out


def _accepted(spec, point, members, s_values, epsilon, scales) -> bool:
    for col in members:
        ok = True
        for j in col:
            var = spec.sources[j - 1]
            if var.is_discrete:
                if point[j - 1] != s_values[j - 1]:
                    ok = False
                    break
            else:
                x = np.atleast_1d(np.asarray(point[j - 1], dtype=float))
                s = np.atleast_1d(np.asarray(s_values[j - 1], dtype=float))
                z = np.linalg.solve(scales[j - 1], x - s)
                if float(z @ z) > epsilon ** 2:
                    ok = False
                    break
        if ok:
            return True
    return False


# ---------------------------------------------------------------------------
# Finite differences
# ---------------------------------------------------------------------------

@dataclass
class FiniteDifferenceResult:
    value: float
    residual: float


def finite_difference(functional, spec: DistributionSpec, q: DistributionSpec,
                      eps_ladder=(1e-4, 5e-5)) -> FiniteDifferenceResult:
    """Richardson-extrapolated central difference of ``functional`` at the
    base law, along the unnormalized path ``law + eps * q``.

    ``functional`` maps a (possibly unnormalized) spec to a float.  Returns
    the extrapolated estimate and the distance to the finest plain estimate
    as a self-reported error bound.
    """
    eps_ladder = sorted(eps_ladder, reverse=True)
    if len(eps_ladder) < 2:
        raise ValidationError("need at least two step sizes")
    centrals = []
    for eps in eps_ladder:
        up = functional(blend(spec, q, eps))
        down = functional(blend(spec, q, -eps))
        centrals.append((up - down) / (2 * eps))
    e1, e2 = eps_ladder[0], eps_ladder[1]
    r2 = (e1 / e2) ** 2
    extrapolated = (r2 * centrals[1] - centrals[0]) / (r2 - 1)
    return FiniteDifferenceResult(value=extrapolated,
                                  residual=abs(extrapolated - centrals[1]))


def second_finite_difference(functional, spec, q, r, eps=5e-4) -> float:
    """Mixed second-order central difference along directions q then r."""
    pp = functional(blend(blend(spec, q, eps), r, eps))
    pm = functional(blend(blend(spec, q, eps), r, -eps))
    mp = functional(blend(blend(spec, q, -eps), r, eps))
    mm = functional(blend(blend(spec, q, -eps), r, -eps))
    return (pp - pm - mp + mm) / (4 * eps * eps)


# ---------------------------------------------------------------------------
# Invertible transform harness
# ---------------------------------------------------------------------------

def affine_transform(spec: DistributionSpec, maps: dict):
    """Apply per-variable invertible transforms; returns (new_spec, point_map).

    ``maps[name]`` is either a label permutation ``dict`` (discrete variable)
    or an affine pair ``(A, b)`` with invertible ``A`` (continuous variable).
    Variables not mentioned stay untouched.
    """
    blocks = []
    perms = {}
    for i, var in enumerate(spec.variables):
        if var.is_discrete:
            perm = maps.get(var.name)
            if perm is not None:
                missing = [a for a in var.alphabet if a not in perm]
                if missing or len(set(perm.values())) != len(var.alphabet):
                    raise ValidationError(f"map for {var.name!r} is not a permutation")
                perms[i] = perm
        else:
            entry = maps.get(var.name)
            if entry is None:
                A, b = np.eye(var.dimension), np.zeros(var.dimension)
            else:
                A = np.atleast_2d(np.asarray(entry[0], dtype=float))
                b = np.atleast_1d(np.asarray(entry[1], dtype=float))
                if abs(np.linalg.det(A)) < 1e-12:
                    raise ValidationError(f"map for {var.name!r} is not invertible")
            blocks.append((i, A, b))

    def new_schema(var, i):
        if var.is_discrete and i in perms:
            return VariableSchema.discrete(var.name, tuple(perms[i][a] for a in var.alphabet))
        return var

    sources = tuple(new_schema(v, i) for i, v in enumerate(spec.sources))
    target = new_schema(spec.target, spec.target_index) if spec.target else None

    A_full = None
    b_full = None
    if spec.total_cont_dim:
        A_full = np.zeros((spec.total_cont_dim, spec.total_cont_dim))
        b_full = np.zeros(spec.total_cont_dim)
        for i, A, b in blocks:
            sl = spec.cont_block(i)
            A_full[sl, sl] = A
            b_full[sl] = b

    def map_gaussian(g: Gaussian) -> Gaussian:
        return Gaussian(A_full @ g.mean + b_full, A_full @ g.cov @ A_full.T, validate=False)

    law = spec.law
    if isinstance(law, DiscreteTable):
        entries = {}
        for outcome, mass in law.entries.items():
            new_outcome = tuple(
                perms.get(i, {}).get(v, v) if spec.variables[i].is_discrete else v
                for i, v in enumerate(outcome)
            )
            entries[new_outcome] = mass
        new_law = DiscreteTable(entries, validate=False)
    elif isinstance(law, Gaussian):
        new_law = map_gaussian(law)
    else:
        disc_idx = spec.discrete_indices
        comps = []
        for c in law.components:
            disc = tuple(
                perms.get(i, {}).get(v, v)
                for i, v in zip(disc_idx, c.discrete)
            )
            comps.append(MixtureComponent(
                weight=c.weight, discrete=disc,
                gaussian=map_gaussian(c.gaussian) if c.gaussian is not None else None,
            ))
        new_law = Mixture(comps, validate=False)

    new_spec = DistributionSpec(sources, target, new_law, validate=False)

    def map_point(realization):
        point = spec.check_point(realization)
        out = []
        for i, (v, var) in enumerate(zip(point, spec.variables)):
            if var.is_discrete:
                out.append(perms.get(i, {}).get(v, v))
            else:
                x = np.atleast_1d(np.asarray(v, dtype=float))
                entry void = None  # placeholder
        return tuple(out)

    def map_point_impl(realization):
        point = spec.check_point(realization)
        out = []
        for i, (v, var) in enumerate(zip(point, spec.variables)):
            if var.is_discrete:
                out.append(perms.get(i, {}).get(v, v))
            else:
                x = np.atleast_1d(np.asarray(v, dtype=float))
                sl = spec.cont_block(i)
                y = A_full[sl, sl] @ x + b_full[sl]
                out.append(float(y[0]) if var.width == 1 else tuple(float(t) for t in y))
        return tuple(out)

    return new_spec, map_point_impl
