"""Derivatives of the local and global measures along directions in law space.

The perturbation path is the unnormalized ``law + eps * direction`` (total
mass ``1 + eps``); normalizing the path would shift every derivative by
constant terms.  All derivatives here are taken of the natural-log versions
of the information quantities, which is why the self-direction case evaluates
to exactly ``-1`` per realization: each of the three density ratios is 1.
Finite-difference validation must therefore differentiate the nat-valued
quantities (``ln 2`` times the bit values).

The three-term local form is, per realization and antichain::

    d/d eps ln[conditional-target-density / marginal-target-density]
        = G_q(t)/G_p(t) - W_q/W_p - q_T(t)/p_T(t)

where ``G`` is the signed joint density of (pinned sources, target) summed
over the event expansion, ``W`` the matching aggregate (event probability in
the positive-mass regime, slice weight in the dominated one), and both are
evaluated on the base law's expansion structure so the limit matches the
actual perturbation path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .aggregate import IntegrationConfig, _expect_grid_impl, _expect_mc, _expect_exact
from .conditioning import UnionEvent, expansion, response_marginal_block
from .errors import UndefinedPoint, ValidationError
from .lattice import Antichain
from .model import DiscreteTable, DistributionSpec, Gaussian, Mixture
from .pointwise import i_sx

_LN2 = math.log(2.0)


@dataclass(frozen=True)
class PerturbationDirection:
    """A direction measure, validated to move inside the base law's support."""

    q: DistributionSpec

    @classmethod
    def for_base(cls, base: DistributionSpec, q: DistributionSpec) -> "PerturbationDirection":
        validate_direction(base, q)
        return cls(q=q)


def validate_direction(base: DistributionSpec, q: DistributionSpec) -> None:
    """Same schema, and support(q) inside support(base) on the discrete part."""
    if base.variables != q.variables:
        raise ValidationError("direction must share the base schema")
    p_law, q_law = base.law, q.law
    if isinstance(p_law, DiscreteTable):
        if not isinstance(q_law, DiscreteTable):
            raise ValidationError("direction for a discrete law must be discrete")
        for outcome, mass in q_law.entries.items():
            if mass > 0 and p_law.mass(outcome) == 0:
                raise ValidationError(f"direction puts mass outside base support: {outcome}")
    elif isinstance(p_law, Mixture):
        base_atoms = {c.discrete for c in p_law.components}
        q_atoms = {c.discrete for c in q_law.components} if isinstance(q_law, Mixture) \
            else {()} if isinstance(q_law, Gaussian) else None
        if q_atoms is None or not q_atoms <= base_atoms:
            raise ValidationError("direction's discrete atoms must lie in the base support")
    # Gaussians have full support; identical schemas suffice.


def _unwrap(q):
    return q.q if isinstance(q, PerturbationDirection) else q


def _as_antichain(antichain):
    return antichain if isinstance(antichain, Antichain) else Antichain.reduced(antichain)


def _term_ratios(spec, q, alpha, realization):
    """The three (q over p) ratios of the local derivative at one realization."""
    point = spec.check_point(realization)
    s_values, t_value = point[:spec.n_sources], point[spec.target_index]
    event = UnionEvent(antichain=alpha, source_values=s_values)
    exp = expansion(spec, event)
    target = spec.target.name

    norm_p = exp.norm
    norm_q = exp.norm_for(q)
    num_p = exp.numerator_block(spec, target, [t_value])[0]
    num_q = exp.numerator_block(q, target, [t_value])[0]
    p_t = response_marginal_block(spec, target, [t_value])[0]
    q_t = response_marginal_block(q, target, [t_value])[0]
    if num_p == 0 or p_t == 0 or norm_p == 0:
        raise UndefinedPoint("base densities vanish at this realization")
    return (
        float(num_q) / float(num_p),
        float(norm_q) / float(norm_p),
        float(q_t) / float(p_t),
    )


def directional_derivative_local(spec: DistributionSpec, q, antichain, realization) -> float:
    """d/d eps at 0 of the local shared information (nats) along ``q``.

    Equals ``-1`` identically when ``q`` is the base law itself.
    """
    q = _unwrap(q)
    validate_direction(spec, q)
    alpha = _as_antichain(antichain)
    t1, t2, t3 = _term_ratios(spec, q, alpha, realization)
    return t1 - t2 - t3


def second_directional_derivative_local(spec: DistributionSpec, q, r,
                                        antichain, realization) -> float:
    """Mixed second derivative along ``q`` then ``r``; symmetric in (q, r).

    Evaluates to ``+1`` when both directions equal the base law.
    """
    q, r = _unwrap(q), _unwrap(r)
    validate_direction(spec, q)
    validate_direction(spec, r)
    alpha = _as_antichain(antichain)
    q1, q2, q3 = _term_ratios(spec, q, alpha, realization)
    r1, r2, r3 = _term_ratios(spec, r, alpha, realization)
    return -q1 * r1 + q2 * r2 + q3 * r3


def functional_derivative_global(spec: DistributionSpec, q, antichain,
                                 config: IntegrationConfig) -> float:
    """d/d eps at 0 of the global shared information (nats) along ``q``.

    Realized as the integral of ``i * q + p * di`` against the reference
    measure, which is exactly the first variation of the defining integral.
    """
    q = _unwrap(q)
    validate_direction(spec, q)
    alpha = _as_antichain(antichain)
    target = spec.target.name

    def local_block(s_values, t_values):
        event = UnionEvent(antichain=alpha, source_values=s_values)
        exp = expansion(spec, event)
        norm_p, norm_q = exp.norm, exp.norm_for(q)
        nums_p = exp.numerator_block(spec, target, t_values)
        nums_q = exp.numerator_block(q, target, t_values)
        pt = response_marginal_block(spec, target, t_values)
        qt = response_marginal_block(q, target, t_values)
        out = []
        for np_i, nq_i, pt_i, qt_i in zip(nums_p, nums_q, pt, qt):
            if np_i == 0 or pt_i == 0:
                # dead grid points are masked out by the expectation drivers;
                # a live point here means the integral genuinely diverges
                out.append((math.nan, math.nan))
                continue
            i_nats = math.log(float(np_i) / float(norm_p)) - math.log(float(pt_i))
            deriv = (float(nq_i) / float(np_i)
                     - float(norm_q) / float(norm_p)
                     - float(qt_i) / float(pt_i))
            out.append((i_nats, deriv))
        return out

    # The drivers integrate f(s, t) * p(s, t) d lambda.  Write the variation
    # integral in that shape: i*q + p*di = p * (i * (q/p) + di).
    def ratio_block(s_values, t_values):
        pairs = local_block(s_values, t_values)
        from .conditioning import _pinned_response_block
        from .aggregate import _all_source_indices
        pj = _pinned_response_block(spec, _all_source_indices(spec), s_values, target, t_values)
        qj = _pinned_response_block(q, _all_source_indices(spec), s_values, target, t_values)
        out = []
        for (i_nats, deriv), pj_i, qj_i in zip(pairs, pj, qj):
            if pj_i == 0:
                out.append(0.0)
            else:
                out.append(i_nats * float(qj_i) / float(pj_i) + deriv)
        return out

    if config.method == "exact":
        return _expect_exact(spec, ratio_block)
    if config.method == "grid":
        return _expect_grid_impl(spec, ratio_block, config)

    def scalar(realization):
        point = spec.check_point(realization)
        s_values, t_value = point[:spec.n_sources], point[spec.target_index]
        return ratio_block(s_values, [t_value])[0]

    mean, _ = _expect_mc(spec, scalar, config)
    return mean
