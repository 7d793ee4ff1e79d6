"""Conditioning on union events.

Given an antichain ``alpha`` and a source realization ``s``, the union event
is ``R = union over collections of (all referenced sources hitting their
values)``.  When ``R`` has positive probability the target law given ``R`` is
classical conditioning, expanded by inclusion-exclusion over the non-empty
sub-families of the antichain.  When ``R`` is a null event (continuous pins)
the law is defined as the shrinking-neighbourhood limit: every pinned
continuous coordinate is replaced by a small ball, the conditional is taken
classically, and the radius is sent to zero.

In that limit only the terms of minimal effective codimension survive, where
the codimension of a sub-family union counts its pinned continuous
coordinates.  Terms at the same minimal codimension keep their
inclusion-exclusion signs; higher-codimension terms vanish.  Slice weights
carry a per-variable scale factor (see ``DistributionSpec.thickening_scale``)
so that the limit does not depend on the units any variable is measured in.

Out-of-support realizations (every slice weight zero) raise
:class:`AllSliceWeightsZero`; callers map this to the +infinity convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import combinations

import numpy as np

from .errors import AllSliceWeightsZero, PidsxError, ValidationError
from .lattice import Antichain, Collection
from .model import (
    DiscreteTable,
    DistributionSpec,
    Gaussian,
    Mixture,
    marginal,
    normalize_value,
)

_SIGNED_SUM_GUARD = 1e-9  # relative slack for cancellation in float sums


@dataclass(frozen=True)
class UnionEvent:
    """An antichain together with a full source realization."""

    antichain: Antichain
    source_values: tuple
    note: str | None = None

    @classmethod
    def build(cls, collections, source_values) -> "UnionEvent":
        """Canonicalize an arbitrary family of collections into an event.

        Supersets are dropped (they never change the union event); a note is
        attached when the family was actually reduced.
        """
        raw = [c if isinstance(c, Collection) else Collection.of(c) for c in collections]
        reduced = Antichain.reduced(raw)
        note = None
        if len(reduced) != len(set(raw)):
            note = f"normalized to {reduced} (superset removal)"
        return cls(antichain=reduced, source_values=tuple(source_values), note=note)


@lru_cache(maxsize=4096)
def union_terms(antichain: Antichain) -> tuple[tuple[tuple[int, ...], int], ...]:
    """Inclusion-exclusion terms for the union event, collapsed by index union.

    Returns ``((source_indices, coefficient), ...)`` where an intersection of
    slices pins the union of their index sets.  Distinct sub-families with the
    same union are merged; zero coefficients are dropped.
    """
    cols = [frozenset(c.indices) for c in antichain]
    acc: dict[tuple[int, ...], int] = {}
    for r in range(1, len(cols) + 1):
        sign = 1 if r % 2 == 1 else -1
        for family in combinations(cols, r):
            u = tuple(sorted(frozenset.union(*family)))
            acc[u] = acc.get(u, 0) + sign
    return tuple(sorted((u, c) for u, c in acc.items() if c != 0))


def _check_event(spec: DistributionSpec, event: UnionEvent) -> tuple:
    if spec.target is None:
        raise ValidationError("conditioning requires a spec with a target")
    n = spec.n_sources
    if event.antichain.max_index() > n:
        raise ValidationError(
            f"antichain {event.antichain} references source index > {n}"
        )
    values = tuple(event.source_values)
    if len(values) != n:
        raise ValidationError(f"expected {n} source values, got {len(values)}")
    return tuple(normalize_value(var, v) for v, var in zip(values, spec.sources))


def _vars_of(spec, indices: tuple[int, ...]) -> list[str]:
    return [spec.sources[i - 1].name for i in indices]


def _codim(spec, indices: tuple[int, ...]) -> int:
    return sum(spec.sources[i - 1].width for i in indices)


def _scale_factor(spec, indices: tuple[int, ...]) -> float:
    f = 1.0
    for i in indices:
        if not spec.sources[i - 1].is_discrete:
            f *= spec.thickening_scale(i - 1)
    return f


def _sub_values(event_values, indices: tuple[int, ...]) -> tuple:
    return tuple(event_values[i - 1] for i in indices)


def _pin_density(spec, indices: tuple[int, ...], values) -> object:
    """Marginal density/mass of the pinned source coordinates at their values."""
    from .model import density
    sub = marginal(spec, _vars_of(spec, indices))
    return density(sub, values)


@dataclass
class Expansion:
    """Resolved inclusion-exclusion structure of one conditioning event.

    ``terms`` lists ``(source_indices, signed_coefficient, scale_factor)``;
    in the positive-mass regime the factors are all 1 and ``norm`` is the
    event probability, in the dominated regime the terms are the minimal
    codimension level and ``norm`` is the aggregate slice weight.
    """

    regime: str                  # 'mass' | 'sliced'
    values: tuple                # normalized source realization
    terms: tuple
    norm: object                 # P(R) or aggregate weight W
    codimension: int | None = None
    dominant: tuple | None = None
    slice_weights: dict | None = None

    def norm_for(self, other: DistributionSpec) -> object:
        """Evaluate this structure's normalizer under another law (same schema)."""
        total = 0
        for u, coef, factor in self.terms:
            w = _pin_density(other, u, _sub_values(self.values, u))
            total += coef * factor * w if factor != 1.0 else coef * w
        return total

    def numerator_block(self, other: DistributionSpec, response: str, t_values):
        """Signed joint density of (pinned coords, response block) under ``other``."""
        first = True
        out = None
        for u, coef, factor in self.terms:
            block = _pinned_response_block(other, u, _sub_values(self.values, u),
                                           response, t_values)
            scale = coef if factor == 1.0 else coef * factor  # keep Fractions exact
            scaled = [scale * b for b in block] if isinstance(block, list) else scale * block
            if first:
                out, first = scaled, False
            elif isinstance(out, list):
                out = [a + b for a, b in zip(out, scaled)]
            else:
                out = out + scaled
        return out


def expansion(spec: DistributionSpec, event: UnionEvent) -> Expansion:
    """Classify the event (positive mass vs dominated) and fix its terms."""
    values = _check_event(spec, event)
    terms = union_terms(event.antichain)

    mass_terms = [(u, coef) for u, coef in terms if _codim(spec, u) == 0]
    P = 0
    for u, coef in mass_terms:
        P = P + coef * _pin_density(spec, u, _sub_values(values, u))
    if P > 0:
        return Expansion(
            regime="mass",
            values=values,
            terms=tuple((u, coef, 1.0) for u, coef in mass_terms),
            norm=P,
        )

    # dominated regime: rank singleton slices by effective codimension
    singles = []
    for col in event.antichain:
        u = tuple(col.indices)
        w = float(_pin_density(spec, u, _sub_values(values, u)))
        singles.append((col, u, _codim(spec, u), w * _scale_factor(spec, u)))
    positive = [s for s in singles if s[3] > 0.0]
    if not positive:
        raise AllSliceWeightsZero(
            f"realization {values} is outside the support for {event.antichain}"
        )
    c_star = min(s[2] for s in positive)
    dominant = tuple(s[0] for s in positive if s[2] == c_star)
    slice_weights = {s[0]: s[3] for s in positive if s[2] == c_star}

    level = []
    W = 0.0
    for u, coef in terms:
        if _codim(spec, u) != c_star:
            continue
        factor = _scale_factor(spec, u)
        w = float(_pin_density(spec, u, _sub_values(values, u)))
        level.append((u, coef, factor))
        W += coef * factor * w
    if W <= 0.0:
        # cannot happen mathematically (W >= max dominant weight); guard anyway
        raise AllSliceWeightsZero("aggregate slice weight vanished")
    return Expansion(
        regime="sliced",
        values=values,
        terms=tuple(level),
        norm=W,
        codimension=c_star,
        dominant=dominant,
        slice_weights=slice_weights,
    )


# ---------------------------------------------------------------------------
# Pinned joint density blocks
# ---------------------------------------------------------------------------

def _pinned_response_block(spec, u_indices, u_values, response: str, t_values):
    """Joint density of pinned sources and the response block.

    ``t_values`` is a list of labels for a discrete response (result: list of
    masses, exact for rational tables) or an ``(N, d)`` array for a continuous
    one (result: float array).
    """
    names = _vars_of(spec, u_indices) + [response]
    sub = marginal(spec, names)
    resp_var = sub.variables[sub.var_index(response)]
    pinned = dict(zip(_vars_of(spec, u_indices), u_values))
    law = sub.law

    if isinstance(law, DiscreteTable):
        out = []
        for t in t_values:
            point = tuple(pinned[v.name] if v.name in pinned else t for v in sub.variables)
            out.append(law.mass(point))
        return out

    if isinstance(law, Gaussian):
        pin_idx, pin_vals = _cont_positions(sub, pinned)
        if pin_idx:
            log_pin = law.marginal(pin_idx).logpdf(pin_vals)
            cond = law.conditional(pin_idx, pin_vals)
        else:
            log_pin, cond = 0.0, law
        T = np.asarray(t_values, dtype=float).reshape(len(t_values), -1)
        return np.exp(log_pin + cond.logpdf_batch(T))

    if isinstance(law, Mixture):
        disc_names = [v.name for v in sub.variables if v.is_discrete]
        if resp_var.is_discrete:
            totals = [0.0] * len(t_values)
            for c in law.components:
                labels = dict(zip(disc_names, c.discrete))
                if any(labels[k] != v for k, v in pinned.items() if k in labels):
                    continue
                pin_idx, pin_vals = _cont_positions(sub, pinned)
                w = float(c.weight)
                if c.gaussian is not None and pin_idx:
                    w *= math.exp(c.gaussian.marginal(pin_idx).logpdf(pin_vals))
                for j, t in enumerate(t_values):
                    if labels[response] == t:
                        totals[j] += w
            return totals
        T = np.asarray(t_values, dtype=float).reshape(len(t_values), -1)
        total = np.zeros(T.shape[0])
        resp_cont_idx = _resp_cont_positions(sub, response)
        for c in law.components:
            labels = dict(zip(disc_names, c.discrete))
            if any(labels[k] != v for k, v in pinned.items() if k in labels):
                continue
            pin_idx, pin_vals = _cont_positions(sub, pinned)
            g = c.gaussian
            if pin_idx:
                log_pin = g.marginal(pin_idx).logpdf(pin_vals)
                cond = g.conditional(pin_idx, pin_vals)
                # conditional keeps remaining coords in order; response block is
                # the whole remainder because the marginal only holds u + resp
                total += float(c.weight) * np.exp(log_pin + cond.logpdf_batch(T))
            else:
                total += float(c.weight) * np.exp(g.marginal(resp_cont_idx).logpdf_batch(T))
        return total

    raise PidsxError(f"unsupported law type {type(law)}")


def _cont_positions(sub: DistributionSpec, pinned: dict):
    """Continuous coordinate indices (within the sub-marginal) of pinned vars."""
    idx, vals = [], []
    for i, var in enumerate(sub.variables):
        if var.is_discrete or var.name not in pinned:
            continue
        block = sub.cont_block(i)
        idx.extend(range(block.start, block.stop))
        value = pinned[var.name]
        vals.extend([value] if isinstance(value, float) else list(value))
    return idx, np.array(vals, dtype=float)


def _resp_cont_positions(sub: DistributionSpec, response: str):
    i = sub.var_index(response)
    block = sub.cont_block(i)
    return list(range(block.start, block.stop))


def response_marginal_block(spec: DistributionSpec, response: str, t_values):
    """Marginal density of the response variable at each of ``t_values``."""
    from .model import density
    sub = marginal(spec, [response])
    law = sub.law
    resp_var = sub.variables[0]
    if resp_var.is_discrete:
        return [density(sub, (t,)) for t in t_values]
    T = np.asarray(t_values, dtype=float).reshape(len(t_values), -1)
    if isinstance(law, Gaussian):
        return np.exp(law.logpdf_batch(T))
    total = np.zeros(T.shape[0])
    for c in law.components:
        total += float(c.weight) * np.exp(c.gaussian.logpdf_batch(T))
    return total


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------

def union_probability(spec: DistributionSpec, event: UnionEvent):
    """P(union event) by inclusion-exclusion; slices pinning continuous
    coordinates are null and contribute nothing."""
    values = _check_event(spec, event)
    total = 0
    for u, coef in union_terms(event.antichain):
        if _codim(spec, u) != 0:
            continue
        total = total + coef * _pin_density(spec, u, _sub_values(values, u))
    return total


@dataclass
class ClassifierMass:
    """Pushforward of the event indicator: exact Bernoulli masses when the
    event has positive probability, otherwise the aggregate slice weight of
    the shrinking-neighbourhood limit (flagged ``differential``)."""

    kind: str          # 'mass' | 'differential'
    p_one: object
    p_zero: object | None

    @property
    def is_differential(self) -> bool:
        return self.kind == "differential"


def classifier_pushforward(spec: DistributionSpec, event: UnionEvent) -> ClassifierMass:
    exp = expansion(spec, event)
    if exp.regime == "mass":
        return ClassifierMass(kind="mass", p_one=exp.norm, p_zero=1 - exp.norm)
    return ClassifierMass(kind="differential", p_one=exp.norm, p_zero=None)


class ConditionalLaw:
    """Law of the response variable given the union event.

    ``density(t)`` and ``density_batch(ts)`` evaluate against the response's
    reference measure; values are exact Fractions on rational discrete specs.
    """

    def __init__(self, spec, event, exp: Expansion, response: str):
        self.spec = spec
        self.event = event
        self.response = response
        self._exp = exp
        self.kind = "positive-mass" if exp.regime == "mass" else "dominated-slice"
        self.mass = exp.norm if exp.regime == "mass" else None
        self.aggregate_weight = exp.norm if exp.regime == "sliced" else None
        self.codimension = exp.codimension
        self.dominant = exp.dominant
        self.slice_weights = exp.slice_weights

    def density_batch(self, t_values):
        num = self._exp.numerator_block(self.spec, self.response, t_values)
        if isinstance(num, list):
            return [_nonneg(v, self._exp.norm) / self._exp.norm for v in num]
        return _nonneg_array(num, float(self._exp.norm)) / float(self._exp.norm)

    def density(self, t):
        return self.density_batch([t])[0]


def _nonneg(value, scale):
    if value < 0:
        if abs(float(value)) > _SIGNED_SUM_GUARD * max(float(scale), 1.0):
            raise PidsxError(f"signed density sum went negative: {value}")
        return 0 * value
    return value


def _nonneg_array(values: np.ndarray, scale: float) -> np.ndarray:
    bad = values < 0
    if bad.any():
        worst = float(values[bad].min())
        if abs(worst) > _SIGNED_SUM_GUARD * max(scale, 1.0):
            raise PidsxError(f"signed density sum went negative: {worst}")
        values = np.where(bad, 0.0, values)
    return values


def conditional_law(spec: DistributionSpec, event: UnionEvent,
                    response: str | None = None) -> ConditionalLaw:
    """Conditional law of ``response`` (default: the target) given the event."""
    if response is None:
        response = spec.target.name if spec.target is not None else None
    if response is None:
        raise ValidationError("no response variable available")
    resp_i = spec.var_index(response)
    referenced = {i - 1 for c in event.antichain for i in c.indices}
    if resp_i in referenced:
        raise ValidationError(f"response {response!r} is pinned by the antichain")
    exp = expansion(spec, event)
    return ConditionalLaw(spec, event, exp, response)
