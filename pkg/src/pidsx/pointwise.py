"""Local (per-realization) information quantities.

All values are in bits.  Plus/minus infinities are first-class results, not
errors: a realization outside the support of the conditioning event yields
``+inf`` (the conditional law fails absolute continuity), a vanishing
conditional density yields ``-inf``.  A vanishing marginal target density
makes the log-ratio genuinely undefined and raises :class:`UndefinedPoint`.

The informative/misinformative split ``i = i_plus - i_minus`` is exact in the
positive-mass regime, where both parts are non-negative.  In the dominated
(measure-zero conditioning) regime the split is computed from the aggregate
slice weight instead of an event probability; it is flagged ``differential``
and may take negative values, like differential entropy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .conditioning import (
    ConditionalLaw,
    UnionEvent,
    conditional_law,
    expansion,
    response_marginal_block,
)
from .errors import AllSliceWeightsZero, UndefinedPoint, ValidationError
from .lattice import Antichain, Collection
from .model import DistributionSpec, marginal


def _as_antichain(antichain_or_collections) -> tuple[Antichain, str | None]:
    if isinstance(antichain_or_collections, Antichain):
        return antichain_or_collections, None
    if isinstance(antichain_or_collections, Collection):
        return Antichain.of(antichain_or_collections), None
    reduced = Antichain.reduced(antichain_or_collections)
    return reduced, None


def _log2_ratio(num, den) -> float:
    """log2(num/den) with the infinity conventions; den == 0 is the caller's
    job to rule out."""
    if num == 0:
        return -math.inf
    if isinstance(num, Fraction) and isinstance(den, Fraction):
        return math.log2(num / den)
    return math.log2(float(num) / float(den))


def _split_realization(spec: DistributionSpec, realization):
    point = spec.check_point(realization)
    return point[:spec.n_sources], point[spec.target_index]


@dataclass
class PointwiseResult:
    """Shared information of one realization about one antichain."""

    i_sx: float
    i_plus: float | None
    i_minus: float | None
    antichain: Antichain
    realization: tuple
    regime: str  # 'mass' | 'differential'

    def __iter__(self):  # ergonomic unpacking in tests
        return iter((self.i_sx, self.i_plus, self.i_minus))


def local_mi(spec: DistributionSpec, collection, realization) -> float:
    """Local mutual information between a source collection and the target.

    ``log2`` of conditional over marginal target density, computed directly
    from the three marginal densities (no union-event machinery), so the
    self-redundancy identity against :func:`i_sx` is a genuine cross-check.
    Out-of-support source values give ``+inf``; zero joint density gives
    ``-inf``; zero marginal target density raises :class:`UndefinedPoint`.
    """
    from .model import density

    if not isinstance(collection, Collection):
        collection = Collection.of(collection)
    s_values, t_value = _split_realization(spec, realization)
    if collection.indices and max(collection.indices) > spec.n_sources:
        raise ValidationError(f"collection {collection} exceeds source count")
    names = [spec.sources[i - 1].name for i in collection.indices]
    sub_values = tuple(s_values[i - 1] for i in collection.indices)
    target = spec.target.name

    p_t = density(marginal(spec, [target]), (t_value,))
    if p_t == 0:
        raise UndefinedPoint("marginal target density vanishes")
    p_s = density(marginal(spec, names), sub_values)
    if p_s == 0:
        return math.inf
    p_st = density(marginal(spec, names + [target]), sub_values + (t_value,))
    if p_st == 0:
        return -math.inf
    if isinstance(p_st, Fraction) and isinstance(p_s, Fraction) and isinstance(p_t, Fraction):
        return math.log2(p_st / (p_s * p_t))
    return math.log2(float(p_st) / (float(p_s) * float(p_t)))


def i_sx(spec: DistributionSpec, antichain, realization) -> PointwiseResult:
    """Shared (redundant) local information of an antichain about the target.

    Accepts an :class:`Antichain` or any iterable of collections (supersets
    are dropped, which never changes the union event).
    """
    alpha, _ = _as_antichain(antichain)
    s_values, t_value = _split_realization(spec, realization)
    event = UnionEvent(antichain=alpha, source_values=s_values)

    target = spec.target.name
    p_t = response_marginal_block(spec, target, [t_value])[0]
    try:
        law = conditional_law(spec, event)
    except AllSliceWeightsZero:
        return PointwiseResult(
            i_sx=math.inf, i_plus=None, i_minus=None,
            antichain=alpha, realization=tuple(realization), regime="mass",
        )
    regime = "mass" if law.kind == "positive-mass" else "differential"
    nu_t = law.density(t_value)

    if p_t == 0:
        if nu_t == 0:
            raise UndefinedPoint("both conditional and marginal target density vanish")
        value = math.inf
    else:
        value = _log2_ratio(nu_t, p_t)

    if math.isinf(value):
        return PointwiseResult(
            i_sx=value, i_plus=None, i_minus=None,
            antichain=alpha, realization=tuple(realization), regime=regime,
        )
    weight = law.mass if regime == "mass" else law.aggregate_weight
    i_plus = -math.log2(float(weight))
    return PointwiseResult(
        i_sx=value, i_plus=i_plus, i_minus=i_plus - value,
        antichain=alpha, realization=tuple(realization), regime=regime,
    )


def target_part_spec(spec: DistributionSpec, t1) -> DistributionSpec:
    """Spec whose target is only the leading component of a composite target.

    For a continuous target the leading block has the width of ``t1``; for a
    discrete target with tuple labels it is the first tuple slot.
    """
    target = spec.target
    if target is None:
        raise ValidationError("spec has no target")
    if target.is_discrete:
        if not all(isinstance(a, tuple) and len(a) == 2 for a in target.alphabet):
            raise ValidationError("composite discrete target needs 2-tuple labels")
        return _discrete_target_projection(spec)
    width = 1 if isinstance(t1, (int, float)) else len(tuple(t1))
    if not 1 <= width < target.dimension:
        raise ValidationError("t1 must be a strict leading block of the target")
    return _continuous_target_projection(spec, width)


def _discrete_target_projection(spec: DistributionSpec) -> DistributionSpec:
    from .model import DiscreteTable, Mixture, MixtureComponent, VariableSchema

    target = spec.target
    first_alphabet = tuple(dict.fromkeys(a[0] for a in target.alphabet))
    new_target = VariableSchema.discrete(target.name, first_alphabet)
    law = spec.law
    t_slot = spec.target_index
    if isinstance(law, DiscreteTable):
        entries = {}
        for outcome, mass in law.entries.items():
            new_outcome = outcome[:t_slot] + (outcome[t_slot][0],) + outcome[t_slot + 1:]
            entries[new_outcome] = entries.get(new_outcome, 0) + mass
        return DistributionSpec(spec.sources, new_target, DiscreteTable(entries, validate=False),
                                validate=False)
    if isinstance(law, Mixture):
        disc_pos = list(spec.discrete_indices).index(t_slot)
        comps = []
        for c in law.components:
            disc = c.discrete[:disc_pos] + (c.discrete[disc_pos][0],) + c.discrete[disc_pos + 1:]
            comps.append(MixtureComponent(weight=c.weight, discrete=disc, gaussian=c.gaussian))
        return DistributionSpec(spec.sources, new_target, Mixture(comps, validate=False),
                                validate=False)
    raise ValidationError("discrete composite target requires a discrete or mixture law")


def _continuous_target_projection(spec: DistributionSpec, width: int) -> DistributionSpec:
    from .model import Gaussian, Mixture, MixtureComponent, VariableSchema

    target = spec.target
    new_target = VariableSchema.continuous(target.name, width)
    t_block = spec.cont_block(spec.target_index)
    keep = list(range(t_block.start)) + list(range(t_block.start, t_block.start + width))
    law = spec.law
    if isinstance(law, Gaussian):
        return DistributionSpec(spec.sources, new_target, law.marginal(keep), validate=False)
    if isinstance(law, Mixture):
        comps = [
            MixtureComponent(weight=c.weight, discrete=c.discrete,
                             gaussian=c.gaussian.marginal(keep))
            for c in law.components
        ]
        return DistributionSpec(spec.sources, new_target, Mixture(comps, validate=False),
                                validate=False)
    raise ValidationError("continuous composite target requires a gaussian or mixture law")


def _combine_target(spec: DistributionSpec, t1, t2):
    target = spec.target
    if target.is_discrete:
        return (t1, t2)
    v1 = (t1,) if isinstance(t1, (int, float)) else tuple(t1)
    v2 = (t2,) if isinstance(t2, (int, float)) else tuple(t2)
    return v1 + v2


def i_sx_conditional(spec: DistributionSpec, antichain, s, t1, t2) -> float:
    """Shared information of the trailing target component given the leading one.

    Defined as the log-ratio of conditional (given the union event) to
    marginal transition densities of ``t2`` given ``t1``, so that the target
    chain rule ``i(t) = i(t1) + i(t2 | t1)`` holds exactly.  Violations of the
    absolute-continuity chain raise :class:`UndefinedPoint`.
    """
    alpha, _ = _as_antichain(antichain)
    t_value = _combine_target(spec, t1, t2)
    s_values, t_value = _split_realization(spec, tuple(s) + (t_value,))
    event = UnionEvent(antichain=alpha, source_values=s_values)
    part = target_part_spec(spec, t1)
    t1_value = part.check_point(tuple(s) + (t1,))[part.target_index]

    try:
        law_full = conditional_law(spec, event)
        law_part = conditional_law(part, event)
    except AllSliceWeightsZero as exc:
        raise UndefinedPoint("realization outside the conditioning support") from exc

    nu_t = law_full.density(t_value)
    nu_t1 = law_part.density(t1_value)
    p_t = response_marginal_block(spec, spec.target.name, [t_value])[0]
    p_t1 = response_marginal_block(part, part.target.name, [t1_value])[0]
    if 0 in (nu_t, nu_t1, p_t, p_t1):
        raise UndefinedPoint("absolute-continuity chain broken at this realization")
    return _log2_ratio(nu_t, nu_t1) - _log2_ratio(p_t, p_t1)
