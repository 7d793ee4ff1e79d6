"""Joint distribution model.

A :class:`DistributionSpec` holds the joint law of ``(S_1, .., S_n, T)`` in
normal form: a discrete probability table, a single Gaussian over all
continuous coordinates, or a finite mixture whose components pair a discrete
atom with a Gaussian block.  Densities are always taken against the fixed
product reference measure: counting measure on discrete coordinates and
Lebesgue measure on continuous ones.

Probability masses parsed from strings like ``"1/4"`` (or JSON integers) are
kept as exact :class:`fractions.Fraction` values, so fully discrete pipelines
can stay in rational arithmetic until the final logarithm.

Points (realizations) are tuples with one slot per variable: a label for a
discrete variable, a float for a 1-D continuous variable, and a tuple of
floats for a multi-dimensional one.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import SingularityError, SpecSyntaxError, ValidationError

NORMALIZATION_TOL = 1e-12
PSD_EIGENVALUE_TOL = -1e-10
CONDITION_NUMBER_CAP = 1e12

_LOG_2PI = math.log(2.0 * math.pi)


# ---------------------------------------------------------------------------
# Schemas
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VariableSchema:
    """One variable: either a finite alphabet or a continuous block."""

    name: str
    alphabet: tuple | None = None
    dimension: int | None = None

    def __post_init__(self):
        if (self.alphabet is None) == (self.dimension is None):
            raise ValidationError(f"variable {self.name!r}: exactly one of alphabet/dimension")
        if self.alphabet is not None:
            alpha = tuple(self.alphabet)
            if not alpha:
                raise ValidationError(f"variable {self.name!r}: alphabet must be non-empty")
            if len(set(alpha)) != len(alpha):
                raise ValidationError(f"variable {self.name!r}: duplicate alphabet labels")
            object.__setattr__(self, "alphabet", alpha)
        else:
            if not isinstance(self.dimension, int) or self.dimension < 1:
                raise ValidationError(f"variable {self.name!r}: dimension must be a positive int")

    @property
    def is_discrete(self) -> bool:
        return self.alphabet is not None

    @property
    def width(self) -> int:
        """Number of continuous coordinates this variable contributes."""
        return 0 if self.is_discrete else self.dimension

    @classmethod
    def discrete(cls, name, alphabet):
        return cls(name=name, alphabet=tuple(alphabet))

    @classmethod
    def continuous(cls, name, dimension=1):
        return cls(name=name, dimension=dimension)


# ---------------------------------------------------------------------------
# Laws
# ---------------------------------------------------------------------------

def _as_mass(value):
    """Parse a probability mass: Fraction for exact inputs, float otherwise."""
    if isinstance(value, bool):
        raise ValidationError(f"mass must be numeric, got {value!r}")
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if isinstance(value, float):
        return value
    if isinstance(value, str):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise ValidationError(f"cannot parse mass {value!r}") from exc
    raise ValidationError(f"mass must be number or rational string, got {type(value)}")


def _mass_is_rational(m) -> bool:
    return isinstance(m, (int, Fraction)) and not isinstance(m, bool)


class DiscreteTable:
    """Joint pmf over the full outcome product, sparse on zero-mass outcomes."""

    def __init__(self, entries: dict, validate: bool = True):
        self.entries = dict(entries)
        if validate:
            for outcome, mass in self.entries.items():
                if mass < 0:
                    raise ValidationError(f"negative mass at {outcome}")
            total = sum(self.entries.values())
            if abs(float(total) - 1.0) > NORMALIZATION_TOL:
                raise ValidationError(f"masses sum to {float(total)!r}, not 1 (normalization)")
        self._rational = all(_mass_is_rational(m) for m in self.entries.values())
        self._zero = Fraction(0) if self._rational else 0.0

    @property
    def is_rational(self) -> bool:
        return self._rational

    def mass(self, outcome):
        return self.entries.get(outcome, self._zero)

    def __eq__(self, other):
        return isinstance(other, DiscreteTable) and self.entries == other.entries


class Gaussian:
    """Mean vector and covariance over a block of continuous coordinates."""

    def __init__(self, mean, cov, validate: bool = True):
        self.mean = np.atleast_1d(np.asarray(mean, dtype=float))
        self.cov = np.atleast_2d(np.asarray(cov, dtype=float))
        if validate:
            d = self.mean.shape[0]
            if self.cov.shape != (d, d):
                raise ValidationError(f"covariance shape {self.cov.shape} vs mean length {d}")
            if not np.allclose(self.cov, self.cov.T, atol=1e-10):
                raise ValidationError("covariance must be symmetric")
            eigs = np.linalg.eigvalsh(self.cov)
            if eigs.min() < PSD_EIGENVALUE_TOL:
                raise ValidationError(f"covariance not PSD (min eigenvalue {eigs.min():.3e})")
        self._chol = None

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def chol(self) -> np.ndarray:
        """Lower Cholesky factor; strict PD with a condition-number guard."""
        if self._chol is None:
            try:
                L = np.linalg.cholesky(self.cov)
            except np.linalg.LinAlgError as exc:
                raise SingularityError("covariance is singular") from exc
            diag = np.diag(L)
            if (diag.max() / diag.min()) ** 2 > CONDITION_NUMBER_CAP:
                raise SingularityError("covariance condition number exceeds guard")
            self._chol = L
        return self._chol

    def logpdf(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(self.logpdf_batch(x.reshape(1, -1))[0])

    def logpdf_batch(self, X: np.ndarray) -> np.ndarray:
        L = self.chol()
        diff = np.atleast_2d(X) - self.mean
        z = np.linalg.solve(L, diff.T)
        quad = np.sum(z * z, axis=0)
        logdet = 2.0 * np.sum(np.log(np.diag(L)))
        return -0.5 * (quad + logdet + self.dim * _LOG_2PI)

    def marginal(self, coords) -> "Gaussian":
        idx = np.asarray(coords, dtype=int)
        return Gaussian(self.mean[idx], self.cov[np.ix_(idx, idx)], validate=False)

    def conditional(self, pinned, values) -> "Gaussian":
        """Closed-form conditional of the remaining coordinates given pinned ones."""
        pinned = list(pinned)
        keep = [i for i in range(self.dim) if i not in pinned]
        if not pinned:
            return self.marginal(keep)
        a = np.asarray(values, dtype=float)
        Saa = self.cov[np.ix_(pinned, pinned)]
        Sba = self.cov[np.ix_(keep, pinned)]
        Sbb = self.cov[np.ix_(keep, keep)]
        try:
            solve = np.linalg.solve(Saa, (a - self.mean[pinned]))
            gain = np.linalg.solve(Saa, Sba.T).T
        except np.linalg.LinAlgError as exc:
            raise SingularityError("pinned covariance block is singular") from exc
        mean = self.mean[keep] + Sba @ solve
        cov = Sbb - gain @ Sba.T
        return Gaussian(mean, cov, validate=False)

    def conditional_map(self, pinned):
        """Affine map (gain, offset, cov) so that mean(x_pinned) = gain @ x + offset."""
        pinned = list(pinned)
        keep = [i for i in range(self.dim) if i not in pinned]
        Saa = self.cov[np.ix_(pinned, pinned)]
        Sba = self.cov[np.ix_(keep, pinned)]
        Sbb = self.cov[np.ix_(keep, keep)]
        gain = np.linalg.solve(Saa, Sba.T).T
        offset = self.mean[keep] - gain @ self.mean[pinned]
        cov = Sbb - gain @ Sba.T
        return gain, offset, cov

    def __eq__(self, other):
        return (
            isinstance(other, Gaussian)
            and np.array_equal(self.mean, other.mean)
            and np.array_equal(self.cov, other.cov)
        )


@dataclass
class MixtureComponent:
    """One weighted atom: a discrete outcome paired with a Gaussian block."""

    weight: object
    discrete: tuple
    gaussian: Gaussian | None

    def __post_init__(self):
        self.discrete = tuple(self.discrete)


class Mixture:
    """Weighted sum of mixture components (the mixed normal form)."""

    def __init__(self, components, validate: bool = True):
        self.components = list(components)
        if validate:
            if not self.components:
                raise ValidationError("mixture must have at least one component")
            for c in self.components:
                if c.weight < 0:
                    raise ValidationError("mixture weights must be non-negative")
            total = sum(c.weight for c in self.components)
            if abs(float(total) - 1.0) > NORMALIZATION_TOL:
                raise ValidationError(f"mixture weights sum to {float(total)!r}, not 1")

    @property
    def is_rational(self) -> bool:
        return all(_mass_is_rational(c.weight) for c in self.components)

    def __eq__(self, other):
        if not isinstance(other, Mixture) or len(self.components) != len(other.components):
            return False
        return all(
            a.weight == b.weight and a.discrete == b.discrete and a.gaussian == b.gaussian
            for a, b in zip(self.components, other.components)
        )


# ---------------------------------------------------------------------------
# DistributionSpec
# ---------------------------------------------------------------------------

class DistributionSpec:
    """Schema plus law for a joint distribution of sources and target.

    Immutable after construction; marginals, Cholesky factors, and thickening
    scale factors are cached internally, so instances are cheap to reuse and
    safe to share across threads.

    ``target`` may be ``None`` for marginal views produced by
    :func:`marginal`; top-level specs parsed from documents always carry one.
    """

    def __init__(self, sources, target, law, validate=True, gauge_from=None):
        self.sources = tuple(sources)
        self.target = target
        self.law = law
        self._marginal_cache = {}
        self._gauge_from = gauge_from
        self._gauge_cache = {}
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise ValidationError("variable names must be unique")
        if validate:
            self._validate()

    # -- structure ---------------------------------------------------------

    @property
    def variables(self) -> tuple[VariableSchema, ...]:
        return self.sources + ((self.target,) if self.target is not None else ())

    @property
    def n_sources(self) -> int:
        return len(self.sources)

    def var_index(self, name: str) -> int:
        for i, v in enumerate(self.variables):
            if v.name == name:
                return i
        raise ValidationError(f"unknown variable {name!r}")

    @property
    def target_index(self) -> int:
        if self.target is None:
            raise ValidationError("this spec has no target variable")
        return len(self.sources)

    def cont_block(self, var_i: int) -> slice:
        """Slice of this variable's coordinates inside the continuous vector."""
        start = sum(v.width for v in self.variables[:var_i])
        return slice(start, start + self.variables[var_i].width)

    @property
    def total_cont_dim(self) -> int:
        return sum(v.width for v in self.variables)

    @property
    def discrete_indices(self) -> tuple[int, ...]:
        return tuple(i for i, v in enumerate(self.variables) if v.is_discrete)

    @property
    def continuous_indices(self) -> tuple[int, ...]:
        return tuple(i for i, v in enumerate(self.variables) if not v.is_discrete)

    @property
    def is_rational(self) -> bool:
        return isinstance(self.law, (DiscreteTable, Mixture)) and self.law.is_rational

    # -- validation --------------------------------------------------------

    def _validate(self):
        law = self.law
        if isinstance(law, DiscreteTable):
            if self.continuous_indices:
                raise ValidationError("discrete table requires all variables discrete")
            for outcome in law.entries:
                self.check_point(outcome)
        elif isinstance(law, Gaussian):
            if self.discrete_indices:
                raise ValidationError("gaussian law requires all variables continuous")
            if law.dim != self.total_cont_dim:
                raise ValidationError(
                    f"gaussian dimension {law.dim} != schema dimension {self.total_cont_dim}"
                )
        elif isinstance(law, Mixture):
            n_disc = len(self.discrete_indices)
            for c in law.components:
                if len(c.discrete) != n_disc:
                    raise ValidationError("component discrete part does not match schema")
                for slot, var_i in zip(c.discrete, self.discrete_indices):
                    if slot not in self.variables[var_i].alphabet:
                        raise ValidationError(f"label {slot!r} not in alphabet of "
                                              f"{self.variables[var_i].name!r}")
                if self.total_cont_dim == 0:
                    if c.gaussian is not None:
                        raise ValidationError("no continuous coordinates but component has a gaussian")
                else:
                    if c.gaussian is None or c.gaussian.dim != self.total_cont_dim:
                        raise ValidationError("component gaussian dimension mismatch")
        else:
            raise ValidationError(f"unsupported law type {type(law)}")

    def check_point(self, point):
        """Validate and normalize one realization tuple against the schema."""
        point = tuple(point)
        if len(point) != len(self.variables):
            raise ValidationError(
                f"point has {len(point)} slots, schema has {len(self.variables)}"
            )
        return tuple(normalize_value(var, v) for v, var in zip(point, self.variables))

    # -- point helpers -----------------------------------------------------

    def split_point(self, point):
        """Split a normalized point into (discrete labels, continuous vector)."""
        disc, cont = [], []
        for value, var in zip(point, self.variables):
            if var.is_discrete:
                disc.append(value)
            elif var.dimension == 1:
                cont.append(value)
            else:
                cont.extend(value)
        return tuple(disc), np.array(cont, dtype=float)

    def thickening_scale(self, var_i: int) -> float:
        """Reference scale factor for conditioning on this continuous variable.

        Volume of the unit Mahalanobis ball of the variable's own marginal
        covariance, normalized so a standard 1-D variable has factor 1.  Using
        the variable's own scale keeps measure-zero conditioning invariant
        under per-variable invertible affine maps; blends inherit the factors
        of their base spec so derivatives stay clean.
        """
        if self._gauge_from is not None:
            return self._gauge_from.thickening_scale(var_i)
        if var_i in self._gauge_cache:
            return self._gauge_cache[var_i]
        var = self.variables[var_i]
        if var.is_discrete:
            factor = 1.0
        else:
            sub = marginal(self, [var.name])
            g = _sole_gaussian(sub)
            d = var.dimension
            det = float(np.linalg.det(g.cov))
            if det <= 0:
                raise SingularityError(f"degenerate marginal covariance for {var.name!r}")
            unit_ball = math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0)
            factor = unit_ball * math.sqrt(det) / (2.0 ** d)
        self._gauge_cache[var_i] = factor
        return factor

    def __eq__(self, other):
        return (
            isinstance(other, DistributionSpec)
            and self.sources == other.sources
            and self.target == other.target
            and self.law == other.law
        )


def _sole_gaussian(spec: DistributionSpec) -> Gaussian:
    """The Gaussian governing a fully continuous one-variable marginal."""
    if isinstance(spec.law, Gaussian):
        return spec.law
    if isinstance(spec.law, Mixture):
        comps = spec.law.components
        if len(comps) == 1 and not comps[0].discrete:
            return comps[0].gaussian
        # moment-match: scale factors only need the overall covariance
        w = np.array([float(c.weight) for c in comps])
        w = w / w.sum()
        means = np.stack([c.gaussian.mean for c in comps])
        mean = w @ means
        cov = sum(
            wi * (c.gaussian.cov + np.outer(c.gaussian.mean - mean, c.gaussian.mean - mean))
            for wi, c in zip(w, comps)
        )
        return Gaussian(mean, cov, validate=False)
    raise ValidationError("marginal has no continuous structure")


# ---------------------------------------------------------------------------
# Parsing and serialization
# ---------------------------------------------------------------------------

def _parse_schema(obj, where) -> VariableSchema:
    if not isinstance(obj, dict) or "name" not in obj or "kind" not in obj:
        raise SpecSyntaxError("variable needs 'name' and 'kind'", where)
    kind = obj["kind"]
    if kind == "discrete":
        if "alphabet" not in obj:
            raise SpecSyntaxError("discrete variable needs 'alphabet'", where)
        alphabet = tuple(tuple(a) if isinstance(a, list) else a for a in obj["alphabet"])
        return VariableSchema.discrete(obj["name"], alphabet)
    if kind == "continuous":
        return VariableSchema.continuous(obj["name"], int(obj.get("dimension", 1)))
    raise SpecSyntaxError(f"unknown kind {kind!r}", where)


def _normalize_label(value):
    return tuple(_normalize_label(v) for v in value) if isinstance(value, list) else value


def normalize_value(var: VariableSchema, value):
    """Coerce one realization slot to schema form (label or float vector)."""
    if var.is_discrete:
        value = _normalize_label(value)
        if value not in var.alphabet:
            raise ValidationError(f"label {value!r} not in alphabet of {var.name!r}")
        return value
    if var.dimension == 1 and isinstance(value, (int, float)):
        return float(value)
    vec = tuple(float(x) for x in value)
    if len(vec) != var.dimension:
        raise ValidationError(
            f"{var.name!r} expects {var.dimension} coordinates, got {len(vec)}"
        )
    return vec


def parse_spec(text: str) -> DistributionSpec:
    """Parse and validate a JSON spec document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecSyntaxError(f"invalid JSON: {exc.msg}", f"line {exc.lineno} col {exc.colno}")
    if not isinstance(doc, dict):
        raise SpecSyntaxError("top level must be an object")
    for key in ("sources", "target", "law"):
        if key not in doc:
            raise SpecSyntaxError(f"missing top-level key {key!r}")
    sources = [_parse_schema(s, f"sources[{i}]") for i, s in enumerate(doc["sources"])]
    target = _parse_schema(doc["target"], "target")
    law_doc = doc["law"]
    if not isinstance(law_doc, dict) or "type" not in law_doc:
        raise SpecSyntaxError("law needs a 'type'", "law")
    kind = law_doc["type"]
    if kind == "discrete":
        entries = {}
        for i, row in enumerate(law_doc.get("table", [])):
            if len(row) != len(sources) + 2:
                raise SpecSyntaxError("table row length must be #variables + 1", f"law.table[{i}]")
            outcome = tuple(_normalize_label(v) for v in row[:-1])
            entries[outcome] = entries.get(outcome, 0) + _as_mass(row[-1])
        law = DiscreteTable(entries)
    elif kind == "gaussian":
        law = Gaussian(law_doc["mean"], law_doc["cov"])
    elif kind == "mixture":
        comps = []
        for i, c in enumerate(law_doc.get("components", [])):
            gauss = None
            if "mean" in c or "cov" in c:
                gauss = Gaussian(c["mean"], c["cov"])
            comps.append(MixtureComponent(
                weight=_as_mass(c["weight"]),
                discrete=tuple(_normalize_label(v) for v in c.get("discrete", [])),
                gaussian=gauss,
            ))
        law = Mixture(comps)
    else:
        raise SpecSyntaxError(f"unknown law type {kind!r}", "law")
    return DistributionSpec(sources, target, law)


def _mass_json(m):
    if _mass_is_rational(m):
        f = Fraction(m)
        return str(f.numerator) if f.denominator == 1 else f"{f.numerator}/{f.denominator}"
    return m


def _label_json(value):
    return [_label_json(v) for v in value] if isinstance(value, tuple) else value


def _schema_json(var: VariableSchema):
    if var.is_discrete:
        return {"name": var.name, "kind": "discrete",
                "alphabet": [_label_json(a) for a in var.alphabet]}
    return {"name": var.name, "kind": "continuous", "dimension": var.dimension}


def serialize(spec: DistributionSpec) -> str:
    """Render a spec back to its JSON document form (parse round-trips)."""
    law = spec.law
    if isinstance(law, DiscreteTable):
        table = [
            [* [_label_json(v) for v in outcome], _mass_json(mass)]
            for outcome, mass in sorted(law.entries.items(), key=lambda kv: repr(kv[0]))
        ]
        law_doc = {"type": "discrete", "table": table}
    elif isinstance(law, Gaussian):
        law_doc = {"type": "gaussian", "mean": law.mean.tolist(), "cov": law.cov.tolist()}
    else:
        law_doc = {"type": "mixture", "components": [
            {
                "weight": _mass_json(c.weight),
                "discrete": [_label_json(v) for v in c.discrete],
                **({"mean": c.gaussian.mean.tolist(), "cov": c.gaussian.cov.tolist()}
                   if c.gaussian is not None else {}),
            }
            for c in law.components
        ]}
    doc = {
        "sources": [_schema_json(v) for v in spec.sources],
        "target": _schema_json(spec.target) if spec.target is not None else None,
        "law": law_doc,
    }
    return json.dumps(doc, indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# Marginalization
# ---------------------------------------------------------------------------

def _resolve_vars(spec: DistributionSpec, coords) -> list[int]:
    out = []
    for c in coords:
        if isinstance(c, str):
            out.append(spec.var_index(c))
        elif isinstance(c, int):
            if not 0 <= c < len(spec.variables):
                raise ValidationError(f"variable index {c} out of range")
            out.append(c)
        else:
            raise ValidationError(f"cannot resolve coordinate {c!r}")
    if not out:
        raise ValidationError("marginal requires a non-empty coordinate set")
    if len(set(out)) != len(out):
        raise ValidationError("duplicate coordinates in marginal")
    return sorted(out)


def marginal(spec: DistributionSpec, coords) -> DistributionSpec:
    """Exact marginal onto a subset of variables (names or indices).

    Kept variables preserve their source/target roles; marginals that drop
    the target are plain source laws with ``target=None``.
    """
    keep = _resolve_vars(spec, coords)
    key = tuple(keep)
    cached = spec._marginal_cache.get(key)
    if cached is not None:
        return cached

    kept_vars = [spec.variables[i] for i in keep]
    has_target = spec.target is not None and spec.target_index in keep
    new_sources = tuple(v for i, v in zip(keep, kept_vars) if i != len(spec.sources)) \
        if spec.target is not None else tuple(kept_vars)
    new_target = spec.target if has_target else None

    law = spec.law
    if isinstance(law, DiscreteTable):
        entries = {}
        for outcome, mass in law.entries.items():
            sub = tuple(outcome[i] for i in keep)
            entries[sub] = entries.get(sub, 0) + mass
        new_law = DiscreteTable(entries, validate=False)
    elif isinstance(law, Gaussian):
        idx = [j for i in keep for j in range(spec.cont_block(i).start, spec.cont_block(i).stop)]
        new_law = law.marginal(idx)
    else:
        disc_pos = {v: k for k, v in enumerate(spec.discrete_indices)}
        cont_idx = [j for i in keep for j in range(spec.cont_block(i).start, spec.cont_block(i).stop)]
        kept_disc = [i for i in keep if spec.variables[i].is_discrete]
        comps = []
        for c in law.components:
            disc = tuple(c.discrete[disc_pos[i]] for i in kept_disc)
            gauss = c.gaussian.marginal(cont_idx) if cont_idx else None
            comps.append(MixtureComponent(weight=c.weight, discrete=disc, gaussian=gauss))
        if not cont_idx:
            entries = {}
            for c in comps:
                entries[c.discrete] = entries.get(c.discrete, 0) + c.weight
            new_law = DiscreteTable(entries, validate=False)
        elif not kept_disc and len(comps) == 1:
            new_law = comps[0].gaussian
        else:
            new_law = Mixture(comps, validate=False)

    out = DistributionSpec(new_sources, new_target, new_law, validate=False)
    spec._marginal_cache[key] = out
    return out


# ---------------------------------------------------------------------------
# Density
# ---------------------------------------------------------------------------

def density(spec: DistributionSpec, point):
    """Density of the law at ``point`` against counting x Lebesgue measure.

    Fully discrete rational laws return exact Fractions; anything touching a
    Gaussian returns a float.
    """
    point = spec.check_point(point)
    law = spec.law
    if isinstance(law, DiscreteTable):
        return law.mass(point)
    disc, cont = spec.split_point(point)
    if isinstance(law, Gaussian):
        return math.exp(law.logpdf(cont))
    total = 0.0
    for c in law.components:
        if c.discrete != disc:
            continue
        if c.gaussian is None:
            total += float(c.weight)
        else:
            total += float(c.weight) * math.exp(c.gaussian.logpdf(cont))
    return total


def blend(spec: DistributionSpec, direction: DistributionSpec, eps) -> DistributionSpec:
    """Unnormalized perturbation ``law(spec) + eps * law(direction)``.

    Used by derivative checks; total mass is ``1 + eps`` on purpose, and the
    result inherits the base spec's thickening scale factors so measure-zero
    conditioning varies smoothly along the path.
    """
    if spec.variables != direction.variables:
        raise ValidationError("blend requires identical schemas")
    base = spec._gauge_from or spec
    p, q = spec.law, direction.law
    if isinstance(p, DiscreteTable) and isinstance(q, DiscreteTable):
        entries = dict(p.entries)
        for outcome, mass in q.entries.items():
            entries[outcome] = entries.get(outcome, 0) + eps * mass
        law = DiscreteTable(entries, validate=False)
    else:
        comps = [*_componentize(spec, 1), *_componentize(direction, eps)]
        law = Mixture(comps, validate=False)
    return DistributionSpec(spec.sources, spec.target, law, validate=False, gauge_from=base)


def _componentize(spec: DistributionSpec, scale) -> list[MixtureComponent]:
    law = spec.law
    if isinstance(law, Gaussian):
        return [MixtureComponent(weight=scale, discrete=(), gaussian=law)]
    if isinstance(law, Mixture):
        return [
            MixtureComponent(weight=scale * c.weight, discrete=c.discrete, gaussian=c.gaussian)
            for c in law.components
        ]
    if isinstance(law, DiscreteTable):
        return [
            MixtureComponent(weight=scale * m, discrete=outcome, gaussian=None)
            for outcome, m in law.entries.items()
        ]
    raise ValidationError(f"cannot blend law of type {type(law)}")
