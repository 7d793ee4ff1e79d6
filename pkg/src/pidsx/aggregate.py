"""Global (averaged) quantities and the full lattice decomposition.

Three integration methods realize the expectation over the joint law:

* ``exact``  -- enumeration of a fully discrete support (no other laws),
* ``grid``   -- tensor-product trapezoid grid over continuous coordinates,
  truncated at a configurable number of marginal standard deviations
  (Gaussian-tail truncation error is far below the quoted tolerances),
* ``mc``     -- Monte Carlo with a counter-based Philox generator, so a seed
  pins the estimate bit-for-bit; the mean uses numpy's pairwise reduction.

Realizations with zero joint density contribute nothing (0 * log convention);
an infinite integrand on a positive-density point raises
:class:`DivergentIntegral` instead of guessing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from .conditioning import (
    UnionEvent,
    _pinned_response_block,
    conditional_law,
    response_marginal_block,
    union_terms,
)
from .errors import ConfigError, ConsistencyError, DivergentIntegral, ValidationError
from .lattice import (
    Antichain,
    Collection,
    LatticeResult,
    enumerate_antichains,
    invert_redundancy,
)
from .model import DiscreteTable, DistributionSpec, Gaussian, Mixture, marginal
from .pointwise import i_sx, i_sx_conditional, target_part_spec

_LN2 = math.log(2.0)


@dataclass(frozen=True)
class IntegrationConfig:
    """How to average local quantities over the joint law."""

    method: str = "exact"            # 'exact' | 'grid' | 'mc'
    grid_points: int = 48
    truncation_sigma: float = 8.0
    mc_samples: int = 100_000
    seed: int = 0
    tolerance: float = 1e-9

    def __post_init__(self):
        if self.method not in ("exact", "grid", "mc"):
            raise ConfigError(f"unknown method {self.method!r}")
        if self.grid_points < 16:
            raise ConfigError("grid_points must be >= 16")
        if self.mc_samples < 10_000:
            raise ConfigError("mc_samples must be >= 10000")
        if not 4.0 <= self.truncation_sigma <= 12.0:
            raise ConfigError("truncation_sigma must lie in [4, 12]")


@dataclass(frozen=True)
class GlobalEstimate:
    """Estimated expectation in bits; stderr only for Monte Carlo."""

    value: float
    stderr: float | None = None
    method: str = "exact"

    def __float__(self):
        return self.value


# ---------------------------------------------------------------------------
# Support enumeration
# ---------------------------------------------------------------------------

def _coordinate_stats(spec: DistributionSpec):
    """Marginal mean and std of every continuous coordinate (grid placement)."""
    law = spec.law
    d = spec.total_cont_dim
    if d == 0:
        return np.zeros(0), np.zeros(0)
    if isinstance(law, Gaussian):
        return law.mean.copy(), np.sqrt(np.diag(law.cov))
    w = np.array([float(c.weight) for c in law.components])
    w = w / w.sum()
    means = np.stack([c.gaussian.mean for c in law.components])
    second = np.stack([np.diag(c.gaussian.cov) + c.gaussian.mean ** 2
                       for c in law.components])
    mean = w @ means
    var = w @ second - mean ** 2
    return mean, np.sqrt(np.maximum(var, 1e-30))


def _axis_grid(mean, std, config):
    lo = mean - config.truncation_sigma * std
    hi = mean + config.truncation_sigma * std
    pts = np.linspace(lo, hi, config.grid_points)
    h = (hi - lo) / (config.grid_points - 1)
    w = np.full(config.grid_points, h)
    w[0] = w[-1] = h / 2.0
    return pts, w


def _tensor_grid(means, stds, config):
    """Tensor grid over a coordinate block: (points (N, d), weights (N,))."""
    if len(means) == 0:
        return np.zeros((1, 0)), np.ones(1)
    axes = [_axis_grid(m, s, config) for m, s in zip(means, stds)]
    mesh = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    pts = np.stack([m.reshape(-1) for m in mesh], axis=1)
    wmesh = np.meshgrid(*[a[1] for a in axes], indexing="ij")
    weights = np.ones(pts.shape[0])
    for wm in wmesh:
        weights = weights * wm.reshape(-1)
    return pts, weights


def _discrete_source_atoms(spec: DistributionSpec):
    """Distinct source-label combinations carried by the law's support."""
    disc_src = [i for i in range(spec.n_sources) if spec.sources[i].is_discrete]
    law = spec.law
    if not disc_src:
        return [()]
    if isinstance(law, DiscreteTable):
        seen = dict.fromkeys(tuple(o[i] for i in disc_src) for o in law.entries)
        return list(seen)
    disc_pos = {v: k for k, v in enumerate(spec.discrete_indices)}
    seen = dict.fromkeys(
        tuple(c.discrete[disc_pos[i]] for i in disc_src) for c in law.components
    )
    return list(seen)


def _source_points(spec: DistributionSpec, config):
    """Yield (source_values, lambda_weight) covering the source support."""
    disc_src = [i for i in range(spec.n_sources) if spec.sources[i].is_discrete]
    cont_src = [i for i in range(spec.n_sources) if not spec.sources[i].is_discrete]
    means, stds = _coordinate_stats(spec)
    idx = [j for i in cont_src for j in range(spec.cont_block(i).start, spec.cont_block(i).stop)]
    pts, weights = _tensor_grid(means[idx], stds[idx], config)

    for atoms in _discrete_source_atoms(spec):
        for row, w in zip(pts, weights):
            values = [None] * spec.n_sources
            for label, i in zip(atoms, disc_src):
                values[i] = label
            offset = 0
            for i in cont_src:
                width = spec.sources[i].width
                chunk = row[offset:offset + width]
                values[i] = float(chunk[0]) if width == 1 else tuple(float(x) for x in chunk)
                offset += width
            yield tuple(values), float(w)


def _target_block(spec: DistributionSpec, config):
    """Target evaluation block: (t_values, lambda_weights ndarray)."""
    target = spec.target
    if target.is_discrete:
        return list(target.alphabet), np.ones(len(target.alphabet))
    means, stds = _coordinate_stats(spec)
    block = spec.cont_block(spec.target_index)
    pts, weights = _tensor_grid(means[block], stds[block], config)
    if target.dimension == 1:
        return [float(p[0]) for p in pts], weights
    return [tuple(float(x) for x in p) for p in pts], weights


def _all_source_indices(spec) -> tuple[int, ...]:
    return tuple(range(1, spec.n_sources + 1))


def _joint_block(spec, s_values, t_values) -> np.ndarray:
    """Joint density of (s fixed, t in block) as a float vector."""
    block = _pinned_response_block(spec, _all_source_indices(spec), s_values,
                                   spec.target.name, t_values)
    if isinstance(block, list):
        return np.array([float(b) for b in block])
    return np.asarray(block, dtype=float)


# ---------------------------------------------------------------------------
# Generic expectation drivers
# ---------------------------------------------------------------------------

def _expect_exact(spec, local_block):
    """Exact expectation on a fully discrete law.

    ``local_block(s_values, t_values) -> list of floats`` evaluates the local
    quantity for one source realization and several target values.
    """
    law = spec.law
    if not isinstance(law, DiscreteTable):
        raise ConfigError("exact summation requires a fully discrete law")
    by_source: dict[tuple, list] = {}
    for outcome, mass in law.entries.items():
        if mass == 0:
            continue
        s, t = outcome[:spec.n_sources], outcome[spec.target_index]
        by_source.setdefault(s, []).append((t, mass))
    pieces = []
    for s, pairs in sorted(by_source.items(), key=lambda kv: repr(kv[0])):
        values = local_block(s, [t for t, _ in pairs])
        for (t, mass), v in zip(pairs, values):
            if not math.isfinite(v):
                raise DivergentIntegral(
                    f"local value {v} on outcome {s + (t,)} of mass {float(mass)}"
                )
            pieces.append(float(mass) * v)
    return math.fsum(pieces)


def _expect_grid_impl(spec, local_block, config):
    pieces = []
    t_values, t_weights = _target_block(spec, config)
    for s_values, s_w in _source_points(spec, config):
        joint = _joint_block(spec, s_values, t_values)
        live = joint > 0.0
        if not live.any():
            continue
        values = np.asarray(local_block(s_values, t_values), dtype=float)
        bad = live & ~np.isfinite(values)
        if bad.any():
            raise DivergentIntegral("integrand infinite on a positive-density region")
        contrib = s_w * t_weights[live] * joint[live] * values[live]
        pieces.append(float(contrib.sum()))
    return math.fsum(pieces)


def _expect_mc(spec, local_scalar, config, vector_fn=None):
    """Monte Carlo expectation; ``vector_fn`` is an optional fast batch path."""
    rng = np.random.Generator(np.random.Philox(config.seed))
    realizations = sample_joint(spec, config.mc_samples, rng)
    if vector_fn is not None:
        values = vector_fn(realizations)
    else:
        values = np.array([local_scalar(r) for r in realizations], dtype=float)
    if not np.isfinite(values).all():
        raise DivergentIntegral("integrand infinite on sampled realizations")
    mean = float(np.mean(values))
    stderr = float(np.std(values, ddof=1) / math.sqrt(len(values)))
    return mean, stderr


# ---------------------------------------------------------------------------
# Joint sampling
# ---------------------------------------------------------------------------

def sample_joint(spec: DistributionSpec, n: int, rng: np.random.Generator):
    """Draw ``n`` realizations of the joint law as schema-shaped tuples."""
    law = spec.law
    if isinstance(law, DiscreteTable):
        outcomes = sorted(law.entries, key=repr)
        probs = np.array([float(law.entries[o]) for o in outcomes])
        probs = probs / probs.sum()
        picks = rng.choice(len(outcomes), size=n, p=probs)
        return [outcomes[k] for k in picks]
    if isinstance(law, Gaussian):
        draws = rng.multivariate_normal(law.mean, law.cov, size=n, method="cholesky")
        return [_vector_to_point(spec, (), row) for row in draws]
    comps = law.components
    weights = np.array([float(c.weight) for c in comps])
    weights = weights / weights.sum()
    picks = rng.choice(len(comps), size=n, p=weights)
    out: list = [None] * n
    for k, comp in enumerate(comps):
        rows = np.nonzero(picks == k)[0]
        if rows.size == 0:
            continue
        if comp.gaussian is not None:
            draws = rng.multivariate_normal(comp.gaussian.mean, comp.gaussian.cov,
                                            size=rows.size, method="cholesky")
        else:
            draws = np.zeros((rows.size, 0))
        for r, row in zip(rows, draws):
            out[r] = _vector_to_point(spec, comp.discrete, row)
    return out


def _vector_to_point(spec, disc_labels, cont_row):
    disc_iter = iter(disc_labels)
    values = []
    offset = 0
    for var in spec.variables:
        if var.is_discrete:
            values.append(next(disc_iter))
        else:
            chunk = cont_row[offset:offset + var.width]
            values.append(float(chunk[0]) if var.width == 1 else tuple(float(x) for x in chunk))
            offset += var.width
    return tuple(values)


# ---------------------------------------------------------------------------
# Fast paired evaluation on pure Gaussian laws
# ---------------------------------------------------------------------------

def _gaussian_paired_isx(spec: DistributionSpec, antichain: Antichain, realizations):
    """Vectorized shared information over paired realizations (Gaussian law).

    Mirrors the scalar path exactly: minimal-codimension level terms with
    inclusion-exclusion signs and scale factors.  Consistency with
    :func:`pidsx.pointwise.i_sx` is pinned by tests.
    """
    law = spec.law
    n = spec.n_sources
    X = np.array([[*_flatten_point(spec, r)] for r in realizations])
    t_block = spec.cont_block(spec.target_index)
    T = X[:, t_block]

    singles = {tuple(c.indices): _codim_of(spec, tuple(c.indices)) for c in antichain}
    c_star = min(singles.values())
    terms = [(u, coef) for u, coef in union_terms(antichain)
             if _codim_of(spec, u) == c_star]

    p_t = np.exp(law.marginal(list(range(t_block.start, t_block.stop))).logpdf_batch(T))
    G = np.zeros(X.shape[0])
    W = np.zeros(X.shape[0])
    for u, coef in terms:
        factor = 1.0
        for i in u:
            factor *= spec.thickening_scale(i - 1)
        u_coords = [j for i in u
                    for j in range(spec.cont_block(i - 1).start, spec.cont_block(i - 1).stop)]
        S_u = X[:, u_coords]
        log_w = law.marginal(u_coords).logpdf_batch(S_u)
        sub = law.marginal(u_coords + list(range(t_block.start, t_block.stop)))
        pin = list(range(len(u_coords)))
        gain, offset, cov = sub.conditional_map(pin)
        cond = Gaussian(np.zeros(cov.shape[0]), cov, validate=False)
        L = cond.chol()
        diffs = T - (S_u @ gain.T + offset)
        z = np.linalg.solve(L, diffs.T)
        quad = np.sum(z * z, axis=0)
        logdet = 2.0 * np.sum(np.log(np.diag(L)))
        log_cond = -0.5 * (quad + logdet + cov.shape[0] * math.log(2 * math.pi))
        G += coef * factor * np.exp(log_w + log_cond)
        W += coef * factor * np.exp(log_w)
    return (np.log2(G) - np.log2(W)) - np.log2(p_t)


def _flatten_point(spec, realization):
    point = spec.check_point(realization)
    out = []
    for v, var in zip(point, spec.variables):
        if var.is_discrete:
            continue
        out.extend([v] if isinstance(v, float) else list(v))
    return out


def _codim_of(spec, indices):
    return sum(spec.sources[i - 1].width for i in indices)


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------

def global_i_sx(spec: DistributionSpec, antichain, config: IntegrationConfig) -> GlobalEstimate:
    """Average shared information of the antichain about the target, in bits."""
    alpha = antichain if isinstance(antichain, Antichain) else Antichain.reduced(antichain)
    if spec.target is None:
        raise ValidationError("global averages require a target")

    if config.method == "exact":
        value = _expect_exact(spec, _isx_block_fn(spec, alpha))
        return GlobalEstimate(value=value, method="exact")
    if config.method == "grid":
        value = _expect_grid_impl(spec, _isx_block_fn(spec, alpha), config)
        return GlobalEstimate(value=value, method="grid")

    vector_fn = None
    if isinstance(spec.law, Gaussian):
        vector_fn = lambda rs: _gaussian_paired_isx(spec, alpha, rs)
    mean, stderr = _expect_mc(
        spec, lambda r: i_sx(spec, alpha, r).i_sx, config, vector_fn=vector_fn
    )
    return GlobalEstimate(value=mean, stderr=stderr, method="mc")


def _isx_block_fn(spec, alpha):
    target = spec.target.name
    p_t_cache: dict[int, object] = {}

    def block(s_values, t_values):
        key = tuple(t_values)
        if key not in p_t_cache:
            p_t_cache[key] = response_marginal_block(spec, target, t_values)
        p_t = p_t_cache[key]
        law = conditional_law(spec, UnionEvent(antichain=alpha, source_values=s_values))
        nu = law.density_batch(t_values)
        out = []
        for nu_i, pt_i in zip(nu, p_t):
            if pt_i == 0 or nu_i == 0:
                out.append(-math.inf if nu_i == 0 and pt_i != 0 else math.inf)
            else:
                out.append(math.log2(float(nu_i) / float(pt_i)))
        return out

    return block


def global_conditional(spec: DistributionSpec, antichain, config: IntegrationConfig,
                       t1_width: int | None = None) -> GlobalEstimate:
    """Average shared information about the trailing target component given
    the leading one; composite targets only."""
    alpha = antichain if isinstance(antichain, Antichain) else Antichain.reduced(antichain)
    split = _target_splitter(spec, t1_width)

    def scalar(realization):
        s = realization[:spec.n_sources]
        t1, t2 = split(realization[spec.target_index])
        return i_sx_conditional(spec, alpha, s, t1, t2)

    if config.method == "exact":
        def block(s_values, t_values):
            return [scalar(s_values + (t,)) for t in t_values]
        return GlobalEstimate(value=_expect_exact(spec, block), method="exact")
    if config.method == "grid":
        def block(s_values, t_values):
            return [scalar(s_values + (t,)) for t in t_values]
        return GlobalEstimate(value=_expect_grid_impl(spec, block, config), method="grid")
    mean, stderr = _expect_mc(spec, scalar, config)
    return GlobalEstimate(value=mean, stderr=stderr, method="mc")


def _target_splitter(spec, t1_width):
    target = spec.target
    if target.is_discrete:
        if not all(isinstance(a, tuple) and len(a) == 2 for a in target.alphabet):
            raise ValidationError("composite discrete target needs 2-tuple labels")
        return lambda t: (t[0], t[1])
    if t1_width is None or not 1 <= t1_width < target.dimension:
        raise ValidationError("t1_width must split the continuous target")

    def split(t):
        vec = (t,) if isinstance(t, float) else tuple(t)
        a, b = vec[:t1_width], vec[t1_width:]
        return (a[0] if len(a) == 1 else a, b[0] if len(b) == 1 else b)

    return split


def mutual_information(spec: DistributionSpec, collection,
                       config: IntegrationConfig | None = None) -> float:
    """Textbook mutual information I(T : S_collection) in bits.

    Computed straight from marginal laws (never through union events), so it
    serves as the independent side of the decomposition consistency check.
    """
    if not isinstance(collection, Collection):
        collection = Collection.of(collection)
    names = [spec.sources[i - 1].name for i in collection.indices]
    target = spec.target.name
    sub = marginal(spec, names + [target])
    law = sub.law

    if isinstance(law, DiscreteTable):
        t_slot = sub.target_index
        p_s: dict = {}
        p_t: dict = {}
        for outcome, mass in law.entries.items():
            s, t = outcome[:t_slot], outcome[t_slot]
            p_s[s] = p_s.get(s, 0) + mass
            p_t[t] = p_t.get(t, 0) + mass
        total = []
        for outcome, mass in sorted(law.entries.items(), key=lambda kv: repr(kv[0])):
            if mass == 0:
                continue
            s, t = outcome[:t_slot], outcome[t_slot]
            ratio = mass / (p_s[s] * p_t[t])
            total.append(float(mass) * math.log2(float(ratio)))
        return math.fsum(total)

    if isinstance(law, Gaussian):
        t_block = sub.cont_block(sub.target_index)
        s_idx = list(range(0, t_block.start))
        t_idx = list(range(t_block.start, t_block.stop))
        sign_s, logdet_s = np.linalg.slogdet(law.cov[np.ix_(s_idx, s_idx)])
        sign_t, logdet_t = np.linalg.slogdet(law.cov[np.ix_(t_idx, t_idx)])
        sign_j, logdet_j = np.linalg.slogdet(law.cov)
        return 0.5 * (logdet_s + logdet_t - logdet_j) / _LN2

    cfg = config or IntegrationConfig(method="grid")
    from .pointwise import local_mi
    full = Collection.of(range(1, sub.n_sources + 1))

    def block(s_values, t_values):
        return [local_mi(sub, full, s_values + (t,)) for t in t_values]

    return _expect_grid_impl(sub, block, cfg)


def decompose(spec: DistributionSpec, config: IntegrationConfig) -> LatticeResult:
    """Redundancy of every antichain plus the atom decomposition.

    After inverting the linear system the atoms are verified against
    independently computed mutual information for every collection; a
    violation raises :class:`ConsistencyError`.
    """
    n = spec.n_sources
    chains = enumerate_antichains(n)
    estimates = {a: global_i_sx(spec, a, config) for a in chains}
    redundancies = {a: e.value for a, e in estimates.items()}
    atoms = invert_redundancy(redundancies, n)

    if config.method == "mc":
        worst = max((e.stderr or 0.0) for e in estimates.values())
        tol = 3.0 * worst * math.sqrt(len(chains))
    elif config.method == "grid":
        tol = max(config.tolerance, 1e-4)
    else:
        tol = config.tolerance

    for size in range(1, n + 1):
        for idx in _collections_of(n, size):
            col = Collection.of(idx)
            lhs = math.fsum(
                float(v) for f, v in atoms.items() if f.value(col) == 1
            )
            rhs = mutual_information(spec, col, config)
            if abs(lhs - rhs) > tol:
                raise ConsistencyError(
                    f"atoms for {col} sum to {lhs:.12g}, measured MI {rhs:.12g} "
                    f"(tolerance {tol:.3g})"
                )
    return LatticeResult(n=n, redundancies=redundancies, atoms=atoms)


def _collections_of(n, size):
    from itertools import combinations
    return combinations(range(1, n + 1), size)
