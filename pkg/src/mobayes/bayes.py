"""Multi-object Bayes updates on finite spaces, three ways.

Given a prior multi-object density, a per-object measurement-group kernel
and an observed measurement set Z, the posterior is computed by

* posterior_direct: brute force over all (n+1)^m assignments of measurements
  to objects (and optionally clutter). This is the oracle everything else is
  checked against.
* posterior_partition / posterior_partition_clutter: the generating-
  functional route. Each set partition of Z contributes one variation of the
  prior functional taken at the missed-detection profile, with one increment
  per block; clutter adds an outer sum over the subset of Z explained by the
  clutter process. Evidence is the same sum with no free measurement points.
* posterior_bivariate: a slow numeric oracle that differentiates the joint
  functional of (psi, eta) in both arguments and takes the ratio of
  variations; it exercises the defining limit rather than any closed form.

Partition terms are grouped by the multiset of block contents (sorted
z-labels per block) and accumulated in sorted signature order. The value of
a term depends only on that signature, so grouping is lossless; it makes
results bitwise invariant under reordering of Z and collapses the many
content-equal partitions that arise when measurements repeat.

posterior_intensity* evaluate the first factorial moment directly from the
partition sum: each partition contributes an appended-increment term (one
extra Dirac increment weighted by the missed-detection profile) plus one
replaced-increment term per block (that block's increment localized at the
query point). Poisson priors additionally get closed forms in which every
variation collapses to a product of scalars mu[P_block].
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .combinatorics import Partition, partitions, subsets
from .finite_pp import (
    NORMALIZATION_TOL,
    FiniteSpace,
    MultiObjectDensity,
    PoissonSpec,
    _as_test_function,
    evaluate,
    poisson as poisson_density,
    symmetrize,
    symmetrize_axes,
)
from .functional_calculus import numeric_differential

MeasurementSet = Sequence[str | int]
ClutterProcess = MultiObjectDensity


class ZeroEvidence(RuntimeError):
    """The update denominator vanished: Z is impossible under the model."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


@dataclass
class Posterior:
    """Normalized posterior density, its intensity, and log evidence."""

    density: MultiObjectDensity
    intensity: np.ndarray
    log_evidence: float


class ObservationKernel:
    """Measurement-group densities of a single object.

    tables[m] has shape (d_x,) + (d_z,)*m and holds r_{m|1}(z_1..z_m | x),
    the joint density of an object at x producing exactly the group
    (z_1..z_m); tables[0] is the missed-detection profile. For every state,
    sum_m (1/m!) sum over z-tuples must equal one.
    """

    def __init__(
        self,
        state_space: FiniteSpace,
        obs_space: FiniteSpace,
        tables: Sequence[np.ndarray],
        *,
        symmetrize_input: bool = False,
    ):
        self.state_space = state_space
        self.obs_space = obs_space
        d_x, d_z = state_space.size, obs_space.size
        fixed: list[np.ndarray] = []
        for m, raw in enumerate(tables):
            arr = np.asarray(raw, dtype=float)
            want = (d_x,) + (d_z,) * m
            if arr.shape != want:
                raise ValueError(f"table {m} has shape {arr.shape}, expected {want}")
            if not np.all(np.isfinite(arr)) or np.any(arr < 0):
                raise ValueError(f"table {m} must be finite and nonnegative")
            if m >= 2:
                if symmetrize_input:
                    arr = symmetrize_axes(arr, [tuple(range(1, m + 1))])
                else:
                    for i in range(1, m):
                        if not np.array_equal(arr, np.swapaxes(arr, i, i + 1)):
                            raise ValueError(
                                f"table {m} is not symmetric in its z axes"
                            )
            fixed.append(arr.copy())
        if not fixed:
            raise ValueError("at least the missed-detection table is required")
        totals = sum(
            t.reshape(d_x, -1).sum(axis=1) / math.factorial(m)
            for m, t in enumerate(fixed)
        )
        if np.any(np.abs(totals - 1.0) > NORMALIZATION_TOL):
            worst = float(np.max(np.abs(totals - 1.0)))
            raise ValueError(
                f"kernel tables are not normalized per state (off by {worst:.3e})"
            )
        self.tables = fixed

    @property
    def m_max(self) -> int:
        return len(self.tables) - 1

    def missed_profile(self) -> np.ndarray:
        return self.tables[0].copy()

    def group_vector(self, z_idx: tuple[int, ...]) -> np.ndarray:
        """r_{|group| | 1}(group | x) as a vector over states; zero past m_max."""
        m = len(z_idx)
        if m > self.m_max:
            return np.zeros(self.state_space.size)
        return self.tables[m][(slice(None),) + tuple(z_idx)]

    def group_value(self, x: int, z_idx: tuple[int, ...]) -> float:
        m = len(z_idx)
        if m > self.m_max:
            return 0.0
        return float(self.tables[m][(x,) + tuple(z_idx)])

    def emission_weights(self) -> np.ndarray:
        """Per-state probabilities of emitting a group of each size."""
        d_x = self.state_space.size
        out = np.zeros((d_x, self.m_max + 1))
        for m, t in enumerate(self.tables):
            out[:, m] = t.reshape(d_x, -1).sum(axis=1) / math.factorial(m)
        return out

    @classmethod
    def from_detection(
        cls,
        state_space: FiniteSpace,
        obs_space: FiniteSpace,
        p_detect: np.ndarray | Sequence[float],
        likelihood: np.ndarray,
    ) -> "ObservationKernel":
        """Detect-or-miss kernel: at most one measurement per object."""
        pd = _as_test_function(state_space, p_detect)
        if np.any(pd < 0) or np.any(pd > 1):
            raise ValueError("detection probabilities must lie in [0, 1]")
        g = np.asarray(likelihood, dtype=float)
        if g.shape != (state_space.size, obs_space.size):
            raise ValueError("likelihood must have shape (d_x, d_z)")
        if np.any(g < 0) or np.any(np.abs(g.sum(axis=1) - 1.0) > NORMALIZATION_TOL):
            raise ValueError("likelihood rows must be densities over the obs space")
        return cls(state_space, obs_space, [1.0 - pd, pd[:, None] * g])


def _clutter_value(clutter: MultiObjectDensity | None, group: tuple[int, ...]) -> float:
    if clutter is None:
        return 1.0 if not group else 0.0
    if len(group) > clutter.n_max:
        return 0.0
    return float(clutter.tensors[len(group)][tuple(group)])


def joint_likelihood(
    kernel: ObservationKernel,
    x_tuple: Sequence[str | int],
    Z: MeasurementSet,
    clutter: MultiObjectDensity | None = None,
) -> float:
    """p(Z | objects at x_tuple), brute-forced over measurement assignments.

    Every map from measurements to {objects} (plus a clutter slot when a
    clutter process is given) contributes the product of the group densities
    it induces. Impossible sets return 0. Measurements are processed in
    sorted-label order so the value is bitwise reorder-invariant.
    """
    x_idx = kernel.state_space.indices(x_tuple)
    z_idx = tuple(sorted(kernel.obs_space.indices(Z)))
    n, m = len(x_idx), len(z_idx)
    slots = n + (1 if clutter is not None else 0)
    if m == 0:
        value = _clutter_value(clutter, ())
        for ix in x_idx:
            value *= float(kernel.tables[0][ix])
        return value
    if slots == 0:
        return 0.0
    total = 0.0
    for assign in itertools.product(range(slots), repeat=m):
        groups: list[list[int]] = [[] for _ in range(slots)]
        for j, a in enumerate(assign):
            groups[a].append(z_idx[j])
        factor = 1.0
        if clutter is not None:
            factor = _clutter_value(clutter, tuple(groups[n]))
        for i in range(n):
            if factor == 0.0:
                break
            factor *= kernel.group_value(x_idx[i], tuple(groups[i]))
        total += factor
    return total


def posterior_direct(
    prior: MultiObjectDensity,
    kernel: ObservationKernel,
    Z: MeasurementSet,
    clutter: MultiObjectDensity | None = None,
) -> Posterior:
    """Exact Bayes by enumeration: q_n proportional to p(Z|x) p_n(x).

    Likelihoods are evaluated once per index multiset and written to the
    whole orbit, so the posterior tensors are exactly symmetric. The
    intensity is the direct first-factorial-moment sum over the tensors.
    """
    _check_update_spaces(prior, kernel, clutter)
    d = prior.space.size
    numerators: list[np.ndarray] = []
    evidence = 0.0
    for n in range(prior.n_max + 1):
        t = np.zeros((d,) * n)
        for canon in itertools.combinations_with_replacement(range(d), n):
            like = joint_likelihood(kernel, canon, Z, clutter)
            for perm in set(itertools.permutations(canon)):
                t[perm] = like * float(prior.tensors[n][perm])
        numerators.append(t)
        evidence += t.sum() / math.factorial(n)
    if not evidence > 0.0:
        raise ZeroEvidence(f"measurement set {list(Z)!r} has zero likelihood")
    tensors = [t / evidence for t in numerators]
    density = MultiObjectDensity(prior.space, tensors)
    intensity = np.zeros(d)
    for n in range(1, density.n_max + 1):
        t = density.tensors[n]
        for axis in range(n):
            others = tuple(a for a in range(n) if a != axis)
            intensity += t.sum(axis=others) / math.factorial(n)
    return Posterior(density, intensity, math.log(evidence))


# ---------------------------------------------------------------------------
# partition-sum engine
# ---------------------------------------------------------------------------


def _check_update_spaces(prior, kernel, clutter) -> None:
    if prior.space.labels != kernel.state_space.labels:
        raise ValueError("prior and kernel disagree on the state space")
    if clutter is not None and clutter.space.labels != kernel.obs_space.labels:
        raise ValueError("clutter process must live on the observation space")


def _signature_counts(
    z_idx: tuple[int, ...],
    m_cap: int | None,
    with_clutter: bool,
) -> Counter:
    """Multiset of content signatures over all (subset, partition) terms.

    A signature is the sorted tuple of per-block sorted z-labels, prefixed by
    the sorted labels handed to clutter when a clutter process participates.
    Terms with equal signatures have equal values, so only counts are kept.
    """
    counts: Counter = Counter()
    m = len(z_idx)

    def grouped(k: int):
        # m_cap = 0 (a kernel that never emits) admits only the empty
        # partition; partitions() itself requires caps >= 1
        if m_cap == 0:
            if k == 0:
                yield Partition(())
            return
        yield from partitions(k, m_cap)

    if not with_clutter:
        for part in grouped(m):
            sig = tuple(
                sorted(tuple(sorted(z_idx[i] for i in block)) for block in part.blocks)
            )
            counts[sig] += 1
        return counts
    for split in subsets(m):
        dropped = tuple(sorted(z_idx[i] for i in split.dropped))
        kept = split.kept
        for part in grouped(len(kept)):
            sig = tuple(
                sorted(
                    tuple(sorted(z_idx[kept[i]] for i in block))
                    for block in part.blocks
                )
            )
            counts[(dropped, sig)] += 1
    return counts


def _denominator_term(prior, p0, block_vecs) -> float:
    """delta^p G_prior at psi = p0 with the block vectors as increments."""
    p = len(block_vecs)
    total = 0.0
    for n in range(p, prior.n_max + 1):
        t = prior.tensors[n]
        for v in block_vecs:
            t = np.tensordot(v, t, axes=(0, 0))
        for _ in range(n - p):
            t = t @ p0
        total += float(t) / math.factorial(n - p)
    return total


def _injection_sum(k: int, d: int, base: np.ndarray, block_vecs) -> np.ndarray | float:
    """sum over injections sigma of outer products with blocks at sigma-slots.

    Returns sum_{injective sigma:[p]->[k]} tensor with axis sigma(i) carrying
    block i's vector and every other axis carrying the base vector. Computed
    from one reference outer product: averaging it over all k! axis orders
    counts every injection (k-p)! times, so the sum is the symmetrization
    scaled by k!/(k-p)!.
    """
    p = len(block_vecs)
    if k == 0:
        return 1.0
    factors = list(block_vecs) + [base] * (k - p)
    term = factors[0]
    for f in factors[1:]:
        term = np.multiply.outer(term, f)
    if p == 0 or k == 1:
        return term * (math.factorial(k) // math.factorial(k - p))
    return symmetrize(term) * (math.factorial(k) // math.factorial(k - p))


def _numerator_tensors(prior, p0, block_vecs) -> list[np.ndarray]:
    """Coefficient tensors (in eta) of one partition's numerator term."""
    d = prior.space.size
    p = len(block_vecs)
    out: list[np.ndarray] = []
    for k in range(prior.n_max + 1):
        if k < p:
            out.append(np.zeros((d,) * k))
            continue
        inj = _injection_sum(k, d, p0, block_vecs)
        out.append(np.asarray(prior.tensors[k] * inj))
    return out


def _intensity_term(prior, p0, block_vecs) -> np.ndarray:
    """One partition's contribution to the unnormalized intensity.

    Appended term: the (p+1)-th variation with one extra Dirac increment,
    weighted pointwise by the missed-detection profile. Replaced terms: the
    p-th variation with block i's increment localized at the query point and
    weighted by that block's density there.
    """
    d = prior.space.size
    p = len(block_vecs)
    appended = np.zeros(d)
    for n in range(p + 1, prior.n_max + 1):
        t = prior.tensors[n]
        for v in block_vecs:
            t = np.tensordot(v, t, axes=(0, 0))
        while t.ndim > 1:
            t = t @ p0
        appended += t / math.factorial(n - p - 1)
    total = p0 * appended
    for i in range(p):
        others = block_vecs[:i] + block_vecs[i + 1 :]
        freed = np.zeros(d)
        for n in range(p, prior.n_max + 1):
            t = prior.tensors[n]
            for v in others:
                t = np.tensordot(v, t, axes=(0, 0))
            while t.ndim > 1:
                t = t @ p0
            freed += t / math.factorial(n - p)
        total += block_vecs[i] * freed
    return total


def _partition_engine(
    prior: MultiObjectDensity,
    kernel: ObservationKernel,
    Z: MeasurementSet,
    clutter: MultiObjectDensity | None,
    *,
    want_density: bool,
    want_intensity: bool,
    log_domain: bool,
    prune: bool,
):
    """Shared evaluation of the partition-sum update.

    Returns (tensors or None, intensity or None, log_evidence). In the
    log-domain path the posterior is assembled as a mixture: each signature
    is normalized by its own denominator term and weighted by
    exp(log term - log evidence), so tiny evidences never underflow.
    """
    _check_update_spaces(prior, kernel, clutter)
    z_idx = tuple(kernel.obs_space.indices(Z))
    m_cap = kernel.m_max if prune else None
    counts = _signature_counts(z_idx, m_cap, clutter is not None)
    p0 = kernel.tables[0]
    d = prior.space.size

    vec_cache: dict[tuple[int, ...], np.ndarray] = {}

    def block_vectors(blocks):
        vecs = []
        for content in blocks:
            if content not in vec_cache:
                vec_cache[content] = kernel.group_vector(content)
            vecs.append(vec_cache[content])
        return vecs

    terms = []  # (scaled count*weight, blocks) in sorted signature order
    for sig in sorted(counts):
        cnt = float(counts[sig])
        if clutter is not None:
            dropped, blocks = sig
            weight = cnt * _clutter_value(clutter, dropped)
        else:
            blocks = sig
            weight = cnt
        if weight == 0.0 or len(blocks) > prior.n_max:
            continue
        terms.append((weight, blocks))

    num_acc = (
        [np.zeros((d,) * k) for k in range(prior.n_max + 1)] if want_density else None
    )
    int_acc = np.zeros(d) if want_intensity else None

    if not log_domain:
        evidence = 0.0
        for weight, blocks in terms:
            vecs = block_vectors(blocks)
            evidence += weight * _denominator_term(prior, p0, vecs)
            if want_density:
                for k, t in enumerate(_numerator_tensors(prior, p0, vecs)):
                    num_acc[k] = num_acc[k] + weight * t
            if want_intensity:
                int_acc += weight * _intensity_term(prior, p0, vecs)
        if not evidence > 0.0:
            raise ZeroEvidence(f"measurement set {list(Z)!r} has zero likelihood")
        log_evidence = math.log(evidence)
        tensors = [t / evidence for t in num_acc] if want_density else None
        intensity = int_acc / evidence if want_intensity else None
        return tensors, intensity, log_evidence

    # log-sum-exp path
    contribution = []
    for weight, blocks in terms:
        vecs = block_vectors(blocks)
        den = _denominator_term(prior, p0, vecs)
        if den < 0.0:
            raise ValueError("log-domain evaluation needs nonnegative terms")
        if den == 0.0:
            continue
        contribution.append((math.log(weight) + math.log(den), den, vecs))
    if not contribution:
        raise ZeroEvidence(f"measurement set {list(Z)!r} has zero likelihood")
    peak = max(c[0] for c in contribution)
    log_evidence = peak + math.log(sum(math.exp(c[0] - peak) for c in contribution))
    for log_term, den, vecs in contribution:
        w = math.exp(log_term - log_evidence)
        if want_density:
            for k, t in enumerate(_numerator_tensors(prior, p0, vecs)):
                num_acc[k] = num_acc[k] + w * (t / den)
        if want_intensity:
            int_acc += w * (_intensity_term(prior, p0, vecs) / den)
    return (num_acc if want_density else None), int_acc, log_evidence


def _finish_posterior(prior, tensors, log_evidence) -> Posterior:
    density = MultiObjectDensity(prior.space, tensors, symmetrize_input=True)
    return Posterior(density, density.intensity_vector(), log_evidence)


def posterior_partition(
    prior: MultiObjectDensity,
    kernel: ObservationKernel,
    Z: MeasurementSet,
    *,
    log_domain: bool = False,
    prune: bool = True,
) -> Posterior:
    """Partition-sum Bayes update without clutter.

    The returned intensity is the first factorial moment of the computed
    density (differentiate-the-posterior path); posterior_intensity evaluates
    the same quantity from the partition sum directly.
    """
    tensors, _, log_evidence = _partition_engine(
        prior, kernel, Z, None,
        want_density=True, want_intensity=False,
        log_domain=log_domain, prune=prune,
    )
    return _finish_posterior(prior, tensors, log_evidence)


def posterior_intensity(
    prior: MultiObjectDensity,
    kernel: ObservationKernel,
    Z: MeasurementSet,
    *,
    log_domain: bool = False,
    prune: bool = True,
) -> np.ndarray:
    """Posterior intensity from the partition sum (no density assembly)."""
    _, intensity, _ = _partition_engine(
        prior, kernel, Z, None,
        want_density=False, want_intensity=True,
        log_domain=log_domain, prune=prune,
    )
    return intensity


def posterior_partition_clutter(
    prior: MultiObjectDensity,
    kernel: ObservationKernel,
    clutter: MultiObjectDensity,
    Z: MeasurementSet,
    *,
    log_domain: bool = False,
    prune: bool = True,
) -> Posterior:
    """Partition-sum update with an independent clutter process.

    Sums over the subset of Z attributed to objects; the complement is
    weighted by the clutter process's density at those points.
    """
    tensors, _, log_evidence = _partition_engine(
        prior, kernel, Z, clutter,
        want_density=True, want_intensity=False,
        log_domain=log_domain, prune=prune,
    )
    return _finish_posterior(prior, tensors, log_evidence)


def posterior_intensity_clutter(
    prior: MultiObjectDensity,
    kernel: ObservationKernel,
    clutter: MultiObjectDensity,
    Z: MeasurementSet,
    *,
    log_domain: bool = False,
    prune: bool = True,
) -> np.ndarray:
    """Posterior intensity under clutter, from the partition sum directly."""
    _, intensity, _ = _partition_engine(
        prior, kernel, Z, clutter,
        want_density=False, want_intensity=True,
        log_domain=log_domain, prune=prune,
    )
    return intensity


# ---------------------------------------------------------------------------
# Poisson closed forms
# ---------------------------------------------------------------------------


def _poisson_partition_terms(mu, kernel, z_idx, prune: bool):
    """Sorted signature terms with their scalar products mu[P_block]."""
    m_cap = kernel.m_max if prune else None
    counts = _signature_counts(z_idx, m_cap, with_clutter=False)
    terms = []
    for sig in sorted(counts):
        vecs = [kernel.group_vector(content) for content in sig]
        scalars = [float(mu @ v) for v in vecs]
        terms.append((float(counts[sig]), vecs, scalars))
    return terms


def poisson_posterior(
    spec: PoissonSpec,
    kernel: ObservationKernel,
    Z: MeasurementSet,
    *,
    n_max: int | None = None,
    prune: bool = True,
) -> Posterior:
    """Closed-form update of a Poisson prior: no generic differentiation.

    Every variation of the exponential functional factorizes, so each
    partition contributes just the product of scalars mu[P_block]; the
    posterior is the superposition of a Poisson with intensity mu * p0 and a
    partition mixture of per-block point densities mu * P_block, assembled
    here directly as coefficient tensors.
    """
    if not isinstance(spec, PoissonSpec):
        spec = PoissonSpec(np.asarray(spec, dtype=float))
    mu = _as_test_function(kernel.state_space, spec.intensity)
    reference = poisson_density(spec, kernel.state_space, n_max)
    n_max = reference.n_max
    z_idx = tuple(kernel.obs_space.indices(Z))
    p0 = kernel.tables[0]
    nu = mu * p0
    terms = _poisson_partition_terms(mu, kernel, z_idx, prune)
    partition_total = 0.0
    for cnt, _, scalars in terms:
        partition_total += cnt * math.prod(scalars)
    if not partition_total > 0.0:
        raise ZeroEvidence(f"measurement set {list(Z)!r} has zero likelihood")
    d = kernel.state_space.size
    scale = math.exp(-float(nu.sum())) / partition_total
    tensors: list[np.ndarray] = []
    for k in range(n_max + 1):
        acc = np.zeros((d,) * k) if k else np.asarray(0.0)
        for cnt, vecs, _ in terms:
            if len(vecs) > k:
                continue
            acc = acc + cnt * np.asarray(
                _injection_sum(k, d, nu, [mu * v for v in vecs])
            )
        tensors.append(scale * acc)
    density = MultiObjectDensity(
        kernel.state_space, tensors, symmetrize_input=True
    )
    density.truncation_mass = max(0.0, 1.0 - density.total_mass())
    log_evidence = float(mu @ (p0 - 1.0)) + math.log(partition_total)
    return Posterior(
        density, poisson_posterior_intensity(spec, kernel, Z, prune=prune), log_evidence
    )


def poisson_posterior_intensity(
    spec: PoissonSpec,
    kernel: ObservationKernel,
    Z: MeasurementSet,
    *,
    prune: bool = True,
) -> np.ndarray:
    """Closed-form posterior intensity for a Poisson prior.

    M_1(x) = mu(x) * sum over partitions of
    [prod_i mu[P_i] * p0(x) + sum_i prod_{j != i} mu[P_j] * P_i(x)],
    normalized by the partition sum of plain products. The replaced factor is
    expanded without dividing by mu[P_i] so zero-mass blocks stay harmless.
    """
    if not isinstance(spec, PoissonSpec):
        spec = PoissonSpec(np.asarray(spec, dtype=float))
    mu = _as_test_function(kernel.state_space, spec.intensity)
    z_idx = tuple(kernel.obs_space.indices(Z))
    p0 = kernel.tables[0]
    terms = _poisson_partition_terms(mu, kernel, z_idx, prune)
    den = 0.0
    acc = np.zeros(kernel.state_space.size)
    for cnt, vecs, scalars in terms:
        prod_all = math.prod(scalars)
        den += cnt * prod_all
        bracket = prod_all * p0
        for i, v in enumerate(vecs):
            partial = math.prod(scalars[:i] + scalars[i + 1 :])
            bracket = bracket + partial * v
        acc += cnt * bracket
    if not den > 0.0:
        raise ZeroEvidence(f"measurement set {list(Z)!r} has zero likelihood")
    return mu * acc / den


# ---------------------------------------------------------------------------
# bivariate-functional oracle
# ---------------------------------------------------------------------------


def posterior_bivariate(
    prior: MultiObjectDensity,
    kernel: ObservationKernel,
    Z: MeasurementSet,
    clutter: MultiObjectDensity | None = None,
    *,
    step: float = 0.5,
    levels: int = 3,
) -> Posterior:
    """Bayes update through the joint functional of (psi, eta), numerically.

    F(psi, eta) = G_clutter(psi) * G_prior(eta * G_single(psi | .)) carries
    the whole update: differentiating m times in psi at the measurement
    points and setting psi = 0 gives the unnormalized posterior functional of
    eta, whose own variations at eta = 0 are the posterior tensors; the same
    psi-variation at eta = 1 is the evidence. All differentials here are
    numeric, so this path shares no code with the partition engine. Slow;
    meant as an oracle on desk-scale instances.
    """
    _check_update_spaces(prior, kernel, clutter)
    z_idx = tuple(kernel.obs_space.indices(Z))
    d_x, d_z = kernel.state_space.size, kernel.obs_space.size

    def single_object_values(psi: np.ndarray) -> np.ndarray:
        out = np.zeros(d_x)
        for m, t in enumerate(kernel.tables):
            for _ in range(m):
                t = t @ psi
            out = out + t / math.factorial(m)
        return out

    def F(psi: np.ndarray, eta: np.ndarray) -> float:
        value = evaluate(prior, eta * single_object_values(psi))
        if clutter is not None:
            value *= evaluate(clutter, psi)
        return value

    z_increments = [np.eye(d_z)[i] for i in z_idx]
    psi0 = np.zeros(d_z)

    def numerator_functional(eta: np.ndarray) -> float:
        return numeric_differential(
            lambda psi: F(psi, eta), psi0, z_increments, step=step, levels=levels
        )

    evidence = numerator_functional(np.ones(d_x))
    if not evidence > 0.0:
        raise ZeroEvidence(f"measurement set {list(Z)!r} has zero likelihood")
    eta0 = np.zeros(d_x)
    eye = np.eye(d_x)
    tensors: list[np.ndarray] = []
    for k in range(prior.n_max + 1):
        t = np.zeros((d_x,) * k)
        for canon in itertools.combinations_with_replacement(range(d_x), k):
            value = (
                numeric_differential(
                    numerator_functional,
                    eta0,
                    [eye[i] for i in canon],
                    step=step,
                    levels=levels,
                )
                / evidence
            )
            for perm in set(itertools.permutations(canon)):
                t[perm] = value
        tensors.append(t)
    density = MultiObjectDensity(prior.space, tensors)
    return Posterior(density, density.intensity_vector(), math.log(evidence))
