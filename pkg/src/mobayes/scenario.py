"""Scenario configuration, simulation, and the predict/update recursion.

A scenario is one JSON document: two label lists, a prior, a per-object
measurement kernel, a clutter process, a survive-or-die transition, a step
count and a seed. simulate() draws ground truth and measurement sets from
the generative model; run() feeds those measurements through the exact
filter and writes one CSV row per step plus a JSON summary.

Randomness comes from numpy's default generator (PCG64) seeded once, and
every draw goes through a single stream in a fixed order, so outputs are
byte-identical for identical (config, seed) pairs. A missing clutter block
is normalized at load time to an explicit zero-measurement clutter process;
downstream code never branches on it, which keeps the two spellings
byte-identical too.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .bayes import (
    ObservationKernel,
    Posterior,
    ZeroEvidence,
    posterior_partition_clutter,
)
from .finite_pp import (
    FiniteSpace,
    MultiObjectDensity,
    PoissonSpec,
    bernoulli,
    poisson,
)
from .prediction import TransitionModel, build_multiplicative, predict

CONFIG_VERSION = 1


class ConfigError(ValueError):
    """A scenario document failed validation; message names the field."""


@dataclass
class RunRecord:
    """One filter step: what was seen and what the posterior says."""

    step: int
    measurements: list[str]
    log_evidence: float
    intensity: np.ndarray
    cardinality: np.ndarray

    @property
    def map_cardinality(self) -> int:
        """Most probable object count (smallest index on ties)."""
        return int(np.argmax(self.cardinality))


@dataclass
class Scenario:
    """Validated, fully constructed scenario components."""

    state_space: FiniteSpace
    obs_space: FiniteSpace
    n_max: int
    m_max: int
    prior: MultiObjectDensity
    kernel: ObservationKernel
    clutter: MultiObjectDensity
    transition: TransitionModel
    survival: np.ndarray
    motion: np.ndarray
    birth: MultiObjectDensity
    steps: int
    seed: int
    log_domain: bool
    max_dropped: float
    raw: dict = field(repr=False)


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigError(msg)


def _labels(raw: Any, key: str) -> tuple[str, ...]:
    _require(isinstance(raw, list) and raw, f"{key} must be a non-empty list")
    _require(all(isinstance(s, str) for s in raw), f"{key} entries must be strings")
    return tuple(raw)


def _density_from_spec(
    spec: Any, sp: FiniteSpace, n_max: int, key: str
) -> MultiObjectDensity:
    _require(isinstance(spec, dict) and "kind" in spec, f"{key} needs a 'kind'")
    kind = spec["kind"]
    try:
        if kind == "poisson":
            rate = np.asarray(spec["intensity"], dtype=float)
            tail = float(spec.get("tail_tol", 1e-9))
            cap = int(spec.get("n_max", n_max))
            dens = poisson(PoissonSpec(rate, tail_tol=tail), sp, cap)
            # conditioned on the cardinality cap, so it is exactly normalized
            return dens.scaled(1.0 / dens.total_mass())
        if kind == "bernoulli":
            return bernoulli(float(spec["q"]), np.asarray(spec["pdf"], dtype=float), sp)
        if kind == "explicit":
            return MultiObjectDensity(
                sp,
                [np.asarray(t, dtype=float) for t in spec["tensors"]],
                symmetrize_input=bool(spec.get("symmetrize", False)),
            )
        if kind == "none":
            return MultiObjectDensity(sp, [1.0])
    except ConfigError:
        raise
    except KeyError as exc:
        raise ConfigError(f"{key}: missing field {exc}") from exc
    except (ValueError, RuntimeError) as exc:
        raise ConfigError(f"{key}: {exc}") from exc
    raise ConfigError(f"{key}: unknown kind {kind!r}")


def _kernel_from_spec(
    spec: Any, state_space: FiniteSpace, obs_space: FiniteSpace, key: str
) -> ObservationKernel:
    _require(isinstance(spec, dict) and "kind" in spec, f"{key} needs a 'kind'")
    kind = spec["kind"]
    try:
        if kind == "detection":
            return ObservationKernel.from_detection(
                state_space,
                obs_space,
                np.asarray(spec["p_detect"], dtype=float),
                np.asarray(spec["likelihood"], dtype=float),
            )
        if kind == "tables":
            return ObservationKernel(
                state_space,
                obs_space,
                [np.asarray(t, dtype=float) for t in spec["tables"]],
                symmetrize_input=bool(spec.get("symmetrize", False)),
            )
    except ConfigError:
        raise
    except KeyError as exc:
        raise ConfigError(f"{key}: missing field {exc}") from exc
    except (ValueError, RuntimeError) as exc:
        raise ConfigError(f"{key}: {exc}") from exc
    raise ConfigError(f"{key}: unknown kind {kind!r}")


def load_config(doc: dict | str | os.PathLike) -> Scenario:
    """Validate a scenario document (dict, JSON text, or file path)."""
    if isinstance(doc, (str, os.PathLike)):
        text = (
            doc
            if isinstance(doc, str) and doc.lstrip().startswith("{")
            else open(doc, "r", encoding="utf-8").read()
        )
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    _require(isinstance(doc, dict), "config must be a JSON object")
    version = doc.get("version", CONFIG_VERSION)
    _require(version == CONFIG_VERSION, f"unsupported config version {version!r}")

    try:
        state_space = FiniteSpace(_labels(doc.get("state_labels"), "state_labels"))
        obs_space = FiniteSpace(_labels(doc.get("obs_labels"), "obs_labels"))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"labels: {exc}") from exc
    n_max = int(doc.get("n_max", -1))
    _require(n_max >= 0, "n_max must be a nonnegative integer")

    prior = _density_from_spec(doc.get("prior"), state_space, n_max, "prior")
    _require(
        prior.n_max == n_max,
        f"prior supports up to {prior.n_max} objects, config says n_max={n_max}",
    )
    _require(prior.is_normalized(), "prior is not normalized")

    kernel = _kernel_from_spec(doc.get("kernel"), state_space, obs_space, "kernel")
    m_max = int(doc.get("m_max", kernel.m_max))
    _require(
        m_max == kernel.m_max,
        f"kernel tables define m_max={kernel.m_max}, config says {m_max}",
    )

    clutter = _density_from_spec(
        doc.get("clutter", {"kind": "none"}), obs_space, n_max, "clutter"
    )
    _require(clutter.is_normalized(), "clutter process is not normalized")

    tr = doc.get("transition")
    _require(isinstance(tr, dict), "transition block is required")
    max_dropped = float(tr.get("max_dropped", 1e-6))
    try:
        birth = _density_from_spec(
            tr.get("birth", {"kind": "none"}), state_space, n_max, "transition.birth"
        )
        survival = np.asarray(tr["survival"], dtype=float)
        motion = np.asarray(tr["motion"], dtype=float)
        # The model records its worst-case per-input clipping; the budget in
        # max_dropped is enforced per step on the belief-weighted drop, which
        # is what actually leaves the recursion.
        transition = build_multiplicative(
            survival,
            motion,
            birth,
            n_max=n_max,
            m_max=n_max,
            max_dropped=1.0,
        )
    except ConfigError:
        raise
    except KeyError as exc:
        raise ConfigError(f"transition: missing field {exc}") from exc
    except (ValueError, RuntimeError) as exc:
        raise ConfigError(f"transition: {exc}") from exc

    steps = int(doc.get("steps", 0))
    _require(steps >= 0, "steps must be nonnegative")
    seed = int(doc.get("seed", 0))
    _require(seed >= 0, "seed must be a nonnegative integer")

    return Scenario(
        state_space=state_space,
        obs_space=obs_space,
        n_max=n_max,
        m_max=m_max,
        prior=prior,
        kernel=kernel,
        clutter=clutter,
        transition=transition,
        survival=survival,
        motion=motion,
        birth=birth,
        steps=steps,
        seed=seed,
        log_domain=bool(doc.get("log_domain", False)),
        max_dropped=max_dropped,
        raw=doc,
    )


# ---------------------------------------------------------------------------
# sampling the generative model
# ---------------------------------------------------------------------------


def _sample_tuple(
    rng: np.random.Generator, density: MultiObjectDensity
) -> tuple[int, ...]:
    """Draw one configuration (as state indices) from a normalized density."""
    card = np.clip(density.cardinality_distribution(), 0.0, None)
    card = card / card.sum()
    n = int(rng.choice(len(card), p=card))
    if n == 0:
        return ()
    weights = density.tensors[n].ravel()
    weights = weights / weights.sum()
    flat = int(rng.choice(weights.size, p=weights))
    return tuple(int(i) for i in np.unravel_index(flat, density.tensors[n].shape))


def _sample_group(
    rng: np.random.Generator, kernel: ObservationKernel, x: int
) -> list[int]:
    """Draw one object's measurement group (observation indices)."""
    sizes = kernel.emission_weights()[x]
    sizes = sizes / sizes.sum()
    m = int(rng.choice(len(sizes), p=sizes))
    if m == 0:
        return []
    table = kernel.tables[m][x]
    weights = table.ravel()
    weights = weights / weights.sum()
    flat = int(rng.choice(weights.size, p=weights))
    return [int(i) for i in np.unravel_index(flat, table.shape)]


def _evolve(
    rng: np.random.Generator,
    scenario: Scenario,
    objects: tuple[int, ...],
) -> tuple[int, ...]:
    """One step of per-object survive-or-die motion plus fresh births."""
    survivors: list[int] = []
    for y in objects:
        if rng.random() < scenario.survival[y]:
            survivors.append(
                int(rng.choice(scenario.state_space.size, p=scenario.motion[:, y]))
            )
    born = _sample_tuple(rng, scenario.birth)
    return tuple(survivors) + born


def simulate(
    scenario: Scenario, *, rng: np.random.Generator | None = None
) -> tuple[list[tuple[str, ...]], list[list[str]]]:
    """Ground truth and measurement sets for the configured horizon.

    Returns (truths, measurement_sets): truths[k] is the object tuple after
    k steps (index 0 is the initial draw from the prior), and
    measurement_sets[k-1] is what step k observed: per-object groups first,
    then the clutter draw. Fully determined by the scenario seed.
    """
    if rng is None:
        rng = np.random.default_rng(scenario.seed)
    state = _sample_tuple(rng, scenario.prior)
    truths = [tuple(scenario.state_space.labels[i] for i in state)]
    measurement_sets: list[list[str]] = []
    for _ in range(scenario.steps):
        state = _evolve(rng, scenario, state)
        truths.append(tuple(scenario.state_space.labels[i] for i in state))
        z: list[int] = []
        for x in state:
            z.extend(_sample_group(rng, scenario.kernel, x))
        z.extend(_sample_tuple(rng, scenario.clutter))
        measurement_sets.append([scenario.obs_space.labels[i] for i in z])
    return truths, measurement_sets


# ---------------------------------------------------------------------------
# the filter recursion and its outputs
# ---------------------------------------------------------------------------


def _record(step: int, measurements: list[str], posterior: Posterior) -> RunRecord:
    card = posterior.density.cardinality_distribution()
    if abs(card.sum() - 1.0) > 1e-9:
        raise RuntimeError(
            f"step {step}: cardinality distribution sums to {card.sum()!r}"
        )
    return RunRecord(
        step=step,
        measurements=list(measurements),
        log_evidence=posterior.log_evidence,
        intensity=posterior.intensity,
        cardinality=card,
    )


def run(
    scenario: Scenario,
    out_dir: str | os.PathLike | None = None,
    *,
    measurement_sets: Sequence[Sequence[str]] | None = None,
) -> tuple[list[RunRecord], int | None]:
    """Alternate predict and update over the scenario horizon.

    Measurements default to a fresh simulate() draw. Returns the records
    plus the step at which evidence hit zero (None when the run finished).
    Row 0 describes the prior itself. When out_dir is given, writes
    run.csv and summary.json there.
    """
    if measurement_sets is None:
        _, measurement_sets = simulate(scenario)
    belief = scenario.prior
    records = [
        RunRecord(
            step=0,
            measurements=[],
            log_evidence=0.0,
            intensity=belief.intensity_vector(),
            cardinality=belief.cardinality_distribution(),
        )
    ]
    failed_step: int | None = None
    for k, z in enumerate(measurement_sets, start=1):
        predicted = predict(belief, scenario.transition, max_dropped=scenario.max_dropped)
        predicted = predicted.scaled(1.0 / predicted.total_mass())
        try:
            post = posterior_partition_clutter(
                predicted,
                scenario.kernel,
                scenario.clutter,
                list(z),
                log_domain=scenario.log_domain,
            )
        except ZeroEvidence:
            failed_step = k
            break
        records.append(_record(k, list(z), post))
        belief = post.density
    if out_dir is not None:
        write_outputs(scenario, records, failed_step, out_dir)
    return records, failed_step


def write_outputs(
    scenario: Scenario,
    records: list[RunRecord],
    failed_step: int | None,
    out_dir: str | os.PathLike,
) -> None:
    """run.csv (fixed column order) and summary.json, both reproducible."""
    os.makedirs(out_dir, exist_ok=True)
    labels = scenario.state_space.labels
    header = (
        ["step", "log_evidence"]
        + [f"intensity_{s}" for s in labels]
        + [f"card_{n}" for n in range(scenario.n_max + 1)]
    )
    lines = [",".join(header)]
    for r in records:
        cells = [str(r.step), repr(float(r.log_evidence))]
        cells += [repr(float(v)) for v in r.intensity]
        cells += [repr(float(v)) for v in r.cardinality]
        lines.append(",".join(cells))
    with open(os.path.join(out_dir, "run.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")

    summary = {
        "version": CONFIG_VERSION,
        "seed": scenario.seed,
        "steps": scenario.steps,
        "state_labels": list(labels),
        "obs_labels": list(scenario.obs_space.labels),
        "n_max": scenario.n_max,
        "log_domain": scenario.log_domain,
        "completed_steps": len(records) - 1,
        "zero_evidence_step": failed_step,
        "total_log_evidence": sum(r.log_evidence for r in records),
        "records": [
            {
                "step": r.step,
                "measurements": r.measurements,
                "log_evidence": r.log_evidence,
                "map_cardinality": r.map_cardinality,
            }
            for r in records
        ],
    }
    with open(
        os.path.join(out_dir, "summary.json"), "w", encoding="utf-8", newline="\n"
    ) as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
