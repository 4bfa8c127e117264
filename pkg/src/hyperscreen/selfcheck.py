"""Property checks behind ``hyperscreen geomcheck``.

Each check measures one quantity on generated inputs and compares it with a
threshold; nothing here reads or writes files.
"""

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .data import FeatureStore
from .geometry import (
    LorentzPoint,
    exp_map_origin,
    exterior_angle,
    half_aperture,
    lorentz_distance,
    membership_residual,
)
from .log import get_logger
from .losses import angle_scales, quartile_thresholds, radius_caps
from .model import (
    AssayBatch,
    GradientBundle,
    ModelParams,
    build_batch,
    embed_with,
    finite_diff_check,
    grad_total_loss,
    init_params,
    max_relative_error,
)
from .models import Assay, BucketConfig, LigandEntry, LossWeights, ModelConfig
from .seeding import derive_rng

logger = get_logger(__name__)

Array = NDArray[np.float64]

CURVATURES = (0.5, 1.0, 2.0)
DEFAULT_THETAS = (1e-2, 1e-3)
SMALL_ANGLE_RADIUS = 2.0
PROBE_DIM = 8
KINK_GAP = 1e-2
MAX_ABS_COSINE = 0.99
MAX_APERTURE_RATIO = 0.9
GRADIENT_FLOOR = 1e-4
PROBE_FEATURE_STD = 0.4


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    measured: float
    threshold: str
    detail: str = ""


def _ball(rng: np.random.Generator, count: int, dim: int, max_norm: float) -> Array:
    directions = rng.normal(size=(count, dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    norms = rng.uniform(0.0, max_norm, size=(count, 1))
    return directions * norms


def check_membership(seed: int, samples: int = 10_000) -> list[CheckResult]:
    """Points from exp_map_origin satisfy the hyperboloid equation."""
    rng = derive_rng(seed, "geomcheck.membership")
    scaled, absolute = 0.0, 0.0
    for kappa in CURVATURES:
        v = _ball(rng, samples, 16, 10.0)
        points = exp_map_origin(v, kappa)
        scaled = max(scaled, float(np.max(membership_residual(points, kappa))))
        near = np.sqrt(kappa) * np.linalg.norm(v, axis=1) <= 6.0
        p = points[near]
        raw = np.abs(p.time**2 - np.sum(p.spatial**2, axis=-1) - 1.0 / kappa)
        absolute = max(absolute, float(np.max(raw)))
    return [
        CheckResult("membership (scale-aware)", scaled <= 1e-9, scaled, "<= 1e-9", "|v| <= 10"),
        CheckResult("membership (absolute)", absolute <= 1e-9, absolute, "<= 1e-9", "sqrt(k)|v| <= 6"),
    ]


def check_radius_identity() -> CheckResult:
    """d(exp(v), origin) equals |v| on a log-spaced grid of lengths."""
    worst = 0.0
    direction = np.ones(PROBE_DIM) / np.sqrt(PROBE_DIM)
    for kappa in CURVATURES:
        origin = LorentzPoint.origin(PROBE_DIM, kappa)
        for norm in np.logspace(-6, 1, 100):
            point = exp_map_origin(norm * direction, kappa)
            d = float(lorentz_distance(point, origin, kappa))
            worst = max(worst, abs(d - norm) / norm)
    return CheckResult("radius identity", worst <= 1e-8, worst, "<= 1e-8")


def law_of_cosines_exterior_angle(a: float, b: float, c: float) -> float:
    """Exterior angle at P of triangle (O, P, M) with a=|OP|, b=|PM|, c=|OM| (curvature -1).

    Uses the half-angle form of the hyperbolic law of cosines.
    """
    denominator = math.sinh(a) * math.sinh(b)
    sin2 = math.sinh((c + a - b) / 2.0) * math.sinh((c - a + b) / 2.0) / denominator
    cos2 = math.sinh((a + b + c) / 2.0) * math.sinh((a + b - c) / 2.0) / denominator
    interior = 2.0 * math.atan2(math.sqrt(max(sin2, 0.0)), math.sqrt(max(cos2, 0.0)))
    return math.pi - interior


def check_exterior_angle(seed: int, samples: int = 1000) -> CheckResult:
    """The closed-form exterior angle against the law-of-cosines oracle."""
    rng = derive_rng(seed, "geomcheck.angle")
    worst, used = 0.0, 0
    while used < samples:
        kappa = float(rng.choice(CURVATURES))
        sqrt_k = math.sqrt(kappa)
        pocket = exp_map_origin(_ball(rng, 1, 4, 3.0)[0], kappa)
        ligand = exp_map_origin(_ball(rng, 1, 4, 3.0)[0], kappa)
        origin = LorentzPoint.origin(4, kappa)
        a = float(lorentz_distance(origin, pocket, kappa))
        b = float(lorentz_distance(pocket, ligand, kappa))
        c = float(lorentz_distance(origin, ligand, kappa))
        if a <= 1e-2 or b <= 1e-4 or c <= 1e-4:
            continue
        expected = law_of_cosines_exterior_angle(sqrt_k * a, sqrt_k * b, sqrt_k * c)
        measured = float(exterior_angle(pocket, ligand, kappa))
        worst = max(worst, abs(measured - expected))
        used += 1
    return CheckResult("exterior angle oracle", worst <= 1e-6, worst, "<= 1e-6", f"{used} triples")


def check_aperture_monotone() -> CheckResult:
    """Half-aperture never grows as the pocket moves away from the origin."""
    radii = np.linspace(0.05, 8.0, 200)
    direction = np.zeros(PROBE_DIM)
    direction[0] = 1.0
    points = exp_map_origin(radii[:, None] * direction, 1.0)
    omega = half_aperture(points, 0.1, 1.0)
    rises = float(np.max(np.diff(omega), initial=0.0))
    return CheckResult("aperture monotone", rises <= 0.0, rises, "<= 0")


def small_angle_ratios(thetas: Sequence[float], radius: float = SMALL_ANGLE_RADIUS) -> list[tuple[float, float, float]]:
    """(theta, d / |v1 - v2|, relative error of d ~ sinh(r) theta) for two tangents at radius r."""
    rows = []
    for theta in thetas:
        v1 = np.array([radius, 0.0])
        v2 = radius * np.array([math.cos(theta), math.sin(theta)])
        d = float(lorentz_distance(exp_map_origin(v1), exp_map_origin(v2)))
        approx = math.sinh(radius) * theta
        rows.append((theta, d / float(np.linalg.norm(v1 - v2)), abs(d - approx) / d))
    return rows


def check_small_angle(thetas: Sequence[float]) -> list[CheckResult]:
    """Geodesic separation of near-parallel tangents scales by sinh(r)/r; error decays as theta^2."""
    target = math.sinh(SMALL_ANGLE_RADIUS) / SMALL_ANGLE_RADIUS
    rows = small_angle_ratios(sorted(thetas, reverse=True))
    results = []
    for theta, ratio, error in rows:
        deviation = abs(ratio - target) / target
        passed = deviation <= 0.01 if theta <= 1e-3 else True
        results.append(
            CheckResult(
                f"small angle theta={theta:g}",
                passed,
                ratio,
                f"-> {target:.4f}",
                f"approximation error {error:.3e}",
            )
        )
    for (t1, _, e1), (t2, _, e2) in zip(rows, rows[1:]):
        quotient = e2 / e1
        expected = (t2 / t1) ** 2
        results.append(
            CheckResult(
                f"error decay {t1:g}->{t2:g}",
                0.5 * expected <= quotient <= 2.0 * expected,
                quotient,
                f"in [{0.5 * expected:g}, {2.0 * expected:g}]",
            )
        )
    return results


# Gradient probes


def _probe_assays(rng: np.random.Generator) -> tuple[list[Assay], FeatureStore]:
    rows: dict[str, Array] = {}
    assays = []
    for a in range(3):
        pocket, sequence = f"p{a}", f"s{a}"
        rows[pocket] = PROBE_FEATURE_STD * rng.normal(size=PROBE_DIM)
        rows[sequence] = PROBE_FEATURE_STD * rng.normal(size=PROBE_DIM)
        affinities = rng.uniform(0.0, 1.0, size=4)
        strongest = set(np.argsort(-affinities)[:2].tolist())
        ligands = []
        for j in range(4):
            lid = f"m{a}{j}"
            rows[lid] = PROBE_FEATURE_STD * rng.normal(size=PROBE_DIM)
            ligands.append(
                LigandEntry(ligand_id=lid, feature_id=lid, active=j in strongest, affinity=float(affinities[j]))
            )
        assays.append(
            Assay(
                assay_id=f"a{a}",
                target_id=f"t{a}",
                pocket_feature_ids=[pocket],
                sequence_feature_id=sequence,
                ligands=ligands,
            )
        )
    return assays, FeatureStore.from_mapping(rows)


def off_kink(batch: AssayBatch, params: ModelParams, weights: LossWeights, gap: float = KINK_GAP) -> bool:
    """Every hinge argument and clamp input sits at least ``gap`` away from its kink."""
    kappa = params.curvature
    pairs = np.flatnonzero(batch.buckets >= 0)
    pockets = embed_with(params, "pocket", batch.pocket_features)
    ligands = embed_with(params, "ligand", batch.ligand_features)[pairs]
    owners = pockets[batch.assay_index[pairs]]
    config = batch.bucket_config
    buckets = batch.buckets[pairs]
    ratio = 2.0 * config.aperture_r0 / (kappa.sqrt * np.linalg.norm(owners.spatial, axis=-1))
    if np.any(ratio > MAX_APERTURE_RATIO):
        return False
    phi = exterior_angle(owners, ligands, kappa)
    if np.any(np.abs(np.cos(phi)) > MAX_ABS_COSINE):
        return False
    omega = half_aperture(owners, config.aperture_r0, kappa)
    radial = lorentz_distance(owners, ligands, kappa) - radius_caps(buckets, config)
    angular = phi - omega * angle_scales(buckets, config)
    arguments = np.concatenate([radial, angular, angular + weights.margin])
    return bool(np.all(np.abs(arguments) > gap))


def probe_problem(seed: int, index: int) -> tuple[AssayBatch, ModelParams, LossWeights]:
    """A 3-assay x 4-ligand batch with every loss term active and no hinge at its kink.

    Probes with any gradient entry below GRADIENT_FLOOR in magnitude are redrawn.
    """
    weights = LossWeights()
    hidden = PROBE_DIM if index % 2 else 0
    config = ModelConfig(embed_dim=PROBE_DIM, hidden_dim=hidden, learn_tau=True, tau=0.5, init_std=0.3)
    for attempt in range(1000):
        rng = derive_rng(seed, "geomcheck.probe", index, attempt)
        assays, store = _probe_assays(rng)
        keys = [-lg.affinity for a in assays for lg in a.ligands if lg.affinity is not None]
        buckets = BucketConfig(thresholds=quartile_thresholds(keys))
        batch = build_batch(assays, store, buckets)
        params = init_params(PROBE_DIM, config, rng)
        if not off_kink(batch, params, weights):
            continue
        grads = grad_total_loss(batch, params, weights).grads
        if min(float(np.min(np.abs(g))) for g in grads.arrays.values()) >= GRADIENT_FLOOR:
            return batch, params, weights
    raise RuntimeError(f"no off-kink probe found for batch {index}")


def check_gradients(seed: int, batches: int, corrupt: bool = False, h: float = 1e-4) -> CheckResult:
    """Reverse-mode gradients against central differences on random probe batches."""
    worst = 0.0
    for index in range(batches):
        batch, params, weights = probe_problem(seed, index)
        analytic = grad_total_loss(batch, params, weights).grads
        if corrupt:
            analytic = _corrupted(analytic)
        worst = max(worst, finite_diff_check(batch, params, weights, h, analytic))
        logger.debug("gradient probe %d: worst relative error so far %.3e", index, worst)
    name = "gradient check (corrupted)" if corrupt else "gradient check"
    return CheckResult(name, worst < 1e-4, worst, "< 1e-4", f"{batches} batches, h={h:g}")


def _corrupted(grads: GradientBundle) -> GradientBundle:
    """Double the largest-magnitude gradient entry."""
    key = max(grads.arrays, key=lambda k: float(np.max(np.abs(grads.arrays[k]), initial=0.0)))
    arrays = {k: g.copy() for k, g in grads.arrays.items()}
    flat = arrays[key].reshape(-1)
    flat[int(np.argmax(np.abs(flat)))] *= 2.0
    return GradientBundle(arrays)


def check_quadratic_oracle(seed: int) -> CheckResult:
    """Central differences are exact (up to round-off) on |Wx|^2."""
    rng = derive_rng(seed, "geomcheck.quadratic")
    x = rng.uniform(1.0, 2.0, size=5)
    weight = rng.uniform(0.5, 1.5, size=(4, 5))

    def loss(arrays: dict[str, Array]) -> float:
        y = arrays["w"] @ x
        return float(y @ y)

    analytic = {"w": 2.0 * np.outer(weight @ x, x)}
    error = max_relative_error(loss, {"w": weight}, analytic, h=1e-3)
    return CheckResult("finite-difference oracle", error < 1e-10, error, "< 1e-10", "|Wx|^2")


def run_geomcheck(
    seed: int = 0,
    thetas: Sequence[float] = DEFAULT_THETAS,
    fd_batches: int = 20,
    corrupt_gradient: bool = False,
) -> list[CheckResult]:
    results = [
        *check_membership(seed),
        check_radius_identity(),
        check_exterior_angle(seed),
        check_aperture_monotone(),
        *check_small_angle(thetas),
        check_quadratic_oracle(seed),
    ]
    if fd_batches > 0:
        results.append(check_gradients(seed, fd_batches, corrupt=corrupt_gradient))
    return results
