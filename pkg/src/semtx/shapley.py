"""Region-importance attribution over the coded-transmission path.

A coalition of object regions receives the target quality factor and the
protected residual error rate while everything else is degraded at the
base settings. The target-class probability of the reconstructed image
defines a cooperative game over regions; its Shapley values

    v_s = sum_{A not containing s} |A|!(S-|A|-1)!/S! * [p(A u {s}) - p(A)]

rank region importance. Two estimators are provided (full enumeration and
permutation sampling), plus the greedy aggregation that grows a single
"star" region until it alone clears a probability threshold, and the
conditional ranking that splits the remaining regions into positive and
negative sets given the star region is always treated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import codec
from .channel import inject_bit_errors
from .classifier import classify
from .errors import DomainError, ThresholdUnachievableError
from .imaging import (
    Image,
    Rect,
    RegionMask,
    RegionSet,
    composite_layers,
    crop,
    min_bounding_rect,
    union_masks,
)
from .seeds import derive_seed

EXHAUSTIVE_LIMIT = 12  # beyond 2^12 coalition evaluations, sampling is mandatory


@dataclass(frozen=True)
class CodingProfile:
    """Degradation settings applied during every coalition evaluation.

    Treated regions get (quality_target, ber_target); everything else gets
    (quality_base, ber_channel). Values are averaged over ``trials`` noise
    realizations seeded from ``master_seed``.
    """

    quality_base: int
    quality_target: int
    ber_channel: float
    ber_target: float
    trials: int = 8
    master_seed: int = 0
    compression: str = "codec"  # "codec" | "uncompressed"

    def __post_init__(self):
        for q, name in ((self.quality_base, "quality_base"), (self.quality_target, "quality_target")):
            if not isinstance(q, int) or not 1 <= q <= 100:
                raise DomainError(f"{name} must be an integer in [1, 100], got {q}")
        if self.quality_target < self.quality_base:
            raise DomainError("quality_target must be >= quality_base")
        if not 0.0 < self.ber_channel <= 0.5:
            raise DomainError(f"ber_channel must lie in (0, 0.5], got {self.ber_channel}")
        if not 0.0 <= self.ber_target <= self.ber_channel:
            raise DomainError(
                f"ber_target must lie in [0, ber_channel], got {self.ber_target}"
            )
        if self.trials < 1:
            raise DomainError(f"trials must be >= 1, got {self.trials}")
        if self.compression not in ("codec", "uncompressed"):
            raise DomainError(f"unknown compression mode {self.compression!r}")

    @property
    def degenerate(self) -> bool:
        """True when treated and untreated regions are indistinguishable."""
        return (
            self.quality_base == self.quality_target
            and self.ber_channel == self.ber_target
        )


@dataclass(frozen=True)
class ShapleyReport:
    """Per-region values from one estimator run."""

    values: dict[int, float]
    evaluations: int  # distinct coalition evaluations performed
    estimator: str  # "exact" | "permutation"
    samples: Optional[int] = None
    stderr: Optional[dict[int, float]] = None


@dataclass(frozen=True)
class RegionPartition:
    """Final split of the original region ids after segmentation + ranking."""

    star_ids: frozenset[int]
    positive_ids: frozenset[int]
    negative_ids: frozenset[int]
    achieved_probability: float

    def __post_init__(self):
        if self.star_ids & self.positive_ids or self.star_ids & self.negative_ids:
            raise DomainError("star ids overlap the ranked ids")
        if self.positive_ids & self.negative_ids:
            raise DomainError("positive and negative ids overlap")
        if not self.star_ids:
            raise DomainError("star id set must not be empty")


class CoalitionEvaluator:
    """Memoizing map from treated-region sets to mean target probability.

    Realization i of coalition A is seeded by (master_seed, canonical ids
    of A, i), so a coalition's value is a pure function of the treated
    pixel set, independent of evaluation order or parallel schedule. Under
    a degenerate profile every coalition canonicalizes to the empty set:
    treatment is uniform, so all coalitions share one physical transmission.
    """

    def __init__(
        self,
        img: Image,
        regions: RegionSet,
        background_mask: Optional[RegionMask],
        profile: CodingProfile,
        oracle,
        target_class: int,
    ):
        object_mask = regions.union_mask()
        if not object_mask.matches(img):
            raise DomainError("region masks do not match the image")
        if background_mask is not None:
            if not background_mask.matches(img):
                raise DomainError("background mask does not match the image")
            if (background_mask.bits & object_mask.bits).any():
                raise DomainError("background mask overlaps the object regions")
        self.img = img
        self.regions = regions
        self.profile = profile
        self.oracle = oracle
        self.target_class = target_class
        self._mask_by_id = {rid: mask for rid, mask in regions.regions}
        self._cache: dict[frozenset[int], float] = {}
        self.evaluations = 0
        self._base = Image.flat(img.height, img.width, 128, img.channels)

    def value(self, treated_ids: frozenset[int] | set[int]) -> float:
        """Mean target-class probability of the reconstruction treating ``treated_ids``."""
        ids = frozenset(treated_ids)
        unknown = ids - self._mask_by_id.keys()
        if unknown:
            raise DomainError(f"unknown region ids {sorted(unknown)}")
        if self.profile.degenerate:
            ids = frozenset()
        cached = self._cache.get(ids)
        if cached is not None:
            return cached
        total = math.fsum(
            self._realize(ids, trial) for trial in range(self.profile.trials)
        )
        value = total / self.profile.trials
        self._cache[ids] = value
        self.evaluations += 1
        return value

    def _realize(self, ids: frozenset[int], trial: int) -> float:
        canonical = ",".join(str(i) for i in sorted(ids))
        star_mask = (
            union_masks([self._mask_by_id[i] for i in sorted(ids)]) if ids else None
        )
        layers: list[tuple[Rect, Image, RegionMask]] = []
        if star_mask is not None and not star_mask.empty:
            seed = derive_seed(self.profile.master_seed, "coalition", canonical, trial, "star")
            layers.append(
                self._transmit(star_mask, self.profile.quality_target, self.profile.ber_target, seed)
            )
            rest_mask = star_mask.complement()
        else:
            rest_mask = RegionMask(np.ones((self.img.height, self.img.width), dtype=bool))
        if not rest_mask.empty:
            seed = derive_seed(self.profile.master_seed, "coalition", canonical, trial, "rest")
            layers.append(
                self._transmit(rest_mask, self.profile.quality_base, self.profile.ber_channel, seed)
            )
        reconstructed = composite_layers(self._base, layers)
        return classify(self.oracle, reconstructed, self.target_class).target_probability

    def _transmit(
        self, mask: RegionMask, quality: int, ber: float, seed: int
    ) -> tuple[Rect, Image, RegionMask]:
        """Encode the mask's bounding rectangle, corrupt it, decode it."""
        rect = min_bounding_rect(mask)
        region = crop(self.img, rect)
        if self.profile.compression == "uncompressed":
            bits = codec.encode_region_raw(region)
            delivered = inject_bit_errors(bits, ber, seed)
            decoded = codec.decode_region_raw(delivered, rect.w, rect.h, region.channels)
        else:
            stream = codec.encode_region(region, quality)
            delivered = inject_bit_errors(stream.bits, ber, seed)
            # headers ride an error-free side channel; only payload bits suffer
            delivered[: codec.HEADER_BITS] = stream.bits[: codec.HEADER_BITS]
            decoded = codec.decode_region(codec.RegionBitstream(delivered))
        return rect, decoded, mask


def evaluate_coalition(
    img: Image,
    regions: RegionSet,
    background_mask: Optional[RegionMask],
    coalition_ids: Sequence[int] | set[int] | frozenset[int],
    profile: CodingProfile,
    oracle,
    target_class: int,
) -> float:
    """One-shot coalition value; see ``CoalitionEvaluator.value``."""
    evaluator = CoalitionEvaluator(img, regions, background_mask, profile, oracle, target_class)
    return evaluator.value(frozenset(coalition_ids))


# ---------------------------------------------------------------------------
# Estimators over an abstract value function


def exact_shapley_values(
    num_players: int, value: Callable[[frozenset[int]], float]
) -> list[float]:
    """Full-enumeration Shapley values of an arbitrary set function.

    ``value`` is called once per subset (2^n calls); per-player sums run in
    a fixed sorted-subset order with exact factorial weights.
    """
    if num_players < 1:
        raise DomainError("need at least one player")
    n = num_players
    fact = [math.factorial(i) for i in range(n + 1)]
    weight = [fact[a] * fact[n - a - 1] / fact[n] for a in range(n)]
    values = {}
    for mask in range(1 << n):
        values[mask] = value(frozenset(i for i in range(n) if mask >> i & 1))
    out = []
    for player in range(n):
        bit = 1 << player
        terms = []
        for mask in range(1 << n):
            if mask & bit:
                continue
            size = bin(mask).count("1")
            terms.append(weight[size] * (values[mask | bit] - values[mask]))
        out.append(math.fsum(terms))
    return out


def sampled_shapley_values(
    num_players: int,
    value: Callable[[frozenset[int]], float],
    permutations: int,
    rng: np.random.Generator,
) -> tuple[list[float], list[float]]:
    """Permutation-sampling estimator; unbiased for the exact values.

    Returns per-player means and standard errors of the sampled marginal
    contributions.
    """
    if num_players < 1:
        raise DomainError("need at least one player")
    if permutations < 1:
        raise DomainError("need at least one permutation")
    sums = [0.0] * num_players
    sumsq = [0.0] * num_players
    empty = value(frozenset())
    for _ in range(permutations):
        order = rng.permutation(num_players)
        prefix: set[int] = set()
        prev = empty
        for player in order:
            prefix.add(int(player))
            cur = value(frozenset(prefix))
            marginal = cur - prev
            sums[player] += marginal
            sumsq[player] += marginal * marginal
            prev = cur
    means = [s / permutations for s in sums]
    stderrs = []
    for p in range(num_players):
        if permutations > 1:
            var = max(sumsq[p] - permutations * means[p] ** 2, 0.0) / (permutations - 1)
            stderrs.append(math.sqrt(var / permutations))
        else:
            stderrs.append(float("nan"))
    return means, stderrs


# ---------------------------------------------------------------------------
# Estimators bound to the transmission path


def _region_game(
    evaluator: CoalitionEvaluator,
    ids: Sequence[int],
    members: Optional[dict[int, frozenset[int]]] = None,
    always_treated: frozenset[int] = frozenset(),
) -> Callable[[frozenset[int]], float]:
    """Map player subsets (indices into ``ids``) to coalition values."""
    members = members or {rid: frozenset([rid]) for rid in ids}

    def value(players: frozenset[int]) -> float:
        treated = set(always_treated)
        for p in players:
            treated |= members[ids[p]]
        return evaluator.value(frozenset(treated))

    return value


def shapley_exact(
    img: Image,
    regions: RegionSet,
    profile: CodingProfile,
    oracle,
    target_class: int,
    background_mask: Optional[RegionMask] = None,
    exhaustive_limit: int = EXHAUSTIVE_LIMIT,
) -> ShapleyReport:
    """Exact Shapley values of every region under the coding profile."""
    if len(regions) > exhaustive_limit:
        raise DomainError(
            f"{len(regions)} regions exceed the exhaustive limit {exhaustive_limit}; "
            "use the permutation-sampled estimator"
        )
    evaluator = CoalitionEvaluator(img, regions, background_mask, profile, oracle, target_class)
    ids = regions.ids()
    vals = exact_shapley_values(len(ids), _region_game(evaluator, ids))
    return ShapleyReport(
        values=dict(zip(ids, vals)),
        evaluations=evaluator.evaluations,
        estimator="exact",
    )


def shapley_sampled(
    img: Image,
    regions: RegionSet,
    profile: CodingProfile,
    oracle,
    target_class: int,
    permutations: int,
    background_mask: Optional[RegionMask] = None,
    sampler_seed: Optional[int] = None,
) -> ShapleyReport:
    """Permutation-sampled Shapley values; deterministic given the seeds."""
    evaluator = CoalitionEvaluator(img, regions, background_mask, profile, oracle, target_class)
    ids = regions.ids()
    if sampler_seed is None:
        sampler_seed = profile.master_seed
    rng = np.random.Generator(np.random.Philox(key=derive_seed(sampler_seed, "permutations")))
    means, errs = sampled_shapley_values(
        len(ids), _region_game(evaluator, ids), permutations, rng
    )
    return ShapleyReport(
        values=dict(zip(ids, means)),
        evaluations=evaluator.evaluations,
        estimator="permutation",
        samples=permutations,
        stderr=dict(zip(ids, errs)),
    )


# ---------------------------------------------------------------------------
# Star-region aggregation and conditional ranking


@dataclass
class SegmentationResult:
    """Outcome of the greedy star-region aggregation."""

    star_mask: RegionMask
    star_id: int
    regions: RegionSet  # surviving region set, star included
    members: dict[int, frozenset[int]]  # surviving id -> original ids merged into it
    achieved_probability: float
    reports: list[ShapleyReport]  # one per iteration, keyed by surviving ids
    evaluator: Optional[CoalitionEvaluator] = field(repr=False, default=None)

    @property
    def star_original_ids(self) -> frozenset[int]:
        return self.members[self.star_id]


def _estimate(
    evaluator: CoalitionEvaluator,
    ids: list[int],
    members: dict[int, frozenset[int]],
    exhaustive_limit: int,
    permutations: Optional[int],
    sampler_seed: int,
    always_treated: frozenset[int] = frozenset(),
) -> ShapleyReport:
    game = _region_game(evaluator, ids, members, always_treated)
    if len(ids) <= exhaustive_limit:
        vals = exact_shapley_values(len(ids), game)
        return ShapleyReport(dict(zip(ids, vals)), evaluator.evaluations, "exact")
    if permutations is None:
        raise DomainError(
            f"{len(ids)} regions exceed the exhaustive limit {exhaustive_limit}; "
            "pass a permutation budget"
        )
    rng = np.random.Generator(np.random.Philox(key=derive_seed(sampler_seed, "permutations")))
    means, errs = sampled_shapley_values(len(ids), game, permutations, rng)
    return ShapleyReport(
        dict(zip(ids, means)), evaluator.evaluations, "permutation", permutations, dict(zip(ids, errs))
    )


def select_star_region(
    img: Image,
    regions: RegionSet,
    profile: CodingProfile,
    oracle,
    target_class: int,
    prob_threshold: float,
    background_mask: Optional[RegionMask] = None,
    exhaustive_limit: int = EXHAUSTIVE_LIMIT,
    permutations: Optional[int] = None,
) -> SegmentationResult:
    """Aggregate top-importance regions until one alone clears the threshold.

    Each round computes Shapley values over the current region set; if the
    argmax region's solo coalition beats ``prob_threshold`` it becomes the
    star region, otherwise it absorbs the runner-up (mask union, id kept)
    and the round repeats. Argmax ties break toward the smallest id.
    """
    if not 0.0 < prob_threshold < 1.0:
        raise DomainError(f"threshold must lie in (0, 1), got {prob_threshold}")
    evaluator = CoalitionEvaluator(img, regions, background_mask, profile, oracle, target_class)
    working: dict[int, RegionMask] = {rid: mask for rid, mask in regions.regions}
    members: dict[int, frozenset[int]] = {rid: frozenset([rid]) for rid in working}
    reports: list[ShapleyReport] = []

    while True:
        ids = sorted(working)
        report = _estimate(
            evaluator, ids, members, exhaustive_limit, permutations, profile.master_seed
        )
        reports.append(report)
        star_id = max(ids, key=lambda rid: (report.values[rid], -rid))
        achieved = evaluator.value(members[star_id])
        if achieved > prob_threshold:
            surviving = RegionSet([(rid, working[rid]) for rid in ids])
            return SegmentationResult(
                star_mask=working[star_id],
                star_id=star_id,
                regions=surviving,
                members=dict(members),
                achieved_probability=achieved,
                reports=reports,
                evaluator=evaluator,
            )
        if len(ids) == 1:
            raise ThresholdUnachievableError(
                f"threshold {prob_threshold} unachievable under profile; "
                f"best achieved probability {achieved}",
                best_probability=achieved,
            )
        runner_up = max(
            (rid for rid in ids if rid != star_id),
            key=lambda rid: (report.values[rid], -rid),
        )
        working[star_id] = working[star_id].union(working[runner_up])
        members[star_id] = members[star_id] | members[runner_up]
        del working[runner_up]
        del members[runner_up]


def rank_remaining_regions(
    segmentation: SegmentationResult,
    exhaustive_limit: int = EXHAUSTIVE_LIMIT,
    permutations: Optional[int] = None,
) -> RegionPartition:
    """Split the non-star regions by conditional Shapley value.

    The star region rides in every coalition; remaining regions with
    non-negative conditional value are positive, the rest negative.
    """
    evaluator = segmentation.evaluator
    if evaluator is None:
        raise DomainError("segmentation result does not carry its evaluator")
    star_id = segmentation.star_id
    remaining = [rid for rid in sorted(segmentation.members) if rid != star_id]
    star_members = segmentation.members[star_id]
    positive: set[int] = set()
    negative: set[int] = set()
    if remaining:
        report = _estimate(
            evaluator,
            remaining,
            segmentation.members,
            exhaustive_limit,
            permutations,
            evaluator.profile.master_seed,
            always_treated=star_members,
        )
        for rid in remaining:
            bucket = positive if report.values[rid] >= 0 else negative
            bucket |= segmentation.members[rid]
    return RegionPartition(
        star_ids=star_members,
        positive_ids=frozenset(positive),
        negative_ids=frozenset(negative),
        achieved_probability=segmentation.achieved_probability,
    )
