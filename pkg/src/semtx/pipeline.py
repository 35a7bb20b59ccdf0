"""End-to-end transmission schemes, their metrics, and config-driven sweeps.

Every run encodes four independent streams (star / positive / negative /
background), one per region group, each over its own minimum bounding
rectangle. A scheme decides which groups are protected (target quality +
channel coding down to the target BER) and whether the background is
transmitted at all; untransmitted backgrounds are re-filled at the
receiver with seeded uniform noise.

Metrics per run: the raw-image bit count K, total channel bits N, code
rate R = K/N (raw bits over transmitted bits, so compression pushes R
above 1), and coding efficiency e = p * R where p is the mean
target-class probability over trials.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

from . import codec
from .channel import bpsk_ber, protect_stream
from .classifier import classify
from .errors import ConfigError, DomainError
from .imaging import (
    Image,
    Rect,
    RegionMask,
    RegionSet,
    composite_layers,
    crop,
    fill_background_uniform,
    min_bounding_rect,
    union_masks,
)
from .seeds import derive_seed, substream
from .shapley import CodingProfile, RegionPartition

GROUPS = ("star", "positive", "negative", "background")
CSV_COLUMNS = ("scheme", "sweep_value", "p_D", "K", "N", "R", "e", "trials", "seed")


@dataclass(frozen=True)
class Scheme:
    """Which region groups receive target quality and channel protection."""

    name: str
    protected: frozenset[str]
    background_transmitted: bool = True
    coding: str = "na"  # "na" | "ideal"
    compression: str = "codec"  # "codec" | "uncompressed"

    def __post_init__(self):
        unknown = self.protected - set(GROUPS)
        if unknown:
            raise DomainError(f"unknown protected groups {sorted(unknown)}")
        if not self.background_transmitted and "background" in self.protected:
            raise DomainError("cannot protect an untransmitted background")
        if self.coding not in ("na", "ideal"):
            raise DomainError(f"unknown coding mode {self.coding!r}")
        if self.compression not in ("codec", "uncompressed"):
            raise DomainError(f"unknown compression mode {self.compression!r}")


def scheme_preset(
    name: str,
    background_transmitted: bool = True,
    coding: str = "na",
    compression: str = "codec",
) -> Scheme:
    """The four benchmark configurations, by name."""
    presets = {
        "star": frozenset({"star"}),
        "star_positive": frozenset({"star", "positive"}),
        "star_negative": frozenset({"star", "negative"}),
        "full": frozenset({"star", "positive", "negative"})
        | (frozenset({"background"}) if background_transmitted else frozenset()),
    }
    if name not in presets:
        raise ConfigError(f"unknown scheme preset {name!r}; options: {sorted(presets)}")
    return Scheme(
        name=name,
        protected=presets[name],
        background_transmitted=background_transmitted,
        coding=coding,
        compression=compression,
    )


@dataclass
class StreamRecord:
    """Accounting for one group's stream in one run."""

    group: str
    rect: Optional[Rect]
    source_bits: int
    channel_bits: int
    protected: bool


@dataclass
class SchemeResult:
    scheme: Scheme
    probability: float  # mean target-class probability over trials
    raw_bits: int  # K
    channel_bits: int  # N
    code_rate: float  # R = K / N, exactly
    efficiency: float  # e = probability * R, exactly
    trial_probabilities: list[float]
    streams: list[StreamRecord]
    trials: int
    seed: int
    sweep_value: Optional[float] = None


def _group_masks(
    regions: RegionSet, background_mask: RegionMask, partition: RegionPartition
) -> dict[str, RegionMask]:
    ids = set(regions.ids())
    used = partition.star_ids | partition.positive_ids | partition.negative_ids
    if used != ids:
        raise DomainError(
            f"partition ids {sorted(used)} do not cover region ids {sorted(ids)}"
        )
    def union_of(id_set):
        if not id_set:
            return None
        return union_masks([regions.mask(rid) for rid in sorted(id_set)])

    return {
        "star": union_of(partition.star_ids),
        "positive": union_of(partition.positive_ids),
        "negative": union_of(partition.negative_ids),
        "background": None if background_mask.empty else background_mask,
    }


def run_scheme(
    img: Image,
    regions: RegionSet,
    background_mask: RegionMask,
    partition: RegionPartition,
    profile: CodingProfile,
    scheme: Scheme,
    oracle,
    target_class: int,
    trials: int,
    seed: int,
    sweep_value: Optional[float] = None,
) -> SchemeResult:
    """Simulate one scheme: encode, protect, corrupt, decode, classify.

    Streams are encoded once; each trial redraws the channel noise (and the
    background fill) from seeds keyed by (seed, trial, group), so a scheme
    change never perturbs another scheme's noise.
    """
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials}")
    if not background_mask.matches(img):
        raise DomainError("background mask does not match the image")
    masks = _group_masks(regions, background_mask, partition)

    covered = union_masks([m for m in masks.values() if m is not None])
    if not covered.complement().empty:
        raise DomainError("region groups plus background must tile the image")

    encoded: list[dict] = []
    for group in GROUPS:
        mask = masks[group]
        if mask is None:
            continue
        if group == "background" and not scheme.background_transmitted:
            continue
        protected = group in scheme.protected
        quality = profile.quality_target if protected else profile.quality_base
        ber = profile.ber_target if protected else profile.ber_channel
        rect = min_bounding_rect(mask)
        region = crop(img, rect)
        if scheme.compression == "uncompressed":
            bits = codec.encode_region_raw(region)
            header_bits = 0
        else:
            bits = codec.encode_region(region, quality).bits
            header_bits = codec.HEADER_BITS
        encoded.append(
            {
                "group": group,
                "mask": mask,
                "rect": rect,
                "bits": bits,
                "header_bits": header_bits,
                "quality": quality,
                "ber": ber,
                "protected": protected,
            }
        )

    records: list[StreamRecord] = []
    total_channel_bits = 0
    for e in encoded:
        # sizing is trial-independent; compute it once via a zero-error probe
        _, n = protect_stream(e["bits"], profile.ber_channel, e["ber"], scheme.coding, seed=0)
        e["channel_bits"] = n
        total_channel_bits += n
        records.append(
            StreamRecord(
                group=e["group"],
                rect=e["rect"],
                source_bits=len(e["bits"]),
                channel_bits=n,
                protected=e["protected"],
            )
        )

    probs: list[float] = []
    base = Image.flat(img.height, img.width, 128, img.channels)
    for trial in range(trials):
        layers = []
        for e in encoded:
            noise_seed = derive_seed(seed, "noise", trial, e["group"])
            delivered, _ = protect_stream(
                e["bits"], profile.ber_channel, e["ber"], scheme.coding, seed=noise_seed
            )
            if e["header_bits"]:
                # headers ride an error-free side channel
                delivered[: e["header_bits"]] = e["bits"][: e["header_bits"]]
            rect = e["rect"]
            if scheme.compression == "uncompressed":
                decoded = codec.decode_region_raw(delivered, rect.w, rect.h, img.channels)
            else:
                decoded = codec.decode_region(codec.RegionBitstream(delivered))
            layers.append((rect, decoded, e["mask"]))
        reconstructed = composite_layers(base, layers)
        if not scheme.background_transmitted and masks["background"] is not None:
            reconstructed = fill_background_uniform(
                reconstructed, masks["background"], substream(seed, "bgfill", trial)
            )
        probs.append(
            classify(oracle, reconstructed, target_class).target_probability
        )

    probability = math.fsum(probs) / trials
    raw_bits = img.bit_length
    code_rate = raw_bits / total_channel_bits
    return SchemeResult(
        scheme=scheme,
        probability=probability,
        raw_bits=raw_bits,
        channel_bits=total_channel_bits,
        code_rate=code_rate,
        efficiency=probability * code_rate,
        trial_probabilities=probs,
        streams=records,
        trials=trials,
        seed=seed,
        sweep_value=sweep_value,
    )


# ---------------------------------------------------------------------------
# Sweeps


SWEEP_VARIABLES = ("ber_target", "quality_target", "gain")


@dataclass
class SweepSpec:
    variable: str
    grid: list[float]

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise ConfigError(
                f"unknown sweep variable {self.variable!r}; options: {SWEEP_VARIABLES}"
            )
        if not self.grid:
            raise ConfigError("sweep grid must not be empty")


def _profile_at(profile: CodingProfile, spec: SweepSpec, value: float) -> CodingProfile:
    if spec.variable == "ber_target":
        return replace(profile, ber_target=float(value))
    if spec.variable == "quality_target":
        return replace(profile, quality_target=int(value))
    return replace(profile, ber_channel=bpsk_ber(float(value)))


def validate_sweep(profile: CodingProfile, spec: SweepSpec) -> None:
    """Reject invalid grids before any run."""
    for value in spec.grid:
        if spec.variable == "ber_target":
            if not 0.0 < value < profile.ber_channel:
                raise ConfigError(
                    f"sweep entry ber_target={value} must lie in (0, ber_channel={profile.ber_channel})"
                )
        elif spec.variable == "quality_target":
            if int(value) != value or not profile.quality_base <= int(value) <= 100:
                raise ConfigError(
                    f"sweep entry quality_target={value} must be an integer in "
                    f"[{profile.quality_base}, 100]"
                )
        else:
            if value <= 0:
                raise ConfigError(f"sweep entry gain={value} must be positive")
            if profile.ber_target >= bpsk_ber(float(value)):
                raise ConfigError(
                    f"sweep entry gain={value} yields a channel BER at or below ber_target"
                )
        try:
            _profile_at(profile, spec, value)
        except DomainError as e:
            raise ConfigError(f"sweep entry {value} rejected: {e}") from e


def run_sweep(
    img: Image,
    regions: RegionSet,
    background_mask: RegionMask,
    partition: RegionPartition,
    profile: CodingProfile,
    schemes: Sequence[Scheme],
    spec: SweepSpec,
    oracle,
    target_class: int,
    trials: int,
    seed: int,
) -> list[SchemeResult]:
    """One SchemeResult per (grid point, scheme), in fixed order."""
    validate_sweep(profile, spec)
    results = []
    for value in spec.grid:
        point_profile = _profile_at(profile, spec, value)
        for scheme in schemes:
            results.append(
                run_scheme(
                    img,
                    regions,
                    background_mask,
                    partition,
                    point_profile,
                    scheme,
                    oracle,
                    target_class,
                    trials,
                    seed,
                    sweep_value=float(value),
                )
            )
    return results


# ---------------------------------------------------------------------------
# Result files


def results_to_csv(results: Sequence[SchemeResult]) -> str:
    """Fixed-column CSV; floats use shortest round-trip formatting."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in results:
        writer.writerow(
            [
                r.scheme.name,
                "" if r.sweep_value is None else repr(r.sweep_value),
                repr(r.probability),
                r.raw_bits,
                r.channel_bits,
                repr(r.code_rate),
                repr(r.efficiency),
                r.trials,
                r.seed,
            ]
        )
    return buf.getvalue()


def result_to_dict(r: SchemeResult) -> dict:
    return {
        "scheme": {
            "name": r.scheme.name,
            "protected": sorted(r.scheme.protected),
            "background_transmitted": r.scheme.background_transmitted,
            "coding": r.scheme.coding,
            "compression": r.scheme.compression,
        },
        "sweep_value": r.sweep_value,
        "p_D": r.probability,
        "K": r.raw_bits,
        "N": r.channel_bits,
        "R": r.code_rate,
        "e": r.efficiency,
        "trials": r.trials,
        "seed": r.seed,
        "trial_probabilities": r.trial_probabilities,
        "streams": [
            {
                "group": s.group,
                "rect": None
                if s.rect is None
                else {"x0": s.rect.x0, "y0": s.rect.y0, "w": s.rect.w, "h": s.rect.h},
                "source_bits": s.source_bits,
                "channel_bits": s.channel_bits,
                "protected": s.protected,
            }
            for s in r.streams
        ],
    }


def write_results(results: Sequence[SchemeResult], out_dir: str | Path) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "results.csv"
    json_path = out / "results.json"
    csv_path.write_text(results_to_csv(results))
    json_path.write_text(
        json.dumps([result_to_dict(r) for r in results], indent=2, sort_keys=True) + "\n"
    )
    return csv_path, json_path
