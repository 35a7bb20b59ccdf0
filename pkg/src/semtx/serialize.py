"""JSON persistence for region sets, partitions, and value reports.

Masks are stored run-length encoded in row-major order, alternating
zero-run / one-run counts and starting with a zero run.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .imaging import RegionMask, RegionSet
from .shapley import CodingProfile, RegionPartition, ShapleyReport


def mask_to_rle(mask: RegionMask) -> dict:
    flat = mask.bits.reshape(-1).astype(np.int8)
    boundaries = np.nonzero(np.diff(flat))[0] + 1
    edges = np.concatenate([[0], boundaries, [flat.size]])
    runs = np.diff(edges).tolist()
    if flat[0] == 1:
        runs = [0] + runs  # runs alternate starting from zeros
    return {"width": mask.width, "height": mask.height, "runs": runs}


def mask_from_rle(obj: dict) -> RegionMask:
    width, height = int(obj["width"]), int(obj["height"])
    runs = obj["runs"]
    if sum(runs) != width * height:
        raise ConfigError("mask run lengths do not cover width x height")
    flat = np.zeros(width * height, dtype=bool)
    pos = 0
    value = False
    for run in runs:
        if value:
            flat[pos : pos + run] = True
        pos += run
        value = not value
    return RegionMask(flat.reshape(height, width))


def regionset_to_dict(regions: RegionSet) -> dict:
    return {
        "regions": [
            {"id": rid, "mask": mask_to_rle(mask)} for rid, mask in regions.regions
        ]
    }


def regionset_from_dict(obj: dict) -> RegionSet:
    return RegionSet(
        [(int(r["id"]), mask_from_rle(r["mask"])) for r in obj["regions"]]
    )


def partition_to_dict(partition: RegionPartition) -> dict:
    return {
        "star_ids": sorted(partition.star_ids),
        "positive_ids": sorted(partition.positive_ids),
        "negative_ids": sorted(partition.negative_ids),
        "achieved_probability": partition.achieved_probability,
    }


def partition_from_dict(obj: dict) -> RegionPartition:
    return RegionPartition(
        star_ids=frozenset(int(i) for i in obj["star_ids"]),
        positive_ids=frozenset(int(i) for i in obj["positive_ids"]),
        negative_ids=frozenset(int(i) for i in obj["negative_ids"]),
        achieved_probability=float(obj["achieved_probability"]),
    )


def report_to_dict(report: ShapleyReport, profile: CodingProfile) -> dict:
    out = {
        "estimator": report.estimator,
        "values": {str(rid): v for rid, v in sorted(report.values.items())},
        "evaluations": report.evaluations,
        "profile": {
            "quality_base": profile.quality_base,
            "quality_target": profile.quality_target,
            "ber_channel": profile.ber_channel,
            "ber_target": profile.ber_target,
            "trials": profile.trials,
            "master_seed": profile.master_seed,
            "compression": profile.compression,
        },
    }
    if report.samples is not None:
        out["samples"] = report.samples
    if report.stderr is not None:
        out["stderr"] = {str(rid): v for rid, v in sorted(report.stderr.items())}
    return out


def write_json(obj: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path: str | Path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read JSON file {path}: {e}") from e
