"""Command-line interface.

Subcommands: segment, shapley, extract, run, sweep, na. Exit codes:
0 success, 2 configuration error, 3 oracle/protocol error, 4 threshold
unachievable.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import serialize
from .channel import na_min_blocklength
from .classifier import ExternalOracle, load_prototype_model
from .errors import (
    ConfigError,
    OracleError,
    RasterFormatError,
    SemtxError,
    ThresholdUnachievableError,
)
from .imaging import load_mask, load_raster, grid_presegment, save_mask
from .pipeline import (
    Scheme,
    SweepSpec,
    run_scheme,
    run_sweep,
    scheme_preset,
    write_results,
)
from .shapley import (
    CodingProfile,
    rank_remaining_regions,
    select_star_region,
    shapley_exact,
    shapley_sampled,
)

EXIT_CONFIG = 2
EXIT_ORACLE = 3
EXIT_THRESHOLD = 4


def _add_profile_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--quality-base", type=int, default=1)
    p.add_argument("--quality-target", type=int, default=50)
    p.add_argument("--ber-channel", type=float, default=0.2014)
    p.add_argument("--ber-target", type=float, default=1e-2)
    p.add_argument(
        "--compression", choices=("codec", "uncompressed"), default="codec"
    )


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=8)
    p.add_argument(
        "--oracle",
        default=None,
        help="builtin:<model-file> or external:<command>",
    )
    p.add_argument("--target-class", type=int, default=1)
    p.add_argument("--out", default="out", help="output directory")


def _profile_from_args(args) -> CodingProfile:
    return CodingProfile(
        quality_base=args.quality_base,
        quality_target=args.quality_target,
        ber_channel=args.ber_channel,
        ber_target=args.ber_target,
        trials=args.trials,
        master_seed=args.seed,
        compression=args.compression,
    )


def _open_oracle(spec: str | None):
    if spec is None:
        raise ConfigError("an oracle is required: --oracle builtin:<file> | external:<command>")
    if spec.startswith("builtin:"):
        return load_prototype_model(spec[len("builtin:") :]), None
    if spec.startswith("external:"):
        oracle = ExternalOracle(spec[len("external:") :])
        return oracle, oracle
    raise ConfigError(f"oracle spec must start with builtin: or external:, got {spec!r}")


def _load_inputs(args):
    img = load_raster(args.image)
    object_mask = load_mask(args.mask)
    if not object_mask.matches(img):
        raise ConfigError("object mask dimensions do not match the image")
    if args.regions:
        regions = serialize.regionset_from_dict(serialize.read_json(args.regions))
    else:
        regions = grid_presegment(object_mask, args.rows, args.cols)
    return img, object_mask, regions


def _add_region_source_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--image", required=True)
    p.add_argument("--mask", required=True, help="object mask (P5, nonzero = object)")
    p.add_argument("--regions", default=None, help="precomputed region-set JSON")
    p.add_argument("--rows", type=int, default=2)
    p.add_argument("--cols", type=int, default=2)


def _cmd_segment(args) -> int:
    img = load_raster(args.image)
    object_mask = load_mask(args.mask)
    if not object_mask.matches(img):
        raise ConfigError("object mask dimensions do not match the image")
    regions = grid_presegment(object_mask, args.rows, args.cols)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "regions.json"
    serialize.write_json(serialize.regionset_to_dict(regions), path)
    print(f"wrote {len(regions)} regions to {path}")
    return 0


def _cmd_shapley(args) -> int:
    img, object_mask, regions = _load_inputs(args)
    profile = _profile_from_args(args)
    oracle, handle = _open_oracle(args.oracle)
    try:
        if args.estimator == "exact":
            report = shapley_exact(
                img, regions, profile, oracle, args.target_class, object_mask.complement()
            )
        else:
            report = shapley_sampled(
                img,
                regions,
                profile,
                oracle,
                args.target_class,
                permutations=args.permutations,
                background_mask=object_mask.complement(),
            )
    finally:
        if handle is not None:
            handle.close()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "shapley.json"
    serialize.write_json(serialize.report_to_dict(report, profile), path)
    print(f"wrote report to {path}")
    for rid in sorted(report.values):
        print(f"region {rid}: {report.values[rid]!r}")
    return 0


def _cmd_extract(args) -> int:
    img, object_mask, regions = _load_inputs(args)
    profile = _profile_from_args(args)
    oracle, handle = _open_oracle(args.oracle)
    try:
        segmentation = select_star_region(
            img,
            regions,
            profile,
            oracle,
            args.target_class,
            prob_threshold=args.p_threshold,
            background_mask=object_mask.complement(),
            permutations=args.permutations,
        )
        partition = rank_remaining_regions(segmentation, permutations=args.permutations)
    finally:
        if handle is not None:
            handle.close()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "partition.json"
    serialize.write_json(serialize.partition_to_dict(partition), path)
    save_mask(segmentation.star_mask, out / "star_mask.pgm")
    print(f"wrote partition to {path}")
    print(
        f"star={sorted(partition.star_ids)} positive={sorted(partition.positive_ids)} "
        f"negative={sorted(partition.negative_ids)} "
        f"achieved_probability={partition.achieved_probability!r}"
    )
    return 0


def _parse_scheme(obj, background_transmitted: bool, coding: str, compression: str) -> Scheme:
    if isinstance(obj, str):
        return scheme_preset(obj, background_transmitted, coding, compression)
    try:
        return Scheme(
            name=obj["name"],
            protected=frozenset(obj["protected"]),
            background_transmitted=obj.get("background_transmitted", background_transmitted),
            coding=obj.get("coding", coding),
            compression=obj.get("compression", compression),
        )
    except (KeyError, TypeError) as e:
        raise ConfigError(f"bad scheme entry {obj!r}: {e}") from e


def _cmd_run(args) -> int:
    img, object_mask, regions = _load_inputs(args)
    partition = serialize.partition_from_dict(serialize.read_json(args.partition))
    profile = _profile_from_args(args)
    scheme = _parse_scheme(
        args.scheme,
        background_transmitted=not args.drop_background,
        coding=args.coding,
        compression=args.compression,
    )
    oracle, handle = _open_oracle(args.oracle)
    try:
        result = run_scheme(
            img,
            regions,
            object_mask.complement(),
            partition,
            profile,
            scheme,
            oracle,
            args.target_class,
            trials=args.trials,
            seed=args.seed,
        )
    finally:
        if handle is not None:
            handle.close()
    csv_path, json_path = write_results([result], args.out)
    print(f"wrote {csv_path} and {json_path}")
    print(
        f"p_D={result.probability!r} K={result.raw_bits} N={result.channel_bits} "
        f"R={result.code_rate!r} e={result.efficiency!r}"
    )
    return 0


def _cmd_sweep(args) -> int:
    cfg = serialize.read_json(args.config)
    try:
        base = Path(args.config).parent

        def rel(p):
            q = Path(p)
            return q if q.is_absolute() else base / q

        img = load_raster(rel(cfg["image"]))
        object_mask = load_mask(rel(cfg["object_mask"]))
        if not object_mask.matches(img):
            raise ConfigError("object mask dimensions do not match the image")
        if "regions" in cfg:
            regions = serialize.regionset_from_dict(serialize.read_json(rel(cfg["regions"])))
        else:
            grid = cfg.get("grid", {})
            regions = grid_presegment(
                object_mask, int(grid.get("rows", 2)), int(grid.get("cols", 2))
            )
        seed = int(cfg.get("seed", 0))
        trials = int(cfg.get("trials", 8))
        p = cfg["profile"]
        compression = cfg.get("compression", "codec")
        profile = CodingProfile(
            quality_base=int(p.get("quality_base", 1)),
            quality_target=int(p.get("quality_target", 50)),
            ber_channel=float(p["ber_channel"]),
            ber_target=float(p["ber_target"]),
            trials=trials,
            master_seed=seed,
            compression=compression,
        )
        background_transmitted = bool(cfg.get("background_transmitted", True))
        coding = cfg.get("coding", "na")
        schemes = [
            _parse_scheme(s, background_transmitted, coding, compression)
            for s in cfg["schemes"]
        ]
        spec = SweepSpec(
            variable=cfg["sweep"]["variable"],
            grid=[float(v) for v in cfg["sweep"]["grid"]],
        )
        target_class = int(cfg.get("target_class", 1))
        oracle_spec = cfg.get("oracle")
        if oracle_spec and oracle_spec.startswith("builtin:"):
            oracle_spec = "builtin:" + str(rel(oracle_spec[len("builtin:") :]))
    except KeyError as e:
        raise ConfigError(f"sweep config is missing key {e}") from e

    oracle, handle = _open_oracle(oracle_spec)
    try:
        if "partition" in cfg:
            partition = serialize.partition_from_dict(
                serialize.read_json(rel(cfg["partition"]))
            )
        else:
            segmentation = select_star_region(
                img,
                regions,
                profile,
                oracle,
                target_class,
                prob_threshold=float(cfg.get("p_threshold", 0.5)),
                background_mask=object_mask.complement(),
            )
            partition = rank_remaining_regions(segmentation)
        results = run_sweep(
            img,
            regions,
            object_mask.complement(),
            partition,
            profile,
            schemes,
            spec,
            oracle,
            target_class,
            trials=trials,
            seed=seed,
        )
    finally:
        if handle is not None:
            handle.close()
    out = args.out if args.out is not None else cfg.get("out", "out")
    csv_path, json_path = write_results(results, out)
    print(f"wrote {csv_path} and {json_path}")
    return 0


def _cmd_na(args) -> int:
    result = na_min_blocklength(args.k, args.ber_channel, args.ber_target)
    print(f"N* = {result.min_blocklength}")
    print(f"rate = {result.rate!r}")
    print(f"snr = {result.snr!r}")
    print(f"I = {result.mutual_info!r}")
    print(f"V = {result.dispersion!r}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semtx",
        description="Importance-aware image compression and unequal channel protection",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", help="grid pre-segmentation of the object mask")
    p.add_argument("--image", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--cols", type=int, required=True)
    p.add_argument("--out", default="out")
    p.set_defaults(func=_cmd_segment)

    p = sub.add_parser("shapley", help="per-region Shapley value report")
    _add_region_source_flags(p)
    _add_profile_flags(p)
    _add_common_flags(p)
    p.add_argument("--estimator", choices=("exact", "sampled"), default="exact")
    p.add_argument("--permutations", type=int, default=2000)
    p.set_defaults(func=_cmd_shapley)

    p = sub.add_parser("extract", help="star-region aggregation plus ranking")
    _add_region_source_flags(p)
    _add_profile_flags(p)
    _add_common_flags(p)
    p.add_argument("--p-threshold", type=float, required=True)
    p.add_argument("--permutations", type=int, default=None)
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("run", help="run one transmission scheme")
    _add_region_source_flags(p)
    _add_profile_flags(p)
    _add_common_flags(p)
    p.add_argument("--partition", required=True)
    p.add_argument("--scheme", required=True, help="star|star_positive|star_negative|full")
    p.add_argument("--coding", choices=("na", "ideal"), default="na")
    p.add_argument("--drop-background", action="store_true")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="config-driven sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("na", help="minimum-blocklength calculator")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--ber-channel", type=float, required=True)
    p.add_argument("--ber-target", type=float, required=True)
    p.set_defaults(func=_cmd_na)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ThresholdUnachievableError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_THRESHOLD
    except OracleError as e:
        print(f"oracle error: {e}", file=sys.stderr)
        return EXIT_ORACLE
    except (ConfigError, RasterFormatError, FileNotFoundError, IsADirectoryError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except SemtxError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
