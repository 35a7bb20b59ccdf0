import csv
import io

import numpy as np
import pytest

from semtx.errors import ConfigError, DomainError
from semtx.pipeline import (
    CSV_COLUMNS,
    Scheme,
    SweepSpec,
    results_to_csv,
    run_scheme,
    run_sweep,
    scheme_preset,
    validate_sweep,
    write_results,
)
from semtx.shapley import (
    CodingProfile,
    RegionPartition,
    rank_remaining_regions,
    select_star_region,
)
from semtx.synth import six_region_instance

ALL_SCHEME_NAMES = ("star", "star_positive", "star_negative", "full")


@pytest.fixture(scope="module")
def instance():
    return six_region_instance()


@pytest.fixture(scope="module")
def partition(instance):
    profile = CodingProfile(
        quality_base=1,
        quality_target=100,
        ber_channel=0.2014,
        ber_target=1e-3,
        trials=4,
        master_seed=11,
        compression="uncompressed",
    )
    seg = select_star_region(
        instance.image,
        instance.regions,
        profile,
        instance.model,
        1,
        prob_threshold=0.7,
        background_mask=instance.background_mask,
    )
    return rank_remaining_regions(seg)


def _profile(**kw):
    defaults = dict(
        quality_base=1,
        quality_target=100,
        ber_channel=0.2014,
        ber_target=1e-2,
        trials=4,
        master_seed=11,
        compression="uncompressed",
    )
    defaults.update(kw)
    return CodingProfile(**defaults)


def _run(instance, partition, scheme, profile=None, trials=4, seed=77):
    return run_scheme(
        instance.image,
        instance.regions,
        instance.background_mask,
        partition,
        profile or _profile(),
        scheme,
        instance.model,
        1,
        trials=trials,
        seed=seed,
    )


class TestScheme:
    def test_presets(self):
        star = scheme_preset("star")
        assert star.protected == frozenset({"star"})
        full = scheme_preset("full", background_transmitted=True)
        assert full.protected == frozenset({"star", "positive", "negative", "background"})
        full_no_bg = scheme_preset("full", background_transmitted=False)
        assert "background" not in full_no_bg.protected

    def test_unknown_preset(self):
        with pytest.raises(ConfigError):
            scheme_preset("everything")

    def test_validation(self):
        with pytest.raises(DomainError):
            Scheme("x", frozenset({"sky"}))
        with pytest.raises(DomainError):
            Scheme("x", frozenset({"background"}), background_transmitted=False)
        with pytest.raises(DomainError):
            Scheme("x", frozenset({"star"}), coding="magic")


class TestRunScheme:
    def test_metric_identities(self, instance, partition):
        result = _run(instance, partition, scheme_preset("star", compression="uncompressed"))
        assert result.raw_bits == instance.image.bit_length
        assert result.code_rate == result.raw_bits / result.channel_bits
        assert result.efficiency == result.probability * result.code_rate
        assert 0.0 <= result.probability <= 1.0

    def test_bit_conservation(self, instance, partition):
        result = _run(instance, partition, scheme_preset("full", compression="uncompressed"))
        assert result.channel_bits == sum(s.channel_bits for s in result.streams)

    def test_unprotected_streams_carry_their_source_bits(self, instance, partition):
        result = _run(instance, partition, scheme_preset("star", compression="uncompressed"))
        for s in result.streams:
            if not s.protected:
                assert s.channel_bits == s.source_bits
            else:
                assert s.channel_bits > s.source_bits

    def test_degenerate_profile_makes_schemes_coincide(self, instance, partition):
        profile = CodingProfile(30, 30, 0.1, 0.1, trials=3, master_seed=5)
        outcomes = set()
        for name in ALL_SCHEME_NAMES:
            r = _run(
                instance,
                partition,
                scheme_preset(name, compression="codec"),
                profile=profile,
                trials=3,
                seed=9,
            )
            outcomes.add((r.probability, r.channel_bits))
        assert len(outcomes) == 1

    def test_star_only_cheaper_than_full(self, instance, partition):
        star = _run(instance, partition, scheme_preset("star", compression="uncompressed"))
        full = _run(instance, partition, scheme_preset("full", compression="uncompressed"))
        assert star.channel_bits < full.channel_bits
        assert star.raw_bits == full.raw_bits

    def test_untransmitted_background_costs_nothing(self, instance, partition):
        with_bg = _run(instance, partition, scheme_preset("star"))
        without_bg = _run(
            instance, partition, scheme_preset("star", background_transmitted=False)
        )
        bg_groups = [s.group for s in without_bg.streams]
        assert "background" not in bg_groups
        assert without_bg.channel_bits < with_bg.channel_bits

    def test_trial_seeds_do_not_depend_on_trial_count(self, instance, partition):
        scheme = scheme_preset("star", compression="uncompressed")
        short = _run(instance, partition, scheme, trials=2)
        long = _run(instance, partition, scheme, trials=4)
        assert long.trial_probabilities[:2] == short.trial_probabilities

    def test_codec_mode_runs(self, instance, partition):
        profile = _profile(compression="codec", ber_target=1e-3)
        result = _run(
            instance, partition, scheme_preset("star", compression="codec"), profile=profile
        )
        assert result.channel_bits > 0

    def test_full_protection_with_vanishing_errors_recovers_the_original(
        self, instance, partition
    ):
        # all groups protected at a residual rate so small no bit ever flips:
        # raw transport reconstructs the original image bit for bit
        from semtx.classifier import classify

        profile = _profile(ber_target=1e-12)
        result = _run(
            instance, partition, scheme_preset("full", compression="uncompressed"),
            profile=profile,
        )
        want = classify(instance.model, instance.image, 1).target_probability
        assert result.probability == want
        assert set(result.trial_probabilities) == {want}

    def test_rgb_image_through_codec_mode(self):
        import numpy as np
        from semtx.classifier import PrototypeModel
        from semtx.imaging import Image, RegionMask, grid_presegment

        rng = np.random.default_rng(21)
        img = Image(rng.integers(0, 256, size=(32, 32, 3), dtype=np.uint8))
        model = PrototypeModel(
            [Image(img.samples.copy()), Image(255 - img.samples)], sharpness=1e-3
        )
        obj = RegionMask.full(32, 32)
        regions = grid_presegment(obj, 2, 2)
        part = RegionPartition(frozenset({1}), frozenset({2, 3}), frozenset({4}), 0.9)
        profile = CodingProfile(5, 80, 0.2014, 1e-2, trials=2, master_seed=3)
        result = run_scheme(
            img,
            regions,
            obj.complement(),
            part,
            profile,
            scheme_preset("star"),
            model,
            1,
            trials=3,
            seed=1,
        )
        assert result.raw_bits == 32 * 32 * 3 * 8
        assert result.channel_bits == sum(s.channel_bits for s in result.streams)
        assert 0.0 <= result.probability <= 1.0

    def test_partition_must_cover_regions(self, instance, partition):
        bad = RegionPartition(
            star_ids=frozenset({1}),
            positive_ids=frozenset({2}),
            negative_ids=frozenset({3}),
            achieved_probability=0.9,
        )
        with pytest.raises(DomainError, match="cover"):
            _run(instance, bad, scheme_preset("star"))

    def test_trials_domain(self, instance, partition):
        with pytest.raises(DomainError):
            _run(instance, partition, scheme_preset("star"), trials=0)


class TestSweep:
    def test_single_point_matches_run_scheme(self, instance, partition):
        scheme = scheme_preset("star", compression="uncompressed")
        spec = SweepSpec(variable="ber_target", grid=[1e-2])
        swept = run_sweep(
            instance.image,
            instance.regions,
            instance.background_mask,
            partition,
            _profile(),
            [scheme],
            spec,
            instance.model,
            1,
            trials=4,
            seed=77,
        )
        direct = _run(instance, partition, scheme)
        assert len(swept) == 1
        assert swept[0].probability == direct.probability
        assert swept[0].channel_bits == direct.channel_bits

    def test_invalid_grid_rejected_before_any_run(self, instance, partition):
        spec = SweepSpec(variable="ber_target", grid=[1e-2, 0.5])
        with pytest.raises(ConfigError, match="ber_target"):
            validate_sweep(_profile(), spec)

    def test_gain_sweep_validates_derived_ber(self):
        spec = SweepSpec(variable="gain", grid=[100.0])
        with pytest.raises(ConfigError, match="gain"):
            validate_sweep(_profile(ber_target=1e-2), spec)

    def test_unknown_variable_rejected(self):
        with pytest.raises(ConfigError):
            SweepSpec(variable="humidity", grid=[1.0])

    def test_protected_stream_grows_as_target_tightens(self, instance, partition):
        spec = SweepSpec(variable="ber_target", grid=[1e-1, 1e-2, 1e-3, 1e-4])
        results = run_sweep(
            instance.image,
            instance.regions,
            instance.background_mask,
            partition,
            _profile(),
            [scheme_preset("star", compression="uncompressed")],
            spec,
            instance.model,
            1,
            trials=2,
            seed=3,
        )
        star_bits = [
            next(s.channel_bits for s in r.streams if s.group == "star") for r in results
        ]
        assert all(a < b for a, b in zip(star_bits, star_bits[1:]))

    def test_quality_sweep_in_codec_mode(self, instance, partition):
        spec = SweepSpec(variable="quality_target", grid=[10, 50, 90])
        profile = _profile(compression="codec", ber_target=1e-3, quality_base=1)
        results = run_sweep(
            instance.image,
            instance.regions,
            instance.background_mask,
            partition,
            profile,
            [scheme_preset("star", compression="codec")],
            spec,
            instance.model,
            1,
            trials=2,
            seed=5,
        )
        assert [r.sweep_value for r in results] == [10.0, 50.0, 90.0]
        # the protected rect carries more source bits at finer quality
        star_bits = [
            next(s.source_bits for s in r.streams if s.group == "star") for r in results
        ]
        assert star_bits[0] < star_bits[-1]

    def test_gain_sweep_recomputes_channel_ber(self, instance, partition):
        spec = SweepSpec(variable="gain", grid=[0.7, 2.0])
        profile = _profile(ber_target=1e-3)
        results = run_sweep(
            instance.image,
            instance.regions,
            instance.background_mask,
            partition,
            profile,
            [scheme_preset("star", compression="uncompressed")],
            spec,
            instance.model,
            1,
            trials=2,
            seed=5,
        )
        # better channel -> shorter protected stream
        bits = [
            next(s.channel_bits for s in r.streams if s.protected) for r in results
        ]
        assert bits[1] < bits[0]

    def test_deterministic_csv(self, instance, partition, tmp_path):
        spec = SweepSpec(variable="ber_target", grid=[1e-1, 1e-3])
        def go():
            return run_sweep(
                instance.image,
                instance.regions,
                instance.background_mask,
                partition,
                _profile(),
                [scheme_preset(n, compression="uncompressed") for n in ("star", "full")],
                spec,
                instance.model,
                1,
                trials=3,
                seed=123,
            )
        assert results_to_csv(go()) == results_to_csv(go())


class TestResultFiles:
    def test_csv_columns_and_identities(self, instance, partition, tmp_path):
        results = [
            _run(instance, partition, scheme_preset(n, compression="uncompressed"))
            for n in ALL_SCHEME_NAMES
        ]
        text = results_to_csv(results)
        rows = list(csv.reader(io.StringIO(text)))
        assert tuple(rows[0]) == CSV_COLUMNS
        for row in rows[1:]:
            p, k, n, r, e = float(row[2]), int(row[3]), int(row[4]), float(row[5]), float(row[6])
            assert r == k / n
            assert e == p * r

    def test_write_results(self, instance, partition, tmp_path):
        results = [_run(instance, partition, scheme_preset("star"))]
        csv_path, json_path = write_results(results, tmp_path / "out")
        assert csv_path.exists() and json_path.exists()
        assert csv_path.read_text().startswith(",".join(CSV_COLUMNS))
