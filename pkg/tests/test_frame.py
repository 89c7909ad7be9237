"""Population model tests: spec validation, generation invariants, truth
enumeration, and frame-file round trips."""

import dataclasses
import math

import numpy as np
import pytest

from stripsurvey import (
    CopulaSpec,
    GridSpec,
    MarginalSpec,
    PopulationFrame,
    enumerate_truth,
    generate_population,
    load_frame,
    save_frame,
)
from stripsurvey.errors import FrameValidationError, SpecValidationError

TABLE_TARGETS = np.array(
    [
        [1.00, 0.53, 0.60, 0.28],
        [0.53, 1.00, 0.84, 0.42],
        [0.60, 0.84, 1.00, 0.37],
        [0.28, 0.42, 0.37, 1.00],
    ]
)


def small_spec(**overrides):
    base = dict(
        correlation=TABLE_TARGETS,
        stratum_probs=(0.52, 0.17, 0.17, 0.14),
        height=MarginalSpec("lognormal", {"median": 4.0, "sigma": 0.55}),
        biomass=MarginalSpec("zero_inflated_gamma", {"zero_prob": 0.15, "shape": 1.8, "scale": 34.0}),
        domain_fraction=MarginalSpec("beta", {"alpha": 2.0, "beta": 0.8}),
        domain_link=(-1.5, 0.8),
        pool_size=60000,
        grid=GridSpec(strips=24, cells_per_strip=140, length_variation=0.15),
        a_cell_ha=1.0 / 15.0,
    )
    base.update(overrides)
    return CopulaSpec(**base)


def frame_columns(frame):
    return np.column_stack(
        [
            frame.stratum_id.astype(float),
            frame.lidar_height,
            frame.biomass_density,
            frame.domain_proportion,
        ]
    )


class TestSpecValidation:
    def test_non_positive_definite_correlation_rejected(self):
        bad = TABLE_TARGETS.copy()
        bad[0, 1] = bad[1, 0] = 0.999
        bad[0, 2] = bad[2, 0] = -0.999
        bad[1, 2] = bad[2, 1] = 0.999
        with pytest.raises(SpecValidationError, match="positive definite"):
            small_spec(correlation=bad)

    def test_asymmetric_correlation_rejected(self):
        bad = TABLE_TARGETS.copy()
        bad[0, 1] = 0.1
        with pytest.raises(SpecValidationError, match="symmetric"):
            small_spec(correlation=bad)

    def test_pool_size_floor(self):
        with pytest.raises(SpecValidationError, match="pool_size"):
            small_spec(pool_size=999)

    def test_bad_marginal_params(self):
        with pytest.raises(SpecValidationError):
            MarginalSpec("lognormal", {"median": -1.0, "sigma": 0.5})
        with pytest.raises(SpecValidationError):
            MarginalSpec("zero_inflated_gamma", {"zero_prob": 1.2, "shape": 1.0, "scale": 1.0})
        with pytest.raises(SpecValidationError):
            MarginalSpec("lognormal", {"median": 1.0})
        with pytest.raises(SpecValidationError):
            MarginalSpec("gaussian", {})

    def test_stratum_probs_must_sum_to_one(self):
        with pytest.raises(SpecValidationError, match="stratum_probs"):
            small_spec(stratum_probs=(0.5, 0.4))


class TestGeneration:
    @pytest.fixture(scope="class")
    def frame(self):
        return generate_population(small_spec(), seed=42)

    def test_count_invariants(self, frame):
        assert frame.N == frame.N_i.sum() == frame.N_h.sum()
        assert np.array_equal(frame.N_hi.sum(axis=1), frame.N_i)
        assert np.array_equal(frame.N_hi.sum(axis=0), frame.N_h)
        assert frame.W_h.sum() == pytest.approx(1.0, rel=1e-12)
        assert frame.A_T == pytest.approx(frame.N * frame.a_cell, rel=1e-12)

    def test_cell_invariants(self, frame):
        a = frame.domain_proportion
        y = frame.biomass_density
        assert ((a >= 0.0) & (a <= 1.0)).all()
        assert (y >= 0.0).all()
        assert (y[a == 0.0] == 0.0).all()

    def test_correlations_match_published_targets(self, frame):
        # realized Pearson correlations hit the configured targets
        achieved = np.corrcoef(frame_columns(frame).T)
        assert np.abs(achieved - TABLE_TARGETS).max() < 0.05

    def test_identity_correlation(self):
        # independence case: the gate is held open (flat link, probability
        # ~1) so neither the height coupling nor the forced biomass zeros
        # off the domain can induce structural correlation
        spec = small_spec(correlation=np.eye(4), domain_link=(12.0, 0.0))
        frame = generate_population(spec, seed=5)
        achieved = np.corrcoef(frame_columns(frame).T)
        off = achieved[~np.eye(4, dtype=bool)]
        assert np.abs(off).max() < 0.05

    def test_degenerate_constants(self):
        # a forced-on domain with constant biomass gives exact truths
        spec = small_spec(
            biomass=MarginalSpec("constant", {"value": 12.5}),
            domain_fraction=MarginalSpec("constant", {"value": 1.0}),
            domain_link=(math.inf, 0.0),
            calibration_rounds=2,
        )
        frame = generate_population(spec, seed=9)
        assert (frame.domain_proportion == 1.0).all()
        assert (frame.biomass_density == 12.5).all()
        truth = enumerate_truth(frame)
        assert truth.total_mg == pytest.approx(frame.N * frame.a_cell * 12.5, rel=1e-12)
        assert truth.area_ha == pytest.approx(frame.N * frame.a_cell, rel=1e-12)
        assert truth.density_mg_per_ha == pytest.approx(12.5, rel=1e-12)

    def test_deterministic_for_fixed_seed(self):
        spec = small_spec(pool_size=5000, calibration_rounds=2)
        f1 = generate_population(spec, seed=7)
        f2 = generate_population(spec, seed=7)
        for col in ("strip_id", "stratum_id", "lidar_height", "biomass_density",
                    "domain_proportion", "x_km", "y_km"):
            assert np.array_equal(getattr(f1, col), getattr(f2, col))
        f3 = generate_population(spec, seed=8)
        assert not np.array_equal(f1.biomass_density, f3.biomass_density)

    def test_domain_zero_share_decreases_with_link_probability(self, frame):
        # Pr[a = 0] falls as the logistic domain probability rises
        from scipy.special import expit

        p = expit(-1.5 + 0.8 * frame.lidar_height)
        order = np.argsort(p)
        chunks = np.array_split(order, 8)
        zero_share = [float((frame.domain_proportion[c] == 0).mean()) for c in chunks]
        mean_p = [float(p[c].mean()) for c in chunks]
        assert all(np.diff(mean_p) > 0)
        assert all(np.diff(zero_share) < 0.02)  # monotone up to bucket noise
        assert zero_share[0] - zero_share[-1] > 0.3

    def test_domain_mass_is_zero_or_positive_fraction(self, frame):
        a = frame.domain_proportion
        assert ((a == 0.0) | (a > 0.0)).all()
        assert (a > 0).any() and (a == 0).any()

    def test_unequal_strip_lengths(self, frame):
        assert frame.N_i.min() < frame.N_i.max()


class TestTruth:
    def test_two_cell_hand_example(self):
        frame = PopulationFrame(
            strip_id=[0, 1],
            stratum_id=[0, 0],
            lidar_height=[5.0, 1.0],
            biomass_density=[10.0, 0.0],
            domain_proportion=[1.0, 0.0],
            x_km=[0.0, 1.0],
            y_km=[0.0, 0.0],
            M=2,
            H=1,
            a_cell=1.0,
        )
        truth = enumerate_truth(frame)
        assert truth.total_mg == 10.0
        assert truth.area_ha == 1.0
        assert truth.density_mg_per_ha == 10.0

    def test_zero_biomass(self):
        frame = PopulationFrame(
            strip_id=[0, 1], stratum_id=[0, 0], lidar_height=[1.0, 2.0],
            biomass_density=[0.0, 0.0], domain_proportion=[0.5, 0.5],
            x_km=[0.0, 1.0], y_km=[0.0, 0.0], M=2, H=1, a_cell=1.0,
        )
        truth = enumerate_truth(frame)
        assert truth.total_mg == 0.0
        assert truth.density_mg_per_ha == 0.0

    def test_zero_area_rejected(self):
        frame = PopulationFrame(
            strip_id=[0, 1], stratum_id=[0, 0], lidar_height=[1.0, 2.0],
            biomass_density=[0.0, 0.0], domain_proportion=[0.0, 0.0],
            x_km=[0.0, 1.0], y_km=[0.0, 0.0], M=2, H=1, a_cell=1.0,
        )
        with pytest.raises(FrameValidationError, match="undefined"):
            enumerate_truth(frame)

    def test_density_times_area_is_total(self):
        frame = generate_population(small_spec(pool_size=2000, calibration_rounds=0), seed=3)
        truth = enumerate_truth(frame)
        assert truth.density_mg_per_ha * truth.area_ha == pytest.approx(
            truth.total_mg, rel=1e-15
        )


class TestFrameIO:
    @pytest.fixture()
    def frame(self):
        spec = small_spec(pool_size=2000, calibration_rounds=0,
                          grid=GridSpec(strips=5, cells_per_strip=20, length_variation=0.2))
        return generate_population(spec, seed=11)

    def test_round_trip_identity(self, frame, tmp_path):
        path = tmp_path / "frame.csv"
        save_frame(frame, path)
        loaded = load_frame(path)
        for col in ("strip_id", "stratum_id", "lidar_height", "biomass_density",
                    "domain_proportion", "x_km", "y_km"):
            assert np.array_equal(getattr(frame, col), getattr(loaded, col))
        assert (loaded.M, loaded.H, loaded.a_cell) == (frame.M, frame.H, frame.a_cell)

    def test_save_is_byte_stable(self, frame, tmp_path):
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        save_frame(frame, p1)
        save_frame(frame, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_bad_domain_proportion_names_cell(self, frame, tmp_path):
        path = tmp_path / "frame.csv"
        save_frame(frame, path)
        lines = path.read_text().splitlines()
        row = lines[5].split(",")
        row[5] = "1.2"
        lines[5] = ",".join(row)
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(FrameValidationError, match="cell 0.*domain_proportion"):
            load_frame(path)

    def test_strip_count_mismatch_names_strip(self, frame, tmp_path):
        path = tmp_path / "frame.csv"
        save_frame(frame, path)
        lines = path.read_text().splitlines()
        # move one cell from strip 0 into strip 1 so declared N_i disagrees
        header_rows = 5
        row = lines[header_rows].split(",")
        assert row[1] == "0"
        row[1] = "1"
        lines[header_rows] = ",".join(row)
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(FrameValidationError, match="strip 0"):
            load_frame(path)

    def test_malformed_row_is_reported(self, frame, tmp_path):
        path = tmp_path / "frame.csv"
        save_frame(frame, path)
        lines = path.read_text().splitlines()
        lines[7] = lines[7] + ",extra"
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(FrameValidationError, match="row 2"):
            load_frame(path)

    def test_missing_metadata_rejected(self, tmp_path):
        path = tmp_path / "frame.csv"
        path.write_text("cell_id,strip_id\n0,0\n")
        with pytest.raises(FrameValidationError, match="metadata"):
            load_frame(path)
