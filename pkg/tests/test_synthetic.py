import json
import math

import numpy as np
import pytest
from scipy.stats import spearmanr

from specdiar.errors import InfeasibleSpecError, InvalidInputError
from specdiar.io_formats import Turn
from specdiar.pipeline import PipelineConfig
from specdiar.scoring import ScoringConfig
from specdiar.synthetic import (
    SynthSpec,
    gen_domain,
    gen_recording,
    load_spec_file,
    oracle_assignment,
    oracle_der_frames,
    oracle_kmeans,
    sample_anchors,
    synth_corpus,
)
from specdiar.tuning import evaluate


def T(spk, a, b):
    return Turn("r", a, b - a, spk)


class TestOracles:
    def test_assignment_worked(self):
        pairs, total = oracle_assignment([[5, 1], [2, 6]])
        assert total == 11 and pairs == [(0, 0), (1, 1)]

    def test_assignment_single_and_zero(self):
        assert oracle_assignment([[3.5]]) == ([(0, 0)], 3.5)
        assert oracle_assignment(np.zeros((3, 3))) == ([(0, 0), (1, 1), (2, 2)], 0.0)

    def test_assignment_rectangular(self):
        pairs, total = oracle_assignment([[1, 9], [8, 2], [7, 7]])
        assert total == 17 and len(pairs) == 2

    def test_assignment_refuses_large(self):
        with pytest.raises(InvalidInputError):
            oracle_assignment(np.zeros((7, 2)))

    def test_kmeans_collinear(self):
        assert oracle_kmeans([0.0, 1.0, 10.0, 11.0], 2) == pytest.approx(1.0)

    def test_kmeans_partition_count(self):
        # k=1 over 3 points equals the variance-based formula
        pts = [[0.0, 0.0], [2.0, 0.0], [1.0, 3.0]]
        assert oracle_kmeans(pts, 1) == pytest.approx(1 + 1 + 0 + 1 + 1 + 4)

    def test_kmeans_refuses_large(self):
        with pytest.raises(InvalidInputError):
            oracle_kmeans(np.zeros((9, 2)), 2)

    def test_der_frames_worked(self):
        ref, hyp = [T("A", 0, 10)], [T("a", 0, 8), T("b", 8, 10)]
        assert oracle_der_frames(ref, hyp, collar=0.0).der == pytest.approx(0.2, abs=1e-12)
        with_collar = oracle_der_frames(ref, hyp, collar=0.25)
        assert with_collar.scored_ref == pytest.approx(9.5)
        assert with_collar.der == pytest.approx(1.75 / 9.5)

    def test_der_frames_identical(self):
        ref = [T("A", 0, 3), T("B", 3, 7.5)]
        assert oracle_der_frames(ref, ref).der == 0.0


class TestAnchors:
    @pytest.mark.parametrize("n,dim,angle", [(2, 192, 75), (6, 192, 40), (8, 16, 90), (3, 3, 100)])
    def test_min_angle_respected(self, n, dim, angle):
        a = sample_anchors(n, dim, angle, np.random.default_rng(0))
        assert a.shape == (n, dim)
        np.testing.assert_allclose(np.linalg.norm(a, axis=1), 1.0)
        g = np.clip(a @ a.T, -1, 1)
        ang = np.degrees(np.arccos(g[np.triu_indices(n, 1)]))
        assert ang.min() >= angle - 1e-6

    def test_infeasible(self):
        # at most 4 unit vectors in 3-D can be pairwise >= 109.47 degrees apart
        with pytest.raises(InfeasibleSpecError):
            gen_recording(SynthSpec(n_speakers=5, dim=3, inter_min_angle=120, seed=0))


class TestRecording:
    def test_turns_tile_duration_on_grid(self):
        _, ref, regions = gen_recording(SynthSpec(n_speakers=4, duration=97.31, seed=3))
        assert regions[0].onset == 0 and regions[0].offset == pytest.approx(97.31)
        assert ref[0].onset == 0
        for a, b in zip(ref, ref[1:]):
            assert a.offset == pytest.approx(b.onset, abs=1e-9)
            assert a.speaker != b.speaker
        assert ref[-1].offset == pytest.approx(97.31)
        for t in ref:
            assert abs(t.onset * 100 - round(t.onset * 100)) < 1e-6
        assert {t.speaker for t in ref} == {"S0", "S1", "S2", "S3"}

    def test_turn_lengths_in_range(self):
        _, ref, _ = gen_recording(SynthSpec(n_speakers=3, duration=300, turn_len_range=(4.0, 6.0), seed=1))
        assert all(4.0 - 1e-9 <= t.duration <= 6.0 + 1e-9 for t in ref[:-1])

    def test_zero_noise_exact_cosines(self):
        e, ref, _ = gen_recording(SynthSpec(n_speakers=2, dim=24, duration=40, intra_noise=0.0, seed=5))
        x = e.vectors
        g = x @ x.T
        owners = [_owner(ref, (s + t) / 2) for s, t in e.segments]
        for i in range(len(owners)):
            for j in range(len(owners)):
                if owners[i] == owners[j]:
                    assert g[i, j] == pytest.approx(1.0, abs=1e-12)

    def test_single_speaker_radius(self):
        e, _, _ = gen_recording(SynthSpec(n_speakers=1, dim=64, duration=60, intra_noise=0.05, seed=2))
        mean = e.vectors.mean(axis=0)
        mean /= np.linalg.norm(mean)
        # noise norm ~ 0.05 * sqrt(64) = 0.4 → angle around atan(0.4) ~ 22 degrees
        assert np.degrees(np.arccos(np.clip(e.vectors @ mean, -1, 1))).max() < 35

    def test_noise_lowers_within_speaker_similarity(self):
        levels = [0.0, 0.02, 0.05, 0.1, 0.2, 0.4]
        sims = []
        for noise in levels:
            e, ref, _ = gen_recording(SynthSpec(n_speakers=2, dim=64, duration=60, intra_noise=noise, seed=8))
            owners = np.array([_owner(ref, (s + t) / 2) for s, t in e.segments])
            g = e.vectors @ e.vectors.T
            same = owners[:, None] == owners[None, :]
            np.fill_diagonal(same, False)
            sims.append(g[same].mean())
        assert spearmanr(levels, sims).correlation < -0.99

    def test_deterministic(self):
        spec = SynthSpec(n_speakers=3, duration=50, seed=11)
        a, b = gen_recording(spec), gen_recording(spec)
        assert a[0] == b[0] and a[1] == b[1] and a[2] == b[2]

    def test_segments_use_pipeline_windows(self):
        e, _, _ = gen_recording(SynthSpec(duration=7.5, seed=0))
        assert e.segments == [(0, 3), (1.5, 4.5), (3, 6), (4.5, 7.5)]

    @pytest.mark.parametrize("kwargs", [{"n_speakers": 0}, {"dim": 0}, {"duration": 0}, {"intra_noise": -1},
                                        {"turn_len_range": (5.0, 2.0)}, {"inter_min_angle": 200}])
    def test_bad_spec(self, kwargs):
        with pytest.raises(InvalidInputError):
            SynthSpec(**kwargs)


def _owner(ref, t):
    for turn in ref:
        if turn.onset <= t < turn.offset:
            return turn.speaker
    return ref[-1].speaker


class TestDomain:
    def test_split(self):
        d = gen_domain([SynthSpec(duration=20, seed=s) for s in range(4)], "x")
        assert [b.recording_id for b in d.dev] == ["x-000", "x-001"]
        assert [b.recording_id for b in d.eval] == ["x-002", "x-003"]

    def test_needs_two(self):
        with pytest.raises(InvalidInputError):
            gen_domain([SynthSpec()], "x")

    def test_hard_domain_scores_worse(self):
        def dom(angle, name):
            return gen_domain(
                [SynthSpec(n_speakers=3, dim=64, duration=60, inter_min_angle=angle, seed=s) for s in range(6)], name
            )

        cfg = PipelineConfig(alpha=1.0)
        easy, _ = evaluate(dom(90, "easy").eval, 1.0, cfg, ScoringConfig())
        hard, _ = evaluate(dom(30, "hard").eval, 1.0, cfg, ScoringConfig())
        assert hard.der > easy.der

    def test_corpus_byte_identical(self, tmp_path):
        spec = {"seed": 3, "domains": [{"name": "a", "recordings": [{"n_speakers": 2, "duration": 15, "dim": 8,
                                                                     "count": 2}]}]}
        path = tmp_path / "spec.json"
        path.write_text(json.dumps(spec))
        m1 = synth_corpus(path, tmp_path / "one")
        m2 = synth_corpus(path, tmp_path / "two")
        files1 = sorted(p.relative_to(m1.parent) for p in m1.parent.rglob("*") if p.is_file())
        files2 = sorted(p.relative_to(m2.parent) for p in m2.parent.rglob("*") if p.is_file())
        assert files1 == files2 and len(files1) == 7
        for rel in files1:
            assert (m1.parent / rel).read_bytes() == (m2.parent / rel).read_bytes()

    def test_spec_file_seeds_distinct(self, tmp_path):
        path = tmp_path / "spec.json"
        path.write_text(json.dumps({"seed": 1, "domains": [{"name": "a", "recordings": [{"count": 3}]}]}))
        ((name, specs),) = load_spec_file(path)
        assert name == "a" and len({s.seed for s in specs}) == 3

    def test_spec_file_unknown_field(self, tmp_path):
        path = tmp_path / "spec.json"
        path.write_text(json.dumps({"domains": [{"name": "a", "recordings": [{"speakers": 3}]}]}))
        with pytest.raises(InvalidInputError):
            load_spec_file(path)


def test_angle_margin_keeps_acceptance_regime_feasible():
    # six speakers at 75 degrees in 192-D must be placeable well within budget
    a = sample_anchors(6, 192, 75, np.random.default_rng(1), budget=200)
    assert math.degrees(math.acos(min(1.0, float(np.max(np.triu(a @ a.T, 1)))))) >= 75 - 1e-9
