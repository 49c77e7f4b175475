import logging

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from specdiar.errors import InvalidInputError
from specdiar.io_formats import SegmentEmbeddings, SpeechRegion, Turn, emit_rttm
from specdiar.pipeline import (
    PipelineConfig,
    check_segments,
    diarize,
    diarize_detailed,
    labels_to_turns,
    segment_regions,
)
from specdiar.scoring import ScoringConfig, compute_der
from specdiar.synthetic import SynthSpec, gen_recording


def region(a, b, rec="r"):
    return SpeechRegion(rec, a, b)


class TestSegmentRegions:
    def test_worked_region(self):
        assert segment_regions([region(0, 7.5)]) == [(0, 3), (1.5, 4.5), (3, 6), (4.5, 7.5)]

    def test_exact_window(self):
        assert segment_regions([region(0, 3.0)]) == [(0, 3.0)]

    def test_too_short(self):
        assert segment_regions([region(0, 0.2)]) == []

    def test_min_seg_boundary_inclusive(self):
        # 3.8 - 3.5 rounds below 0.3 in binary floating point
        assert segment_regions([region(3.5, 3.8)]) == [(3.5, 3.8)]

    def test_short_region_single_clipped_window(self):
        assert segment_regions([region(2.0, 3.0)]) == [(2.0, 3.0)]

    def test_tail_window_aligned_to_end(self):
        assert segment_regions([region(0, 4.0)]) == [(0, 3.0), (1.0, 4.0)]

    @given(st.lists(st.tuples(st.integers(0, 100), st.integers(3, 400)), min_size=1, max_size=5))
    def test_windows_cover_regions(self, spans):
        regions, t = [], 0
        for gap, length in spans:
            t += gap
            regions.append(region(t / 10, (t + length) / 10))
            t += length + 1
        segs = segment_regions(regions)
        for r in regions:
            inside = [s for s in segs if r.onset - 1e-9 <= s[0] and s[1] <= r.offset + 1e-9]
            assert inside, r
            assert min(s[0] for s in inside) == r.onset
            assert max(s[1] for s in inside) == pytest.approx(r.offset)
            for (a1, b1), (a2, _) in zip(inside, inside[1:]):
                assert a2 <= b1 + 1e-9  # no gaps between consecutive windows
        assert all(b - a <= 3.0 + 1e-9 for a, b in segs)


class TestLabelsToTurns:
    def test_same_label_merge(self):
        assert labels_to_turns([(0, 3), (1.5, 4.5)], [0, 0], "r") == [Turn("r", 0, 4.5, "spk0")]

    def test_midpoint_cut(self):
        got = labels_to_turns([(0, 3), (1.5, 4.5)], [0, 1], "r")
        assert got == [Turn("r", 0, 2.25, "spk0"), Turn("r", 2.25, 2.25, "spk1")]

    def test_disjoint_alternating(self):
        got = labels_to_turns([(0, 1), (2, 3), (4, 5)], [0, 1, 0], "r")
        assert [(t.onset, t.offset, t.speaker) for t in got] == [(0, 1, "spk0"), (2, 3, "spk1"), (4, 5, "spk0")]

    def test_length_mismatch(self):
        with pytest.raises(InvalidInputError):
            labels_to_turns([(0, 1)], [0, 1])

    @given(st.integers(0, 2**32 - 1), st.integers(1, 40))
    def test_union_preserved_and_no_overlap(self, seed, n):
        rng = np.random.default_rng(seed)
        segs = segment_regions([region(0, 1.5 * n + 1.5)])
        labels = rng.integers(0, 3, size=len(segs))
        turns = labels_to_turns(segs, labels, "r")
        for a, b in zip(turns, turns[1:]):
            assert a.offset <= b.onset + 1e-9
        covered = sum(t.duration for t in turns)
        assert covered == pytest.approx(segs[-1][1] - segs[0][0])
        assert turns[0].onset == segs[0][0]
        assert turns[-1].offset == pytest.approx(segs[-1][1])


def embeddings(vectors, window=3.0, shift=1.5):
    n = len(vectors)
    segs = [(i * shift, i * shift + window) for i in range(n)]
    return SegmentEmbeddings("r", len(vectors[0]), segs, np.asarray(vectors, dtype=float))


class TestDiarize:
    def test_single_segment(self):
        e = embeddings([[1.0, 0.0]])
        assert diarize(e, PipelineConfig()) == [Turn("r", 0.0, 3.0, "spk0")]

    def test_empty(self):
        e = SegmentEmbeddings("r", 2, [], np.zeros((0, 2)))
        assert diarize(e, PipelineConfig()) == []

    def test_identical_embeddings_one_speaker(self):
        regions = [region(0, 9.0), region(20, 26.0)]
        segs = segment_regions(regions)
        e = SegmentEmbeddings("r", 3, segs, np.tile([0.2, 0.5, 0.1], (len(segs), 1)))
        d = diarize_detailed(e, PipelineConfig(alpha=1.0))
        assert d.k == 1
        assert [(t.onset, t.offset) for t in d.turns] == [(0, 9.0), (20, 26.0)]

    def test_two_separated_speakers(self):
        rng = np.random.default_rng(0)
        a, b = np.eye(8)[0], np.eye(8)[1]
        vecs = [(a if i < 6 else b) + 0.05 * rng.standard_normal(8) for i in range(12)]
        d = diarize_detailed(embeddings(vecs), PipelineConfig(alpha=0.5))
        assert d.k == 2
        np.testing.assert_array_equal(d.labels, [0] * 6 + [1] * 6)
        # windows 5 and 6 overlap on [9.0, 10.5]: cut at its middle
        assert d.turns[0].offset == pytest.approx(9.75)

    def test_oracle_k_on_synthetic_recording(self):
        e, ref, _ = gen_recording(SynthSpec(n_speakers=3, dim=32, duration=90, seed=4))
        d = diarize_detailed(e, PipelineConfig(alpha=0.2, oracle_k=3))
        assert d.k == 3
        assert compute_der(ref, d.turns, ScoringConfig(0.25)).der < 0.02

    def test_oracle_k_clamped(self, caplog):
        e = embeddings([[1.0, 0.0], [0.0, 1.0], [1.0, 0.1]])
        with caplog.at_level(logging.WARNING):
            d = diarize_detailed(e, PipelineConfig(oracle_k=5))
        assert d.k == 3
        assert "oracle_k" in caplog.text

    def test_deterministic_rttm(self):
        e, _, _ = gen_recording(SynthSpec(n_speakers=4, dim=16, duration=60, seed=9))
        cfg = PipelineConfig(alpha=0.3)
        assert emit_rttm(diarize(e, cfg)) == emit_rttm(diarize(e, cfg))

    def test_bad_config(self):
        with pytest.raises(InvalidInputError):
            PipelineConfig(alpha=1.5)
        with pytest.raises(InvalidInputError):
            PipelineConfig(window=1.0, shift=2.0)


def test_check_segments():
    e = embeddings([[1.0, 0.0], [0.0, 1.0]])
    check_segments(e, [region(0, 4.5)])
    with pytest.raises(InvalidInputError, match="segment 1"):
        check_segments(e, [region(0, 3.0)])


@given(st.integers(0, 2**32 - 1), st.integers(2, 5))
def test_oracle_k_recovers_block_separable_partition(seed, k):
    rng = np.random.default_rng(seed)
    runs = rng.integers(2, 6, size=3 * k)
    truth = np.concatenate([np.full(n, i % k) for i, n in enumerate(runs)])
    # speaker j lives on its own coordinate block, so cross-speaker cosine is exactly 0
    vecs = np.zeros((len(truth), 3 * k))
    for i, lab in enumerate(truth):
        vecs[i, 3 * lab:3 * lab + 3] = rng.uniform(0.2, 1.0, 3)
    e = embeddings(vecs)
    ref = labels_to_turns(e.segments, truth, "r", names=[f"S{j}" for j in range(k)])
    hyp = diarize(e, PipelineConfig(alpha=1.0, oracle_k=k))
    assert compute_der(ref, hyp, ScoringConfig(0.0)).der == 0.0
