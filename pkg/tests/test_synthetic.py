from simulstream.predecision import boundary_stats
from simulstream.synthetic import synthetic_corpus


def test_seeded_and_deterministic():
    a = synthetic_corpus(5, seed=7)
    b = synthetic_corpus(5, seed=7)
    assert a == b
    assert a != synthetic_corpus(5, seed=8)
    assert [s.id for s in a.streams] == ["utt0", "utt1", "utt2", "utt3", "utt4"]


def test_segments_tile_each_utterance():
    corpus = synthetic_corpus(20, seed=3, min_frames=50, max_frames=400)
    for stream in corpus.streams:
        segs = corpus.alignments[stream.id].segments
        assert segs[0].start_ms == 0
        assert segs[-1].end_ms == stream.duration_ms
        for prev, seg in zip(segs, segs[1:]):
            assert seg.start_ms == prev.end_ms
        assert len(corpus.references[stream.id]) == max(1, round(stream.duration_ms / 270))


def test_mean_word_length_is_near_target():
    corpus = synthetic_corpus(50, seed=0)
    stats = boundary_stats(a.segments for a in corpus.alignments.values())
    assert 240 <= stats.mean_segment_ms <= 300
