import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emonet.dataset import (
    CategoryScheme,
    Dataset,
    DatasetFormatError,
    Emotion,
    Frame,
    dumps,
    exclude_labels,
    exclude_neutral,
    from_arrays,
    load,
    loads,
    save,
    shuffle,
    sort_and_balance,
    split,
    take_peak_frames,
    to_training_pairs,
)

E = Emotion


def make_sequence(seq_id, labels):
    return [Frame(seq_id, i + 1, tuple(float(i + k) for k in range(12)), E(label)) for i, label in enumerate(labels)]


def row(seq, idx, label, value=0.5):
    return f"{seq},{idx}," + ",".join([str(value)] * 12) + f",{label}"


def test_load_counts_and_groups(tmp_path):
    lines = ["# comment", *(row("a", i, 1 if i < 3 else 2) for i in range(1, 6)), "", *(row("b", i, 3) for i in range(1, 4))]
    path = tmp_path / "d.csv"
    path.write_text("\n".join(lines))
    ds = load(path)
    assert len(ds) == 8
    assert [s.sequence_id for s in ds.sequences()] == ["a", "b"]
    assert [len(s.frames) for s in ds.sequences()] == [5, 3]
    assert ds.labels().tolist() == [1, 1, 2, 2, 2, 3, 3, 3]


def test_load_rejects_bad_label(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("\n".join([row("a", 1, 1), row("a", 2, 9)]))
    with pytest.raises(DatasetFormatError, match=":2:") as info:
        load(path)
    assert info.value.line == 2


@pytest.mark.parametrize("bad", [
    "a,1,0.1,0.2,1",
    "a,x," + ",".join(["0"] * 12) + ",1",
    "a,1," + ",".join(["0"] * 11) + ",oops,1",
    "a,1," + ",".join(["0"] * 11) + ",nan,1",
])
def test_load_rejects_malformed_rows(bad):
    with pytest.raises(DatasetFormatError, match=":2:"):
        loads(row("a", 1, 1) + "\n" + bad)


def test_load_rejects_non_monotone_frames():
    with pytest.raises(DatasetFormatError, match="not increasing"):
        loads("\n".join([row("a", 2, 1), row("a", 2, 1)]))
    with pytest.raises(DatasetFormatError, match="duplicate"):
        loads("\n".join([row("a", 3, 1), row("b", 1, 1), row("a", 3, 1)]))
    # reordered files (balanced, shuffled) load in file order
    ds = loads("\n".join([row("a", 3, 1), row("b", 1, 1), row("a", 1, 1)]))
    assert [(f.sequence_id, f.frame_index) for f in ds.frames] == [("a", 3), ("b", 1), ("a", 1)]


def test_balanced_and_split_files_reload(synthetic):
    for ds in (sort_and_balance(synthetic), *split(synthetic, 0.5, "frame", seed=1)):
        assert loads(dumps(ds)) == ds


def test_save_load_is_canonical(tmp_path, synthetic):
    path = tmp_path / "d.csv"
    save(synthetic, path)
    first = path.read_text()
    again = load(path)
    assert again == synthetic
    save(again, path)
    assert path.read_text() == first
    assert dumps(loads(first)) == first


def test_peak_frames_by_hand():
    ds = Dataset(make_sequence("s", [1] * 8 + [2] * 12))
    kept = take_peak_frames(ds)
    assert [f.frame_index for f in kept] == [1, 2, 3, 14, 15, 16]


def test_peak_frames_short_span_and_all_neutral():
    assert [f.frame_index for f in take_peak_frames(Dataset(make_sequence("s", [1] * 5 + [3] * 2)))] == [1, 2, 3, 6, 7]
    assert [f.frame_index for f in take_peak_frames(Dataset(make_sequence("s", [1] * 10)))] == [1, 2, 3]
    assert [f.frame_index for f in take_peak_frames(Dataset(make_sequence("s", [4] * 4)))] == [2, 3, 4]


def test_peak_frames_rejects_interleaved_neutral():
    with pytest.raises(ValueError, match="'bad'"):
        take_peak_frames(Dataset(make_sequence("bad", [1, 2, 1, 2])))


def test_peak_frames_bound(synthetic):
    kept = take_peak_frames(synthetic)
    for seq in kept.sequences():
        assert len(seq.frames) <= 6
    assert set(kept.frames) <= set(synthetic.frames)


def test_exclude_neutral():
    no_neutral = Dataset(make_sequence("s", [2, 2, 3]))
    assert exclude_neutral(no_neutral) == no_neutral
    assert len(exclude_neutral(Dataset(make_sequence("s", [1, 1])))) == 0
    mixed = Dataset(make_sequence("a", [1, 1, 2, 2]) + make_sequence("b", [1, 1, 1]) + make_sequence("c", [1, 7]))
    out = exclude_neutral(mixed)
    assert E.NEUTRAL not in out.class_counts()
    assert [s.sequence_id for s in out.sequences()] == ["a", "c"]
    assert len(exclude_labels(mixed, ["sad", 2])) == 6


def test_sort_and_balance_min_rule():
    frames = make_sequence("n", [1] * 300) + make_sequence("j", [2] * 100) + make_sequence("d", [5] * 150)
    out = sort_and_balance(Dataset(frames))
    assert out.class_counts() == {E.NEUTRAL: 100, E.JOY: 100, E.DISGUST: 100}
    assert len(out) == 300
    assert out.labels().tolist() == sorted(out.labels().tolist())
    # first m frames of each class are kept
    assert [f.frame_index for f in out.frames[:3]] == [1, 2, 3]


def test_sort_and_balance_regroups_balanced_data():
    frames = make_sequence("a", [3, 2, 3, 2])
    out = sort_and_balance(Dataset(frames))
    assert sorted(out.frames, key=lambda f: f.frame_index) == frames
    assert out.labels().tolist() == [2, 2, 3, 3]


def test_sort_and_balance_sampling_is_seeded(synthetic):
    a = sort_and_balance(synthetic, seed=1, sample=True)
    b = sort_and_balance(synthetic, seed=1, sample=True)
    assert a == b
    counts = set(a.class_counts().values())
    assert counts == {min(synthetic.class_counts().values())}


@given(st.lists(st.integers(1, 7), min_size=1, max_size=60))
def test_sort_and_balance_counts_equal(labels):
    ds = from_arrays([[0.0] * 12] * len(labels), labels)
    out = sort_and_balance(ds)
    before = ds.class_counts()
    after = out.class_counts()
    assert set(after) == set(before)
    assert set(after.values()) == {min(before.values())}
    assert set(out.frames) <= set(ds.frames)


def test_split_by_sequence_counts():
    frames = []
    for s in range(10):
        frames += make_sequence(f"s{s}", [1, 2, 2])
    ds = Dataset(frames)
    train, test = split(ds, 0.7, "sequence", seed=3)
    assert len(train.sequence_ids()) == 7 and len(test.sequence_ids()) == 3
    assert not set(train.sequence_ids()) & set(test.sequence_ids())
    assert set(train.frames) | set(test.frames) == set(ds.frames)
    assert len(train) + len(test) == len(ds)
    assert split(ds, 0.7, "sequence", seed=3) == (train, test)


@given(st.integers(2, 40), st.floats(0.1, 0.9), st.integers(0, 1000))
@settings(max_examples=40)
def test_split_by_frame_partitions(n, fraction, seed):
    ds = from_arrays([[float(i)] * 12 for i in range(n)], [1 + i % 7 for i in range(n)])
    try:
        train, test = split(ds, fraction, "frame", seed=seed)
    except ValueError:
        return
    assert not set(train.frames) & set(test.frames)
    assert len(train) + len(test) == n


def test_split_rejects_bad_arguments():
    ds = Dataset(make_sequence("only", [1, 2]))
    with pytest.raises(ValueError):
        split(ds, 0.7, "sequence")
    with pytest.raises(ValueError):
        split(ds, 1.0, "frame")
    with pytest.raises(ValueError):
        split(ds, 0.5, "subject")


def test_shuffle_is_a_seeded_permutation(synthetic):
    a, b = shuffle(synthetic, 5), shuffle(synthetic, 5)
    assert a == b
    assert sorted(a.frames, key=synthetic.frames.index) == list(synthetic.frames)


def test_training_pairs_one_hot():
    ds = Dataset(make_sequence("s", [2]))
    X, T = to_training_pairs(ds, CategoryScheme.seven())
    assert T.tolist() == [[0, 1, 0, 0, 0, 0, 0]]
    assert X.shape == (1, 12)


def test_four_category_scheme():
    scheme = CategoryScheme.four()
    assert scheme.names == ("neutral", "positive", "surprise", "negative")
    ds = Dataset(make_sequence("s", [1, 2, 3, 4, 5, 6]))
    _, T = to_training_pairs(ds, scheme)
    assert np.argmax(T, axis=1).tolist() == [0, 1, 2, 3, 3, 3]
    with pytest.raises(ValueError, match="sad"):
        to_training_pairs(Dataset(make_sequence("s", [7])), scheme)
    assert len(scheme.restrict(Dataset(make_sequence("s", [1, 7, 7])))) == 1


def test_one_vs_rest_scheme():
    scheme = CategoryScheme.parse("vs:surprise")
    assert scheme.names == ("surprise", "not surprise")
    _, T = to_training_pairs(Dataset(make_sequence("s", [3, 1, 7])), scheme)
    assert T.tolist() == [[1, 0], [0, 1], [0, 1]]


def test_scheme_parsing():
    assert CategoryScheme.parse("six").names == ("joy", "surprise", "angry", "disgust", "fear", "sad")
    assert CategoryScheme.parse("neutral,disgust,joy").names == ("neutral", "joy", "disgust")
    assert len(CategoryScheme.parse("seven")) == 7
    with pytest.raises(ValueError):
        CategoryScheme.parse("neutral,happy")


def test_exclude_neutral_keeps_six_classes(synthetic):
    out = exclude_neutral(synthetic)
    assert set(out.class_counts()) == set(Emotion) - {Emotion.NEUTRAL}
    assert set(out.frames) <= set(synthetic.frames)
