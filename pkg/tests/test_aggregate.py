"""Per-unit aggregation of phoneme embeddings and feature CSV I/O."""

import numpy as np
import pytest

from promdet import aggregate
from promdet.aggregate import (
    FeatureMatrix,
    build_feature_matrix,
    concat_feature_sets,
    export_features,
    import_external_features,
    load_features,
    unit_embeddings,
)

from conftest import make_record


def brute_force_means(record, level, stream):
    spans = record.words if level == "word" else record.syllables
    mat = record.embeddings.streams()[stream]
    out = []
    for s in spans:
        rows = [mat[i] for i in range(s.phone_start, s.phone_end)]
        out.append([sum(col) / len(rows) for col in zip(*rows)])
    return np.array(out)


def test_word_level_mean_matches_brute_force(record):
    fm = unit_embeddings(record, "word", "energy")
    np.testing.assert_allclose(fm.rows, brute_force_means(record, "word", "energy"), atol=1e-12)
    assert fm.level == "word" and fm.set_tag == "E"
    np.testing.assert_array_equal(fm.labels, [1, 0])
    assert fm.labeled.all()


def test_syllable_level_requires_spans():
    rec = make_record(syllables=None)
    with pytest.raises(ValueError, match="syllable"):
        unit_embeddings(rec, "syllable", "pitch")


def test_unlabeled_units_masked():
    rec = make_record(words=((0, 3, 1), (3, 6, None)))
    fm = unit_embeddings(rec, "word", "duration")
    np.testing.assert_array_equal(fm.labeled, [True, False])
    sub = fm.labeled_only()
    assert sub.n == 1 and sub.labels[0] == 1


def test_edp_is_streamwise_concat(record):
    records = [record]
    e = build_feature_matrix(records, "word", "E")
    d = build_feature_matrix(records, "word", "D")
    p = build_feature_matrix(records, "word", "P")
    edp = build_feature_matrix(records, "word", "EDP")
    assert edp.d == e.d + d.d + p.d
    np.testing.assert_array_equal(edp.rows, np.hstack([e.rows, d.rows, p.rows]))
    assert edp.set_tag == "EDP"


def test_concat_rejects_mismatched_units(record):
    e = build_feature_matrix([record], "word", "E")
    d = build_feature_matrix([record], "word", "D")
    p = build_feature_matrix([make_record(utt_id="other")], "word", "P")
    with pytest.raises(ValueError):
        concat_feature_sets(e, d, p)


def test_multi_record_stacking_sorted_by_utt_id():
    recs = [make_record(utt_id="b", seed=1), make_record(utt_id="a", seed=2)]
    fm = build_feature_matrix(recs, "word", "E")
    assert fm.utt_ids[0] == "a" and fm.utt_ids[-1] == "b"
    assert fm.n == 4


def test_l1_metadata_collapses_to_nonnative():
    recs = [make_record(utt_id="a", l1="GER"), make_record(utt_id="b", l1="ITA")]
    fm = build_feature_matrix(recs, "word", "E")
    assert fm.l1 == "nonnative"


def test_csv_round_trip_bit_exact(tmp_path, record):
    fm = build_feature_matrix([record], "word", "EDP")
    path = tmp_path / "f.csv"
    export_features(fm, path)
    back = load_features(path, "word", "EDP")
    np.testing.assert_array_equal(back.rows, fm.rows)
    np.testing.assert_array_equal(back.labels, fm.labels)
    np.testing.assert_array_equal(back.labeled, fm.labeled)
    assert back.utt_ids == fm.utt_ids

    # and the bytes themselves are reproducible
    path2 = tmp_path / "g.csv"
    export_features(back, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_csv_header_shape(tmp_path, record):
    fm = unit_embeddings(record, "word", "energy")
    path = tmp_path / "f.csv"
    export_features(fm, path)
    header = path.read_text(encoding="utf-8").splitlines()[0]
    assert header == "utt_id,unit_index,level,label," + ",".join(f"f{i}" for i in range(fm.d))


def test_external_import_requires_known_set(tmp_path, record):
    fm = unit_embeddings(record, "word", "energy")
    path = tmp_path / "f.csv"
    export_features(fm, path)
    with pytest.raises(ValueError, match="HB or W2V"):
        import_external_features(path, "E", "word")
    hb = import_external_features(path, "HB", "word")
    assert hb.set_tag == "HB"


def test_import_skips_other_level_rows(tmp_path):
    rec = make_record()
    word = unit_embeddings(rec, "word", "energy")
    syl = unit_embeddings(rec, "syllable", "energy")
    word_path, syl_path = tmp_path / "w.csv", tmp_path / "s.csv"
    export_features(word, word_path)
    export_features(syl, syl_path)
    # one file holding both levels; loading filters to the requested one
    mixed_path = tmp_path / "m.csv"
    mixed_path.write_text(
        word_path.read_text(encoding="utf-8")
        + "".join(syl_path.read_text(encoding="utf-8").splitlines(True)[1:]),
        encoding="utf-8",
    )
    assert load_features(mixed_path, "word").n == word.n
    assert load_features(mixed_path, "syllable").n == syl.n


def test_import_bad_label_reports_line(tmp_path, record):
    fm = unit_embeddings(record, "word", "energy")
    path = tmp_path / "f.csv"
    export_features(fm, path)
    lines = path.read_text(encoding="utf-8").splitlines(True)
    cells = lines[1].split(",")
    cells[3] = "2"
    lines[1] = ",".join(cells)
    path.write_text("".join(lines), encoding="utf-8")
    with pytest.raises(ValueError, match=":2:"):
        load_features(path, "word")


def test_import_non_numeric_cell(tmp_path, record):
    fm = unit_embeddings(record, "word", "energy")
    path = tmp_path / "f.csv"
    export_features(fm, path)
    path.write_text(path.read_text(encoding="utf-8").replace(repr(float(fm.rows[0, 0])), "abc"), encoding="utf-8")
    with pytest.raises(ValueError, match="non-numeric"):
        load_features(path, "word")


def test_header_only_file_warns(tmp_path):
    path = tmp_path / "f.csv"
    path.write_text("utt_id,unit_index,level,label,f0,f1\n", encoding="utf-8")
    with pytest.warns(UserWarning, match="no word-level"):
        fm = load_features(path, "word")
    assert fm.n == 0 and fm.d == 2


def test_bad_header_rejected(tmp_path):
    path = tmp_path / "f.csv"
    path.write_text("id,idx,lvl,lab,f0\n", encoding="utf-8")
    with pytest.raises(ValueError, match="header"):
        load_features(path, "word")


def test_bulk_random_records_match_brute_force():
    rng = np.random.default_rng(11)
    for trial in range(120):
        n_words = int(rng.integers(1, 5))
        words, phones = [], []
        for w in range(n_words):
            k = int(rng.integers(1, 4))
            start = len(phones)
            phones += ["AA"] * k
            words.append((start, start + k, int(rng.integers(2))))
        rec = make_record(
            utt_id=f"r{trial}",
            phonemes=tuple(phones),
            words=tuple(words),
            syllables=None,
            dim=int(rng.integers(1, 6)),
            seed=trial,
        )
        for stream in ("duration", "energy", "pitch"):
            fm = unit_embeddings(rec, "word", stream)
            np.testing.assert_allclose(
                fm.rows, brute_force_means(rec, "word", stream), atol=1e-12, rtol=0
            )


def test_feature_matrix_validates_labels():
    with pytest.raises(ValueError):
        FeatureMatrix(
            rows=np.zeros((1, 2)),
            labels=np.array([5]),
            labeled=np.array([True]),
            utt_ids=["u"],
            unit_indices=np.array([0]),
            level="word",
            set_tag="E",
        )
