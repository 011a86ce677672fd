"""Release gates for the toolkit, one test per gate.

Every gate is phrased against an independent oracle (hand arithmetic,
pure-python brute force, or a frozen closed form), never against the
implementation under test. Run with -v for one pass/fail line per gate.
"""

import math
import time

import numpy as np
import pytest

from promdet import aggregate, cluster, distances, evalgrid, interchange, neuralnet, pca, syllabifier, synth
from promdet.aggregate import FeatureMatrix

MEASURES = ("cosine", "jaccard", "manhattan", "euclidean", "chebyshev", "canberra", "mahalanobis")


# ---------------------------------------------------------------------------
# independent oracles (pure python where possible)

def oracle_measure(metric, x, y, s_inv=None):
    pairs = list(zip([float(a) for a in x], [float(b) for b in y]))
    if metric == "manhattan":
        return sum(abs(a - b) for a, b in pairs)
    if metric == "euclidean":
        return math.sqrt(sum((a - b) ** 2 for a, b in pairs))
    if metric == "chebyshev":
        return max(abs(a - b) for a, b in pairs)
    if metric == "canberra":
        return sum(0.0 if a == b == 0.0 else abs(a - b) / (abs(a) + abs(b)) for a, b in pairs)
    if metric == "cosine":
        dot = sum(a * b for a, b in pairs)
        nx = math.sqrt(sum(a * a for a, _ in pairs))
        ny = math.sqrt(sum(b * b for _, b in pairs))
        return dot / (nx * ny)
    if metric == "jaccard":
        shift = min(0.0, min(a for a, _ in pairs), min(b for _, b in pairs))
        mins = sum(min(a - shift, b - shift) for a, b in pairs)
        maxs = sum(max(a - shift, b - shift) for a, b in pairs)
        return mins / maxs
    if metric == "mahalanobis":
        d = [a - b for a, b in pairs]
        acc = 0.0
        for i, di in enumerate(d):
            for j, dj in enumerate(d):
                acc += di * float(s_inv[i][j]) * dj
        return math.sqrt(acc)
    raise ValueError(metric)


def fm_from(rows, labels, level="word", set_tag="E"):
    rows = np.asarray(rows, dtype=np.float64)
    n = rows.shape[0]
    return FeatureMatrix(
        rows=rows,
        labels=np.asarray(labels, dtype=np.int64),
        labeled=np.ones(n, dtype=bool),
        utt_ids=[f"u{i}" for i in range(n)],
        unit_indices=np.zeros(n, dtype=np.int64),
        level=level,
        set_tag=set_tag,
    )


# ---------------------------------------------------------------------------
# gate 1: the seven separation measures

def test_distance_measures_match_oracles_and_run_fast():
    x = [2.0, 0.0, 1.0, 3.0, 1.0]
    y = [0.0, 1.0, 1.0, 0.0, 2.0]
    hand = {
        "manhattan": 7.0,
        "euclidean": math.sqrt(15.0),
        "chebyshev": 3.0,
        "canberra": 2.0 / 2.0 + 1.0 / 1.0 + 0.0 + 3.0 / 3.0 + 1.0 / 3.0,
        "cosine": 3.0 / math.sqrt(15.0 * 6.0),
        "jaccard": 2.0 / 9.0,
    }
    for metric, want in hand.items():
        got = distances.pairwise_measure(metric, x, y)
        assert abs(got - want) <= 1e-9, (metric, got, want)

    rng = np.random.default_rng(41)
    for _ in range(200):
        u = rng.normal(size=5)
        v = rng.normal(size=5)
        a = rng.normal(size=(5, 5))
        s_inv = np.linalg.inv(a @ a.T + np.eye(5))
        s_inv = 0.5 * (s_inv + s_inv.T)
        for metric in MEASURES:
            got = distances.pairwise_measure(metric, u, v, s_inv=s_inv)
            want = oracle_measure(metric, u, v, s_inv=s_inv)
            assert abs(got - want) <= 1e-9, (metric, got, want)
        ident = distances.pairwise_measure("mahalanobis", u, v, s_inv=np.eye(5))
        eucl = distances.pairwise_measure("euclidean", u, v)
        assert abs(ident - eucl) <= 1e-9

    big = fm_from(rng.normal(size=(600, 256)), [1] * 300 + [0] * 300)
    start = time.perf_counter()
    distances.separation_report(big)
    assert time.perf_counter() - start < 1.0


# ---------------------------------------------------------------------------
# gate 2: principal components

def test_pca_orthonormal_descending_reconstructive_and_closed_form():
    rng = np.random.default_rng(11)
    x = rng.normal(size=(40, 8)) @ rng.normal(size=(8, 8)) + rng.normal(size=8)
    model = pca.fit(x, k=8)

    q = model.components
    assert np.max(np.abs(q.T @ q - np.eye(8))) <= 1e-8
    ev = model.explained_variance
    assert np.all(np.diff(ev) <= 1e-12)
    coords = pca.project(model, x)
    back = coords @ q.T + model.mean
    assert np.max(np.abs(back - x)) <= 1e-8

    w, v = pca.jacobi_eigh(np.array([[2.0, 1.0], [1.0, 2.0]]))
    s = math.sqrt(0.5)
    assert np.max(np.abs(w - np.array([3.0, 1.0]))) <= 1e-8
    assert np.max(np.abs(v[:, 0] - np.array([s, s]))) <= 1e-8
    assert np.max(np.abs(v[:, 1] - np.array([s, -s]))) <= 1e-8


# ---------------------------------------------------------------------------
# gate 3: k-means

def test_kmeans_monotone_separable_and_seed_deterministic():
    rng = np.random.default_rng(23)
    for trial in range(100):
        n = int(rng.integers(20, 81))
        d = int(rng.integers(2, 7))
        k = int(rng.integers(2, 5))
        x = rng.normal(size=(n, d))
        model = cluster.kmeans_fit(x, k=k, seed=trial)
        hist = np.asarray(model.inertia_history)
        assert np.all(np.diff(hist) <= 1e-9), trial

    blob = np.random.default_rng(7)
    a = blob.normal(size=(250, 4)) + 5.0
    b = blob.normal(size=(250, 4)) - 5.0
    x = np.vstack([a, b])
    labels = np.array([1] * 250 + [0] * 250)
    model = cluster.kmeans_fit(x, k=2, seed=7)
    ids = cluster.assign(model, x)
    assert cluster.clustering_accuracy(ids, labels) >= 0.99

    m1 = cluster.kmeans_fit(x, k=2, seed=3)
    m2 = cluster.kmeans_fit(x, k=2, seed=3)
    assert m1.centroids.tobytes() == m2.centroids.tobytes()
    assert m1.inertia == m2.inertia and m1.inertia_history == m2.inertia_history


# ---------------------------------------------------------------------------
# gate 4: neural net

def test_neuralnet_gradients_training_and_batch_invariance():
    nn = neuralnet
    rng = np.random.default_rng(5)
    x8 = rng.normal(size=(8, 5))
    y8 = rng.integers(0, 2, size=8).astype(np.float64)
    compositions = (
        (nn.dense(1), nn.sigmoid()),
        (nn.dense(8), nn.relu(), nn.dense(1), nn.sigmoid()),
        (nn.dense(8), nn.batchnorm(), nn.relu(), nn.dense(1), nn.sigmoid()),
        (nn.dense(8), nn.relu(), nn.batchnorm(), nn.dropout(0.3), nn.dense(4), nn.relu(), nn.dense(1), nn.sigmoid()),
    )
    worst = 0.0
    for layers in compositions:
        net = nn.build(nn.NetConfig(layers=layers, input_dim=5, epochs=1, seed=2))
        worst = max(worst, nn.gradient_check(net, x8, y8, h=1e-5))
    assert worst < 1e-4

    a = rng.normal(size=(60, 4)) + 4.0
    b = rng.normal(size=(60, 4)) - 4.0
    x = np.vstack([a, b])
    y = np.array([1.0] * 60 + [0.0] * 60)
    config = nn.NetConfig(
        layers=(nn.dense(8), nn.relu(), nn.dense(1), nn.sigmoid()),
        input_dim=4, epochs=50, seed=1,
    )
    net = nn.build(config)
    report = nn.train(net, (x, y))
    assert max(report.accuracies) >= 1.0

    full = nn.forward(net, x, mode="infer")
    rows = np.array([nn.forward(net, x[i : i + 1], mode="infer")[0] for i in range(len(x))])
    chunks = np.concatenate([nn.forward(net, x[i : i + 7], mode="infer") for i in range(0, len(x), 7)])
    assert np.max(np.abs(full - rows)) <= 1e-10
    assert np.max(np.abs(full - chunks)) <= 1e-10


# ---------------------------------------------------------------------------
# gate 5: aggregation means and syllable spans

def test_aggregation_matches_brute_force_and_syllabifier_invariants():
    rng = np.random.default_rng(13)
    vowels = ["AA", "AE", "IH", "UW", "EH"]
    worst = 0.0
    for idx in range(1000):
        dim = int(rng.integers(2, 7))
        n_words = int(rng.integers(1, 6))
        phones, words, syllables = [], [], []
        for w in range(n_words):
            start = len(phones)
            n_syl = int(rng.integers(1, 4))
            for _ in range(n_syl):
                phones.append(vowels[int(rng.integers(len(vowels)))])
            words.append(interchange.WordSpan(
                surface=f"w{w}", phone_start=start, phone_end=len(phones),
                prominent=int(rng.integers(2)),
            ))
            for s in range(start, len(phones)):
                syllables.append(interchange.SyllableSpan(
                    phone_start=s, phone_end=s + 1, stressed=int(rng.integers(2)),
                ))
        emb = {
            stream: rng.normal(size=(len(phones), dim)).tolist()
            for stream in ("duration", "energy", "pitch")
        }
        rec = interchange.UtteranceRecord(
            utt_id=f"r{idx}", corpus="synthetic", l1="GER", mode="speech_text",
            text="x", phonemes=list(phones), words=words, syllables=syllables,
            embeddings=interchange.EmbeddingBlock(
                duration=np.array(emb["duration"]),
                energy=np.array(emb["energy"]),
                pitch=np.array(emb["pitch"]),
            ),
        )
        for level, spans in (("word", words), ("syllable", syllables)):
            fm = aggregate.build_feature_matrix([rec], level, "EDP")
            for row, span in zip(fm.rows, spans):
                want = []
                for stream in ("energy", "duration", "pitch"):
                    block = emb[stream][span.phone_start : span.phone_end]
                    for j in range(dim):
                        want.append(sum(r[j] for r in block) / len(block))
                worst = max(worst, float(np.max(np.abs(row - np.array(want)))))
    assert worst <= 1e-12

    consonants = ["K", "T", "P", "S", "M", "N", "B", "D", "L", "R", "F", "G"]
    inv = syllabifier.DEFAULT_INVENTORY
    for trial in range(10_000):
        length = int(rng.integers(1, 13))
        phones = []
        for _ in range(length):
            pool = vowels if rng.random() < 0.4 else consonants
            phones.append(pool[int(rng.integers(len(pool)))])
        if not any(p in inv.vowels for p in phones):
            phones[int(rng.integers(length))] = vowels[int(rng.integers(5))]
        spans = syllabifier.syllabify_word(phones)
        assert spans[0][0] == 0 and spans[-1][1] == length
        for (a, b), (c, _) in zip(spans, spans[1:]):
            assert b == c
        for a, b in spans:
            chunk = phones[a:b]
            nuclei = [i for i, p in enumerate(chunk) if p in inv.vowels]
            assert len(nuclei) == 1
            onset = chunk[: nuclei[0]]
            if a > 0 and phones[a - 1] not in inv.vowels:
                assert not syllabifier.is_legal_onset([phones[a - 1]] + onset, inv)


# ---------------------------------------------------------------------------
# gate 6: end-to-end trends on the bundled synthetic preset

def test_end_to_end_trends_on_synthetic_preset():
    records = synth.generate(synth.paperlike(num_utterances=60, seed=7))

    def cell(level, set_tag, mode, l1, classifier):
        spec = evalgrid.RunSpec(
            level=level, set_tag=set_tag, mode=mode, l1=l1,
            classifier=classifier, seed=7,
        )
        return evalgrid.run(spec, records).accuracy

    # (a) the wide-gap energy stream is perfectly recoverable
    assert cell("word", "E", "speech_text", "native", "kmeans") == 100.0
    assert cell("word", "E", "speech_text", "native", "dnn") == 100.0

    # (b) ground-truth-conditioned embeddings never score below text-only ones
    for level in ("word", "syllable"):
        for classifier in ("kmeans", "dnn"):
            st = cell(level, "P", "speech_text", "nonnative", classifier)
            to = cell(level, "P", "text_only", "nonnative", classifier)
            assert st >= to, (level, classifier, st, to)

    # (c) a gapless null corpus clusters at chance
    null_cfg = synth.SynthConfig(
        num_utterances=350, dim=16,
        gap_energy=0.0, gap_duration=0.0, gap_pitch=0.0, seed=7,
    )
    null_records = synth.generate(null_cfg)
    spec = evalgrid.RunSpec(
        level="word", set_tag="E", mode="speech_text", l1="nonnative",
        classifier="kmeans", seed=7,
    )
    acc = evalgrid.run(spec, null_records).accuracy
    assert 47.0 <= acc <= 53.0, acc


# ---------------------------------------------------------------------------
# gate 7: the accuracy table

def test_report_skeleton_and_csv_round_trip(tmp_path):
    results = []
    counter = 0
    for l1 in ("native", "nonnative", "GER", "ITA"):
        for set_tag in ("E", "D", "P", "EDP"):
            for level in ("word", "syllable"):
                if l1 == "native" and level == "syllable":
                    continue
                for mode in ("speech_text", "text_only"):
                    for classifier in ("kmeans", "dnn"):
                        results.append(evalgrid.RunResult(
                            spec=evalgrid.RunSpec(
                                level=level, set_tag=set_tag, mode=mode, l1=l1,
                                classifier=classifier,
                            ),
                            accuracy=50.0 + (counter % 496) / 10.0, n_units=10,
                        ))
                        counter += 1
        for set_tag in ("HB", "W2V"):
            for level in ("word", "syllable"):
                if l1 == "native" and level == "syllable":
                    continue
                for classifier in ("kmeans", "dnn"):
                    results.append(evalgrid.RunResult(
                        spec=evalgrid.RunSpec(
                            level=level, set_tag=set_tag, mode="speech_text", l1=l1,
                            classifier=classifier,
                        ),
                        accuracy=50.0 + (counter % 496) / 10.0, n_units=10,
                    ))
                    counter += 1

    table = evalgrid.build_table(results)
    md = table.to_markdown()
    lines = md.splitlines()

    header = lines[0]
    for level_label in ("Word", "Syllable"):
        for mode_label in ("Speech+text", "Only text"):
            for clf_label in ("K-M", "DNN"):
                assert f"{level_label} / {mode_label} / {clf_label}" in header

    for block_label in ("Native", "Non-Native", "GER", "ITA"):
        block_rows = [ln for ln in lines if ln.startswith(f"| {block_label} ")]
        assert [ln.split("|")[2].strip() for ln in block_rows] == ["E", "D", "P", "EDP", "HB", "W2V"]
        for ln in block_rows[-2:]:
            cells = [c.strip() for c in ln.split("|")[3:-1]]
            # text-only columns hold no externally-derived numbers
            assert cells[2] == cells[3] == cells[6] == cells[7] == "--"

    p1 = tmp_path / "table1.csv"
    p2 = tmp_path / "table2.csv"
    table.to_csv(p1)
    evalgrid.ResultsTable.from_csv(p1).to_csv(p2)
    assert p1.read_bytes() == p2.read_bytes()
