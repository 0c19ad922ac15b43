import struct

import numpy as np
import pytest

from evisynth.errors import EmptyAbstract, EmptyDataset, NonFiniteLoss, UnknownModel
from evisynth.screener import (
    LABELS,
    ModelConfig,
    SequenceModel,
    TrainParams,
    assess_compliance,
    build_vocab,
    evaluate_accuracy,
    generate_abstract,
    generate_sentences,
    gradient_check,
    split_dataset,
    train,
)
from evisynth.screener.gradcheck import analytic_gradients, compare_gradients, numeric_gradients
from evisynth.screener.tagging import (
    CueTagger,
    ModelTagger,
    SentenceTag,
    split_sentences,
)

TINY = ModelConfig(embed_dim=4, hidden=3, dense_units=3, dropout=0.0, vocab_size=30)
SMALL = ModelConfig(embed_dim=24, hidden=16, dense_units=16, dropout=0.1, vocab_size=400)


def tiny_model(seed=11):
    vocab = build_vocab(["alpha beta gamma delta epsilon zeta"], 30)
    return SequenceModel.initialize(TINY, vocab, np.random.default_rng(seed))


def tag(label, prob=1.0, index=0, text="s"):
    probs = {lab: 0.0 for lab in LABELS}
    probs[label] = prob
    return SentenceTag(index=index, text=text, label=label, probs=probs)


@pytest.fixture(scope="module")
def trained():
    rows = generate_sentences(240, seed=13)
    train_rows, held = split_dataset(rows, held_out_fraction=0.2, seed=5)
    result = train(
        train_rows,
        TrainParams(learning_rate=1.0, epochs=12, batch_size=8, seed=7),
        SMALL,
    )
    return result, held


# -- forward ------------------------------------------------------------------


def test_probs_sum_to_one():
    model = tiny_model()
    for text in ("alpha beta", "zeta zeta zeta", "unseen words entirely", "x"):
        probs = model.predict_probs(text)
        assert probs.shape == (len(LABELS),)
        assert abs(float(np.sum(probs)) - 1.0) < 1e-9
        assert np.all(probs >= 0.0)


def test_inference_is_deterministic_despite_dropout_config():
    model = SequenceModel.initialize(
        ModelConfig(dropout=0.5), {"a": 1, "b": 2}, np.random.default_rng(0)
    )
    p1 = model.predict_probs("a b a")
    p2 = model.predict_probs("a b a")
    assert np.array_equal(p1, p2)


def test_unknown_tokens_map_to_reserved_id():
    model = tiny_model()
    assert model.token_ids("never seen tokens") == [0, 0, 0]
    assert model.token_ids("") == [0]


def test_build_vocab_frequency_order_and_cap():
    vocab = build_vocab(["b a a c a b", "d"], vocab_size=3)
    assert vocab["<unk>"] == 0
    assert vocab["a"] == 1  # most frequent gets the lowest real id
    assert len(vocab) == 3  # cap counts the reserved unk slot
    assert "c" not in vocab and "d" not in vocab


# -- training -----------------------------------------------------------------


def test_single_example_memorization():
    result = train(
        [("participants were adults aged sixty", "P")],
        TrainParams(learning_rate=0.5, epochs=120, batch_size=1, seed=3),
        TINY,
    )
    assert result.loss_curve[-1] < 0.01
    assert result.loss_curve[-1] < result.loss_curve[0]


def test_same_seed_identical_loss_curves():
    rows = generate_sentences(60, seed=21)
    params = TrainParams(learning_rate=0.5, epochs=3, batch_size=8, seed=9)
    a = train(rows, params, SMALL)
    b = train(rows, params, SMALL)
    assert a.loss_curve == b.loss_curve
    for name in a.model.params:
        assert np.array_equal(a.model.params[name], b.model.params[name])


def test_different_seed_differs():
    rows = generate_sentences(60, seed=21)
    a = train(rows, TrainParams(epochs=2, seed=1), SMALL)
    b = train(rows, TrainParams(epochs=2, seed=2), SMALL)
    assert a.loss_curve != b.loss_curve


def test_synthetic_corpus_heldout_accuracy(trained):
    result, held = trained
    assert result.loss_curve[-1] < result.loss_curve[0]
    assert evaluate_accuracy(result.model, held) >= 0.9


def test_empty_dataset_rejected():
    with pytest.raises(EmptyDataset):
        train([], TrainParams(epochs=1))


def test_unknown_label_rejected():
    with pytest.raises(ValueError):
        train([("some sentence", "X")], TrainParams(epochs=1), TINY)


def test_nan_poisoned_model_aborts():
    model = tiny_model()
    model.params["d2_b"][0] = np.nan
    with pytest.raises(NonFiniteLoss):
        train(
            [("alpha beta", "P")],
            TrainParams(learning_rate=0.1, epochs=1, batch_size=1, seed=0),
            TINY,
            model=model,
        )


# -- persistence ----------------------------------------------------------------


def test_save_load_round_trip(tmp_path, trained):
    result, held = trained
    path = str(tmp_path / "model.bin")
    result.model.save(path)
    loaded = SequenceModel.load(path)
    assert loaded.config == result.model.config
    assert loaded.vocab == result.model.vocab
    for name in result.model.params:
        assert np.array_equal(loaded.params[name], result.model.params[name])
    for sentence, _ in held[:5]:
        assert np.array_equal(
            loaded.predict_probs(sentence), result.model.predict_probs(sentence)
        )


def test_load_rejects_wrong_magic(tmp_path):
    path = tmp_path / "bogus.bin"
    path.write_bytes(b"NOPE" + b"\x00" * 64)
    with pytest.raises(UnknownModel):
        SequenceModel.load(str(path))


def test_load_rejects_truncated_file(tmp_path):
    model = tiny_model()
    path = tmp_path / "model.bin"
    model.save(str(path))
    blob = path.read_bytes()
    path.write_bytes(blob[: len(blob) - 200])
    with pytest.raises(UnknownModel):
        SequenceModel.load(str(path))


def test_load_rejects_future_version(tmp_path):
    model = tiny_model()
    path = tmp_path / "model.bin"
    model.save(str(path))
    blob = bytearray(path.read_bytes())
    blob[4:8] = struct.pack("<I", 99)
    path.write_bytes(bytes(blob))
    with pytest.raises(UnknownModel):
        SequenceModel.load(str(path))


def test_load_missing_file(tmp_path):
    with pytest.raises(UnknownModel):
        SequenceModel.load(str(tmp_path / "absent.bin"))


# -- gradient check ---------------------------------------------------------------


GRAD_EXAMPLES = [([1, 2, 3], 0), ([4, 5], 3), ([2, 2, 6, 1], 5)]


def test_gradient_check_tiny_model():
    report = gradient_check(tiny_model(seed=11), GRAD_EXAMPLES)
    assert report.passed(1e-4)
    assert report.max_relative_error < 1e-4
    assert set(report.per_tensor) == set(tiny_model().params)


def test_gradient_check_zero_model():
    model = tiny_model()
    for name in model.params:
        model.params[name] = np.zeros_like(model.params[name])
    report = gradient_check(model, GRAD_EXAMPLES)
    assert report.max_relative_error < 1e-6


def test_corrupted_gradient_detected():
    model = tiny_model(seed=11)
    analytic = analytic_gradients(model, GRAD_EXAMPLES)
    numeric = numeric_gradients(model, GRAD_EXAMPLES)
    analytic["l1f_W"] = analytic["l1f_W"] * 0.5  # drop half of one tensor's signal
    report = compare_gradients(analytic, numeric)
    assert report.max_relative_error > 1e-2
    assert not report.passed(1e-4)
    assert report.worst_tensor == "l1f_W"


# -- synthetic corpus ----------------------------------------------------------


def test_generate_sentences_balanced_and_seeded():
    rows = generate_sentences(120, seed=3)
    assert len(rows) == 120
    by_label = {}
    for _, label in rows:
        by_label[label] = by_label.get(label, 0) + 1
    assert set(by_label) == set(LABELS)
    assert all(count == 20 for count in by_label.values())
    assert rows == generate_sentences(120, seed=3)
    assert rows != generate_sentences(120, seed=4)


def test_generate_abstract_truth_maps():
    text, presence = generate_abstract(seed=1, compliant=True)
    assert presence == {e: True for e in "PICOS"}
    assert len(split_sentences(text)) == 5
    text2, presence2 = generate_abstract(seed=1, compliant=False)
    assert presence2["C"] is False and presence2["O"] is False
    assert presence2["P"] and presence2["I"] and presence2["S"]


# -- tagging --------------------------------------------------------------------


def test_split_sentences():
    assert split_sentences("One. Two? Three!") == ["One.", "Two?", "Three!"]
    assert split_sentences("   ") == []
    assert split_sentences("No terminal punctuation") == ["No terminal punctuation"]


def test_model_tagger_requires_model():
    with pytest.raises(UnknownModel):
        ModelTagger(None)


def test_taggers_reject_empty_abstract(trained):
    result, _ = trained
    for tagger in (ModelTagger(result.model), CueTagger()):
        with pytest.raises(EmptyAbstract):
            tagger.tag("")
        with pytest.raises(EmptyAbstract):
            tagger.tag("   ")


def test_model_tagger_labels_population_sentence(trained):
    result, _ = trained
    tags = ModelTagger(result.model).tag(
        "Participants were 120 adults aged 65 years with knee osteoarthritis."
    )
    assert len(tags) == 1
    assert tags[0].label == "P"
    assert abs(sum(tags[0].probs.values()) - 1.0) < 1e-9


def test_cue_tagger_control_sentence():
    tags = CueTagger().tag("The control group received placebo.")
    assert tags[0].label == "C"
    assert tags[0].probs["C"] == 1.0


def test_cue_tagger_indexes_sentences():
    tags = CueTagger().tag("Participants were enrolled. Outcomes were measured.")
    assert [t.index for t in tags] == [0, 1]
    assert tags[0].label == "P" and tags[1].label == "O"


# -- compliance rubric ------------------------------------------------------------


def test_all_elements_compliant_in_both_modes():
    tags = [tag(lab, index=i) for i, lab in enumerate("PICOS")]
    for mode in ("all_five", "pio_s"):
        verdict = assess_compliance(tags, rubric_mode=mode)
        assert verdict.compliant
        assert verdict.confidence == 1.0


def test_missing_comparator_splits_modes():
    tags = [tag(lab, index=i) for i, lab in enumerate("PIOS")]
    assert not assess_compliance(tags, rubric_mode="all_five").compliant
    assert assess_compliance(tags, rubric_mode="pio_s").compliant


def test_theta_gates_weak_evidence():
    tags = [tag(lab, index=i) for i, lab in enumerate("ICOS")]
    tags.append(tag("P", prob=0.4, index=4))
    verdict = assess_compliance(tags)
    assert verdict.elements["P"] is False
    assert not verdict.compliant
    strong = assess_compliance(tags, theta=0.3)
    assert strong.elements["P"] is True
    assert strong.compliant


def test_confidence_is_weakest_required_element():
    tags = [
        tag("P", prob=0.9, index=0),
        tag("I", prob=0.8, index=1),
        tag("C", prob=0.7, index=2),
        tag("O", prob=0.95, index=3),
        tag("S", prob=0.6, index=4),
    ]
    verdict = assess_compliance(tags)
    assert abs(verdict.confidence - 0.6) < 1e-12


def test_evidence_points_at_label_sentences():
    tags = [tag("P", index=0), tag("P", index=1), tag("O", index=2)]
    verdict = assess_compliance(tags)
    assert verdict.evidence["P"] == (0, 1)
    assert verdict.evidence["O"] == (2,)
    assert verdict.evidence["C"] == ()


def test_empty_tags_safe():
    verdict = assess_compliance([])
    assert not verdict.compliant
    assert verdict.confidence == 0.0
    assert all(not present for present in verdict.elements.values())


def test_unknown_rubric_mode():
    with pytest.raises(ValueError):
        assess_compliance([], rubric_mode="any_two")


def test_adding_tags_is_monotone():
    rng = np.random.default_rng(40)
    labels = list(LABELS)
    for _ in range(50):
        base = [
            tag(labels[int(rng.integers(len(labels)))], prob=float(rng.random()), index=i)
            for i in range(int(rng.integers(0, 6)))
        ]
        extra = tag(labels[int(rng.integers(len(labels)))], prob=float(rng.random()), index=99)
        for mode in ("all_five", "pio_s"):
            before = assess_compliance(base, rubric_mode=mode)
            after = assess_compliance(base + [extra], rubric_mode=mode)
            assert not (before.compliant and not after.compliant)


def test_twenty_abstract_fixture_matches_hand_rubric():
    tagger = CueTagger()
    for i in range(20):
        text, _ = generate_abstract(seed=100 + i, compliant=(i % 2 == 0))
        tags = tagger.tag(text)
        hand_present = {
            e: any(t.label == e and t.probs[e] >= 0.5 for t in tags) for e in "PICOS"
        }
        verdict = assess_compliance(tags)
        assert verdict.elements == hand_present
        assert verdict.compliant == all(hand_present.values())
        pio_s = assess_compliance(tags, rubric_mode="pio_s")
        assert pio_s.compliant == all(hand_present[e] for e in "PIOS")
