import pytest

from visquest.corpus import (CorpusEntry, DEFAULT_CAP, filter_corpus,
                             load_corpus, save_corpus)
from visquest.errors import DataError


def entry(question, image="img", region=(0, 0, 10, 10), word="animal"):
    return CorpusEntry(image=image, region=region, target_word=word,
                       question=question)


def test_round_trip(tmp_path):
    entries = [entry("what is this animal ?"),
               entry("what is that ?", image="img2", region=(1, 2, 3, 4))]
    path = tmp_path / "corpus.jsonl"
    save_corpus(entries, path)
    loaded = load_corpus(path)
    assert loaded == entries


def test_empty_corpus_round_trip(tmp_path):
    path = tmp_path / "corpus.jsonl"
    save_corpus([], path)
    assert load_corpus(path) == []


def test_bad_line_reports_its_number(tmp_path):
    path = tmp_path / "corpus.jsonl"
    path.write_text('{"image": "a", "region": [0,0,1,1], '
                    '"target_word": "w", "question": "what ?"}\n'
                    'not json\n')
    with pytest.raises(DataError, match="line 2"):
        load_corpus(path)


def test_missing_file(tmp_path):
    with pytest.raises(DataError):
        load_corpus(tmp_path / "absent.jsonl")


def test_filter_keeps_only_what_questions():
    entries = [entry("what is this animal ?"),
               entry("Where is the dog ?"),
               entry("is this a dog ?"),
               entry("What kind of tree is that ?")]
    kept = filter_corpus(entries)
    assert [e.question for e in kept] == ["what is this animal ?",
                                          "What kind of tree is that ?"]


def test_filter_drops_what_color_questions():
    entries = [entry("what color is the car ?"),
               entry("What COLOR is that ?"),
               entry("what is the color ?")]     # "color" not second token
    kept = filter_corpus(entries)
    assert [e.question for e in kept] == ["what is the color ?"]


def test_filter_caps_repeats_after_tokenization():
    # Case and spacing differences must not defeat the cap.
    variants = [entry("what is this ?"), entry("What is this?"),
                entry("what  is  this ?")]
    kept = filter_corpus(variants * 30, cap=50)
    assert len(kept) == 50
    assert len(filter_corpus(variants * 30)) == 50
    assert DEFAULT_CAP == 50


def test_filter_preserves_order_and_distinct_questions():
    entries = [entry(q) for q in ("what is this ?", "what is that ?",
                                  "what is this ?")]
    kept = filter_corpus(entries, cap=1)
    assert [e.question for e in kept] == ["what is this ?", "what is that ?"]


def test_filter_rejects_nonpositive_cap():
    with pytest.raises(DataError):
        filter_corpus([entry("what ?")], cap=0)
