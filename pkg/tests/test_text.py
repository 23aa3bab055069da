from hypothesis import given, strategies as st
from nltk.stem import PorterStemmer

from celetrip.text import (name_stems, normalize_token, preprocess, sentence_tokens, split_sentences, stem_tokens,
                           stopwords, tokenize)


def test_empty_text():
    assert preprocess("") == []
    assert split_sentences("   ") == []


def test_single_sentence_stems():
    assert preprocess("Trump visited Philadelphia.") == [["trump", "visit", "philadelphia"]]


def test_stopwords_removed_per_sentence():
    out = preprocess("He is here. She was there.")
    assert len(out) == 2
    stops = stopwords()
    for sent in out:
        assert all(w not in stops for w in sent)


def test_reference_stemmer_agrees():
    ref = PorterStemmer()
    words = ["visited", "arriving", "landed", "meetings", "economies", "officially"]
    assert stem_tokens(words) == [ref.stem(w) for w in words]


def test_abbreviations_do_not_split():
    text = "Mr. Smith met Dr. Jones in St. Louis. They left at noon."
    assert split_sentences(text) == ["Mr. Smith met Dr. Jones in St. Louis.", "They left at noon."]


def test_initialism_is_one_token():
    assert tokenize("the U.S. and Washington D.C. talks") == ["the", "U.S.", "and", "Washington", "D.C.", "talks"]


def test_possessive_stripping():
    assert normalize_token("Korea's") == "korea"
    assert normalize_token("Korea’s") == "korea"
    assert normalize_token("leaders'") == "leaders"


def test_sentence_counts_match():
    text = "The. A b c! Paris is big."
    assert len(preprocess(text)) == len(sentence_tokens(text))


def test_name_stems_flatten():
    assert name_stems("Donald Trump") == ["donald", "trump"]


words = st.sampled_from(["visit", "arriv", "land", "philadelphia", "summit", "talk", "leader", "trump",
                         "merkel", "forum", "plan", "budget", "citi", "meet"])


@given(st.lists(words, min_size=1, max_size=12))
def test_stemming_own_output_is_fixed_point(tokens):
    once = stem_tokens(tokens)
    assert stem_tokens(once) == once
