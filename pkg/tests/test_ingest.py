import io
import json

import numpy as np
import pytest
from collections import Counter

from oracles import raw_line_counts
from vaxnet.corpus import tokenize
from vaxnet.ingest import (
    ANTIVAXX_TERMS, IngestError, KeywordFilter, RawPost, SynthConfig, filter_by_keywords,
    filter_retweet_only_users, generate_synthetic, parse_dataset, record_to_post, top_authors,
    twin_marginals_match, write_dataset, Dataset,
)


def _rec(**kw):
    base = {"post_id": "x1", "author_id": "a", "author_handle": "al", "is_verified": False,
            "timestamp": 1, "text": "no vax here", "is_retweet": False,
            "retweeted_post_id": None, "retweeted_author_id": None, "hashtags": []}
    base.update(kw)
    return json.dumps(base)


def _post(pid, author, text="vaccine", rt_of=None, rt_post=None, ts=1):
    return RawPost(pid, author, author.lower(), False, ts, text, rt_of is not None, rt_post, rt_of,
                   hashtags=())


# parse_dataset

def test_single_original_line():
    d = parse_dataset([_rec()], strict=True)
    assert len(d) == 1 and d.skipped == 0


def test_strict_retweet_without_author_names_line():
    lines = [_rec(), _rec(post_id="x2", is_retweet=True, retweeted_post_id="x1")]
    with pytest.raises(IngestError) as err:
        parse_dataset(lines, strict=True)
    assert err.value.lineno == 2
    assert "line 2" in str(err.value)


def test_fixture_counts_match_line_oracle(fixture_path, fixture_dataset):
    raw = raw_line_counts(fixture_path)
    assert raw["lines"] == 30 and raw["authors"] == 8
    assert len(fixture_dataset) == raw["lines"] and fixture_dataset.skipped == 0
    assert sum(p.is_retweet for p in fixture_dataset.posts) == raw["retweets"]
    assert len({p.author_id for p in fixture_dataset.posts}) == raw["authors"]


def test_lenient_counts_malformed():
    d = parse_dataset([_rec(), "{not json", _rec(post_id="x2", timestamp="soon")], strict=False)
    assert len(d) == 1 and d.skipped == 2


def test_duplicate_post_id_always_errors():
    with pytest.raises(IngestError, match="duplicate"):
        parse_dataset([_rec(), _rec()], strict=False)


def test_original_with_linkage_rejected():
    with pytest.raises(IngestError):
        parse_dataset([_rec(retweeted_post_id="z", retweeted_author_id="b")], strict=True)


def test_quote_tweets_rejected():
    with pytest.raises(ValueError):
        record_to_post(json.loads(_rec(kind="quote")))
    with pytest.raises(ValueError):
        record_to_post(json.loads(_rec(is_quote=True)))


def test_hashtags_must_match_text():
    with pytest.raises(ValueError):
        record_to_post(json.loads(_rec(text="vax #Truth", hashtags=["lies"])))
    p = record_to_post(json.loads(_rec(text="vax #Truth", hashtags=["truth"])))
    assert p.hashtags == ("truth",)
    derived = json.loads(_rec(text="vax #Truth #more"))
    del derived["hashtags"]
    assert set(record_to_post(derived).hashtags) == {"truth", "more"}


def test_round_trip(fixture_dataset):
    buf = io.StringIO()
    write_dataset(fixture_dataset, buf)
    again = parse_dataset(buf.getvalue().splitlines(), strict=True)
    assert again == fixture_dataset


# filter_by_keywords

def test_keyword_phrase_with_space():
    d = Dataset((_post("1", "a", "no vax for me"),))
    assert len(filter_by_keywords(d, KeywordFilter(("no vax",)))) == 1


def test_keyword_boundary():
    d = Dataset((_post("1", "a", "vaccinate"),))
    assert len(filter_by_keywords(d, KeywordFilter(("vax",)))) == 0


def test_keyword_embedded_in_longer_run_rejected():
    d = Dataset((_post("1", "a", "antivaxxer stuff"), _post("2", "b", "anti-vax stuff")))
    kept = filter_by_keywords(d, KeywordFilter(("vax",)))
    assert [p.post_id for p in kept.posts] == ["2"]


def test_fixture_keywords_all_retained(fixture_dataset):
    assert len(filter_by_keywords(fixture_dataset, KeywordFilter.default())) == 30


def test_keyword_filter_rejects_empty_and_invalid():
    with pytest.raises(ValueError):
        KeywordFilter(())
    with pytest.raises(ValueError):
        KeywordFilter(("Vax",))
    with pytest.raises(ValueError):
        KeywordFilter(("vax", "vax"))


def test_bundled_keywords_include_footnote_forms():
    kw = set(KeywordFilter.default().phrases)
    assert {"novax", "no vax", "no-vax"} <= kw


# filter_retweet_only_users

def test_retweet_only_user_removed():
    posts = (_post("1", "a"), _post("2", "h", rt_of="a", rt_post="1"),
             _post("3", "h", rt_of="a", rt_post="1"), _post("4", "h", rt_of="a", rt_post="1"))
    out = filter_retweet_only_users(Dataset(posts))
    assert [p.post_id for p in out.posts] == ["1"]


def test_user_with_original_kept():
    d = Dataset((_post("1", "a"),))
    assert filter_retweet_only_users(d) == d


def test_retweets_of_dropped_user_kept():
    # h is dropped as an author, but b's retweet pointing at h survives
    posts = (_post("1", "b"), _post("2", "b", rt_of="h", rt_post="zz"), _post("3", "h", rt_of="b", rt_post="1"))
    out = filter_retweet_only_users(Dataset(posts))
    assert [p.post_id for p in out.posts] == ["1", "2"]


def test_fixture_retweet_only(fixture_dataset):
    out = filter_retweet_only_users(fixture_dataset)
    assert len(out) == 27
    assert "H" not in {p.author_id for p in out.posts}


# top_authors

def test_top_authors_empty():
    assert top_authors(Dataset(()), 5) == []


def test_top_authors_n_larger_than_authors(fixture_dataset):
    assert len(top_authors(fixture_dataset, 100, "originals")) == 7


def test_top_authors_fixture(fixture_dataset):
    assert top_authors(fixture_dataset, 3, "times_retweeted") == [("A", 6), ("D", 5), ("B", 2)]


def test_top_authors_ties_by_id():
    posts = (_post("1", "b"), _post("2", "a"))
    assert top_authors(Dataset(posts), 2) == [("a", 1), ("b", 1)]


def test_top_authors_rejects_bad_n():
    with pytest.raises(ValueError):
        top_authors(Dataset(()), 0)


# generate_synthetic

def test_synthetic_deterministic():
    a, b = io.StringIO(), io.StringIO()
    write_dataset(generate_synthetic(SynthConfig(n_users=60), 1), a)
    write_dataset(generate_synthetic(SynthConfig(n_users=60), 1), b)
    assert a.getvalue() == b.getvalue()


def test_synthetic_every_user_posts():
    d = generate_synthetic(SynthConfig(n_users=100), 3)
    authors = {p.author_id for p in d.posts if not p.is_retweet}
    assert len(authors) == 100


def test_synthetic_passes_keyword_filter():
    d = generate_synthetic(SynthConfig(n_users=50), 4)
    assert len(filter_by_keywords(d, KeywordFilter.default())) == len(d)


def test_synthetic_prefers_in_community_retweets():
    d = generate_synthetic(SynthConfig(n_users=400), 5)
    same = [d.planted[p.author_id] == d.planted[p.retweeted_author_id] for p in d.posts if p.is_retweet]
    assert np.mean(same) > 0.9


def test_ordering_signal_marginals():
    d = generate_synthetic(SynthConfig(n_users=2000, ordering_signal=True), 1)
    assert twin_marginals_match(d)
    counts = {0: Counter(), 1: Counter()}
    for p in d.posts:
        if not p.is_retweet:
            counts[d.planted[p.author_id]].update(t.surface for t in tokenize(p.text))
    terms = set(counts[0]) | set(counts[1])
    l1 = sum(abs(counts[0][t] - counts[1][t]) for t in terms)
    assert l1 / sum(counts[0].values()) < 0.02


def test_ordering_signal_pattern():
    d = generate_synthetic(SynthConfig(n_users=40, ordering_signal=True), 2)
    for p in d.posts:
        if p.is_retweet:
            continue
        words = p.text.split()
        if "alpha" in words:
            before = words.index("alpha") < words.index("omega")
            assert before == (d.planted[p.author_id] == 0)


def test_planted_terms_only_in_antivaxx():
    d = generate_synthetic(SynthConfig(n_users=200), 6)
    for p in d.posts:
        if not p.is_retweet and any(t in p.text.split() for t in ANTIVAXX_TERMS):
            assert d.planted[p.author_id] == 0


@pytest.mark.parametrize("bad", [dict(n_users=1), dict(n_communities=1), dict(vocab_shift=2.0),
                                 dict(n_users=3, n_communities=4), dict(ordering_signal=True, n_communities=3),
                                 dict(posts_per_user=(0, 2)), dict(in_community_prob=1.5)])
def test_synth_config_bounds(bad):
    with pytest.raises(ValueError):
        SynthConfig(**bad)
