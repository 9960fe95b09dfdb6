"""Tests for normalization, similarity, blocked search, and classification."""

from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hallucheck.bibindex import BibRecord, build_index
from hallucheck.errors import EmptyQueryError
from hallucheck.matching import (
    CANDIDATE,
    DEFAULT_KEYWORDS,
    MATCHED,
    classify_citation,
    cross_check_identifier,
    detect_keywords,
    levenshtein,
    normalize_title,
    search_title,
    similarity,
    similarity_many,
    trigram_counts,
)
from hallucheck.references import ArxivId, Identifiers, ParsedReference, RawReference

from oracles import dp_levenshtein, enum_levenshtein, linear_scan_best

# --- normalization -----------------------------------------------------------


def test_normalize_strips_punctuation_and_case():
    assert (
        normalize_title("CANINE: Pre-training an Efficient Tokenization-Free Encoder")
        == "canine pre training an efficient tokenization free encoder"
    )


def test_normalize_expands_ligatures():
    assert normalize_title("Eﬃcient ﬁne-tuning") == "efficient fine tuning"


def test_normalize_collapses_whitespace_runs():
    assert normalize_title("  a\t\tb \n c  ") == "a b c"


@given(st.text(max_size=80))
def test_normalize_idempotent(s):
    once = normalize_title(s)
    assert normalize_title(once) == once


@given(st.text(max_size=80))
def test_normalize_output_alphabet(s):
    out = normalize_title(s)
    assert "  " not in out
    assert out == out.strip()
    for ch in out:
        assert ch == " " or ch.isalnum()
        assert not ch.isupper()


# --- edit distance and similarity ---------------------------------------------


def test_levenshtein_textbook_pair():
    assert levenshtein("kitten", "sitting") == 3


def test_similarity_worked_example():
    assert similarity("kitten", "sitting") == 1 - 3 / 7


def test_similarity_empty_rules():
    assert similarity("", "") == 1.0
    assert similarity("", "abc") == 0.0
    assert similarity("abc", "") == 0.0


def test_similarity_identical():
    assert similarity("same title", "same title") == 1.0


@given(st.text(alphabet="ab", max_size=6), st.text(alphabet="ab", max_size=6))
def test_dp_oracle_matches_exhaustive_enumeration(a, b):
    assert dp_levenshtein(a, b) == enum_levenshtein(a, b)


@given(
    st.text(alphabet="abcde", max_size=48),
    st.text(alphabet="abcde", max_size=48),
)
def test_levenshtein_matches_dp_oracle(a, b):
    assert levenshtein(a, b) == dp_levenshtein(a, b)


@given(st.text(alphabet="abcd ", max_size=40), st.lists(st.text(alphabet="abcd ", max_size=40), max_size=8))
def test_batch_similarity_matches_scalar(query, titles):
    batch = similarity_many(query, titles)
    for got, title in zip(batch, titles):
        assert got == similarity(query, title)


@given(
    st.text(alphabet="abcdef", min_size=1, max_size=30),
    st.text(alphabet="abcdef", min_size=1, max_size=30),
)
def test_length_filter_bound_is_sound(s1, s2):
    # The blocking prunes by length using this inequality; it must hold for
    # every pair at every threshold.
    t = similarity(s1, s2)
    assert abs(len(s1) - len(s2)) <= (1 - t) * max(len(s1), len(s2)) + 1e-9


@given(
    st.text(alphabet="abcdef", min_size=3, max_size=30),
    st.integers(min_value=0, max_value=4),
    st.randoms(use_true_random=False),
)
def test_trigram_count_bound_is_sound(s, k, rng):
    # Apply k arbitrary single-character edits; the survivor must share at
    # least max(len) - 2 - 3k trigrams with the original (counting multiplicity).
    mutated = s
    for _ in range(k):
        ops = ["sub", "del", "ins"]
        op = rng.choice(ops)
        pos = rng.randrange(len(mutated) + (op == "ins")) if mutated or op == "ins" else 0
        ch = rng.choice("abcdef")
        if op == "sub" and mutated:
            mutated = mutated[:pos] + ch + mutated[pos + 1 :]
        elif op == "del" and mutated:
            pos = min(pos, len(mutated) - 1)
            mutated = mutated[:pos] + mutated[pos + 1 :]
        else:
            mutated = mutated[:pos] + ch + mutated[pos:]
    shared = sum((trigram_counts(s) & trigram_counts(mutated)).values())
    assert shared >= max(len(s), len(mutated)) - 2 - 3 * k


# --- blocked search -------------------------------------------------------------


def _index_of(titles_by_id: dict[str, str]):
    return build_index(
        BibRecord.make(id=k, title=v) for k, v in sorted(titles_by_id.items())
    )


def test_search_exact_match_scores_one():
    index = _index_of(
        {
            "acl:1": "Attention is all you need",
            "acl:2": "Language models are few shot learners",
        }
    )
    outcome = search_title(index, "Attention Is All You Need")
    assert outcome.decision == MATCHED
    assert outcome.best == ("acl:1", 1.0)


def test_search_single_typo_in_forty_char_title():
    title = "statistical phrase alignments for speech"
    assert len(normalize_title(title)) == 40
    index = _index_of({"acl:x": title, "acl:y": "completely unrelated words here"})
    query = title.replace("alignments", "alignmants")
    outcome = search_title(index, query)
    assert outcome.decision == MATCHED
    assert outcome.best is not None
    assert outcome.best[0] == "acl:x"
    assert outcome.best[1] == 1 - 1 / 40 == 0.975


def test_search_absent_title_is_candidate_with_nearest_score():
    base = "a" * 25 + "b" * 25  # normalized length 50
    query = "a" * 25 + "c" * 19 + "b" * 6  # exactly 19 substitutions
    assert dp_levenshtein(base, query) == 19
    index = _index_of({"acl:1": base})
    outcome = search_title(index, query)
    assert outcome.decision == CANDIDATE
    assert outcome.best == ("acl:1", 1 - 19 / 50)
    assert abs(outcome.best[1] - 0.62) < 1e-12


def test_search_empty_query_rejected():
    index = _index_of({"acl:1": "some title"})
    with pytest.raises(EmptyQueryError):
        search_title(index, "!!! ---")


def test_search_empty_index_returns_no_best():
    index = _index_of({})
    outcome = search_title(index, "anything at all")
    assert outcome.best is None
    assert outcome.decision == CANDIDATE
    assert outcome.runners_up == ()


def test_search_tie_breaks_to_smallest_id():
    index = _index_of({"acl:b": "identical title", "acl:a": "identical title"})
    outcome = search_title(index, "identical title")
    assert outcome.best == ("acl:a", 1.0)


def test_runners_up_sorted_and_bounded_by_best():
    index = _index_of(
        {
            "acl:1": "neural machine translation",
            "acl:2": "neural machine translations",
            "acl:3": "statistical machine translation",
            "acl:4": "totally different topic",
        }
    )
    outcome = search_title(index, "neural machine translation", top_k=3)
    assert outcome.best is not None
    scores = [s for _, s in outcome.runners_up]
    assert scores == sorted(scores, reverse=True)
    assert all(outcome.best[1] >= s for s in scores)
    assert len(outcome.runners_up) <= 3


_WORDS = ["alpha", "beta", "gamma", "delta", "omega", "sigma", "token", "model"]


@st.composite
def _title_strategy(draw):
    words = draw(st.lists(st.sampled_from(_WORDS), min_size=1, max_size=6))
    return " ".join(words)


@settings(max_examples=60, deadline=None)
@given(
    titles=st.lists(_title_strategy(), min_size=1, max_size=25),
    query=_title_strategy(),
    mutate=st.booleans(),
    seed=st.integers(min_value=0, max_value=10_000),
)
def test_blocked_search_agrees_with_linear_scan(titles, query, mutate, seed):
    index = build_index(
        BibRecord.make(id=f"acl:{i}", title=t) for i, t in enumerate(titles)
    )
    if mutate:
        rng = random.Random(seed)
        base = titles[rng.randrange(len(titles))]
        pos = rng.randrange(len(base))
        query = base[:pos] + rng.choice("xyz") + base[pos + 1 :]
    qnorm = normalize_title(query)
    if not qnorm:
        return
    outcome = search_title(index, query)
    want_id, want_score, want_decision = linear_scan_best(
        index.ids, index.norm_titles, qnorm, 0.9
    )
    assert outcome.decision == want_decision
    assert outcome.best is not None
    assert outcome.best == (want_id, want_score)


@settings(max_examples=40, deadline=None)
@given(
    titles=st.lists(_title_strategy(), min_size=1, max_size=15),
    query=_title_strategy(),
)
def test_matched_at_high_threshold_stays_matched_lower(titles, query):
    index = build_index(
        BibRecord.make(id=f"acl:{i}", title=t) for i, t in enumerate(titles)
    )
    hi = search_title(index, query, threshold=0.95)
    lo = search_title(index, query, threshold=0.9)
    if hi.decision == MATCHED:
        assert lo.decision == MATCHED
    assert hi.best == lo.best  # argmax does not depend on the threshold


# --- keyword prefilter -----------------------------------------------------------


def test_keywords_whole_token_case_sensitive():
    assert detect_keywords("To appear in Proceedings of EMNLP.") == ("EMNLP",)
    assert detect_keywords("emnlp is lowercase here") == ()
    assert detect_keywords("NAACL-only mention") == ("NAACL",)  # ACL must not fire


def test_keywords_arxiv_case_insensitive():
    assert detect_keywords("ARXIV preprint") == ("arXiv",)
    assert detect_keywords("arxiv:2402.12345") == ("arXiv",)


def test_keywords_multiword_phrase():
    assert detect_keywords("Computational Linguistics, 26(2):200") == (
        "Computational Linguistics",
    )


def test_keywords_none_present():
    assert detect_keywords("Journal of Chemistry, 10(2)") == ()


def test_keywords_default_set_complete():
    text = " ".join(DEFAULT_KEYWORDS)
    assert detect_keywords(text) == DEFAULT_KEYWORDS


# --- identifier cross-check -------------------------------------------------------


def _parsed(
    text: str,
    title: str | None,
    ordinal: int = 0,
    year: int | None = None,
    identifiers: Identifiers | None = None,
) -> ParsedReference:
    raw = RawReference(source_id="paper", ordinal=ordinal, text=text, span=(0, len(text)))
    return ParsedReference(raw=raw, title=title, year=year, identifiers=identifiers)


def test_cross_check_consistent_identifier_passes():
    index = _index_of({"arxiv:2402.12345": "Homoclinic Floer homology via direct limits"})
    parsed = _parsed(
        "X. 2024. Homoclinic Floer homology via direct limits. arXiv:2402.12345",
        "Homoclinic Floer homology via direct limits",
        identifiers=Identifiers(arxiv_id=ArxivId("new", "2402.12345")),
    )
    assert cross_check_identifier(parsed, index) is None


def test_cross_check_mismatched_identifier():
    index = _index_of({"arxiv:2402.12345": "Homoclinic Floer homology via direct limits"})
    parsed = _parsed(
        "Y. Zhang and Others. 2024. Subsampling for skill improvement in large "
        "language models. arXiv preprint arXiv:2402.12345.",
        "Subsampling for skill improvement in large language models",
        identifiers=Identifiers(arxiv_id=ArxivId("new", "2402.12345")),
    )
    flag = cross_check_identifier(parsed, index)
    assert flag is not None
    assert flag.kind == "IdentifierTitleMismatch"
    assert flag.identifier is not None
    assert flag.identifier.record_title == "Homoclinic Floer homology via direct limits"
    assert flag.identifier.cited_title == (
        "Subsampling for skill improvement in large language models"
    )
    assert flag.identifier.score is not None and flag.identifier.score < 0.9


def test_cross_check_version_suffix_resolves_to_base():
    index = _index_of({"arxiv:2402.12345": "Homoclinic Floer homology via direct limits"})
    parsed = _parsed(
        "X. 2024. Homoclinic Floer homology via direct limits. arXiv:2402.12345v2",
        "Homoclinic Floer homology via direct limits",
        identifiers=Identifiers(arxiv_id=ArxivId("new", "2402.12345v2")),
    )
    assert cross_check_identifier(parsed, index) is None


def test_cross_check_absent_identifier():
    index = _index_of({"arxiv:1111.22222": "something else"})
    parsed = _parsed(
        "A. 2020. A title. arXiv:2402.12345",
        "A title",
        identifiers=Identifiers(arxiv_id=ArxivId("new", "2402.12345")),
    )
    flag = cross_check_identifier(parsed, index)
    assert flag is not None
    assert flag.kind == "IdentifierNotFound"
    assert flag.db_coverage_note is None


def test_cross_check_absent_identifier_with_stale_snapshot_note():
    index = build_index(
        [BibRecord.make(id="arxiv:1111.22222", title="something else", year=2021)]
    )
    parsed = _parsed(
        "A. 2024. A title. arXiv:2402.12345",
        "A title",
        year=2024,
        identifiers=Identifiers(arxiv_id=ArxivId("new", "2402.12345")),
    )
    flag = cross_check_identifier(parsed, index)
    assert flag is not None
    assert flag.kind == "IdentifierNotFound"
    assert flag.db_coverage_note is not None
    assert "2024" in flag.db_coverage_note and "2021" in flag.db_coverage_note


def test_cross_check_malformed_identifier():
    index = _index_of({"arxiv:1111.22222": "something else"})
    parsed = _parsed(
        "A. 2020. A title. arXiv:2313.99999",
        "A title",
        identifiers=Identifiers(malformed=("2313.99999",)),
    )
    flag = cross_check_identifier(parsed, index)
    assert flag is not None
    assert flag.kind == "MalformedIdentifier"


# --- classification pipeline ---------------------------------------------------


class _Config:
    def __init__(self, **kw):
        for key, value in kw.items():
            setattr(self, key, value)


def test_classify_skips_citation_without_keywords():
    index = _index_of({"acl:1": "real title"})
    parsed = _parsed("A. Author. 2020. Some unrelated medical study. Nature.", "Some unrelated medical study")
    assert classify_citation(parsed, index) is None


def test_classify_scan_all_overrides_prefilter():
    index = _index_of({"acl:1": "real title"})
    parsed = _parsed(
        "A. Author. 2020. Some unrelated medical study. Nature.",
        "Some unrelated medical study",
    )
    flag = classify_citation(parsed, index, _Config(scan_all=True))
    assert flag is not None
    assert flag.kind == "TitleNotFound"
    assert flag.keywords == ()


def test_classify_matched_title_no_flag():
    index = _index_of({"acl:1": "A perfectly real paper about parsing"})
    parsed = _parsed(
        "A. Author. 2020. A perfectly real paper about parsing. In Proceedings of EMNLP.",
        "A perfectly real paper about parsing",
    )
    assert classify_citation(parsed, index) is None


def test_classify_unmatched_title_flagged_with_evidence():
    index = _index_of({"acl:1": "A perfectly real paper about parsing"})
    parsed = _parsed(
        "A. Author. 2020. A fabricated paper that does not exist. In Proceedings of EMNLP.",
        "A fabricated paper that does not exist",
    )
    flag = classify_citation(parsed, index)
    assert flag is not None
    assert flag.kind == "TitleNotFound"
    assert flag.keywords == ("EMNLP",)
    assert flag.match is not None
    assert flag.match.decision == CANDIDATE
    assert flag.match.threshold_used == 0.9


def test_classify_identifier_mismatch_outranks_title_not_found():
    # The cited title is absent AND the arXiv id points at a different work;
    # the identifier evidence is the stronger signal.
    index = _index_of({"arxiv:2402.12345": "Homoclinic Floer homology via direct limits"})
    parsed = _parsed(
        "Y. Zhang and Others. 2024. Subsampling for skill improvement in large "
        "language models. arXiv preprint arXiv:2402.12345.",
        "Subsampling for skill improvement in large language models",
        identifiers=Identifiers(arxiv_id=ArxivId("new", "2402.12345")),
    )
    flag = classify_citation(parsed, index)
    assert flag is not None
    assert flag.kind == "IdentifierTitleMismatch"


def test_classify_no_title_extracted():
    index = _index_of({"acl:1": "real title"})
    parsed = _parsed("arXiv something fragmentary but long enough.", None)
    flag = classify_citation(parsed, index)
    assert flag is not None
    assert flag.kind == "NoTitleExtracted"


def test_classify_is_deterministic():
    index = _index_of({"acl:1": "real title one", "acl:2": "real title two"})
    parsed = _parsed(
        "A. Author. 2020. A fabricated EMNLP paper title here. In Proceedings of EMNLP.",
        "A fabricated EMNLP paper title here",
    )
    first = classify_citation(parsed, index)
    second = classify_citation(parsed, index)
    assert first == second


def test_classify_threshold_monotone_flag_sets():
    # Everything flagged at a stricter (higher) threshold includes everything
    # flagged at the default.
    index = _index_of({"acl:1": "language models are few shot learners"})
    citations = [
        _parsed(f"A. 2020. {t}. In Proceedings of ACL.", t, ordinal=i)
        for i, t in enumerate(
            [
                "language models are few shot learners",
                "language models are few shot learner",  # near match
                "a completely fabricated title",
            ]
        )
    ]
    flagged_default = {
        p.raw.ordinal for p in citations if classify_citation(p, index, _Config(threshold=0.9)) is not None
    }
    flagged_strict = {
        p.raw.ordinal
        for p in citations
        if classify_citation(p, index, _Config(threshold=0.98)) is not None
    }
    assert flagged_default <= flagged_strict
