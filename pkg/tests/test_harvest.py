from __future__ import annotations

import math
import time
from datetime import datetime, timezone
from pathlib import Path

import pytest

from kic.errors import (
    NotFound,
    ParseError,
    RateLimitedByServer,
    TransportError,
    WordlistError,
)
from kic.harvest import (
    HarvestConfig,
    HarvestRecord,
    Wordlist,
    extract_sentences,
    fetch_page,
    harvest,
    load_wordlist,
    read_records_jsonl,
    write_records_jsonl,
    write_skips_jsonl,
)
from kic.metrics import tokenize

from servers import example_page

FIXTURES = Path(__file__).parent / "fixtures"

FIXED_CLOCK = lambda: datetime(2024, 5, 1, 12, 0, 0, tzinfo=timezone.utc)  # noqa: E731


def config_for(site, **overrides) -> HarvestConfig:
    defaults = dict(
        top_m=3,
        base_url=site.base_url,
        rate_limit=500.0,
        timeout=5.0,
        max_retries=3,
        backoff_base=0.01,
        parallelism=2,
    )
    defaults.update(overrides)
    return HarvestConfig(**defaults)


class TestDefaults:
    def test_politeness_defaults(self):
        config = HarvestConfig()
        assert config.rate_limit == 2.0
        assert config.timeout == 10.0
        assert config.max_retries == 3
        assert config.backoff_base == 0.5
        assert config.backoff_factor == 2.0


class TestWordlist:
    def test_load_skips_comments_and_blanks(self, tmp_path):
        path = tmp_path / "words.txt"
        path.write_text("# header\nmake\n\nrun\n# tail\ntake\n", encoding="utf-8")
        wordlist = load_wordlist(path)
        assert wordlist.words == ("make", "run", "take")
        assert wordlist.source_path == str(path)

    def test_casefold_duplicates_dropped(self, tmp_path):
        path = tmp_path / "words.txt"
        path.write_text("Make\nmake\nMAKE\nrun\n", encoding="utf-8")
        assert load_wordlist(path).words == ("Make", "run")

    def test_whitespace_entry_rejected_with_line(self, tmp_path):
        path = tmp_path / "words.txt"
        path.write_text("ok\nnot ok\n", encoding="utf-8")
        with pytest.raises(WordlistError, match=r"words\.txt:2"):
            load_wordlist(path)

    def test_constructor_enforces_invariants(self):
        with pytest.raises(WordlistError):
            Wordlist(words=("a", "A"))
        with pytest.raises(WordlistError):
            Wordlist(words=("",))


class TestExtractSentences:
    def test_truncates_to_top_m_in_page_order(self):
        html = (FIXTURES / "page_make_12.html").read_text()
        records = extract_sentences(html, "make", 10)
        assert len(records) == 10
        assert records[0].sentence.startswith("They make bread")
        assert records[9].sentence.startswith("Farmers make hay")

    def test_whole_token_filter(self):
        # Two of the five fixture examples use "running"/"runner", which
        # are not whole-token hits for "run".
        html = (FIXTURES / "page_run_partial.html").read_text()
        records = extract_sentences(html, "run", 10)
        assert len(records) == 3
        for record in records:
            assert "run" in tokenize(record.sentence)

    def test_entities_decoded_and_tags_stripped(self):
        html = (FIXTURES / "page_entities.html").read_text()
        records = extract_sentences(html, "salt", 10)
        assert records[0].sentence == (
            "Bread & butter need a pinch of salt to taste right."
        )
        assert records[1].sentence == (
            "She added salt and pepper <carefully> to the stew."
        )

    def test_no_containers_raises_parse_error(self):
        with pytest.raises(ParseError):
            extract_sentences("<html><body><p>nothing</p></body></html>", "x", 5)

    def test_length_window(self):
        html = example_page(
            "cat",
            [
                "cat",  # 1 token, too short
                "The cat sat.",  # in range
                "cat " * 200,  # too long
            ],
        )
        records = extract_sentences(html, "cat", 10)
        assert [r.sentence for r in records] == ["The cat sat."]

    def test_record_invariants_hold(self):
        html = (FIXTURES / "page_make_12.html").read_text()
        for record in extract_sentences(html, "make", 12):
            tokens = tokenize(record.sentence)
            assert "make" in tokens
            assert 3 <= len(tokens) <= 128

    def test_custom_container_selector(self):
        html = '<ul><li class="usage">The cat sat on the mat.</li></ul>'
        records = extract_sentences(
            html, "cat", 5, container_tag="li", container_class="usage"
        )
        assert len(records) == 1


class TestFetchPage:
    def test_fixture_body_returned(self, fixture_site):
        body = fetch_page("make", config_for(fixture_site))
        assert "make" in body
        assert "<div class=\"example\">" in body

    def test_404_raises_not_found(self, fixture_site):
        fixture_site.not_found.add("zzzqqq")
        with pytest.raises(NotFound):
            fetch_page("zzzqqq", config_for(fixture_site))
        # 404 is not retried
        assert len(fixture_site.requests_for("zzzqqq")) == 1

    def test_fail_twice_then_succeed_counts_three_requests(self, fixture_site):
        fixture_site.fail_first["make"] = 2
        body = fetch_page("make", config_for(fixture_site, max_retries=3))
        assert "make" in body
        assert len(fixture_site.requests_for("make")) == 3

    def test_retries_exhausted_raise_transport_error(self, fixture_site):
        fixture_site.fail_first["bad"] = 99
        with pytest.raises(TransportError):
            fetch_page("bad", config_for(fixture_site, max_retries=2))
        assert len(fixture_site.requests_for("bad")) == 3

    def test_429_exhausted_raises_rate_limited(self, fixture_site):
        fixture_site.always_429.add("hot")
        with pytest.raises(RateLimitedByServer):
            fetch_page("hot", config_for(fixture_site, max_retries=1))

    def test_connection_refused_raises_transport_error(self):
        config = HarvestConfig(
            base_url="http://127.0.0.1:9/words/{word}",
            max_retries=0,
            timeout=0.5,
        )
        with pytest.raises(TransportError):
            fetch_page("any", config)


class TestRateLimiting:
    def test_window_budget_respected(self, fixture_site):
        rate = 40.0
        words = tuple(f"w{i}" for i in range(12))
        config = config_for(
            fixture_site, rate_limit=rate, parallelism=6, top_m=1
        )
        harvest(Wordlist(words=words), config)
        stamps = sorted(r.at for r in fixture_site.log)
        assert len(stamps) == len(words)
        window = stamps[-1] - stamps[0]
        # any observation window of w seconds sees at most ceil(r*w) + 1
        assert len(stamps) <= math.ceil(rate * window) + 1
        for earlier, later in zip(stamps, stamps[1:]):
            assert later - earlier >= (1.0 / rate) - 0.005

    def test_rate_limiter_shared_across_threads(self, fixture_site):
        started = time.monotonic()
        words = tuple(f"w{i}" for i in range(8))
        config = config_for(fixture_site, rate_limit=50.0, parallelism=8, top_m=1)
        harvest(Wordlist(words=words), config)
        elapsed = time.monotonic() - started
        # 8 requests at 50 req/s cannot finish faster than 7 intervals.
        assert elapsed >= 7 / 50.0 - 0.01


class TestHarvest:
    def test_exact_yield_with_ample_fixture(self, fixture_site):
        words = Wordlist(words=("alpha", "beta", "gamma", "delta", "epsilon"))
        records, skips = harvest(words, config_for(fixture_site, top_m=3))
        assert len(records) == 15
        assert skips == []
        # wordlist order, page order within each keyword
        assert [r.keyword for r in records] == [
            w for w in words.words for _ in range(3)
        ]

    def test_404_keyword_becomes_skip_entry(self, fixture_site):
        fixture_site.not_found.add("beta")
        words = Wordlist(words=("alpha", "beta", "gamma"))
        records, skips = harvest(words, config_for(fixture_site, top_m=2))
        assert len(records) == 4
        assert [(s.keyword, s.reason) for s in skips] == [("beta", "not-found")]

    def test_idempotent_with_fixed_clock(self, fixture_site):
        words = Wordlist(words=("alpha", "beta"))
        config = config_for(fixture_site, top_m=3)
        first, _ = harvest(words, config, clock=FIXED_CLOCK)
        second, _ = harvest(words, config, clock=FIXED_CLOCK)
        assert first == second

    def test_all_transport_failures_raise(self, fixture_site):
        fixture_site.fail_first["a"] = 99
        fixture_site.fail_first["b"] = 99
        words = Wordlist(words=("a", "b"))
        with pytest.raises(TransportError):
            harvest(words, config_for(fixture_site, max_retries=0))

    def test_partial_transport_failure_skips(self, fixture_site):
        fixture_site.fail_first["a"] = 99
        words = Wordlist(words=("a", "b"))
        records, skips = harvest(words, config_for(fixture_site, max_retries=0))
        assert all(r.keyword == "b" for r in records)
        assert [(s.keyword, s.reason) for s in skips] == [("a", "transport-error")]

    def test_parse_error_keyword_skipped(self, fixture_site):
        fixture_site.pages["empty"] = "<html><body>no containers</body></html>"
        words = Wordlist(words=("empty", "ok"))
        records, skips = harvest(words, config_for(fixture_site))
        assert all(r.keyword == "ok" for r in records)
        assert [(s.keyword, s.reason) for s in skips] == [("empty", "parse-error")]

    def test_keyword_missing_from_page_becomes_no_examples(self, fixture_site):
        fixture_site.pages["ghost"] = example_page(
            "ghost", ["Nothing here mentions the word at all."]
        )
        words = Wordlist(words=("ghost",))
        records, skips = harvest(words, config_for(fixture_site))
        assert records == []
        assert [(s.keyword, s.reason) for s in skips] == [("ghost", "no-examples")]


class TestJsonlRoundTrip:
    def test_records_round_trip(self, tmp_path):
        records = [
            HarvestRecord(
                keyword="cat",
                sentence="The cat sat there.",
                source_url="http://x/words/cat",
                fetched_at="2024-05-01T12:00:00Z",
            ),
            HarvestRecord(
                keyword="dog",
                sentence="A dog barked loudly.",
                source_url="http://x/words/dog",
                fetched_at="2024-05-01T12:00:01Z",
            ),
        ]
        path = tmp_path / "records.jsonl"
        write_records_jsonl(records, path)
        assert read_records_jsonl(path) == records
        lines = path.read_text().splitlines()
        assert len(lines) == 2
        assert lines[0].startswith('{"keyword": "cat"')

    def test_skips_written_with_fields(self, tmp_path):
        from kic.harvest import SkipEntry

        path = tmp_path / "skips.jsonl"
        write_skips_jsonl([SkipEntry("x", "not-found")], path)
        assert path.read_text() == '{"keyword": "x", "reason": "not-found"}\n'
