import itertools
import json
import math
import socket

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from banditprompt.errors import (
    DataError,
    MalformedResponseError,
    ServiceConnectionError,
    ServiceStatusError,
    ServiceTimeoutError,
)
from banditprompt.reward import (
    RougeScore,
    SyntheticLandscape,
    avg_rouge_reward,
    lcs_length,
    load_profiles,
    make_landscape,
    rouge1,
    rougeL,
    save_profiles,
    synthetic_reward,
    tokenize,
)
from banditprompt.service import build_request, remote_generate


def multiset_match(cand, ref):
    """Brute-force clipped overlap: consume reference tokens one by one."""
    pool = list(ref)
    match = 0
    for tok in cand:
        if tok in pool:
            pool.remove(tok)
            match += 1
    return match


def lcs_by_enumeration(a, b):
    """Longest subsequence of ``a`` that is also a subsequence of ``b``."""
    subs_b = {tuple(b[i] for i in idx) for r in range(len(b) + 1) for idx in itertools.combinations(range(len(b)), r)}
    for r in range(len(a), -1, -1):
        if any(tuple(a[i] for i in idx) in subs_b for idx in itertools.combinations(range(len(a)), r)):
            return r
    return 0


class TestTokenize:
    def test_examples(self):
        assert tokenize("The Cat\u2014sat!!") == ["the", "cat", "sat"]
        assert tokenize("") == []
        assert tokenize("a1 b2  c3") == ["a1", "b2", "c3"]
        assert tokenize("snake_case, don't") == ["snake", "case", "don", "t"]

    @given(st.text())
    def test_tokens_are_clean(self, text):
        for tok in tokenize(text):
            assert tok and not any(ch.isspace() for ch in tok)
            assert tok == tok.lower()


class TestRouge:
    def test_rouge1_examples(self):
        toks = ["the", "cat", "sat"]
        assert rouge1(toks, toks) == RougeScore(1.0, 1.0, 1.0)
        assert rouge1([], toks) == RougeScore(0.0, 0.0, 0.0)
        s = rouge1(["the", "cat", "sat"], ["the", "cat", "ran"])
        assert (s.precision, s.recall, s.f1) == pytest.approx((2 / 3, 2 / 3, 2 / 3))
        assert multiset_match(["the", "cat", "sat"], ["the", "cat", "ran"]) == 2

    def test_rouge1_clipping(self):
        s = rouge1(["the", "the", "the"], ["the", "cat"])
        assert s.precision == pytest.approx(1 / 3) and s.recall == pytest.approx(1 / 2)

    def test_rougeL_examples(self):
        assert rougeL(["a", "b"], ["a", "b"]).f1 == 1.0
        s = rougeL(["a", "b", "c", "d"], ["a", "c", "b", "d"])
        assert lcs_by_enumeration(["a", "b", "c", "d"], ["a", "c", "b", "d"]) == 3
        assert (s.precision, s.recall, s.f1) == pytest.approx((0.75, 0.75, 0.75))
        assert rougeL(["x", "y"], ["p", "q"]).f1 == 0.0

    def test_lcs_matches_enumeration_random(self):
        rng = np.random.default_rng(0)
        for _ in range(300):
            a = list(rng.choice(list("abcd"), size=rng.integers(0, 8)))
            b = list(rng.choice(list("abcd"), size=rng.integers(0, 8)))
            assert lcs_length(a, b) == lcs_by_enumeration(a, b)

    def test_lcs_bounded_by_unigram_match(self):
        seqs = [s for n in range(6) for s in itertools.product("abc", repeat=n)]
        for a in seqs:
            for b in seqs:
                assert lcs_length(a, b) <= multiset_match(a, b)

    @given(
        st.lists(st.sampled_from("abcde"), min_size=1, max_size=12),
        st.lists(st.sampled_from("abcde"), min_size=1, max_size=12),
    )
    def test_f1_symmetric(self, a, b):
        for fn in (rouge1, rougeL):
            ab, ba = fn(a, b), fn(b, a)
            assert ab.precision == ba.recall and ab.recall == ba.precision
            assert ab.f1 == pytest.approx(ba.f1)
            assert 0 <= ab.f1 <= 1

    def test_avg_reward(self):
        assert avg_rouge_reward("Hello world", "hello, WORLD") == 1.0
        assert avg_rouge_reward("the cat sat", "the cat ran") == pytest.approx(2 / 3)
        assert avg_rouge_reward("", "anything") == 0.0

    @given(st.text(max_size=40), st.text(max_size=40))
    def test_avg_reward_in_unit_interval(self, a, b):
        assert 0.0 <= avg_rouge_reward(a, b) <= 1.0


class TestSynthetic:
    def test_optimum(self):
        rng = np.random.default_rng(0)
        z = rng.uniform(-1, 1, 4)
        B = rng.normal(size=(3, 4))
        land = SyntheticLandscape(B, B @ z, 0.7)
        assert synthetic_reward(land, z) == 1.0

    def test_scalar_value(self):
        land = SyntheticLandscape(np.eye(1), np.zeros(1), 1.0)
        assert synthetic_reward(land, [1.0]) == pytest.approx(math.exp(-1))
        assert synthetic_reward(land, [1.0]) == pytest.approx(0.3679, abs=1e-4)

    def test_decreasing_along_ray(self):
        land = make_landscape(3, 5, 2.0, np.random.default_rng(1))
        z_star = np.linalg.lstsq(land.B, land.w, rcond=None)[0]
        direction = np.random.default_rng(2).normal(size=5)
        if np.allclose(land.B @ direction, 0):
            pytest.skip("ray in null space")
        vals = [synthetic_reward(land, z_star + s * direction) for s in np.linspace(0, 3, 30)]
        assert all(b < a for a, b in zip(vals, vals[1:]))
        assert all(0 < v <= 1 for v in vals)

    def test_made_landscape_has_optimum_in_box(self):
        land = make_landscape(10, 10, 2.0, np.random.default_rng(3))
        z_star = np.linalg.solve(land.B, land.w)
        assert np.all(np.abs(z_star) <= 1)
        assert synthetic_reward(land, z_star) == pytest.approx(1.0)

    def test_dimension_mismatch(self):
        land = make_landscape(2, 3, 1.0, np.random.default_rng(0))
        with pytest.raises(ValueError):
            synthetic_reward(land, np.zeros(4))


class TestProfiles:
    def _write(self, tmp_path, records):
        path = tmp_path / "profiles.json"
        path.write_text(json.dumps(records))
        return path

    def test_two_profiles_in_order(self, tmp_path):
        path = self._write(
            tmp_path,
            [
                {"id": "u2", "persona": "terse", "examples": [{"input": "a", "gold": "b"}]},
                {"id": "u1", "examples": [{"input": "c", "gold": "d"}, {"input": "e", "gold": "f"}]},
            ],
        )
        profiles = load_profiles(path)
        assert [p.id for p in profiles] == ["u2", "u1"]
        assert profiles[0].persona == "terse"
        assert profiles[1].example_at(3) == ("e", "f")

    def test_empty_examples_names_record(self, tmp_path):
        path = self._write(
            tmp_path,
            [{"id": "ok", "examples": [{"input": "a", "gold": "b"}]}, {"id": "bad", "examples": []}],
        )
        with pytest.raises(DataError) as info:
            load_profiles(path)
        assert info.value.index == 1 and info.value.field == "examples"

    @pytest.mark.parametrize(
        "record, field",
        [
            ({"examples": [{"input": "a", "gold": "b"}]}, "id"),
            ({"id": "", "examples": [{"input": "a", "gold": "b"}]}, "id"),
            ({"id": "x", "examples": [{"input": "a"}]}, "examples"),
            ({"id": "x", "persona": 3, "examples": [{"input": "a", "gold": "b"}]}, "persona"),
        ],
    )
    def test_schema_violations(self, tmp_path, record, field):
        with pytest.raises(DataError) as info:
            load_profiles(self._write(tmp_path, [record]))
        assert info.value.index == 0 and info.value.field == field

    def test_missing_and_unparsable(self, tmp_path):
        with pytest.raises(DataError):
            load_profiles(tmp_path / "nope.json")
        bad = tmp_path / "bad.json"
        bad.write_text("{oops")
        with pytest.raises(DataError):
            load_profiles(bad)

    def test_round_trip(self, tmp_path):
        records = [
            {"id": "a", "persona": "p", "examples": [{"input": "xé", "gold": "y"}]},
            {"id": "b", "examples": [{"input": "1", "gold": "2"}, {"input": "3", "gold": "4"}]},
        ]
        src = self._write(tmp_path, records)
        out = tmp_path / "out.json"
        save_profiles(load_profiles(src), out)
        assert json.loads(out.read_text()) == records
        assert load_profiles(out) == load_profiles(src)


class TestService:
    def test_echo(self, mock_service):
        url, server = mock_service("echo")
        rows = np.arange(6.0).reshape(2, 3) / 7
        assert remote_generate(url, rows, "Write a headline.", "some article") == "some article"
        path, body = server.requests[0]
        assert path == "/generate"
        assert body["instruction"] == "Write a headline." and body["input"] == "some article"
        assert np.array(body["soft_prompt"]).shape == (2, 3)
        # full round-trip precision
        assert np.array_equal(np.array(body["soft_prompt"]), rows)

    def test_status_error(self, mock_service):
        url, _ = mock_service("status500")
        with pytest.raises(ServiceStatusError) as info:
            remote_generate(url, np.zeros((1, 2)), "i", "x")
        assert info.value.status == 500

    @pytest.mark.parametrize("mode", ["garbage", "missing"])
    def test_malformed(self, mock_service, mode):
        url, _ = mock_service(mode)
        with pytest.raises(MalformedResponseError):
            remote_generate(url, np.zeros((1, 2)), "i", "x")

    def test_timeout(self, mock_service):
        url, _ = mock_service("slow")
        with pytest.raises(ServiceTimeoutError):
            remote_generate(url, np.zeros((1, 2)), "i", "x", timeout=0.2)

    def test_connection_refused(self):
        sock = socket.socket()
        sock.bind(("127.0.0.1", 0))
        port = sock.getsockname()[1]
        sock.close()
        with pytest.raises(ServiceConnectionError):
            remote_generate(f"http://127.0.0.1:{port}", np.zeros((1, 2)), "i", "x", timeout=2)

    def test_envelope_shape(self):
        body = json.loads(build_request(np.zeros((2, 3)), "ins", "inp"))
        assert body == {"soft_prompt": [[0.0] * 3] * 2, "instruction": "ins", "input": "inp"}
        with pytest.raises(ValueError):
            build_request(np.array([[np.nan]]), "i", "x")
