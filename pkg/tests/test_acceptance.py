"""Acceptance suite: one test per release criterion.

Each test prints a single ``ACCEPTANCE <name>: PASS/FAIL`` line (visible
with ``pytest -s``); tolerances and runtime budgets are pinned here and
nowhere else.
"""

from __future__ import annotations

import math
import threading
import time
from contextlib import contextmanager
from fractions import Fraction
from random import Random

import numpy as np
import pytest
import requests

from creative_beam_search.decode import (
    DecodeConfig,
    SamplingConfig,
    beam_search,
    diverse_beam_search,
    greedy_decode,
    nucleus_filter,
    sample_nucleus,
)
from creative_beam_search.demo import demo_table_lm
from creative_beam_search.judge import Candidate, build_eval_prompts, judge
from creative_beam_search.model import ChatMessage, Role, detokenize, render_chat
from creative_beam_search.pipeline import CbsConfig, run_cbs, run_standard
from creative_beam_search.service import create_app
from creative_beam_search.study import (
    Arm,
    Choice,
    RecordLog,
    StudyService,
    compute_stats,
    derandomize,
    random_retention_probability,
)

from .conftest import (
    A,
    B,
    C,
    EOS,
    ScriptedReplyLM,
    UvicornThread,
    covering_vocab,
    enumerate_leaves,
    naive_diverse_beam_search,
    random_table_lm,
    tiny_table_lm,
)
from .test_study import FAST_CFG, synthetic_log


@contextmanager
def criterion(name: str):
    start = time.monotonic()
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE {name}: FAIL ({time.monotonic() - start:.2f}s)")
        raise
    print(f"ACCEPTANCE {name}: PASS ({time.monotonic() - start:.2f}s)")


def test_beam_search_oracle():
    with criterion("beam-search-oracle"):
        start = time.monotonic()
        rng = Random(20260809)
        for trial in range(100):
            vocab_size = rng.randint(2, 5)
            max_len = rng.randint(1, 4)
            model = random_table_lm(rng, vocab_size)
            prompt = [rng.randrange(vocab_size)] if trial % 3 == 0 else []
            leaves = enumerate_leaves(model, prompt, max_len)
            beams = beam_search(model, prompt, beam_budget=len(leaves), max_new_tokens=max_len)
            assert [b.tokens for b in beams] == [tokens for tokens, _, _ in leaves]
            assert [b.logprob for b in beams] == [lp for _, lp, _ in leaves]
            assert [b.finished for b in beams] == [fin for _, _, fin in leaves]
        assert time.monotonic() - start < 10.0


def test_dbs_reference_equivalence():
    with criterion("dbs-reference-equivalence"):
        start = time.monotonic()
        rng = Random(977)
        for _ in range(200):
            vocab_size = rng.randint(2, 5)
            budget = rng.randint(1, 6)
            groups = rng.choice([g for g in (1, 2, 3, budget) if budget % g == 0])
            penalty = rng.choice([0.0, 0.5, 10.0])
            max_new = rng.randint(1, 4)
            model = random_table_lm(rng, vocab_size)
            cfg = DecodeConfig(
                beam_budget=budget, num_groups=groups, diversity_penalty=penalty,
                max_new_tokens=max_new, num_candidates=1,
            )
            ours = sorted(
                ((b.tokens, b.group, b.logprob, b.dbs_score, b.finished)
                 for b in diverse_beam_search(model, [], cfg)),
                key=lambda item: (item[0], item[1]),
            )
            reference = sorted(
                naive_diverse_beam_search(model, [], budget, groups, penalty, max_new),
                key=lambda item: (item[0], item[1]),
            )
            assert len(ours) == len(reference)
            for mine, theirs in zip(ours, reference):
                assert mine[0] == theirs[0] and mine[1] == theirs[1] and mine[4] == theirs[4]
                assert abs(mine[2] - theirs[2]) <= 1e-9
                assert abs(mine[3] - theirs[3]) <= 1e-9
        assert time.monotonic() - start < 30.0


def test_dbs_reductions():
    with criterion("dbs-reductions"):
        rng = Random(55)
        for _ in range(10):
            model = random_table_lm(rng, rng.randint(2, 5))
            # G=1 collapses to plain beam search for every penalty scale.
            for penalty in (0.0, 0.5, 10.0):
                cfg = DecodeConfig(beam_budget=4, num_groups=1, diversity_penalty=penalty,
                                   max_new_tokens=3, num_candidates=1)
                dbs = diverse_beam_search(model, [], cfg)
                plain = beam_search(model, [], beam_budget=4, max_new_tokens=3)
                assert [(b.tokens, b.logprob, b.finished) for b in dbs] == [
                    (b.tokens, b.logprob, b.finished) for b in plain
                ]
                assert all(b.dbs_score == b.logprob for b in dbs)
            # Zero penalty with equal group sizes: all groups identical.
            for budget, groups in ((4, 2), (6, 3), (4, 4)):
                cfg = DecodeConfig(beam_budget=budget, num_groups=groups,
                                   diversity_penalty=0.0, max_new_tokens=3, num_candidates=1)
                beams = diverse_beam_search(model, [], cfg)
                per_group = [
                    sorted((b.tokens, b.logprob, b.finished) for b in beams if b.group == g)
                    for g in range(groups)
                ]
                assert all(group == per_group[0] for group in per_group)


def test_reference_defaults():
    with criterion("reference-defaults"):
        cfg = CbsConfig()
        assert cfg.decode.beam_budget == 8
        assert cfg.decode.num_groups == 8
        assert cfg.decode.diversity_penalty == 10.0
        assert cfg.decode.num_candidates == 4
        assert cfg.decode.max_new_tokens == 256
        assert cfg.sampling.temperature == 1.0
        assert cfg.sampling.top_p == 0.9
        # The judge decodes greedily: reproduce a full verdict with nothing
        # but greedy_decode over the rotated prompts.
        candidates = [
            Candidate(text=t, dbs_rank=i, dbs_score=-float(i), logprob=-float(i))
            for i, t in enumerate(["alpha", "beta", "gamma", "delta"])
        ]
        prompts = build_eval_prompts("q", candidates)
        vocab = covering_vocab(*(f"user: {p.text}" for p in prompts), extra=("1", "2", "3", "4"))
        stub = ScriptedReplyLM(vocab, "3")
        expected_counts = [0, 0, 0, 0]
        for prompt in prompts:
            ids = render_chat([ChatMessage(Role.USER, prompt.text)], vocab)
            reply = greedy_decode(stub, ids, cfg.max_judge_tokens)
            reply = [t for t in reply if t != vocab.eos]
            expected_counts[prompt.origin[int(detokenize(reply, vocab)) - 1]] += 1
        verdict = judge(stub, "q", candidates, cfg.max_judge_tokens)
        assert list(verdict.counts) == expected_counts
        assert cfg.max_judge_tokens == 8


def test_calibration_latin_square():
    with criterion("calibration-latin-square"):
        for k in (2, 3, 4, 5):
            candidates = [
                Candidate(text=f"t{i}", dbs_rank=i, dbs_score=-float(i), logprob=-float(i))
                for i in range(k)
            ]
            prompts = build_eval_prompts("q", candidates)
            occupancy = [[0] * k for _ in range(k)]  # candidate x position
            for prompt in prompts:
                for position, candidate in enumerate(prompt.origin):
                    occupancy[candidate][position] += 1
            assert all(cell == 1 for row in occupancy for cell in row)


def test_bias_cancellation():
    with criterion("bias-cancellation"):
        for k in (2, 3, 4):
            candidates = [
                Candidate(text=f"t{i}", dbs_rank=i, dbs_score=-float(i), logprob=-float(i))
                for i in range(k)
            ]
            prompts = build_eval_prompts("q", candidates)
            digits = tuple(str(i) for i in range(1, k + 1))
            vocab = covering_vocab(*(f"user: {p.text}" for p in prompts), extra=digits)
            for position in range(1, k + 1):
                verdict = judge(ScriptedReplyLM(vocab, str(position)), "q", candidates)
                assert verdict.counts == tuple([1] * k)
                assert verdict.winner == 0
                assert verdict.tie_broken


def test_random_retention_claim():
    with criterion("random-retention-claim"):
        start = time.monotonic()
        exact = random_retention_probability(4, 4)
        assert exact == Fraction(91, 256)
        assert float(exact) == 0.35546875
        assert abs(float(exact) - 0.353) < 0.01  # reference value 35.3%, one point
        rng = np.random.default_rng(20260809)
        votes = rng.integers(0, 4, size=(1_000_000, 4))
        counts = (votes[:, :, None] == np.arange(4)).sum(axis=1)
        winners = counts.argmax(axis=1)  # first maximum = lowest rank
        monte_carlo = float((winners == 0).mean())
        assert abs(monte_carlo - float(exact)) < 0.003
        assert time.monotonic() - start < 5.0


def test_stats_exactness():
    with criterion("stats-exactness"):
        table = compute_stats(synthetic_log())
        assert table.n == 100
        assert table.cells == ((0.34, 0.11), (0.18, 0.11), (0.19, 0.07))
        assert table.row_totals == (0.45, 0.29, 0.26)
        assert table.col_totals == (0.71, 0.29)


def test_nucleus_law():
    with criterion("nucleus-law"):
        rng = Random(31337)
        for _ in range(1000):
            size = rng.randint(2, 50)
            weights = [rng.random() + 1e-9 for _ in range(size)]
            total = math.fsum(weights)
            probs = [w / total for w in weights]
            top_p = rng.uniform(0.01, 0.99)
            result = nucleus_filter(probs, top_p)
            ordered = sorted(range(size), key=lambda i: (-probs[i], i))
            assert list(result.support) == ordered[: len(result.support)]
            assert math.fsum(probs[i] for i in result.support) >= top_p - 1e-12
            assert math.fsum(probs[i] for i in result.support[:-1]) < top_p
            assert math.fsum(result.probs) == pytest.approx(1.0, abs=1e-9)
        model = tiny_table_lm()
        draws = [sample_nucleus(model, [], SamplingConfig(seed=s), 1)[0] for s in range(10_000)]
        frequencies = [draws.count(t) / 10_000 for t in (A, B, C, EOS)]
        assert abs(frequencies[0] - 5 / 9) < 0.02
        assert abs(frequencies[1] - 4 / 9) < 0.02
        assert frequencies[2] == 0.0 and frequencies[3] == 0.0


def test_pipeline_determinism():
    with criterion("pipeline-determinism"):
        model = demo_table_lm()
        cfg = CbsConfig()
        first = run_cbs(model, "a b", cfg)
        second = run_cbs(model, "a b", cfg)
        assert first == second
        assert first.to_json().encode("utf-8") == second.to_json().encode("utf-8")
        for seed in (0, 1, 17):
            run_cfg = CbsConfig(sampling=SamplingConfig(seed=seed))
            one = run_standard(model, "a b", run_cfg)
            two = run_standard(model, "a b", run_cfg)
            assert one.encode("utf-8") == two.encode("utf-8")


def test_study_service_round_trip(tmp_path):
    with criterion("study-service-round-trip"):
        log_path = tmp_path / "study.jsonl"

        # Session one: create and vote over HTTP.
        service_one = StudyService(demo_table_lm(), FAST_CFG, RecordLog(log_path), order_seed=11)
        with UvicornThread(create_app(service_one)) as server:
            base = server.base_url
            created = requests.post(f"{base}/api/comparisons", json={"prompt": "a b"}, timeout=10)
            assert created.status_code == 200
            first_id = created.json()["id"]
            assert set(created.json()) == {"id", "first", "second"}
            voted = requests.post(
                f"{base}/api/comparisons/{first_id}/preference",
                json={"choice": "first"}, timeout=5,
            )
            assert voted.status_code == 200

        # Session two: a fresh service reloads the same log mid-sequence.
        service_two = StudyService(demo_table_lm(), FAST_CFG, RecordLog(log_path), order_seed=12)
        with UvicornThread(create_app(service_two)) as server:
            base = server.base_url
            stats = requests.get(f"{base}/api/stats", timeout=5).json()
            assert stats["n"] == 1
            conflict = requests.post(
                f"{base}/api/comparisons/{first_id}/preference",
                json={"choice": "second"}, timeout=5,
            )
            assert conflict.status_code == 409

            # De-randomization across all six (order, choice) pairs.
            remaining = {
                (arm, choice)
                for arm in (Arm.CBS, Arm.STD)
                for choice in ("first", "second", "same")
            }
            guard = 0
            while remaining:
                guard += 1
                assert guard <= 200, "order generator never produced both arms"
                payload = requests.post(
                    f"{base}/api/comparisons", json={"prompt": "a"}, timeout=10
                ).json()
                record = service_two.log.load()[payload["id"]]
                choices = [c for (arm, c) in remaining if arm is record.first_shown]
                if not choices:
                    continue
                choice = choices[0]
                remaining.discard((record.first_shown, choice))
                requests.post(
                    f"{base}/api/comparisons/{payload['id']}/preference",
                    json={"choice": choice}, timeout=5,
                )
                stored = service_two.log.load()[payload["id"]]
                assert stored.preference is derandomize(record.first_shown, Choice(choice))

            # Concurrent double vote: exactly one success, one conflict.
            target = requests.post(
                f"{base}/api/comparisons", json={"prompt": "c"}, timeout=10
            ).json()
            url = f"{base}/api/comparisons/{target['id']}/preference"
            barrier = threading.Barrier(2)
            statuses: list[int] = []
            lock = threading.Lock()

            def vote(choice: str) -> None:
                barrier.wait()
                code = requests.post(url, json={"choice": choice}, timeout=10).status_code
                with lock:
                    statuses.append(code)

            threads = [threading.Thread(target=vote, args=(c,)) for c in ("first", "same")]
            for t in threads:
                t.start()
            for t in threads:
                t.join()
            assert sorted(statuses) == [200, 409]

            final = requests.get(f"{base}/api/stats", timeout=5).json()
            assert final["n"] == 8  # 1 reloaded + 6 de-randomization + 1 concurrent
            assert final["random_retention_baseline"] == 0.35546875
