import os
import time

import pytest

from oracles import enumerate_final_pair_probability
from coforge._util import canonical_json
from coforge.errors import ValidationError
from coforge.report import write_report
from coforge.simulate import simulate, synthetic_candidates
from coforge.backends.mock import hidden_utility


def test_parameter_validation():
    with pytest.raises(ValidationError):
        simulate(1, 1.0, 10, 0)
    with pytest.raises(ValidationError):
        simulate(8, 0.5, 10, 0)
    with pytest.raises(ValidationError):
        simulate(8, 1.2, 10, 0)
    with pytest.raises(ValidationError):
        simulate(8, 0.9, 0, 0)


def test_synthetic_candidates_have_distinct_utilities():
    candidates = synthetic_candidates(32, seed=5)
    utilities = [hidden_utility(c) for c in candidates.values()]
    assert len(set(utilities)) == 32
    assert candidates == synthetic_candidates(32, seed=5)
    assert candidates != synthetic_candidates(32, seed=6)


def test_perfect_judge_always_promotes_argmax():
    report = simulate(16, 1.0, trials=100, seed=11)
    assert report.argmax_final_frequency == 1.0
    assert report.mean_matches == 14.0
    assert report.record_count == 1400


def test_simulation_is_bit_reproducible():
    a = simulate(8, 0.9, trials=40, seed=3)
    b = simulate(8, 0.9, trials=40, seed=3)
    assert canonical_json(a.to_dict()) == canonical_json(b.to_dict())
    assert [r.to_dict() for r in a.rows] == [r.to_dict() for r in b.rows]
    c = simulate(8, 0.9, trials=40, seed=4)
    assert canonical_json(a.to_dict()) != canonical_json(c.to_dict())


def test_noisy_frequency_tracks_enumeration_oracle():
    trials = 1500
    report = simulate(8, 0.9, trials=trials, seed=7)
    # oracle: average the exact per-bracket probability over the same brackets
    from coforge.tournament import seed_bracket

    ids = sorted(report.true_utilities, key=int)
    argmax_id = max(report.true_utilities, key=lambda c: report.true_utilities[c])
    expected = 0.0
    for row in report.rows:
        bracket = seed_bracket(ids, row.bracket_seed)
        order = [cid for match in bracket.rounds[0] for cid in match]
        if bracket.byes and bracket.byes[0] is not None:
            order.append(bracket.byes[0])
        utilities = [report.true_utilities[cid] for cid in order]
        expected += enumerate_final_pair_probability(
            utilities, order.index(argmax_id), 0.9
        )
    expected /= trials
    assert expected == pytest.approx(0.81)  # p^2 for n=8, any bracket
    assert abs(report.argmax_final_frequency - expected) < 0.05


def test_pooled_fit_recovers_ordering():
    report = simulate(8, 1.0, trials=100, seed=13)
    assert report.record_count == 600
    assert report.kendall_tau is not None
    assert report.kendall_tau >= 0.9


def test_fit_can_be_skipped():
    report = simulate(8, 0.9, trials=5, seed=1, fit=False)
    assert report.fitted is None
    assert report.kendall_tau is None


def test_report_files_land_on_disk(tmp_path):
    report = simulate(8, 0.9, trials=30, seed=21)
    written = write_report(report, str(tmp_path / "out"))
    names = {os.path.basename(p) for p in written}
    assert names == {
        "summary.tsv",
        "trials.tsv",
        "utilities.tsv",
        "convergence.png",
        "recovery.png",
    }
    trials_tsv = (tmp_path / "out" / "trials.tsv").read_text().splitlines()
    assert trials_tsv[0].split("\t") == [
        "trial",
        "bracket_seed",
        "argmax_in_final",
        "matches",
        "running_frequency",
    ]
    assert len(trials_tsv) == 31
    for name in ("convergence.png", "recovery.png"):
        data = (tmp_path / "out" / name).read_bytes()
        assert data[:8] == b"\x89PNG\r\n\x1a\n"
    summary = (tmp_path / "out" / "summary.tsv").read_text()
    assert "argmax_final_frequency" in summary


def test_ten_thousand_trials_fit_in_budget():
    start = time.perf_counter()
    report = simulate(8, 0.9, trials=10_000, seed=99, fit=False)
    elapsed = time.perf_counter() - start
    assert elapsed < 25.0
    assert abs(report.argmax_final_frequency - 0.81) < 0.02
