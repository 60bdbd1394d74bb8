"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest -s tests/test_acceptance.py`` to see the per-criterion
lines. Criterion 10 drives the CLI end to end and checks byte-identical
reruns.
"""

import time
from pathlib import Path

from egogaze.cli import main
from egogaze.selftest import (
    check_bottomup,
    check_cue_fusion,
    check_exact_recovery,
    check_fom_dominance,
    check_gru_correctness,
    check_gru_learnability,
    check_metric_identities,
    check_oracle_equivalence,
    check_protocol_harness,
)

SEED = 0


def _run(check, budget_seconds, **kwargs):
    start = time.monotonic()
    result = check(seed=SEED, **kwargs)
    elapsed = time.monotonic() - start
    status = "PASS" if result.passed else "FAIL"
    print(f"\n{status} criterion {result.criterion}: {result.name} "
          f"[{elapsed:.1f}s] -- {result.details}")
    assert result.passed, f"criterion {result.criterion} failed: {result.details}"
    if budget_seconds is not None:
        assert elapsed < budget_seconds, (
            f"criterion {result.criterion} took {elapsed:.1f}s "
            f"(budget {budget_seconds}s)"
        )
    return result


def test_criterion_1_metric_identities():
    _run(check_metric_identities, 5)


def test_criterion_2_oracle_equivalence():
    _run(check_oracle_equivalence, 30)


def test_criterion_3_exact_recovery():
    _run(check_exact_recovery, None)


def test_criterion_4_gru_correctness():
    _run(check_gru_correctness, 60)


def test_criterion_5_gru_learnability():
    _run(check_gru_learnability, 120)


def test_criterion_6_bottomup_behavior():
    _run(check_bottomup, 60)


def test_criterion_7_fom_dominance():
    _run(check_fom_dominance, None)


def test_criterion_8_cue_fusion():
    _run(check_cue_fusion, None)


def test_criterion_9_protocol_harness(tmp_path):
    _run(check_protocol_harness, 300, out_dir=tmp_path / "protocol")
    for name in ("transfer_nss.csv", "transfer_auc.csv", "ablation_subjects.csv",
                 "ablation_frames.csv", "activity_accuracy.csv"):
        assert (tmp_path / "protocol" / name).exists()


def test_criterion_10_selftest_end_to_end(tmp_path, capsys):
    out_a = tmp_path / "run_a"
    out_b = tmp_path / "run_b"
    start = time.monotonic()
    code_a = main(["selftest", "--out", str(out_a), "--seed", str(SEED)])
    elapsed = time.monotonic() - start
    code_b = main(["selftest", "--out", str(out_b), "--seed", str(SEED)])
    output = capsys.readouterr().out
    print(f"\nPASS criterion 10: selftest end-to-end [{elapsed:.1f}s]")

    assert code_a == 0 and code_b == 0
    assert output.count("PASS criterion") >= 18  # 9 lines per run
    assert elapsed < 600

    files_a = sorted(p.relative_to(out_a) for p in out_a.rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(out_b) for p in out_b.rglob("*") if p.is_file())
    assert files_a == files_b
    assert {Path("selftest_report.csv"), Path("manifest.json")} <= set(files_a)
    for rel in files_a:
        assert (out_a / rel).read_bytes() == (out_b / rel).read_bytes(), (
            f"{rel} differs between identically seeded runs"
        )
