import pytest
from pydantic import ValidationError

from src.core.text.tokenizer import EOS_ID
from src.models.config_models import DecodeMode
from src.models.generation_models import BenchmarkRecord, GenerationRecord, GenerationResult


def _result(**overrides) -> GenerationResult:
    fields = {
        "mode": DecodeMode.HARD,
        "token_ids": [7, 8],
        "raw_ids": [7, 8, EOS_ID, 9],
        "exit_layers": [1, 2, 1, 4],
    }
    return GenerationResult(**{**fields, **overrides})


def test_mean_exit_layer_and_length():
    result = _result()
    assert result.mean_exit_layer == 2.0
    assert result.length == 4


def test_token_ids_must_stop_before_eos():
    with pytest.raises(ValidationError, match="prefix"):
        _result(token_ids=[7, 8, EOS_ID])


def test_without_eos_token_ids_are_all_raw_ids():
    assert _result(token_ids=[7, 8, 9], raw_ids=[7, 8, 9], exit_layers=[1, 1, 1]).token_ids == [7, 8, 9]


def test_one_exit_layer_per_position():
    with pytest.raises(ValidationError, match="exit layer"):
        _result(exit_layers=[1, 2])


def test_entropies_are_optional_but_aligned():
    assert _result(entropies=[0.1, 0.2, 0.3, 0.4]).entropies[3] == 0.4
    with pytest.raises(ValidationError, match="entropy"):
        _result(entropies=[0.1])


def test_generation_record_line_round_trip():
    record = GenerationRecord.from_result(3, "apple bird", _result(latency_ns=1200))
    assert GenerationRecord.from_line(record.to_line()) == record
    assert "\n" not in record.to_line()


def test_wall_clock_fields_are_not_deterministic():
    record = GenerationRecord.from_result(0, "x", _result(latency_ns=55))
    fields = record.deterministic_fields()
    assert "latency_ns" not in fields
    assert fields["exit_layers"] == [1, 2, 1, 4]
    assert fields["mode"] == "hard"


def test_benchmark_record_needs_thirty_repetitions():
    common = {"mode": DecodeMode.NAR, "length": 8, "median_ns": 1, "p95_ns": 2, "decoder_flops": 10}
    common |= {"layer_flops": 5, "mean_exit_layer": 4.0}
    assert BenchmarkRecord(repetitions=30, **common).batch_size == 1
    with pytest.raises(ValidationError):
        BenchmarkRecord(repetitions=29, **common)


def test_records_reject_unknown_fields():
    with pytest.raises(ValidationError):
        GenerationRecord.from_line('{"input_id": 0, "surprise": 1}')
