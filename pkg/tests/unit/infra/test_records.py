import io

from src.infra.records import emit_records, read_records, write_records
from src.models.config_models import DecodeMode
from src.models.generation_models import GenerationRecord


def _records(n: int) -> list[GenerationRecord]:
    return [
        GenerationRecord(
            input_id=i,
            text=f"apple {i}",
            mode=DecodeMode.SOFT,
            mean_exit_layer=3.0,
            decoder_flops=100 + i,
            latency_ns=i,
            exit_layers=[3, 3],
        )
        for i in range(n)
    ]


def test_write_then_read(tmp_path):
    path = tmp_path / "nested" / "out.jsonl"
    assert write_records(path, _records(3)) == 3
    assert list(read_records(path, GenerationRecord)) == _records(3)


def test_write_replaces_existing_file(tmp_path):
    path = tmp_path / "out.jsonl"
    write_records(path, _records(5))
    write_records(path, _records(2))
    assert len(path.read_text(encoding="utf-8").splitlines()) == 2


def test_emit_writes_one_line_per_record():
    stream = io.StringIO()
    assert emit_records(stream, _records(2)) == 2
    lines = stream.getvalue().splitlines()
    assert len(lines) == 2
    assert GenerationRecord.from_line(lines[1]).input_id == 1


def test_blank_lines_are_skipped(tmp_path):
    path = tmp_path / "out.jsonl"
    path.write_text(_records(1)[0].to_line() + "\n\n", encoding="utf-8")
    assert len(list(read_records(path, GenerationRecord))) == 1
