import numpy as np
import pytest

from src.core._exceptions import CheckpointFormatError, CheckpointVersionError
from src.core.modeling.transformer import Model
from src.infra.checkpoint import FORMAT_VERSION, MAGIC, load_checkpoint, save_checkpoint


@pytest.fixture
def saved(tmp_path, tiny_model):
    path = tmp_path / "ckpt" / "model.ckpt"
    save_checkpoint(tiny_model, path)
    return path


def test_round_trip_is_bit_exact(saved, tiny_model):
    loaded = load_checkpoint(saved)
    assert loaded.config == tiny_model.config
    assert loaded.seed == tiny_model.seed
    assert list(loaded.params) == list(tiny_model.params)
    for name, param in tiny_model.params.items():
        restored = loaded.params[name].data
        assert restored.dtype == param.data.dtype
        assert restored.tobytes() == param.data.tobytes()


def test_float64_models_keep_their_dtype(tmp_path, model64):
    path = tmp_path / "model64.ckpt"
    save_checkpoint(model64, path)
    assert load_checkpoint(path).dtype == np.float64


def test_save_leaves_no_temporary_file(saved):
    assert [p.name for p in saved.parent.iterdir()] == ["model.ckpt"]


def test_bad_magic_is_reported_at_offset_zero(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_bytes(b"NOTACKPT" + b"\x01\x00")
    with pytest.raises(CheckpointFormatError) as exc_info:
        load_checkpoint(path)
    assert exc_info.value.offset == 0


def test_unsupported_version(saved):
    data = bytearray(saved.read_bytes())
    data[len(MAGIC) : len(MAGIC) + 2] = (FORMAT_VERSION + 1).to_bytes(2, "little")
    saved.write_bytes(bytes(data))
    with pytest.raises(CheckpointVersionError) as exc_info:
        load_checkpoint(saved)
    assert exc_info.value.found == FORMAT_VERSION + 1


@pytest.mark.parametrize("fraction", [0.01, 0.5, 0.99])
def test_truncated_files_name_an_offset(saved, fraction):
    data = saved.read_bytes()
    cut = max(len(MAGIC) + 3, int(len(data) * fraction))
    saved.write_bytes(data[:cut])
    with pytest.raises(CheckpointFormatError) as exc_info:
        load_checkpoint(saved)
    assert 0 < exc_info.value.offset <= cut
    assert "offset" in str(exc_info.value)


def test_trailing_bytes_are_rejected(saved):
    saved.write_bytes(saved.read_bytes() + b"\x00\x00")
    with pytest.raises(CheckpointFormatError, match="trailing"):
        load_checkpoint(saved)


def test_loaded_model_decodes_identically(saved, tiny_model, short_examples):
    loaded: Model = load_checkpoint(saved)
    example = short_examples[0]
    a = tiny_model.decode_full(tiny_model.encode_one(example.src_ids), 6)
    b = loaded.decode_full(loaded.encode_one(example.src_ids), 6)
    np.testing.assert_array_equal(a[-1].data, b[-1].data)
