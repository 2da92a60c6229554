"""Binary embedding container: round-trips, validation, corruption handling."""

import json
import struct

import numpy as np
import pytest

from dermcbm import (
    EmbeddingFormatError,
    EmbeddingSet,
    LabelSpace,
    NumericalDegeneracyError,
    l2_normalize_rows,
    load_embeddings,
    read_matrix_container,
    save_embeddings,
    take,
    write_matrix_container,
)

from helpers import random_set


def _write_raw(path, magic=b"EMB1", version=1, n=2, d=3, payload=None):
    if payload is None:
        payload = np.zeros((n, d), dtype="<f4").tobytes()
    path.write_bytes(struct.pack("<4sII", magic, version, n) + struct.pack("<I", d) + payload)


class TestRoundTrip:
    def test_exact_rows(self, tmp_path):
        emb = EmbeddingSet(
            ids=("a", "b"),
            matrix=np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]),
            labels=("x", "y"),
        )
        path = tmp_path / "t.emb"
        save_embeddings(emb, path)
        loaded = load_embeddings(path)
        assert loaded.ids == ("a", "b")
        assert loaded.labels == ("x", "y")
        assert np.array_equal(loaded.matrix, emb.matrix)

    def test_labels_omitted_from_sidecar(self, tmp_path):
        emb = EmbeddingSet(ids=("a",), matrix=np.ones((1, 2)))
        path = tmp_path / "t.emb"
        save_embeddings(emb, path)
        sidecar = json.loads((tmp_path / "t.emb.meta.json").read_text())
        assert "labels" not in sidecar
        assert load_embeddings(path).labels is None

    def test_random_sets_bit_exact(self, tmp_path):
        rng = np.random.default_rng(10)
        for case in range(100):
            n = int(rng.integers(1, 12))
            d = int(rng.integers(1, 9))
            emb = EmbeddingSet(
                ids=tuple(f"id{i}" for i in range(n)),
                matrix=rng.standard_normal((n, d)),
                labels=tuple(rng.choice(["u", "v"]) for _ in range(n))
                if case % 2
                else None,
                encoder_tag="tag" if case % 3 else "",
            )
            path = tmp_path / f"case{case}.emb"
            save_embeddings(emb, path)
            loaded = load_embeddings(path)
            assert loaded.ids == emb.ids
            assert loaded.labels == emb.labels
            # storage is 32-bit; loaded values are those floats widened
            assert np.array_equal(
                loaded.matrix, emb.matrix.astype(np.float32).astype(np.float64)
            )


class TestValidation:
    def test_empty_set_rejected(self, tmp_path):
        emb = EmbeddingSet(ids=(), matrix=np.zeros((0, 3)))
        with pytest.raises(EmbeddingFormatError, match="N=0"):
            save_embeddings(emb, tmp_path / "t.emb")

    def test_declared_n_exceeds_payload(self, tmp_path):
        path = tmp_path / "t.emb"
        _write_raw(path, n=2, d=3, payload=np.zeros((1, 3), dtype="<f4").tobytes())
        with pytest.raises(EmbeddingFormatError, match="payload"):
            read_matrix_container(path)

    def test_nan_names_row(self, tmp_path):
        path = tmp_path / "t.emb"
        bad = np.array([[np.nan, 0.0], [1.0, 1.0]], dtype="<f4")
        _write_raw(path, n=2, d=2, payload=bad.tobytes())
        (tmp_path / "t.emb.meta.json").write_text(json.dumps({"ids": ["a", "b"]}))
        with pytest.raises(EmbeddingFormatError, match="row 0"):
            load_embeddings(path)

    def test_trailing_bytes_rejected(self, tmp_path):
        path = tmp_path / "t.emb"
        payload = np.zeros((2, 3), dtype="<f4").tobytes() + b"xx"
        _write_raw(path, n=2, d=3, payload=payload)
        with pytest.raises(EmbeddingFormatError, match="trailing"):
            read_matrix_container(path)

    def test_bad_magic_reports_offset(self, tmp_path):
        path = tmp_path / "t.emb"
        _write_raw(path, magic=b"NOPE")
        with pytest.raises(EmbeddingFormatError, match="byte offset 0"):
            read_matrix_container(path)

    def test_unsupported_version_reports_offset(self, tmp_path):
        path = tmp_path / "t.emb"
        _write_raw(path, version=9)
        with pytest.raises(EmbeddingFormatError, match="byte offset 4"):
            read_matrix_container(path)

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "t.emb"
        path.write_bytes(b"EMB1\x01")
        with pytest.raises(EmbeddingFormatError, match="header"):
            read_matrix_container(path)

    def test_duplicate_ids_name_both_rows(self):
        emb = EmbeddingSet(ids=("a", "a"), matrix=np.ones((2, 2)))
        with pytest.raises(EmbeddingFormatError, match="'a'"):
            emb.validate()

    def test_id_count_mismatch(self):
        emb = EmbeddingSet(ids=("a",), matrix=np.ones((2, 2)))
        with pytest.raises(EmbeddingFormatError, match="ids"):
            emb.validate()

    def test_missing_sidecar(self, tmp_path):
        path = tmp_path / "t.emb"
        write_matrix_container(np.ones((1, 2)), path)
        with pytest.raises(EmbeddingFormatError, match="sidecar"):
            load_embeddings(path)

    def test_matrix_is_read_only(self):
        emb = random_set(3, 4, seed=0)
        with pytest.raises(ValueError):
            emb.matrix[0, 0] = 5.0


class TestNormalize:
    def test_three_four_five(self):
        out = l2_normalize_rows(np.array([[3.0, 4.0]]))
        assert np.allclose(out, [[0.6, 0.8]], atol=1e-12)

    def test_axis_vectors(self):
        out = l2_normalize_rows(np.array([[1.0, 0.0], [0.0, 2.0]]))
        assert np.allclose(out, [[1.0, 0.0], [0.0, 1.0]], atol=1e-12)

    def test_zero_row_error(self):
        with pytest.raises(NumericalDegeneracyError, match="row 1"):
            l2_normalize_rows(np.array([[1.0, 0.0], [0.0, 0.0]]))

    def test_idempotent(self):
        rng = np.random.default_rng(11)
        m = rng.standard_normal((6, 5))
        once = l2_normalize_rows(m)
        twice = l2_normalize_rows(once)
        assert np.max(np.abs(once - twice)) < 1e-6
        assert np.allclose(np.linalg.norm(once, axis=1), 1.0, atol=1e-6)


class TestLabelSpace:
    def test_positive_index(self):
        space = LabelSpace(classes=("a", "b", "c"), positive_class="b")
        assert space.positive_index == 1

    def test_positive_must_be_member(self):
        with pytest.raises(ValueError):
            LabelSpace(classes=("a", "b"), positive_class="z")

    def test_classes_unique(self):
        with pytest.raises(ValueError):
            LabelSpace(classes=("a", "a"), positive_class="a")


class TestTake:
    def test_subset_preserves_alignment(self):
        emb = random_set(6, 3, seed=1)
        sub = take(emb, [4, 0, 2])
        assert sub.ids == (emb.ids[4], emb.ids[0], emb.ids[2])
        assert sub.labels == (emb.labels[4], emb.labels[0], emb.labels[2])
        assert np.array_equal(sub.matrix, emb.matrix[[4, 0, 2]])
