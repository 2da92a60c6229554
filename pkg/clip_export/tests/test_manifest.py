"""Manifest CSV parsing."""

import pytest

from clip_export import ManifestError, read_image_manifest, read_text_manifest

from conftest import write_manifest


class TestImageManifest:
    def test_rows_parse_in_order(self, tmp_path):
        manifest = write_manifest(
            tmp_path / "m.csv",
            ["id", "path", "label", "mask"],
            [
                ["a", "one.png", "other", ""],
                ["b", "two.png", "melanoma", "two_mask.png"],
            ],
        )
        records = read_image_manifest(manifest)
        assert [r.id for r in records] == ["a", "b"]
        assert records[0].path == tmp_path / "one.png"
        assert records[0].mask is None
        assert records[1].mask == tmp_path / "two_mask.png"
        assert records[1].label == "melanoma"

    def test_paths_resolve_relative_to_manifest_dir(self, tmp_path):
        subdir = tmp_path / "sub"
        subdir.mkdir()
        manifest = write_manifest(
            subdir / "m.csv", ["id", "path"], [["a", "img/one.png"]]
        )
        records = read_image_manifest(manifest)
        assert records[0].path == subdir / "img" / "one.png"

    def test_mask_and_label_columns_may_be_absent(self, tmp_path):
        manifest = write_manifest(tmp_path / "m.csv", ["id", "path"], [["a", "x.png"]])
        records = read_image_manifest(manifest)
        assert records[0].label == ""
        assert records[0].mask is None

    def test_missing_path_column_rejected(self, tmp_path):
        manifest = write_manifest(tmp_path / "m.csv", ["id", "label"], [["a", "x"]])
        with pytest.raises(ManifestError, match=r"missing required columns \['path'\]"):
            read_image_manifest(manifest)

    def test_duplicate_ids_rejected(self, tmp_path):
        manifest = write_manifest(
            tmp_path / "m.csv",
            ["id", "path"],
            [["a", "one.png"], ["a", "two.png"]],
        )
        with pytest.raises(ManifestError, match="duplicate id 'a'.*rows 1 and 2"):
            read_image_manifest(manifest)

    def test_empty_id_rejected(self, tmp_path):
        manifest = write_manifest(
            tmp_path / "m.csv", ["id", "path"], [["", "one.png"]]
        )
        with pytest.raises(ManifestError, match="row 1 has an empty id"):
            read_image_manifest(manifest)

    def test_empty_path_rejected(self, tmp_path):
        manifest = write_manifest(tmp_path / "m.csv", ["id", "path"], [["a", ""]])
        with pytest.raises(ManifestError, match="row 1 has an empty path"):
            read_image_manifest(manifest)

    def test_empty_manifest_rejected(self, tmp_path):
        manifest = write_manifest(tmp_path / "m.csv", ["id", "path"], [])
        with pytest.raises(ManifestError, match="lists no rows"):
            read_image_manifest(manifest)

    def test_nonexistent_manifest_rejected(self, tmp_path):
        with pytest.raises(ManifestError, match="does not exist"):
            read_image_manifest(tmp_path / "none.csv")


class TestTextManifest:
    def test_rows_parse_in_order(self, tmp_path):
        manifest = write_manifest(
            tmp_path / "t.csv",
            ["id", "text"],
            [["melanoma", "melanoma"], ["other", "benign nevus"]],
        )
        records = read_text_manifest(manifest)
        assert [(r.id, r.text) for r in records] == [
            ("melanoma", "melanoma"),
            ("other", "benign nevus"),
        ]

    def test_empty_text_rejected(self, tmp_path):
        manifest = write_manifest(
            tmp_path / "t.csv", ["id", "text"], [["concept:veil", "  "]]
        )
        with pytest.raises(ManifestError, match="'concept:veil'.*empty text"):
            read_text_manifest(manifest)

    def test_missing_text_column_rejected(self, tmp_path):
        manifest = write_manifest(tmp_path / "t.csv", ["id", "phrase"], [["a", "x"]])
        with pytest.raises(ManifestError, match=r"missing required columns \['text'\]"):
            read_text_manifest(manifest)

    def test_duplicate_ids_rejected(self, tmp_path):
        manifest = write_manifest(
            tmp_path / "t.csv", ["id", "text"], [["a", "x"], ["a", "y"]]
        )
        with pytest.raises(ManifestError, match="duplicate id 'a'"):
            read_text_manifest(manifest)
