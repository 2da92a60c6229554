"""Shared fixtures plus the acceptance-criteria summary for this package.

Tests marked ``criterion`` are the package's top-level guarantees; the
terminal summary prints one PASS/FAIL/SKIP line per criterion.
"""

import csv

import numpy as np
import pytest
from PIL import Image


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "criterion(name): names an acceptance criterion for the summary"
    )
    config._criterion_names = {}


def pytest_collection_modifyitems(config, items):
    for item in items:
        marker = item.get_closest_marker("criterion")
        if marker is not None:
            config._criterion_names[item.nodeid] = marker.args[0]


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    names = getattr(config, "_criterion_names", {})
    if not names:
        return
    outcomes = {}
    for status in ("passed", "failed", "error", "skipped"):
        for report in terminalreporter.stats.get(status, []):
            nodeid = getattr(report, "nodeid", None)
            if nodeid in names:
                if outcomes.get(nodeid) not in ("failed", "error"):
                    outcomes[nodeid] = status
    labels = {"passed": "PASS", "failed": "FAIL", "error": "FAIL", "skipped": "SKIP"}
    terminalreporter.section("acceptance criteria")
    for nodeid, name in names.items():
        status = outcomes.get(nodeid, "not run")
        terminalreporter.write_line(f"{labels.get(status, status):>4}  {name}")


def make_gradient_image(path, size=(24, 20)):
    """A deterministic full-color test image (no randomness, no files
    shipped with the repo)."""
    w, h = size
    xs, ys = np.meshgrid(np.arange(w), np.arange(h))
    arr = np.stack(
        [
            (255 * xs / max(w - 1, 1)).astype(np.uint8),
            (255 * ys / max(h - 1, 1)).astype(np.uint8),
            ((xs * ys) % 256).astype(np.uint8),
        ],
        axis=-1,
    )
    Image.fromarray(arr).save(path)
    return path


def make_circle_mask(path, size=(24, 20), radius=6):
    """White disc on black: the disc is the lesion, the rest background."""
    w, h = size
    xs, ys = np.meshgrid(np.arange(w), np.arange(h))
    inside = (xs - w / 2) ** 2 + (ys - h / 2) ** 2 <= radius**2
    Image.fromarray((inside * 255).astype(np.uint8), mode="L").save(path)
    return path


def write_manifest(path, headers, rows):
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(headers)
        writer.writerows(rows)
    return path


@pytest.fixture
def image_workspace(tmp_path):
    """Three images (one masked) plus a ready image manifest."""
    for i in range(3):
        make_gradient_image(tmp_path / f"img{i}.png", size=(24 + 4 * i, 20))
    make_circle_mask(tmp_path / "mask2.png", size=(32, 20))
    manifest = write_manifest(
        tmp_path / "images.csv",
        ["id", "path", "label", "mask"],
        [
            ["lesion0", "img0.png", "other", ""],
            ["lesion1", "img1.png", "melanoma", ""],
            ["lesion2", "img2.png", "melanoma", "mask2.png"],
        ],
    )
    return tmp_path, manifest
