import numpy as np
import pytest

from ssdp.data import FASHION_FILES, write_idx


def make_fake_fashion(root, n_train=240, n_test=60, side=8, seed=0):
    """Ten classes of noisy bar patterns in the Fashion-MNIST file layout."""
    rng = np.random.default_rng(seed)
    prototypes = np.zeros((10, side, side))
    for k in range(10):
        prototypes[k, k % side, :] = 1.0
        prototypes[k, :, (3 * k + 1) % side] = 1.0

    def draw(n):
        labels = rng.integers(0, 10, size=n).astype(np.uint8)
        x = prototypes[labels] * 230 + rng.uniform(0, 40, size=(n, side, side))
        return np.clip(x, 0, 255).astype(np.uint8), labels

    root.mkdir(parents=True, exist_ok=True)
    for split, n in (("train", n_train), ("test", n_test)):
        images, labels = draw(n)
        img_name, lab_name = FASHION_FILES[split]
        write_idx(root / img_name, images)
        write_idx(root / lab_name, labels)
    return root


@pytest.fixture
def fake_fashion(tmp_path):
    return make_fake_fashion(tmp_path / "fashion")


_ACCEPTANCE = {}


@pytest.fixture
def acceptance():
    """Record ``(criterion, passed, detail)``; lines are printed in the terminal summary."""

    def record(criterion, passed, detail):
        _ACCEPTANCE[criterion] = (bool(passed), detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(_ACCEPTANCE):
        passed, detail = _ACCEPTANCE[criterion]
        terminalreporter.write_line(f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}")
