"""Shared fixtures. Heavyweight artifacts (scene, trained models) are session
scoped; unit tests use reduced configs so the whole suite stays fast.

The acceptance module appends its PASS/FAIL lines to ``acceptance_lines``;
they are echoed in the terminal summary so the gate is visible without -s.
"""

from __future__ import annotations

import numpy as np
import pytest

acceptance_lines: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if acceptance_lines:
        terminalreporter.write_line("")
        terminalreporter.write_line("acceptance criteria:")
        for line in acceptance_lines:
            terminalreporter.write_line("  " + line)

from zsmurban.features import split_samples
from zsmurban.harness import ExperimentConfig
from zsmurban.ml import GbdtConfig, RfConfig, SvmConfig, train_ensemble
from zsmurban.scene import NoiseConfig, SceneConfig, simulate

SMALL_SCENE = SceneConfig(seed=11, epoch_count=30, train_epoch_count=60)

SMALL_EXPERIMENT = ExperimentConfig(
    scene=SceneConfig(seed=11, epoch_count=24, train_epoch_count=48),
    rf=RfConfig(tree_count=25, seed=5),
    gbdt=GbdtConfig(stages=60),
    svm=SvmConfig(seed=5),
    seeds=(11, 12),
    methods=("rf", "gbdt", "svm", "unanimous", "unanimous_threshold", "oracle"),
)


@pytest.fixture(scope="session")
def small_scene():
    scene, epochs = simulate(SMALL_SCENE, NoiseConfig())
    return scene, epochs


@pytest.fixture(scope="session")
def small_split(small_scene):
    scene, epochs = small_scene
    return split_samples(scene, epochs)


@pytest.fixture(scope="session")
def small_ensemble(small_split):
    train, _ = small_split
    return train_ensemble(
        train,
        RfConfig(tree_count=25, seed=3),
        GbdtConfig(stages=60),
        SvmConfig(seed=3),
    )


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
