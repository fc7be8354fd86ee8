"""Shared session fixtures: sampled datasets, trained models, and oracle
test grids are expensive, so every test module reuses one instance."""

import numpy as np
import pytest

import reachmap as rm
from reachmap.kinematics import GridOracle
from reachmap.models import MlpClassifier, OneClassRbfSvm, RbfSvmClassifier
from reachmap.sampling import (SampleSet, sample_fk, sample_footsteps,
                               sample_ik, workspace_bounds)

FOOTSTEP_BOUNDS = [(-1.5, 1.5), (-1.5, 1.5), (-np.pi, np.pi)]


@pytest.fixture(scope="session")
def arm():
    return rm.arm_2dof()


@pytest.fixture(scope="session")
def arm_oracle(arm):
    return GridOracle(arm, 200)


@pytest.fixture(scope="session")
def oracle_grid_test(arm, arm_oracle):
    """10^4 oracle-labeled grid points covering the arm workspace box."""
    g = np.linspace(-2.2, 2.2, 100)
    pts = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1).reshape(-1, 2)
    labels = np.where(arm_oracle.query(pts), 1, -1)
    return SampleSet(rm.R2, pts, labels, {"method": "oracle-grid"})


@pytest.fixture(scope="session")
def arm_ik_samples(arm):
    return sample_ik(arm, workspace_bounds(arm), 10000, seed=7)


@pytest.fixture(scope="session")
def arm_fk_samples(arm):
    return sample_fk(arm, 10000, seed=7)


@pytest.fixture(scope="session")
def arm_svm(arm_ik_samples):
    model = RbfSvmClassifier(gamma=30.0, C=10.0, offset=0.1)
    import time
    t0 = time.perf_counter()
    model.fit(arm_ik_samples.inputs, arm_ik_samples.labels)
    model.fit_seconds_ = time.perf_counter() - t0
    return model


@pytest.fixture(scope="session")
def arm_ocsvm(arm_fk_samples):
    model = OneClassRbfSvm(gamma=30.0, nu=0.05, offset=0.1)
    return model.fit(arm_fk_samples.inputs)


@pytest.fixture(scope="session")
def arm_mlp(arm_ik_samples):
    model = MlpClassifier(hidden=(64, 32), seed=0, offset=0.0)
    return model.fit(arm_ik_samples.inputs, arm_ik_samples.labels)


@pytest.fixture(scope="session")
def leg():
    return rm.leg_chain()


@pytest.fixture(scope="session")
def footstep_train(leg):
    return sample_footsteps(leg, FOOTSTEP_BOUNDS, 16000, seed=3)


@pytest.fixture(scope="session")
def footstep_holdout(leg):
    return sample_footsteps(leg, FOOTSTEP_BOUNDS, 4000, seed=11)


@pytest.fixture(scope="session")
def footstep_svm(footstep_train):
    model = RbfSvmClassifier(gamma=30.0, C=10.0, offset=0.1)
    return model.fit(footstep_train.inputs, footstep_train.labels)


@pytest.fixture(scope="session")
def footstep_mlp(footstep_train):
    model = MlpClassifier(hidden=(64, 32), seed=0, offset=0.0)
    return model.fit(footstep_train.inputs, footstep_train.labels)


@pytest.fixture(scope="session")
def hand():
    return rm.hand_chain()


@pytest.fixture(scope="session")
def hand_svm(hand):
    samples = sample_ik(hand, workspace_bounds(hand), 10000, seed=5)
    model = RbfSvmClassifier(gamma=30.0, C=10.0, offset=0.1)
    return model.fit(samples.inputs, samples.labels)
