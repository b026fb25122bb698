"""
Shared fixtures: a small P2 problem that runs in well under a second, and the
desk-scale study used by the slow acceptance tests.

Every DNS and reduced run in the suite uses a strict stability monitor, and
the property tests draw from the run configuration's seed (VMSPOD_SEED
overrides it).
"""

import os

import numpy as np
import pytest
from hypothesis import seed as hypothesis_seed

from vmspod.config import DEFAULT_CONVECTION, RunConfig
from vmspod.dns import StabilityMonitor, dns_solve
from vmspod.experiments import Study
from vmspod.fem import assemble_operators, build_fespace
from vmspod.mesh import build_uniform_mesh
from vmspod.pod import InnerProduct, build_correlation, compute_basis, project_operators
from vmspod.problem import ProblemSpec, TanhFrontSolution


SMALL = dict(
    nx=8,
    degree=2,
    dt=1e-2,
    T=0.2,
    epsilon=1e-3,
    width=0.1,
    r=6,
    R=3,
    table1_r=(2, 4, 6),
    table3_r=(10,),
    e3_R=(0, 1, 2, 3, 4),
    e3_r=6,
    eps_values=(1e-2, 1e-3),
    concurrency=1,
)


SEED = int(os.environ.get('VMSPOD_SEED', RunConfig().seed))


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: desk-scale runs taking minutes')


def pytest_collection_modifyitems(items):
    for item in items:
        test = getattr(item, 'obj', None)
        if getattr(test, 'is_hypothesis_test', False):
            hypothesis_seed(SEED)(test)


@pytest.fixture(scope='session', autouse=True)
def strict_stability():
    StabilityMonitor.strict_default = True
    yield
    StabilityMonitor.strict_default = False


@pytest.fixture
def rng():
    return np.random.default_rng(SEED)


@pytest.fixture(scope='session')
def small_problem():
    return ProblemSpec(
        epsilon=SMALL['epsilon'],
        b=DEFAULT_CONVECTION,
        g=1.0,
        T=SMALL['T'],
        dt=SMALL['dt'],
        exact=TanhFrontSolution(width=SMALL['width']),
    )


@pytest.fixture(scope='session')
def small_space():
    return build_fespace(build_uniform_mesh(SMALL['nx']), SMALL['degree'])


@pytest.fixture(scope='session')
def small_ops(small_space):
    return assemble_operators(small_space, DEFAULT_CONVECTION)


@pytest.fixture(scope='session')
def small_snapshots(small_problem, small_space, small_ops):
    return dns_solve(small_problem, small_space, ops=small_ops)


@pytest.fixture(scope='session')
def small_basis(small_snapshots, small_ops):
    correlation = build_correlation(small_snapshots, InnerProduct.H1_FULL, small_ops)
    return compute_basis(small_snapshots, correlation, small_ops, ip=InnerProduct.H1_FULL)


@pytest.fixture(scope='session')
def small_projected(small_basis, small_ops):
    return project_operators(small_basis, small_ops)


@pytest.fixture
def small_config(tmp_path):
    return RunConfig(output_dir=tmp_path / 'run', **SMALL).validate()


@pytest.fixture(scope='session')
def small_study(tmp_path_factory):
    config = RunConfig(output_dir=tmp_path_factory.mktemp('small'), **SMALL).validate()
    return Study(config).prepare()


@pytest.fixture(scope='session')
def desk_config(tmp_path_factory):
    return RunConfig.preset('desk', output_dir=tmp_path_factory.mktemp('desk')).validate()


@pytest.fixture(scope='session')
def desk_study(desk_config):
    return Study(desk_config).prepare()
