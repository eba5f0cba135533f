"""
공용 테스트 픽스처
"""

import numpy as np
import pytest

from src.gnn import GnnConfig, init_model, zero_model
from src.sparse import SparseCoo, gen_poisson


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: 수 초 이상 걸리는 종단 간 실행")


def random_spd(n: int, seed: int, density: float = 0.2) -> SparseCoo:
    """대각 우세 랜덤 희소 SPD 행렬"""
    rng = np.random.default_rng(seed)
    dense = rng.standard_normal((n, n)) * (rng.random((n, n)) < density)
    dense = np.tril(dense, -1)
    dense = dense + dense.T
    dense[np.diag_indices(n)] = np.abs(dense).sum(axis=1) + 1.0
    return SparseCoo.from_dense(dense)


def random_lower(n: int, seed: int, density: float = 0.2) -> np.ndarray:
    """양의 대각을 가진 랜덤 하삼각 밀집 행렬"""
    rng = np.random.default_rng(seed)
    dense = np.tril(rng.standard_normal((n, n)) * (rng.random((n, n)) < density), -1)
    dense[np.diag_indices(n)] = rng.uniform(0.5, 2.0, size=n)
    return dense


@pytest.fixture
def poisson16():
    """2차원 Poisson, m=4 (n=16), 상수 계수"""
    return gen_poisson(2, 4)


@pytest.fixture
def poisson16_random():
    """2차원 Poisson, m=4 (n=16), 랜덤 계수"""
    return gen_poisson(2, 4, coeff_seed=3)


@pytest.fixture
def tiny_model():
    return init_model(GnnConfig(), seed=0)


@pytest.fixture
def zero_gnn():
    return zero_model()
