"""
학습 전처리기 수용 테스트 (랜덤 계수 2D Poisson n=1024 학습, 50에폭)
"""

import numpy as np
import pytest

from src.gnn import init_correction_model, init_model, load_checkpoint, save_checkpoint
from src.krylov import SolveConfig, pcg
from src.precond import PrecondKind, build_preconditioner
from src.sparse import gen_poisson
from src.train import TrainConfig, load_dataset, load_split, rhs_vector, train

pytestmark = pytest.mark.slow

SPEC = {
    "family": "poisson2d",
    "sizes": [32],
    "train": 100,
    "validation": 30,
    "test": 30,
    "seed": 0,
    "random_coefficients": True,
}
SOLVE = SolveConfig(rel_tol=1e-6)


def _train(mode: str):
    cfg = TrainConfig(epochs=50, lr=0.005, batch_size=8, seed=0, mode=mode, progress=False)
    model = init_correction_model(seed=0) if mode == "gnnic" else init_model(seed=0)
    best, _ = train(model, cfg, dataset=load_dataset(SPEC, mode=mode, seed=0))
    return best


@pytest.fixture(scope="module")
def gnnic_model():
    return _train("gnnic")


@pytest.fixture(scope="module")
def nic_model():
    return _train("nic")


@pytest.fixture(scope="module")
def test_split():
    return [(a, rhs_vector(a.n_rows, 0, i)) for i, (_, a) in enumerate(load_split(SPEC, "test"))]


def _iterations(kind: str, pairs, model=None):
    reports = [pcg(a, b, build_preconditioner(kind, a, model), SOLVE)[1] for a, b in pairs]
    return np.array([r.iterations for r in reports]), np.array([r.converged for r in reports])


class TestHeldOutIterations:
    """보류 테스트 분할의 평균 PCG 반복 수"""

    def test_gnnic_not_worse_than_ic0(self, gnnic_model, test_split):
        ic0_iters, _ = _iterations(PrecondKind.IC0, test_split)
        gnnic_iters, converged = _iterations(PrecondKind.GNNIC, test_split, gnnic_model)
        assert converged.all()
        assert gnnic_iters.mean() <= ic0_iters.mean()

    def test_nic_within_ic0_margin(self, nic_model, test_split):
        """NIC는 모두 수렴하고 평균 반복 수가 IC(0)의 1.5배 이내"""
        ic0_iters, _ = _iterations(PrecondKind.IC0, test_split)
        nic_iters, converged = _iterations(PrecondKind.NIC, test_split, nic_model)
        assert converged.all()
        assert nic_iters.mean() <= 1.5 * ic0_iters.mean()


class TestLargerGrid:
    """n=1024에서 학습한 체크포인트를 n=16384에 적용"""

    def test_gnnic_checkpoint_scales(self, gnnic_model, tmp_path):
        path = save_checkpoint(gnnic_model, tmp_path / "gnnic.json")
        model, _ = load_checkpoint(path)
        a = gen_poisson(2, 128, coeff_seed=2024)
        b = rhs_vector(a.n_rows, 0, 0)

        p = build_preconditioner(PrecondKind.GNNIC, a, model)
        assert np.all(p.factor.values[p.factor.diag_mask] > 0.0)
        _, gnnic = pcg(a, b, p, SOLVE)
        _, ic0 = pcg(a, b, build_preconditioner(PrecondKind.IC0, a), SOLVE)
        assert gnnic.converged
        assert gnnic.iterations <= 1.25 * ic0.iterations
