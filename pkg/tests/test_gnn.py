"""
GNN 순전파 / 역전파 / 체크포인트 테스트
"""

import json
from dataclasses import replace

import numpy as np
import pytest

from src.features import build_graph
from src.gnn import (
    CheckpointError,
    GnnConfig,
    GnnModel,
    GnnNumericError,
    assemble_factor,
    extract_edge_values,
    gnn_backward,
    gnn_forward,
    init_correction_model,
    init_model,
    load_checkpoint,
    save_checkpoint,
    zero_model,
)
from src.sparse import FactorError, SparseCoo, gen_poisson, lower_triangle, permute_symmetric


def _finite_difference(model: GnnModel, g, weights: np.ndarray, h: float = 1e-5) -> np.ndarray:
    base = model.to_vector()
    fd = np.zeros_like(base)
    for k in range(base.shape[0]):
        plus, minus = base.copy(), base.copy()
        plus[k] += h
        minus[k] -= h
        f_plus = weights @ gnn_forward(GnnModel.from_vector(model.config, plus), g)
        f_minus = weights @ gnn_forward(GnnModel.from_vector(model.config, minus), g)
        fd[k] = (f_plus - f_minus) / (2 * h)
    return fd


def _flatten(model: GnnModel, grads) -> np.ndarray:
    return np.concatenate([grads[name].reshape(-1) for name in model.param_names])


class TestModelParameters:
    """파라미터 구성 테스트"""

    def test_param_count(self):
        """hidden 8, 블록 3, 입력 9/1, 대각 편향 → 998개"""
        model = init_model(GnnConfig(), seed=0)
        assert model.param_count == 998
        assert model.to_vector().shape[0] == model.param_count

    def test_block_widths(self):
        """2, 3번째 블록의 엣지 입력은 skip connection으로 폭 2"""
        model = zero_model()
        assert [b.edge_in for b in model.blocks] == [1, 2, 2]
        assert [b.node_in for b in model.blocks] == [9, 8, 8]

    def test_vector_round_trip(self, tiny_model):
        """to_vector / from_vector 무손실"""
        back = GnnModel.from_vector(tiny_model.config, tiny_model.to_vector())
        assert np.array_equal(back.to_vector(), tiny_model.to_vector())

    def test_from_vector_wrong_length(self):
        with pytest.raises(ValueError):
            GnnModel.from_vector(GnnConfig(), np.zeros(10))

    def test_init_deterministic_and_bounded(self):
        """같은 시드 → 같은 파라미터, |w| <= 1/√fan_in"""
        a = init_model(seed=3)
        b = init_model(seed=3)
        assert np.array_equal(a.to_vector(), b.to_vector())
        w = a.params["block0.edge.W1"]
        assert np.abs(w).max() <= 1.0 / np.sqrt(w.shape[0])
        assert np.array_equal(a.params["norm.gain"], np.ones(9))
        assert a.params["head.diag_bias"][0] == 0.0


class TestInitCorrectionModel:
    """IC(0) 보정용 초기 모델 테스트"""

    def test_initial_output(self, poisson16_random):
        """초기 출력: 비대각 0, 대각 diag_init"""
        g = build_graph(poisson16_random)
        out = gnn_forward(init_correction_model(seed=2, diag_init=1e-4), g)
        assert np.all(out[~g.diag_mask] == 0.0)
        assert np.allclose(out[g.diag_mask], 1e-4, rtol=1e-12)

    def test_other_params_match_init_model(self):
        """마지막 엣지 출력층과 대각 편향 외에는 init_model과 같음"""
        base = init_model(seed=5)
        model = init_correction_model(seed=5, diag_init=0.01)
        changed = {"block2.edge.W2", "block2.edge.b2", "head.diag_bias"}
        for name in model.param_names:
            if name not in changed:
                assert np.array_equal(model.params[name], base.params[name]), name
        assert model.params["head.diag_bias"][0] == pytest.approx(2.0 * np.log(0.01))

    def test_still_trainable(self, poisson16_random):
        """출력층이 0이어도 출력층과 대각 편향의 기울기는 0이 아님"""
        g = build_graph(poisson16_random)
        model = init_correction_model(seed=0)
        grads = gnn_backward(model, g, np.ones(g.num_edges))
        assert np.any(grads["block2.edge.W2"] != 0.0)
        assert grads["head.diag_bias"][0] != 0.0

    @pytest.mark.parametrize("diag_init", [0.0, -1e-3])
    def test_nonpositive_diag_init(self, diag_init):
        with pytest.raises(ValueError):
            init_correction_model(diag_init=diag_init)


class TestGnnForward:
    """순전파 테스트"""

    def test_zero_model_output(self, poisson16, zero_gnn):
        """영 모델: 비대각 0, 대각 exp(0/2) = 1"""
        g = build_graph(poisson16)
        out = gnn_forward(zero_gnn, g)
        assert out.shape == (g.num_edges,)
        assert np.all(out[g.diag_mask] == 1.0)
        assert np.all(out[~g.diag_mask] == 0.0)

    def test_output_length(self, tiny_model):
        for m in (2, 3, 5):
            g = build_graph(gen_poisson(2, m, coeff_seed=m))
            assert gnn_forward(tiny_model, g).shape == (g.num_edges,)

    def test_diagonal_positive(self):
        """임의 파라미터에서도 대각 출력은 양수"""
        g = build_graph(gen_poisson(2, 4, coeff_seed=1))
        for seed in range(5):
            model = init_model(seed=seed)
            model.params["block2.edge.b2"][:] = -20.0
            out = gnn_forward(model, g)
            assert np.all(out[g.diag_mask] > 0.0)

    def test_deterministic(self, tiny_model, poisson16_random):
        g = build_graph(poisson16_random)
        assert np.array_equal(gnn_forward(tiny_model, g), gnn_forward(tiny_model, g))

    def test_nan_reports_block(self, tiny_model, poisson16):
        """NaN 활성값은 블록 인덱스와 함께 GnnNumericError"""
        model = tiny_model.copy()
        model.params["block1.edge.W1"][0, 0] = np.nan
        with pytest.raises(GnnNumericError) as exc:
            gnn_forward(model, build_graph(poisson16))
        assert exc.value.block_index == 1

    def test_permutation_equivariance(self, tiny_model):
        """노드 특징 행과 엣지를 같이 치환하면 출력도 같은 치환"""
        a = gen_poisson(2, 4, coeff_seed=8)
        perm = np.random.default_rng(2).permutation(a.n_rows)
        g = build_graph(a)
        gp = build_graph(permute_symmetric(a, perm))
        feats = np.empty_like(g.node_feats)
        feats[perm] = g.node_feats
        gp = replace(gp, node_feats=feats)

        out = gnn_forward(tiny_model, g)
        out_p = gnn_forward(tiny_model, gp)
        lookup = {(int(i), int(j)): v for (i, j), v in zip(gp.edge_index.T, out_p)}
        for (i, j), v in zip(g.edge_index.T, out):
            pi, pj = int(perm[i]), int(perm[j])
            assert lookup[(max(pi, pj), min(pi, pj))] == pytest.approx(v, rel=1e-10, abs=1e-12)


class TestGnnBackward:
    """역전파 테스트"""

    def test_zero_upstream(self, tiny_model, poisson16):
        g = build_graph(poisson16)
        grads = gnn_backward(tiny_model, g, np.zeros(g.num_edges))
        assert all(np.all(v == 0.0) for v in grads.values())

    def test_upstream_length_mismatch(self, tiny_model, poisson16):
        with pytest.raises(ValueError):
            gnn_backward(tiny_model, build_graph(poisson16), np.zeros(3))

    def test_linearity(self, tiny_model, poisson16_random):
        """상류 기울기에 대해 선형"""
        g = build_graph(poisson16_random)
        rng = np.random.default_rng(0)
        u1, u2 = rng.standard_normal(g.num_edges), rng.standard_normal(g.num_edges)
        g12 = _flatten(tiny_model, gnn_backward(tiny_model, g, u1 + u2))
        g1 = _flatten(tiny_model, gnn_backward(tiny_model, g, u1))
        g2 = _flatten(tiny_model, gnn_backward(tiny_model, g, u2))
        assert np.allclose(g12, g1 + g2, rtol=1e-10, atol=1e-12)

    @pytest.mark.slow
    def test_finite_difference(self, poisson16_random):
        """16노드 그래프에서 모든 파라미터 기울기가 중심 차분과 일치 (상대 오차 < 1e-4)"""
        model = init_model(seed=1)
        g = build_graph(poisson16_random)
        weights = np.random.default_rng(4).standard_normal(g.num_edges)
        analytic = _flatten(model, gnn_backward(model, g, weights))
        numeric = _finite_difference(model, g, weights)

        offset = 0
        for name, shape in model.shapes:
            size = int(np.prod(shape))
            a, n = analytic[offset:offset + size], numeric[offset:offset + size]
            offset += size
            scale = max(np.linalg.norm(a), np.linalg.norm(n))
            if scale < 1e-6:
                continue
            assert np.linalg.norm(a - n) / scale < 1e-4, name

    def test_last_node_update_has_zero_gradient(self, tiny_model, poisson16):
        """마지막 블록의 노드 갱신은 출력에 영향이 없음"""
        g = build_graph(poisson16)
        grads = gnn_backward(tiny_model, g, np.ones(g.num_edges))
        assert np.all(grads["block2.node.W1"] == 0.0)
        assert np.any(grads["block2.edge.W1"] != 0.0)


class TestAssembleFactor:
    """assemble_factor 테스트"""

    def test_single_entry_zero_model(self, zero_gnn):
        """1x1 [[4]]: σ = 1 가드, 영 모델 → L = [[1]]"""
        g = build_graph(SparseCoo(1, 1, [0], [0], [4.0]))
        l = assemble_factor(g, gnn_forward(zero_gnn, g))
        assert l.to_dense().tolist() == [[1.0]]

    def test_pattern_matches_lower(self, tiny_model, poisson16_random):
        g = build_graph(poisson16_random)
        l = assemble_factor(g, gnn_forward(tiny_model, g))
        lower = lower_triangle(poisson16_random)
        assert np.array_equal(l.matrix.rows, lower.rows)
        assert np.array_equal(l.matrix.cols, lower.cols)

    def test_unscaled_by_sigma(self, zero_gnn, poisson16_random):
        """대각 = σ · exp(0) = σ"""
        g = build_graph(poisson16_random)
        l = assemble_factor(g, gnn_forward(zero_gnn, g))
        assert np.allclose(l.values[l.diag_mask], g.scale)

    def test_round_trip(self, tiny_model, poisson16_random):
        g = build_graph(poisson16_random)
        values = gnn_forward(tiny_model, g)
        back = extract_edge_values(g, assemble_factor(g, values))
        assert np.allclose(back, values, rtol=1e-14)

    def test_length_mismatch(self, poisson16):
        with pytest.raises(FactorError):
            assemble_factor(build_graph(poisson16), np.ones(3))

    def test_nonpositive_external_diagonal(self, poisson16):
        g = build_graph(poisson16)
        values = np.ones(g.num_edges)
        values[g.diag_mask] = -1.0
        with pytest.raises(FactorError):
            assemble_factor(g, values)


class TestCheckpoint:
    """체크포인트 저장 / 로드 테스트"""

    def test_round_trip(self, tmp_path, tiny_model):
        """파라미터와 extra가 무손실 복원"""
        path = save_checkpoint(tiny_model, tmp_path / "ckpt.json", extra={"epoch": 3})
        model, extra = load_checkpoint(path)
        assert np.array_equal(model.to_vector(), tiny_model.to_vector())
        assert model.config == tiny_model.config
        assert extra == {"epoch": 3}

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_checkpoint(tmp_path / "none.json")

    def test_wrong_format(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"format": "other"}), encoding="utf-8")
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_version_mismatch(self, tmp_path, tiny_model):
        path = save_checkpoint(tiny_model, tmp_path / "ckpt.json")
        payload = json.loads(path.read_text(encoding="utf-8"))
        payload["version"] = 99
        path.write_text(json.dumps(payload), encoding="utf-8")
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_architecture_mismatch(self, tmp_path, tiny_model):
        """파라미터 수가 아키텍처와 다르면 오류"""
        path = save_checkpoint(tiny_model, tmp_path / "ckpt.json")
        payload = json.loads(path.read_text(encoding="utf-8"))
        payload["architecture"]["hidden_dim"] = 4
        path.write_text(json.dumps(payload), encoding="utf-8")
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(CheckpointError):
            load_checkpoint(path)
