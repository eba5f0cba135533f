"""
메시지 패싱 GNN 모듈

3개의 메시지 패싱 블록으로 GraphSample을 하삼각 엣지 값으로 사상하고,
모든 파라미터에 대한 정확한 역전파 기울기를 계산합니다.

블록 b의 계산:
    e' = ½ [φ_b(e_in, x_i, x_j) + φ_b(e_in, x_j, x_i)]     (무방향 엣지 갱신)
    m_sum, m_mean = 노드별 인접 엣지 e'의 합 / 평균
    x' = ψ_b(x, m_sum, m_mean)
φ, ψ는 tanh를 사이에 둔 2층 퍼셉트론. b > 0 에서 e_in = [e_현재, e_원본] (skip connection).
출력 대각 원소는 학습 편향 β를 더한 뒤 exp((o + β)/2)로 변환되어 항상 양수입니다.
"""

import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from src.features import GraphSample
from src.sparse import FactorError, LowerFactor, scatter_sum

logger = logging.getLogger(__name__)

DIAG_BIAS = "head.diag_bias"


class GnnNumericError(ArithmeticError):
    """활성값에 NaN/Inf 발생"""

    def __init__(self, block_index: int, message: str = ""):
        self.block_index = block_index
        super().__init__(message or f"블록 {block_index}에서 NaN/Inf 활성값 발생")


@dataclass
class GnnConfig:
    """아키텍처 설정"""

    node_dim: int = 9
    edge_dim: int = 1
    hidden_dim: int = 8
    node_out_dim: int = 8
    num_blocks: int = 3
    norm_eps: float = 1e-6

    @classmethod
    def from_dict(cls, config: Optional[Dict[str, Any]] = None) -> "GnnConfig":
        config = config or {}
        return cls(**{k: config[k] for k in cls.__dataclass_fields__ if k in config})

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class MessageBlock:
    """블록 하나의 입력/출력 폭과 파라미터 이름"""

    index: int
    edge_in: int
    node_in: int
    hidden: int
    edge_out: int
    node_out: int

    @property
    def edge_prefix(self) -> str:
        return f"block{self.index}.edge"

    @property
    def node_prefix(self) -> str:
        return f"block{self.index}.node"

    def param_shapes(self) -> List[Tuple[str, Tuple[int, ...]]]:
        edge_fan_in = self.edge_in + 2 * self.node_in
        node_fan_in = self.node_in + 2 * self.edge_out
        return [
            (f"{self.edge_prefix}.W1", (edge_fan_in, self.hidden)),
            (f"{self.edge_prefix}.b1", (self.hidden,)),
            (f"{self.edge_prefix}.W2", (self.hidden, self.edge_out)),
            (f"{self.edge_prefix}.b2", (self.edge_out,)),
            (f"{self.node_prefix}.W1", (node_fan_in, self.hidden)),
            (f"{self.node_prefix}.b1", (self.hidden,)),
            (f"{self.node_prefix}.W2", (self.hidden, self.node_out)),
            (f"{self.node_prefix}.b2", (self.node_out,)),
        ]


def build_blocks(config: GnnConfig) -> List[MessageBlock]:
    blocks = []
    node_in = config.node_dim
    for b in range(config.num_blocks):
        edge_in = config.edge_dim if b == 0 else 2 * config.edge_dim
        blocks.append(MessageBlock(
            index=b,
            edge_in=edge_in,
            node_in=node_in,
            hidden=config.hidden_dim,
            edge_out=config.edge_dim,
            node_out=config.node_out_dim,
        ))
        node_in = config.node_out_dim
    return blocks


class GnnModel:
    """
    GNN 파라미터 묶음

    params는 이름 → 배열 사전이며, 순서가 직렬화 순서입니다.
    """

    def __init__(self, config: GnnConfig, params: Optional[Dict[str, np.ndarray]] = None):
        self.config = config
        self.blocks = build_blocks(config)
        self.shapes: List[Tuple[str, Tuple[int, ...]]] = [
            ("norm.gain", (config.node_dim,)),
            ("norm.bias", (config.node_dim,)),
        ]
        for block in self.blocks:
            self.shapes.extend(block.param_shapes())
        self.shapes.append((DIAG_BIAS, (1,)))

        if params is None:
            params = {name: np.zeros(shape) for name, shape in self.shapes}
            params["norm.gain"][:] = 1.0
        self.params = {name: np.asarray(params[name], dtype=np.float64).reshape(shape)
                       for name, shape in self.shapes}

    @property
    def param_names(self) -> List[str]:
        return [name for name, _ in self.shapes]

    @property
    def param_count(self) -> int:
        return int(sum(np.prod(shape) for _, shape in self.shapes))

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.params[name].reshape(-1) for name in self.param_names])

    @classmethod
    def from_vector(cls, config: GnnConfig, vector: np.ndarray) -> "GnnModel":
        model = cls(config)
        vector = np.asarray(vector, dtype=np.float64)
        if vector.shape[0] != model.param_count:
            raise ValueError(f"파라미터 길이 불일치: {vector.shape[0]} != {model.param_count}")
        offset = 0
        for name, shape in model.shapes:
            size = int(np.prod(shape))
            model.params[name] = vector[offset:offset + size].reshape(shape).copy()
            offset += size
        return model

    def copy(self) -> "GnnModel":
        return GnnModel(self.config, {k: v.copy() for k, v in self.params.items()})

    def __repr__(self) -> str:
        return f"GnnModel(blocks={len(self.blocks)}, hidden={self.config.hidden_dim}, params={self.param_count})"


def init_model(config: Optional[GnnConfig] = None, seed: int = 0) -> GnnModel:
    """
    균등분포 [-s, s], s = 1/√fan_in 로 초기화. 정규화 affine은 gain 1, bias 0, 대각 편향 0.
    """
    config = config or GnnConfig()
    model = GnnModel(config)
    rng = np.random.default_rng(seed)
    fan_in = None
    for name, shape in model.shapes:
        if name.startswith(("norm.", "head.")):
            continue
        if name.endswith(("W1", "W2")):
            fan_in = shape[0]
        bound = 1.0 / np.sqrt(fan_in)
        model.params[name] = rng.uniform(-bound, bound, size=shape)
    logger.debug(f"모델 초기화: seed={seed}, 파라미터 {model.param_count}개")
    return model


def init_correction_model(
    config: Optional[GnnConfig] = None,
    seed: int = 0,
    diag_init: float = 1e-4,
) -> GnnModel:
    """
    IC(0) 보정 학습용 초기 모델

    init_model과 같되 마지막 블록의 엣지 출력층을 0으로 두고 대각 편향을 2·ln(diag_init)으로 설정합니다.
    초기 출력은 비대각 0, 대각 diag_init 이므로 L_IC + 출력은 IC(0)에서 출발합니다.

    Raises:
        ValueError: diag_init <= 0
    """
    if not diag_init > 0:
        raise ValueError(f"diag_init은 양수여야 합니다: {diag_init}")
    model = init_model(config, seed)
    last = model.blocks[-1]
    model.params[f"{last.edge_prefix}.W2"][:] = 0.0
    model.params[f"{last.edge_prefix}.b2"][:] = 0.0
    model.params[DIAG_BIAS][:] = 2.0 * np.log(diag_init)
    return model


def zero_model(config: Optional[GnnConfig] = None) -> GnnModel:
    """모든 가중치 0, 정규화 gain 1 / bias 0 인 모델"""
    return GnnModel(config or GnnConfig())


@dataclass
class _Topology:
    src: np.ndarray
    dst: np.ndarray
    diag: np.ndarray
    agg_index: np.ndarray
    agg_edge: np.ndarray
    count: np.ndarray


def _topology(g: GraphSample) -> _Topology:
    src, dst = g.edge_index[0], g.edge_index[1]
    diag = src == dst
    edge_ids = np.arange(src.shape[0])
    # 비대각 엣지는 양 끝점 모두에, self-edge는 한 번만 기여
    agg_index = np.concatenate([src, dst[~diag]])
    agg_edge = np.concatenate([edge_ids, edge_ids[~diag]])
    count = np.maximum(np.bincount(agg_index, minlength=g.n), 1).astype(np.float64)
    return _Topology(src, dst, diag, agg_index, agg_edge, count[:, None])


@dataclass
class _BlockTrace:
    edge_inp: np.ndarray
    edge_hidden: np.ndarray
    node_inp: np.ndarray
    node_hidden: np.ndarray


@dataclass
class ForwardTrace:
    """역전파에 필요한 순전파 중간값"""

    topology: _Topology
    x_hat: np.ndarray
    blocks: List[_BlockTrace] = field(default_factory=list)
    raw_output: Optional[np.ndarray] = None
    output: Optional[np.ndarray] = None


def _mlp_forward(params: Dict[str, np.ndarray], prefix: str, inp: np.ndarray):
    hidden = np.tanh(inp @ params[f"{prefix}.W1"] + params[f"{prefix}.b1"])
    return hidden @ params[f"{prefix}.W2"] + params[f"{prefix}.b2"], hidden


def _mlp_backward(
    params: Dict[str, np.ndarray],
    prefix: str,
    inp: np.ndarray,
    hidden: np.ndarray,
    d_out: np.ndarray,
    grads: Dict[str, np.ndarray],
) -> np.ndarray:
    grads[f"{prefix}.W2"] += hidden.T @ d_out
    grads[f"{prefix}.b2"] += d_out.sum(axis=0)
    d_hidden = (d_out @ params[f"{prefix}.W2"].T) * (1.0 - hidden * hidden)
    grads[f"{prefix}.W1"] += inp.T @ d_hidden
    grads[f"{prefix}.b1"] += d_hidden.sum(axis=0)
    return d_hidden @ params[f"{prefix}.W1"].T


def gnn_forward_traced(model: GnnModel, g: GraphSample) -> Tuple[np.ndarray, ForwardTrace]:
    """
    순전파 + 역전파용 기록

    Returns:
        (엣지 값 길이 nnz_lower, ForwardTrace)

    Raises:
        GnnNumericError: 활성값 NaN/Inf (블록 인덱스 포함)
    """
    params = model.params
    topo = _topology(g)
    num_edges = g.num_edges

    # 그래프 정규화: 특징별 표준화 후 학습 affine
    x0 = g.node_feats
    x_hat = (x0 - x0.mean(axis=0)) / (x0.std(axis=0) + model.config.norm_eps)
    x = x_hat * params["norm.gain"] + params["norm.bias"]
    trace = ForwardTrace(topology=topo, x_hat=x_hat)

    e_orig = g.edge_feats
    e = e_orig
    for block in model.blocks:
        e_in = e_orig if block.index == 0 else np.hstack([e, e_orig])
        x_src, x_dst = x[topo.src], x[topo.dst]
        edge_inp = np.vstack([
            np.hstack([e_in, x_src, x_dst]),
            np.hstack([e_in, x_dst, x_src]),
        ])
        edge_out, edge_hidden = _mlp_forward(params, block.edge_prefix, edge_inp)
        e_new = 0.5 * (edge_out[:num_edges] + edge_out[num_edges:])

        m_sum = scatter_sum(e_new[topo.agg_edge], topo.agg_index, g.n)
        m_mean = m_sum / topo.count
        node_inp = np.hstack([x, m_sum, m_mean])
        x_new, node_hidden = _mlp_forward(params, block.node_prefix, node_inp)

        if not (np.all(np.isfinite(e_new)) and np.all(np.isfinite(x_new))):
            raise GnnNumericError(block.index)

        trace.blocks.append(_BlockTrace(edge_inp, edge_hidden, node_inp, node_hidden))
        x, e = x_new, e_new

    raw = e[:, 0].copy()
    raw[topo.diag] += params[DIAG_BIAS][0]
    output = raw.copy()
    output[topo.diag] = np.exp(raw[topo.diag] / 2.0)
    if not np.all(np.isfinite(output)):
        raise GnnNumericError(len(model.blocks) - 1, "출력 대각 변환에서 오버플로 발생")
    trace.raw_output = raw
    trace.output = output
    return output, trace


def gnn_forward(model: GnnModel, g: GraphSample) -> np.ndarray:
    """GraphSample → 하삼각 엣지 값 (대각은 exp((o + β)/2) > 0)"""
    output, _ = gnn_forward_traced(model, g)
    return output


def gnn_backward(
    model: GnnModel,
    g: GraphSample,
    upstream_grad: np.ndarray,
    trace: Optional[ForwardTrace] = None,
) -> Dict[str, np.ndarray]:
    """
    출력 엣지 값에 대한 상류 기울기로부터 모든 파라미터 기울기 계산

    Args:
        model: 모델
        g: 입력 그래프
        upstream_grad: d loss / d output (길이 nnz_lower)
        trace: 순전파 기록 (없으면 다시 계산)

    Returns:
        파라미터 이름 → 기울기 배열
    """
    upstream_grad = np.asarray(upstream_grad, dtype=np.float64).reshape(-1)
    if upstream_grad.shape[0] != g.num_edges:
        raise ValueError(f"상류 기울기 길이 불일치: {upstream_grad.shape[0]} != {g.num_edges}")
    if trace is None:
        _, trace = gnn_forward_traced(model, g)

    params = model.params
    topo = trace.topology
    num_edges = g.num_edges
    grads = {name: np.zeros(shape) for name, shape in model.shapes}

    d_raw = upstream_grad.copy()
    d_raw[topo.diag] *= 0.5 * trace.output[topo.diag]
    grads[DIAG_BIAS] = np.array([d_raw[topo.diag].sum()])
    d_e = d_raw[:, None]
    d_x = np.zeros((g.n, model.config.node_out_dim))

    for block, bt in zip(reversed(model.blocks), reversed(trace.blocks)):
        k = block.node_in
        w = block.edge_in

        d_node_inp = _mlp_backward(params, block.node_prefix, bt.node_inp, bt.node_hidden, d_x, grads)
        d_x_in = d_node_inp[:, :k].copy()
        d_m_sum = d_node_inp[:, k:k + block.edge_out] + d_node_inp[:, k + block.edge_out:] / topo.count
        d_e_new = d_e + scatter_sum(d_m_sum[topo.agg_index], topo.agg_edge, num_edges)

        d_edge_out = 0.5 * np.vstack([d_e_new, d_e_new])
        d_edge_inp = _mlp_backward(params, block.edge_prefix, bt.edge_inp, bt.edge_hidden, d_edge_out, grads)
        d_fwd, d_rev = d_edge_inp[:num_edges], d_edge_inp[num_edges:]
        d_e_in = d_fwd[:, :w] + d_rev[:, :w]
        d_x_src = d_fwd[:, w:w + k] + d_rev[:, w + k:]
        d_x_dst = d_fwd[:, w + k:] + d_rev[:, w:w + k]
        d_x_in += scatter_sum(d_x_src, topo.src, g.n) + scatter_sum(d_x_dst, topo.dst, g.n)

        # 원본 엣지 특징은 입력이므로 현재 엣지 부분만 전달
        d_e = d_e_in[:, :block.edge_out]
        d_x = d_x_in

    grads["norm.gain"] = (d_x * trace.x_hat).sum(axis=0)
    grads["norm.bias"] = d_x.sum(axis=0)
    return grads


def assemble_factor(g: GraphSample, edge_values: np.ndarray) -> LowerFactor:
    """
    엣지 값을 g의 하삼각 패턴 위 LowerFactor로 조립 (σ를 곱해 원래 단위로 복원)

    Raises:
        FactorError: 길이 불일치 또는 양수가 아닌 대각
    """
    edge_values = np.asarray(edge_values, dtype=np.float64).reshape(-1)
    if edge_values.shape[0] != g.num_edges:
        raise FactorError(f"엣지 값 길이 불일치: {edge_values.shape[0]} != {g.num_edges}")
    return LowerFactor(g.lower.with_values(edge_values * g.scale))


def extract_edge_values(g: GraphSample, factor: LowerFactor) -> np.ndarray:
    """assemble_factor의 역연산"""
    if not (np.array_equal(factor.matrix.rows, g.lower.rows)
            and np.array_equal(factor.matrix.cols, g.lower.cols)):
        raise FactorError("인자 패턴이 그래프 패턴과 다릅니다")
    return factor.values / g.scale
