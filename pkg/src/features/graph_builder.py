"""
그래프 입력 생성 모듈

대칭 희소 행렬을 GNN 입력 그래프로 변환합니다.
- 노드 특징 9차원: 국소 차수 프로파일(5), 대각 우세(2), 위치 임베딩(2)
- 엣지 특징 1차원: 표준편차로 스케일된 하삼각 비영 값
"""

import logging
from dataclasses import dataclass

import numpy as np

from src.sparse import SparseCoo, lower_triangle, scale_by_std, scatter_sum

logger = logging.getLogger(__name__)

NODE_FEATURE_NAMES = (
    "deg",
    "max_deg",
    "min_deg",
    "mean_deg",
    "var_deg",
    "dominance",
    "decay",
    "pos_sin",
    "pos_cos",
)
DECAY_CLIP = 100.0


class FeatureError(ValueError):
    """특징 계산 관련 오류"""
    pass


@dataclass(frozen=True, eq=False)
class GraphSample:
    """
    GNN 입력 그래프

    edge_index[0] >= edge_index[1] (하삼각, 대각 self-edge 포함).
    lower는 엣지 순서와 동일한 하삼각 COO 패턴 (원본 단위 값).
    """

    n: int
    node_feats: np.ndarray
    edge_index: np.ndarray
    edge_feats: np.ndarray
    scale: float
    source: SparseCoo
    lower: SparseCoo

    @property
    def num_edges(self) -> int:
        return int(self.edge_index.shape[1])

    @property
    def diag_mask(self) -> np.ndarray:
        return self.edge_index[0] == self.edge_index[1]


def _off_diagonal(a: SparseCoo):
    mask = a.rows != a.cols
    return a.rows[mask], a.cols[mask], a.values[mask]


def local_degree_profile(a: SparseCoo) -> np.ndarray:
    """
    국소 차수 프로파일 (n x 5)

    deg(v)는 대각을 제외한 이웃 수, 이어서 이웃 차수의 최대/최소/평균/분산(모분산).
    고립 노드는 다섯 값 모두 0.
    """
    n = a.n_rows
    rows, cols, _ = _off_diagonal(a)
    deg = np.bincount(rows, minlength=n).astype(np.float64)
    neighbor_deg = deg[cols]

    max_deg = np.full(n, -np.inf)
    min_deg = np.full(n, np.inf)
    np.maximum.at(max_deg, rows, neighbor_deg)
    np.minimum.at(min_deg, rows, neighbor_deg)

    safe = np.maximum(deg, 1.0)
    mean_deg = scatter_sum(neighbor_deg, rows, n) / safe
    var_deg = scatter_sum((neighbor_deg - mean_deg[rows]) ** 2, rows, n) / safe

    isolated = deg == 0
    max_deg[isolated] = 0.0
    min_deg[isolated] = 0.0
    mean_deg[isolated] = 0.0
    var_deg[isolated] = 0.0
    return np.column_stack([deg, max_deg, min_deg, mean_deg, var_deg])


def diagonal_dominance_feats(a: SparseCoo) -> np.ndarray:
    """
    대각 우세 특징 (n x 2)

    dominance_i = |a_ii| / (|a_ii| + Σ_{j≠i} |a_ij|)
    decay_i = |a_ii| / max_{j≠i} |a_ij|, [0, 100]으로 자름 (비대각 없으면 100)

    Raises:
        FeatureError: 대각 원소 누락
    """
    if not a.has_full_diagonal():
        raise FeatureError("대각 원소가 모두 저장되어 있어야 합니다")
    n = a.n_rows
    diag = np.abs(a.diagonal())
    rows, _, values = _off_diagonal(a)
    magnitude = np.abs(values)

    off_sum = scatter_sum(magnitude, rows, n)
    off_max = np.zeros(n)
    np.maximum.at(off_max, rows, magnitude)

    denom = diag + off_sum
    dominance = np.divide(diag, denom, out=np.zeros(n), where=denom > 0)
    decay = np.divide(diag, off_max, out=np.full(n, DECAY_CLIP), where=off_max > 0)
    decay = np.clip(decay, 0.0, DECAY_CLIP)
    return np.column_stack([dominance, decay])


def position_embedding(n: int) -> np.ndarray:
    """정규화 위치 i/n의 단일 주파수 사인/코사인 (n x 2)"""
    if n < 1:
        raise FeatureError(f"노드 수는 1 이상이어야 합니다: {n}")
    angle = 2.0 * np.pi * np.arange(n) / n
    return np.column_stack([np.sin(angle), np.cos(angle)])


def build_graph(a: SparseCoo) -> GraphSample:
    """
    SPD 행렬로부터 GraphSample 생성

    Raises:
        FeatureError: 비대칭 입력 또는 대각 누락
    """
    if a.n_rows != a.n_cols or not a.is_symmetric():
        raise FeatureError("대칭 행렬만 그래프로 변환할 수 있습니다")

    node_feats = np.hstack([
        local_degree_profile(a),
        diagonal_dominance_feats(a),
        position_embedding(a.n_rows),
    ])
    lower = lower_triangle(a)
    # σ는 전체 행렬의 비영 값 기준
    _, sigma = scale_by_std(a)

    if not np.all(np.isfinite(node_feats)):
        raise FeatureError("노드 특징에 NaN/Inf가 포함되어 있습니다")

    edge_index = np.vstack([lower.rows, lower.cols])
    logger.debug(f"그래프 생성: n={a.n_rows}, 하삼각 엣지={lower.nnz}, σ={sigma:.4g}")
    return GraphSample(
        n=a.n_rows,
        node_feats=node_feats,
        edge_index=edge_index,
        edge_feats=(lower.values / sigma).reshape(-1, 1),
        scale=sigma,
        source=a,
        lower=lower,
    )
