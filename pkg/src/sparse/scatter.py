"""
index_select / scatter 유틸리티

인덱스와 값만으로 희소 연산을 수행하기 위한 두 가지 기본 연산.
손실 커널과 GNN 집계가 함께 사용합니다.
"""

import numpy as np


def index_select(x: np.ndarray, index: np.ndarray) -> np.ndarray:
    """
    x에서 index 위치의 원소(행)를 선택

    Args:
        x: 1차원 벡터 또는 (n, k) 행렬
        index: 정수 인덱스 배열

    Returns:
        x[index]
    """
    return x[index]


def scatter_sum(values: np.ndarray, index: np.ndarray, size: int) -> np.ndarray:
    """
    같은 index 값을 가진 원소들을 합산 (scatter, reduce='sum')

    Args:
        values: 길이 m 벡터 또는 (m, k) 행렬
        index: 길이 m 정수 배열, 0 <= index < size
        size: 출력 길이

    Returns:
        길이 size 벡터 또는 (size, k) 행렬
    """
    if values.ndim == 1:
        return np.bincount(index, weights=values, minlength=size).astype(np.float64, copy=False)

    out = np.empty((size, values.shape[1]), dtype=np.float64)
    for col in range(values.shape[1]):
        out[:, col] = np.bincount(index, weights=values[:, col], minlength=size)
    return out
