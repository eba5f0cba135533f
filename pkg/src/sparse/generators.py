"""
Poisson 스텐실 행렬 생성 모듈

2차원 5점 / 3차원 7점 유한차분 이산화로 SPD 행렬을 생성합니다.
시드가 주어지면 노드별 계수를 [0.1, 10] 로그균등 분포에서 뽑아 행렬 패밀리를 만듭니다.
"""

import logging
from typing import Optional

import numpy as np

from .matrix import SparseCoo

logger = logging.getLogger(__name__)

COEFF_LOW = 0.1
COEFF_HIGH = 10.0


def poisson_coefficients(n: int, seed: int) -> np.ndarray:
    """노드별 로그균등 계수 [COEFF_LOW, COEFF_HIGH]"""
    rng = np.random.default_rng(seed)
    return np.exp(rng.uniform(np.log(COEFF_LOW), np.log(COEFF_HIGH), size=n))


def gen_poisson(dim: int, m: int, coeff_seed: Optional[int] = None) -> SparseCoo:
    """
    Poisson 행렬 생성 (Dirichlet 경계)

    Args:
        dim: 2 또는 3
        m: 축당 격자 점 수 (m >= 1), 행렬 차수는 m**dim
        coeff_seed: None이면 상수 계수 스텐실, 아니면 랜덤 계수 시드

    Returns:
        대칭 양의 정부호 COO 행렬

    계수 c가 있는 경우 결합 가중치는 조화평균 2 c_i c_j / (c_i + c_j),
    대각은 이웃 방향(경계 밖 포함) 가중치의 합입니다. c ≡ 1이면 표준 스텐실과 같습니다.
    """
    if dim not in (2, 3):
        raise ValueError(f"dim은 2 또는 3이어야 합니다: {dim}")
    if m < 1:
        raise ValueError(f"격자 크기는 1 이상이어야 합니다: {m}")

    n = m ** dim
    shape = (m,) * dim
    coords = np.indices(shape).reshape(dim, -1)
    node = np.arange(n)

    if coeff_seed is None:
        coeff = np.ones(n)
    else:
        coeff = poisson_coefficients(n, coeff_seed)

    rows, cols, vals = [], [], []
    diag = np.zeros(n)

    for axis in range(dim):
        for step in (-1, 1):
            neighbor_coord = coords[axis] + step
            inside = (neighbor_coord >= 0) & (neighbor_coord < m)
            stride = m ** (dim - 1 - axis)
            neighbor = node + step * stride

            # 경계 밖 이웃은 대각에만 기여 (고스트 노드 계수 = 자기 계수)
            other = coeff[np.where(inside, neighbor, node)]
            weight = np.where(inside, 2.0 * (coeff * other) / (coeff + other), coeff)
            diag += weight
            rows.append(node[inside])
            cols.append(neighbor[inside])
            vals.append(-weight[inside])

    rows.append(node)
    cols.append(node)
    vals.append(diag)

    matrix = SparseCoo.from_triples(
        n, n, np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
    )
    logger.debug(f"Poisson 행렬 생성: dim={dim}, m={m}, n={n}, nnz={matrix.nnz}")
    return matrix


FAMILIES = {"poisson2d": 2, "poisson3d": 3}


def derive_seed(base: int, *keys: int) -> int:
    """기준 시드와 키(분할, 인덱스 등)로부터 결정적인 하위 시드 생성"""
    seq = np.random.SeedSequence([int(base), *(int(k) for k in keys)])
    return int(seq.generate_state(1, dtype=np.uint32)[0])


def gen_family(family: str, m: int, coeff_seed: Optional[int] = None) -> SparseCoo:
    """
    패밀리 이름으로 행렬 생성

    Raises:
        ValueError: 알 수 없는 패밀리
    """
    if family not in FAMILIES:
        raise ValueError(f"알 수 없는 행렬 패밀리: {family} (지원: {', '.join(FAMILIES)})")
    return gen_poisson(FAMILIES[family], m, coeff_seed)
