"""
순차 희소 커널 모듈

행 순서에 의존하는 커널들(CSR 행렬-벡터 곱, 전진/후진 대입, IC(0) 분해)을
numba로 컴파일합니다. 모든 함수는 int64 인덱스와 float64 값을 가정합니다.
"""

import math

import numba
import numpy as np


@numba.njit(cache=True)
def csr_matvec_kernel(row_ptr, cols, values, x):
    n_rows = row_ptr.shape[0] - 1
    y = np.zeros(n_rows, dtype=np.float64)
    for i in range(n_rows):
        acc = 0.0
        for k in range(row_ptr[i], row_ptr[i + 1]):
            acc += values[k] * x[cols[k]]
        y[i] = acc
    return y


@numba.njit(cache=True)
def forward_substitution_kernel(row_ptr, cols, values, b):
    """
    하삼각 CSR 전진 대입. 대각 원소는 각 행의 마지막 항목이어야 함

    Returns:
        (x, bad_row) - bad_row == -1 이면 성공
    """
    n = row_ptr.shape[0] - 1
    x = np.zeros(n, dtype=np.float64)
    for i in range(n):
        start, end = row_ptr[i], row_ptr[i + 1]
        if end == start or cols[end - 1] != i or values[end - 1] == 0.0:
            return x, i
        acc = b[i]
        for k in range(start, end - 1):
            acc -= values[k] * x[cols[k]]
        x[i] = acc / values[end - 1]
    return x, -1


@numba.njit(cache=True)
def backward_substitution_kernel(row_ptr, cols, values, b):
    """
    상삼각 CSR 후진 대입. 대각 원소는 각 행의 첫 항목이어야 함

    Returns:
        (x, bad_row) - bad_row == -1 이면 성공
    """
    n = row_ptr.shape[0] - 1
    x = np.zeros(n, dtype=np.float64)
    for i in range(n - 1, -1, -1):
        start, end = row_ptr[i], row_ptr[i + 1]
        if end == start or cols[start] != i or values[start] == 0.0:
            return x, i
        acc = b[i]
        for k in range(start + 1, end):
            acc -= values[k] * x[cols[k]]
        x[i] = acc / values[start]
    return x, -1


@numba.njit(cache=True)
def ic0_kernel(row_ptr, cols, values, shift):
    """
    하삼각 패턴에 제한된 up-looking IC(0) 분해

    Args:
        row_ptr, cols, values: A의 하삼각 부분 (CSR, 행 내 열 오름차순, 대각은 행의 마지막)
        shift: 대각에 더할 이동량 (A + shift*I)

    Returns:
        (L values, fail_row) - fail_row == -1 이면 성공
    """
    n = row_ptr.shape[0] - 1
    out = values.copy()
    for i in range(n):
        start, end = row_ptr[i], row_ptr[i + 1]
        if end == start or cols[end - 1] != i:
            return out, i
        for p in range(start, end - 1):
            k = cols[p]
            # 행 i와 행 k의 공통 열 j < k 에 대한 희소 내적
            acc = out[p]
            a_ptr, a_end = start, p
            b_ptr, b_end = row_ptr[k], row_ptr[k + 1] - 1
            while a_ptr < a_end and b_ptr < b_end:
                ca = cols[a_ptr]
                cb = cols[b_ptr]
                if ca == cb:
                    acc -= out[a_ptr] * out[b_ptr]
                    a_ptr += 1
                    b_ptr += 1
                elif ca < cb:
                    a_ptr += 1
                else:
                    b_ptr += 1
            out[p] = acc / out[row_ptr[k + 1] - 1]
        pivot = out[end - 1] + shift
        for p in range(start, end - 1):
            pivot -= out[p] * out[p]
        if not pivot > 0.0:
            return out, i
        out[end - 1] = math.sqrt(pivot)
    return out, -1
