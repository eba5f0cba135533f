"""
Matrix Market 입출력 모듈

좌표(coordinate) 형식, real 필드, general / symmetric 헤더를 지원합니다.
헤더와 각 줄의 형식은 직접 검사해 줄 번호와 함께 보고하고, 숫자 본문은 scipy.io로 읽고 씁니다.
"""

import io
import logging
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
import scipy.sparse as sp
from scipy.io import mmread, mmwrite

from .matrix import SparseCoo, SparseFormatError, lower_triangle

logger = logging.getLogger(__name__)

HEADER_PREFIX = "%%MatrixMarket"
VALUE_PRECISION = 17


class MatrixMarketError(SparseFormatError):
    """Matrix Market 파싱 오류 (줄 번호 포함)"""

    def __init__(self, message: str, line_number: Optional[int] = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"{line_number}번째 줄: {message}"
        super().__init__(message)


def _check_header(lines: List[str]) -> str:
    """헤더 검사 후 대칭 유형 반환"""
    if not lines:
        raise MatrixMarketError("빈 파일입니다", 1)
    header = lines[0].split()
    if len(header) != 5 or header[0] != HEADER_PREFIX:
        raise MatrixMarketError(f"잘못된 헤더: {lines[0]!r}", 1)
    obj, fmt, field, symmetry = (token.lower() for token in header[1:])
    if obj != "matrix" or fmt != "coordinate":
        raise MatrixMarketError(f"coordinate 행렬만 지원합니다: {obj} {fmt}", 1)
    if field != "real":
        raise MatrixMarketError(f"real 필드만 지원합니다: {field}", 1)
    if symmetry not in ("general", "symmetric"):
        raise MatrixMarketError(f"지원하지 않는 대칭 유형: {symmetry}", 1)
    return symmetry


def _check_body(lines: List[str], symmetry: str) -> Tuple[int, int]:
    """
    크기 줄과 항목 줄 검사

    Returns:
        (n_rows, n_cols)
    """
    line_no = 1
    size_line = None
    while line_no < len(lines):
        stripped = lines[line_no].strip()
        line_no += 1
        if stripped and not stripped.startswith("%"):
            size_line = stripped
            break
    if size_line is None:
        raise MatrixMarketError("크기 줄이 없습니다", line_no)

    try:
        n_rows, n_cols, nnz = (int(token) for token in size_line.split())
    except ValueError:
        raise MatrixMarketError(f"잘못된 크기 줄: {size_line!r}", line_no)
    if n_rows < 0 or n_cols < 0 or nnz < 0:
        raise MatrixMarketError(f"크기와 항목 수는 0 이상이어야 합니다: {size_line!r}", line_no)

    count = 0
    for idx in range(line_no, len(lines)):
        stripped = lines[idx].strip()
        if not stripped or stripped.startswith("%"):
            continue
        number = idx + 1
        if count >= nnz:
            raise MatrixMarketError(f"항목이 선언된 개수({nnz})보다 많습니다", number)
        parts = stripped.split()
        if len(parts) != 3:
            raise MatrixMarketError(f"항목은 'i j value' 형식이어야 합니다: {stripped!r}", number)
        try:
            i, j = int(parts[0]), int(parts[1])
            float(parts[2])
        except ValueError:
            raise MatrixMarketError(f"숫자로 변환할 수 없습니다: {stripped!r}", number)
        if not (1 <= i <= n_rows and 1 <= j <= n_cols):
            raise MatrixMarketError(f"인덱스 범위 초과: ({i}, {j})", number)
        if symmetry == "symmetric" and i < j:
            raise MatrixMarketError(f"symmetric 파일은 하삼각 항목만 허용합니다: ({i}, {j})", number)
        count += 1

    if count != nnz:
        raise MatrixMarketError(f"항목 수 불일치: 선언 {nnz}, 실제 {count}", len(lines))
    return n_rows, n_cols


def read_matrix_market(path: Union[str, Path]) -> SparseCoo:
    """
    Matrix Market 파일 읽기

    Args:
        path: .mtx 파일 경로

    Returns:
        SparseCoo (symmetric 헤더는 전체 대칭 저장으로 확장)

    Raises:
        FileNotFoundError: 파일이 존재하지 않는 경우
        MatrixMarketError: 헤더 / 크기 / 항목 오류
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Matrix Market 파일을 찾을 수 없습니다: {path}")

    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    symmetry = _check_header(lines)
    n_rows, n_cols = _check_body(lines, symmetry)

    # symmetric 확장은 mmread가 수행
    coo = sp.coo_matrix(mmread(str(path)))
    try:
        matrix = SparseCoo.from_triples(
            n_rows, n_cols,
            coo.row.astype(np.int64), coo.col.astype(np.int64), coo.data.astype(np.float64),
        )
    except SparseFormatError as e:
        raise MatrixMarketError(str(e)) from e

    logger.debug(f"Matrix Market 읽기: {path} ({matrix.n_rows}x{matrix.n_cols}, nnz={matrix.nnz})")
    return matrix


def write_matrix_market(
    m: SparseCoo,
    path: Union[str, Path],
    symmetric: Optional[bool] = None,
    comment: Optional[str] = None,
) -> Path:
    """
    Matrix Market 파일 쓰기 (값은 17자리 유효숫자)

    Args:
        m: 저장할 행렬
        path: 출력 경로
        symmetric: None이면 자동 판별, True면 하삼각만 symmetric 헤더로 저장
        comment: 헤더 다음에 넣을 주석 (여러 줄 가능, UTF-8)

    Returns:
        저장된 파일 경로
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    if symmetric is None:
        symmetric = m.n_rows == m.n_cols and m.is_symmetric()
    stored = lower_triangle(m) if symmetric else m
    coo = sp.coo_matrix((stored.values, (stored.rows, stored.cols)), shape=(m.n_rows, m.n_cols))

    buffer = io.BytesIO()
    mmwrite(buffer, coo, field="real", precision=VALUE_PRECISION,
            symmetry="symmetric" if symmetric else "general")
    written = buffer.getvalue().decode("ascii").splitlines()

    # 주석은 UTF-8로 직접 기록
    lines = [written[0]]
    if comment:
        lines.extend(f"% {line}" for line in comment.splitlines())
    lines.extend(line for line in written[1:] if not line.startswith("%"))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    logger.debug(f"Matrix Market 저장: {path}")
    return path
