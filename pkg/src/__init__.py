"""
Precond Lab

희소 SPD 시스템을 위한 전처리기 실험 도구: IC(0), Jacobi, GNN 직접 예측(NIC),
IC(0) 학습 보정(GnnIC), Hutchinson 손실 학습과 PCG 벤치마크
"""

__version__ = "0.2.1"
__author__ = "Precond Lab Development Team"
