"""
실험 명령 모듈

gen / train / eval / crossscale / dropout / analyze 명령의 본체.
각 명령은 ExperimentConfig를 받아 산출물을 쓰고 결과 요약 사전을 반환합니다.
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from src.gnn import GnnConfig, GnnModel, init_correction_model, init_model, load_checkpoint
from src.precond import (
    PrecondKind,
    build_preconditioner,
    dropout_eps_for_reduction,
    factor_relative_error,
    ic0_factor,
)
from src.sparse import SparseCoo, derive_seed, gen_family, read_matrix_market
from src.train import DatasetSpec, TrainConfig, load_split, rhs_vector, train, write_dataset

from .benchmark import BenchmarkSettings, evaluate_matrices, run_method, summarize
from .config import ExperimentConfig
from .reporting import provenance, write_json, write_table

logger = logging.getLogger(__name__)

LEARNED_METHODS = ("nic", "gnnic")
CROSSSCALE_STREAM = 11
ZERO_ERROR_FLOOR = 1e-16


def _load_models(methods: Sequence[str], checkpoints: Dict[str, Any]) -> Dict[str, GnnModel]:
    """
    학습 방법별 체크포인트 로드

    Raises:
        ValueError: 학습 방법에 체크포인트가 지정되지 않은 경우
    """
    models = {}
    for method in methods:
        if method not in LEARNED_METHODS:
            continue
        path = (checkpoints or {}).get(method)
        if not path:
            raise ValueError(f"{method} 평가에는 체크포인트가 필요합니다 (checkpoints.{method})")
        models[method], _ = load_checkpoint(path)
    return models


def _methods(section: Dict[str, Any], default: Sequence[str]) -> List[str]:
    methods = [PrecondKind(m).value for m in section.get("methods", default)]
    if not methods:
        raise ValueError("평가할 방법이 없습니다")
    return methods


def _single_matrix(section: Dict[str, Any]) -> Tuple[str, SparseCoo]:
    """matrix 경로가 있으면 읽고, 없으면 family / m / coeff_seed로 생성"""
    if section.get("matrix"):
        path = Path(section["matrix"])
        return path.stem, read_matrix_market(path)
    family = section.get("family", "poisson2d")
    m = int(section.get("m", 64))
    return f"{family}-m{m}", gen_family(family, m, section.get("coeff_seed"))


def cmd_gen(config: ExperimentConfig) -> Dict[str, Any]:
    """Matrix Market 데이터셋과 매니페스트 생성"""
    section = config.section()
    spec = DatasetSpec.from_dict({**section, "seed": config.seed})
    manifest_path, entries = write_dataset(spec, config.out_path, provenance=provenance(config))
    table = pd.DataFrame([e.to_dict() for e in entries])
    write_table(table, config.out_path, "matrices", config, write_json=False)
    counts = table.groupby("split").size().to_dict() if not table.empty else {}
    return {"manifest": str(manifest_path), "matrices": len(entries), "splits": counts}


def cmd_train(config: ExperimentConfig, resume: Optional[Union[str, Path]] = None) -> Dict[str, Any]:
    """GNN 학습, 최적 체크포인트와 JSONL 로그 저장"""
    section = config.section()
    dataset = section.get("dataset") or {}
    if isinstance(dataset, str):
        dataset = {"path": dataset}
    cfg = TrainConfig.from_dict({
        **section,
        "seed": config.seed,
        "threads": config.threads,
        "mode": config.mode or section.get("mode", "gnnic"),
        "progress": config.progress,
        "dataset": dataset,
    })
    gnn_config = GnnConfig.from_dict(config.settings.get("model"))
    init_seed = cfg.init_seed if cfg.init_seed is not None else cfg.seed
    if cfg.mode == "gnnic":
        model = init_correction_model(gnn_config, seed=init_seed, diag_init=cfg.correction_init)
    else:
        model = init_model(gnn_config, seed=init_seed)
    logger.info(f"모델: {model}")

    best, log = train(model, cfg, out_dir=config.out_path, resume_from=resume,
                      provenance=provenance(config))

    validation = pd.DataFrame([
        {k: r[k] for k in ("epoch", "mean_iterations", "converged", "samples")}
        for r in log.validation_records
    ])
    write_table(validation, config.out_path, "train_validation", config)
    write_json({"best_epoch": log.best_epoch, "param_count": best.param_count, "mode": cfg.mode},
               config.out_path / "train_summary.json", config)
    return {
        "checkpoint": str(config.out_path / "checkpoint_best.json"),
        "log": str(config.out_path / "train_log.jsonl"),
        "best_epoch": log.best_epoch,
        "param_count": best.param_count,
    }


def cmd_eval(config: ExperimentConfig) -> Dict[str, Any]:
    """테스트 행렬 × 방법 비교표"""
    section = config.section()
    methods = _methods(section, [k.value for k in PrecondKind])
    models = _load_models(methods, section.get("checkpoints", {}))
    settings = BenchmarkSettings.from_dict(section)

    source = section.get("dataset")
    if not source:
        raise ValueError("eval.dataset (데이터셋 디렉터리 또는 생성기 명세)가 필요합니다")
    pairs = load_split(source, section.get("split", "test"))
    if section.get("limit"):
        pairs = pairs[:int(section["limit"])]
    if not pairs:
        raise ValueError("평가할 행렬이 없습니다")

    matrices = [
        ({"matrix": entry.sample_id, "nnz_lower": (a.nnz + a.n_rows) // 2}, a, rhs_vector(a.n_rows, config.seed, i))
        for i, (entry, a) in enumerate(pairs)
    ]
    runs = evaluate_matrices(matrices, methods, models, settings, threads=config.threads, progress=config.progress)
    summary = summarize(runs)
    distribution = runs.pivot(index="matrix", columns="method", values="iterations")
    distribution = distribution[[m for m in methods if m in distribution.columns]].reset_index()

    out = config.out_path
    write_table(runs, out, "eval_runs", config)
    write_table(summary, out, "eval_summary", config)
    write_table(distribution, out, "eval_iterations", config)
    for _, row in summary.iterrows():
        logger.info(
            f"{row['method']:>7}: 반복 {row['iterations']:.2f}, P {row['p_time']:.4f}s, "
            f"CG {row['cg_time']:.4f}s, Total {row['total_time']:.4f}s"
        )
    return {"runs": runs, "summary": summary}


def cmd_crossscale(config: ExperimentConfig) -> Dict[str, Any]:
    """
    고정 체크포인트의 크기별 일반화 표

    dataset이 지정되면 그 분할(기본 test)에 있는 크기는 eval과 같은 행렬 / 우변을 쓰고,
    나머지 크기는 스트림 11에서 생성합니다.
    """
    section = config.section()
    methods = _methods(section, ["ic0", "nic", "gnnic"])
    models = _load_models(methods, section.get("checkpoints", {}))
    settings = BenchmarkSettings.from_dict(section)
    family = section.get("family", "poisson2d")
    sizes = [int(m) for m in section.get("sizes", [32, 64, 128])]
    samples = int(section.get("samples", 1))
    random_coefficients = section.get("random_coefficients", True)

    shared: Dict[int, List[Tuple[int, Any, SparseCoo]]] = {}
    if section.get("dataset"):
        for i, (entry, a) in enumerate(load_split(section["dataset"], section.get("split", "test"))):
            if entry.family == family:
                shared.setdefault(entry.m, []).append((i, entry, a))

    matrices = []
    index = 0
    for m in sizes:
        if m in shared:
            for i, entry, a in shared[m][:samples]:
                info = {"matrix": entry.sample_id, "m": m, "nnz_lower": (a.nnz + a.n_rows) // 2}
                matrices.append((info, a, rhs_vector(a.n_rows, config.seed, i)))
            continue
        for i in range(samples):
            coeff_seed = derive_seed(config.seed, CROSSSCALE_STREAM, m, i) if random_coefficients else None
            a = gen_family(family, m, coeff_seed)
            info = {"matrix": f"{family}-m{m}-{i:04d}", "m": m, "nnz_lower": (a.nnz + a.n_rows) // 2}
            matrices.append((info, a, rhs_vector(a.n_rows, config.seed, index)))
            index += 1

    runs = evaluate_matrices(matrices, methods, models, settings, threads=config.threads, progress=config.progress)
    table = summarize(runs, by=("m", "n", "nnz_a", "method")).rename(columns={"nnz_a": "nnz"})
    if "ic0" in methods:
        reference = table[table["method"] == "ic0"].set_index("m")["iterations"]
        table["ratio_to_ic0"] = table["iterations"] / table["m"].map(reference)

    out = config.out_path
    write_table(runs, out, "crossscale_runs", config)
    write_table(table, out, "crossscale", config)
    return {"runs": runs, "table": table}


def cmd_dropout(config: ExperimentConfig) -> Dict[str, Any]:
    """
    fill-in dropout 기준별 nnz / 반복 수 / 시간 표

    target_reduction이 있으면 그 nnz 감소율에 처음 도달하는 eps를 격자에 추가합니다.
    """
    section = config.section()
    method = PrecondKind(section.get("method", "ic0")).value
    if method not in ("ic0",) + LEARNED_METHODS:
        raise ValueError(f"dropout은 인자형 전처리기에만 적용됩니다: {method}")
    models = _load_models([method], {method: section.get("checkpoint")} if section.get("checkpoint") else {})
    settings = BenchmarkSettings.from_dict(section)
    eps_set = {float(e) for e in section.get("eps", [0.0, 0.005, 0.01, 0.02, 0.05])}

    name, a = _single_matrix(section)
    target = section.get("target_reduction", 0.2)
    target_eps = None
    if target is not None:
        target = float(target)
        target_eps = dropout_eps_for_reduction(build_preconditioner(PrecondKind(method), a, models.get(method)), target)
        eps_set.add(target_eps)
    eps_list = sorted(eps_set)

    b = rhs_vector(a.n_rows, config.seed, 0)
    baseline = run_method(PrecondKind(method), a, b, models.get(method), settings)
    rows = []
    for eps in eps_list:
        row = run_method(PrecondKind(method), a, b, models.get(method), settings, dropout_eps=eps)
        row.update({
            "matrix": name,
            "eps": eps,
            "nnz_reduction": (baseline["precond_nnz"] - row["precond_nnz"]) / baseline["precond_nnz"],
            "iteration_increase": row["iterations"] / baseline["iterations"] - 1.0,
            "target_eps": eps == target_eps,
        })
        rows.append(row)
        logger.info(f"eps={eps:g}: nnz {row['precond_nnz']}, 반복 {row['iterations']}")

    columns = ["matrix", "method", "eps", "target_eps", "precond_nnz", "nnz_reduction", "iterations",
               "iteration_increase", "p_time", "cg_time", "total_time", "tri_solve_time_per_iter", "converged"]
    table = pd.DataFrame(rows)[columns].rename(columns={"precond_nnz": "nnz"})
    if target_eps is not None:
        hit = table[table["target_eps"]].iloc[0]
        logger.info(
            f"nnz {target:.0%} 감소 eps={target_eps:.4g}: 실제 감소 {hit['nnz_reduction']:.1%}, "
            f"반복 증가 {hit['iteration_increase']:+.1%}"
        )
    write_table(table, config.out_path, "dropout", config,
                extra={"baseline": {k: baseline[k] for k in ("precond_nnz", "iterations")},
                       "target_reduction": target, "target_eps": target_eps})
    return {"table": table, "baseline": baseline, "target_eps": target_eps}


def _histogram(values: np.ndarray, edges: np.ndarray) -> np.ndarray:
    finite = values[np.isfinite(values)]
    counts, _ = np.histogram(np.log10(np.maximum(finite, ZERO_ERROR_FLOOR)), bins=edges)
    return counts


def cmd_analyze(config: ExperimentConfig) -> Dict[str, Any]:
    """학습 인자와 IC(0) 인자의 원소별 상대 오차 분석"""
    section = config.section()
    methods = _methods(section, list(LEARNED_METHODS))
    models = _load_models(methods, section.get("checkpoints", {}))
    bins = int(section.get("bins", 40))
    name, a = _single_matrix(section)
    l_ic, _ = ic0_factor(a)

    summary_rows, entry_frames, errors = [], [], {}
    for method in methods:
        p = build_preconditioner(PrecondKind(method), a, models.get(method))
        diag_stats, offdiag_stats = factor_relative_error(p.factor, l_ic)
        for part, stats in (("diagonal", diag_stats), ("offdiagonal", offdiag_stats)):
            summary_rows.append({"matrix": name, "method": method, "part": part,
                                 **{k: stats[k] for k in ("count", "mean", "max", "median")}})
            errors[(method, part)] = stats["values"]

        diag = l_ic.diag_mask
        rel = np.empty(l_ic.nnz)
        rel[diag] = diag_stats["values"]
        rel[~diag] = offdiag_stats["values"]
        entry_frames.append(pd.DataFrame({
            "method": method,
            "row": l_ic.matrix.rows,
            "col": l_ic.matrix.cols,
            "part": np.where(diag, "diagonal", "offdiagonal"),
            "l_ic": l_ic.values,
            "l_pred": p.factor.values,
            "rel_error": rel,
            "log10_rel_error": np.log10(np.maximum(rel, ZERO_ERROR_FLOOR)),
        }))
        logger.info(
            f"{method}: 대각 평균 {diag_stats['mean']:.3%}, 비대각 평균 {offdiag_stats['mean']:.3%}"
        )

    all_finite = np.concatenate([v[np.isfinite(v)] for v in errors.values()] or [np.zeros(0)])
    logs = np.log10(np.maximum(all_finite, ZERO_ERROR_FLOOR)) if all_finite.size else np.zeros(1)
    edges = np.linspace(logs.min(), logs.max() if logs.max() > logs.min() else logs.min() + 1.0, bins + 1)
    hist_rows = []
    for (method, part), values in errors.items():
        for low, high, count in zip(edges[:-1], edges[1:], _histogram(values, edges)):
            hist_rows.append({"method": method, "part": part, "log10_low": low, "log10_high": high,
                              "count": int(count)})

    out = config.out_path
    summary = pd.DataFrame(summary_rows)
    write_table(summary, out, "analyze_summary", config)
    # 방법별 분포: 행 수 = nnz_lower
    for method, frame in zip(methods, entry_frames):
        write_table(frame, out, f"analyze_histogram_{method}", config, write_json=False)
    write_table(pd.DataFrame(hist_rows), out, "analyze_bins", config, write_json=False)
    return {"summary": summary, "entries": pd.concat(entry_frames, ignore_index=True)}


COMMANDS = {
    "gen": cmd_gen,
    "train": cmd_train,
    "eval": cmd_eval,
    "crossscale": cmd_crossscale,
    "dropout": cmd_dropout,
    "analyze": cmd_analyze,
}
