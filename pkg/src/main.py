#!/usr/bin/env python3
"""
Precond Lab
명령행 진입점
"""

import logging
import sys
from functools import wraps
from typing import Any, Callable, Dict

import click

from src.experiments import (
    cmd_analyze,
    cmd_crossscale,
    cmd_dropout,
    cmd_eval,
    cmd_gen,
    cmd_train,
    resolve_config,
)

# 로깅 설정
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)


def common_options(func: Callable) -> Callable:
    """모든 하위 명령 공통 플래그"""
    options = [
        click.option('--config', 'config_path', type=click.Path(exists=True, dir_okay=False),
                     envvar='PRECOND_LAB_CONFIG', help='설정 파일 경로 (YAML)'),
        click.option('--seed', type=int, default=None, help='실행 시드 (설정 파일 값 재정의)'),
        click.option('--out', 'out_dir', type=click.Path(file_okay=False), default=None, help='출력 디렉터리'),
        click.option('--mode', type=click.Choice(['nic', 'gnnic']), default=None, help='학습 전처리기 방식'),
        click.option('--threads', type=int, default=None, help='스레드 수 (시간 측정은 1 필요)'),
        click.option('--verbose', is_flag=True, help='상세 로그 출력'),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def run_command(name: str, runner: Callable[..., Dict[str, Any]]):
    """설정 해석 → 명령 실행 → 오류 시 종료 코드 1"""
    def decorator(func: Callable) -> Callable:
        @wraps(func)
        def wrapper(config_path, seed, out_dir, mode, threads, verbose, **kwargs):
            if verbose:
                logging.getLogger().setLevel(logging.DEBUG)
            try:
                config = resolve_config(name, config_path, seed=seed, out_dir=out_dir, mode=mode, threads=threads)
                logger.info(f"{name} 시작: seed={config.seed}, out={config.out_dir}")
                result = runner(config, **kwargs)
            except Exception as e:
                logger.error(f"❌ {name} 실패: {e}", exc_info=True)
                click.echo(f"\n❌ 실패: {e}", err=True)
                sys.exit(1)
            func(result, **kwargs)
            click.echo(f"\n✅ {name} 완료 → {config.out_dir}")
        return wrapper
    return decorator


@click.group()
def main():
    """희소 SPD 전처리기 실험 도구"""


@main.command()
@common_options
@run_command("gen", cmd_gen)
def gen(result):
    """합성 행렬 데이터셋 생성"""
    click.echo(f"행렬: {result['matrices']}개 {result['splits']}")
    click.echo(f"매니페스트: {result['manifest']}")


@main.command()
@common_options
@click.option('--resume', type=click.Path(exists=True, dir_okay=False), default=None,
              help='checkpoint_last.json에서 학습 재개')
@run_command("train", cmd_train)
def train(result, resume=None):
    """GNN 전처리기 학습"""
    click.echo(f"파라미터: {result['param_count']}개, 최적 에폭: {result['best_epoch']}")
    click.echo(f"체크포인트: {result['checkpoint']}")


@main.command(name="eval")
@common_options
@run_command("eval", cmd_eval)
def eval_(result):
    """전처리기 비교 평가"""
    click.echo(result["summary"].to_string(index=False))


@main.command()
@common_options
@run_command("crossscale", cmd_crossscale)
def crossscale(result):
    """크기별 일반화 평가"""
    click.echo(result["table"].to_string(index=False))


@main.command()
@common_options
@run_command("dropout", cmd_dropout)
def dropout(result):
    """fill-in dropout 연구"""
    click.echo(result["table"].to_string(index=False))


@main.command()
@common_options
@run_command("analyze", cmd_analyze)
def analyze(result):
    """인자 상대 오차 분석"""
    click.echo(result["summary"].to_string(index=False))


if __name__ == '__main__':
    main()
