"""不变量自检（verify 子命令）

每项检查返回一个 CheckResult；任一失败时 CLI 以退出码 3 结束。
"""

import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Tuple

import numpy as np

from src.attack.refsr_adv import AttackConfig, destruction_loss, init_delta, run_attack
from src.metrics.quality import psnr, ssim
from src.model.refsr_net import compute_key_features, forward_graph, init_params
from src.model.schemas import MatchVariant, ModelConfig
from src.tensor import OpKind, PrimitiveRegistry, Tensor, check_primitive, finite_diff_grad, relative_error
from src.tensor import ComputationRecord, grad_of
from src.utils.logger import logger
from src.utils.rng import stream

PRIMITIVE_TOLERANCE = 1e-5
END_TO_END_TOLERANCE = 1e-4


@dataclass
class CheckResult:
    name: str
    passed: bool
    message: str
    details: Dict[str, Any] = field(default_factory=dict)
    seconds: float = 0.0


def tiny_model_config(variant: MatchVariant = MatchVariant.FULLRES, channels: int = 4) -> ModelConfig:
    """自检与测试用的小模型"""
    return ModelConfig(feature_channels=channels, variant=variant)


def lowpass_pair(rng: np.random.Generator, size: int = 32) -> Tuple[np.ndarray, np.ndarray]:
    """构造 (ref, 扰动)：扰动的 ×1/4 双三次下采样恰好为零

    ref 取值为 k/256，扰动沿行方向每 4 像素为 [1, 0, 0, −1]/64，
    ×1/4 核权重为 (−1/16, 9/16, 9/16, −1/16)，全部运算都是精确的二进制小数。
    """
    if size % 4 != 0:
        raise ValueError(f"size must be a multiple of 4, got {size}")
    ref = rng.integers(32, 224, size=(size, size, 3)) / 256.0
    rows = np.tile([1.0, 0.0, 0.0, -1.0], size // 4) / 64.0
    cols = rng.choice([-1.0, 1.0], size=(size, 3))
    return ref, rows[:, None, None] * cols[None, :, :]


# =============================================================================
# 各项检查
# =============================================================================

def check_registry(seed: int) -> CheckResult:
    missing = PrimitiveRegistry.missing()
    return CheckResult(
        "primitive registry",
        not missing,
        "all op kinds registered" if not missing else f"missing: {[k.value for k in missing]}",
    )


def check_primitive_gradients(seed: int, cases: int = 20) -> CheckResult:
    worst: Dict[str, float] = {}
    for index, kind in enumerate(OpKind):
        errors = [check_primitive(kind, stream("verify_grad", seed, index, case)) for case in range(cases)]
        worst[kind.value] = max(errors)
    failed = {k: v for k, v in worst.items() if not v < PRIMITIVE_TOLERANCE}
    top = max(worst, key=worst.get)
    return CheckResult(
        "primitive gradients",
        not failed,
        f"{len(worst)} ops x {cases} cases, worst {top} rel. error {worst[top]:.2e}"
        if not failed else f"failed: {failed}",
        details=worst,
    )


def check_end_to_end_gradient(seed: int) -> CheckResult:
    """破坏损失对 8×8 参考图的梯度 vs 中心差分"""
    rng = stream("verify_e2e", seed)
    worst = 0.0
    for variant in MatchVariant:
        config = tiny_model_config(variant)
        params = init_params(config, seed)
        tensors = params.as_constants()
        lr = Tensor.constant(rng.uniform(0.1, 0.9, size=(2, 2, 3)))
        ref0 = rng.uniform(0.1, 0.9, size=(8, 8, 3))
        baseline = forward_graph(tensors, config, lr, Tensor.constant(ref0)).sr
        ref = ref0 + init_delta(ref0, 8 / 255, rng)

        def loss_of(x: Tensor) -> Tensor:
            return destruction_loss(forward_graph(tensors, config, lr, x).sr, baseline)

        record = ComputationRecord()
        leaf = record.leaf(ref)
        analytic = grad_of(loss_of(leaf), leaf)
        record.clear()
        numeric = finite_diff_grad(loss_of, Tensor.constant(ref)).data
        worst = max(worst, relative_error(analytic, numeric))
    return CheckResult(
        "end-to-end gradient",
        worst < END_TO_END_TOLERANCE,
        f"destruction loss wrt 8x8 ref, rel. error {worst:.2e}",
    )


def check_projection(seed: int, iterations: int = 10) -> CheckResult:
    rng = stream("verify_projection", seed)
    config = tiny_model_config(MatchVariant.FULLRES)
    params = init_params(config, seed)
    attack = AttackConfig(epsilon=8 / 255, iterations=iterations, seed=seed)
    lr = rng.uniform(0.0, 1.0, size=(4, 4, 3))
    # 包含 0 / 1 饱和像素，覆盖范围投影
    ref = np.clip(rng.uniform(-0.2, 1.2, size=(16, 16, 3)), 0.0, 1.0)
    violations = []

    def observe(iteration: int, delta: np.ndarray, loss: float) -> None:
        adv = ref + delta
        bad = int(np.sum(np.abs(delta) > attack.epsilon) + np.sum((adv < 0.0) | (adv > 1.0)))
        if bad:
            violations.append((iteration, bad))

    run_attack(params, config, lr, ref, attack, sample_id="verify", on_step=observe)
    return CheckResult(
        "projection exactness",
        not violations,
        f"{iterations} PGD steps, {len(violations)} iterations with violations",
    )


def check_metric_oracles(seed: int) -> CheckResult:
    rng = stream("verify_metrics", seed)
    a = rng.uniform(0.2, 0.8, size=(16, 16, 3))
    problems = []
    if abs(psnr(a, a + 0.1) - 20.0) > 0.01:
        problems.append("psnr uniform 0.1")
    if abs(ssim(a, a) - 1.0) > 1e-12:
        problems.append("ssim(a, a)")
    expected = (2 * 0.25 * 0.75 + 1e-4) / (0.25 ** 2 + 0.75 ** 2 + 1e-4)
    if abs(ssim(np.full((16, 16, 3), 0.25), np.full((16, 16, 3), 0.75)) - expected) > 1e-6:
        problems.append("ssim constant images")
    return CheckResult("metric oracles", not problems, "psnr / ssim closed forms" if not problems else str(problems))


def check_low_pass(seed: int) -> CheckResult:
    rng = stream("verify_lowpass", seed)
    ref, perturbation = lowpass_pair(rng)
    identical = {}
    for variant in MatchVariant:
        config = tiny_model_config(variant)
        tensors = init_params(config, seed).as_constants()
        clean = compute_key_features(tensors, config, Tensor.constant(ref)).data
        perturbed = compute_key_features(tensors, config, Tensor.constant(ref + perturbation)).data
        identical[variant.value] = bool(np.array_equal(clean, perturbed))
    passed = identical["downsample"] and not identical["fullres"]
    return CheckResult(
        "low-pass invariant",
        passed,
        f"key features unchanged: downsample={identical['downsample']}, fullres={identical['fullres']}",
    )


def check_determinism(seed: int) -> CheckResult:
    rng = stream("verify_determinism", seed)
    config = tiny_model_config(MatchVariant.DOWNSAMPLE)
    params = init_params(config, seed)
    lr = rng.uniform(0.0, 1.0, size=(4, 4, 3))
    ref = rng.uniform(0.0, 1.0, size=(16, 16, 3))
    attack = AttackConfig(iterations=5, seed=seed)
    first = run_attack(params, config, lr, ref, attack, sample_id="det")
    second = run_attack(params, config, lr, ref, attack, sample_id="det")
    same = np.array_equal(first.delta, second.delta) and first.loss_trace == second.loss_trace
    return CheckResult("determinism", same, "repeated attacks are bit-identical" if same else "attack runs differ")


CHECKS: List[Callable[[int], CheckResult]] = [
    check_registry,
    check_primitive_gradients,
    check_end_to_end_gradient,
    check_projection,
    check_metric_oracles,
    check_low_pass,
    check_determinism,
]


def run_verification(seed: int = 0) -> List[CheckResult]:
    """依次执行全部检查；检查内部抛出的异常记为失败"""
    results = []
    for check in CHECKS:
        started = time.perf_counter()
        try:
            result = check(seed)
        except Exception as e:
            logger.error(f"Check {check.__name__} raised: {e}")
            result = CheckResult(check.__name__, False, f"raised {type(e).__name__}: {e}")
        result.seconds = time.perf_counter() - started
        results.append(result)
    return results


def print_report(results: List[CheckResult]) -> None:
    """用 rich 表格打印自检结果"""
    try:
        from rich.console import Console
        from rich.table import Table
    except ImportError:
        for r in results:
            print(f"[{'PASS' if r.passed else 'FAIL'}] {r.name}: {r.message} ({r.seconds:.2f}s)")
        return

    table = Table(title="RefSR-Adv invariant suite")
    table.add_column("check")
    table.add_column("status")
    table.add_column("detail")
    table.add_column("time", justify="right")
    for r in results:
        status = "[green]PASS[/green]" if r.passed else "[red]FAIL[/red]"
        table.add_row(r.name, status, r.message, f"{r.seconds:.2f}s")
    Console().print(table)
