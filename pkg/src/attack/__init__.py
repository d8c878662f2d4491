"""参考图对抗攻击与随机噪声对照"""

from .refsr_adv import (
    AttackConfig,
    AttackResult,
    attack_stream,
    clean_baseline,
    destruction_loss,
    init_delta,
    pgd_step,
    project_delta,
    random_noise_reference,
    run_attack,
    run_attack_schedule,
    save_attack_artifacts,
)

__all__ = [
    "AttackConfig",
    "AttackResult",
    "attack_stream",
    "clean_baseline",
    "destruction_loss",
    "init_delta",
    "pgd_step",
    "project_delta",
    "random_noise_reference",
    "run_attack",
    "run_attack_schedule",
    "save_attack_artifacts",
]
