"""实验编排、报告输出与命令行"""

from .schemas import Condition, ExperimentConfig, ReportRow, VictimSpec
from .runner import (
    SampleJob,
    build_jobs,
    cmd_attack_eval,
    cmd_gen_data,
    cmd_index_folder,
    cmd_noise_baseline,
    cmd_train,
    default_victims,
    evaluate_sample,
    run_jobs,
)
from .reporting import ReportPaths, summarize, write_reports, write_rows_csv
from .verify import CheckResult, run_verification
from .victims import (
    ALL_VICTIMS,
    TEST_MANIFEST,
    TRAIN_MANIFEST,
    VictimRecipe,
    checkpoint_path,
    cmd_train_victims,
    victims_present,
)

__all__ = [
    "Condition",
    "ExperimentConfig",
    "ReportRow",
    "VictimSpec",
    "SampleJob",
    "build_jobs",
    "cmd_attack_eval",
    "cmd_gen_data",
    "cmd_index_folder",
    "cmd_noise_baseline",
    "cmd_train",
    "default_victims",
    "evaluate_sample",
    "run_jobs",
    "ReportPaths",
    "summarize",
    "write_reports",
    "write_rows_csv",
    "CheckResult",
    "run_verification",
    "ALL_VICTIMS",
    "TEST_MANIFEST",
    "TRAIN_MANIFEST",
    "VictimRecipe",
    "checkpoint_path",
    "cmd_train_victims",
    "victims_present",
]
