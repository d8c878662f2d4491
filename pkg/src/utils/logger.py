"""统一日志管理工具"""

import logging
import sys
from typing import Union

from config import settings

# 配置日志格式
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - [%(filename)s:%(lineno)d] - %(message)s"


def setup_logger(name: str = "refsr_adv", level: Union[int, str] = logging.INFO) -> logging.Logger:
    """初始化并配置日志对象"""
    logger = logging.getLogger(name)

    # 如果已经配置过处理器，则直接返回
    if logger.handlers:
        return logger

    logger.setLevel(level)

    try:
        from rich.console import Console
        from rich.logging import RichHandler
        handler = RichHandler(console=Console(stderr=True), rich_tracebacks=True, markup=False, show_path=False)
    except ImportError:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(LOG_FORMAT))

    handler.setLevel(logging.NOTSET)
    logger.addHandler(handler)

    # 避免日志向上传递到根日志记录器
    logger.propagate = False

    return logger


def set_level(level: Union[int, str]) -> None:
    """运行时调整日志级别（CLI --log-level）"""
    if isinstance(level, str):
        level = level.upper()
    logger.setLevel(level)


# 创建全局默认日志对象
logger = setup_logger(level=settings.log_level.upper())
