"""
日志配置模块
控制台输出认证流程的阶段信息，文件记录逐样本的调试细节
"""
import os
import sys
from datetime import datetime
from pathlib import Path
from typing import Dict, Optional, Tuple

from loguru import logger

CONSOLE_FORMAT = (
    "<green>{time:HH:mm:ss}</green> | <blue>{elapsed}</blue> | "
    "<level>{level: <8}</level> | <cyan>{name}:{function}</cyan> - <level>{message}</level>"
)
FILE_FORMAT = "{time:YYYY-MM-DD HH:mm:ss} | {elapsed} | {level: <8} | {name}:{function}:{line} - {message}"


def log_file_path(root: Path, app_name: str, now: Optional[datetime] = None) -> Path:
    """logs/<app>/<日期>/<小时>/<分秒>.log"""
    now = now or datetime.now()
    log_dir = Path(root) / "logs" / app_name / now.strftime("%Y-%m-%d") / now.strftime("%H")
    return log_dir / f"{now.strftime('%M%S')}.log"


def setup_logger(app_name: str = "mixcert",
                 log_root: Optional[Path] = None,
                 console_output: bool = True,
                 file_output: bool = True,
                 level: Optional[str] = None) -> Tuple[object, Dict[str, str]]:
    """配置 Loguru 日志系统

    认证输出目录中不会写入日志；日志文件位于 log_root 之下，
    需要逐字节可复现的输出时用 file_output=False 关闭文件日志。

    Args:
        app_name: 应用名称，用于日志目录
        log_root: 日志根目录，默认为当前工作目录
        console_output: 是否输出到控制台 (stderr)
        file_output: 是否写入日志文件
        level: 控制台日志级别，默认读取环境变量 MIXCERT_LOG_LEVEL，否则为 INFO

    Returns:
        tuple: (logger, config_info)，config_info 含 app_name、log_file、log_dir、level
    """
    level = (level or os.environ.get("MIXCERT_LOG_LEVEL", "INFO")).upper()
    logger.remove()

    if console_output:
        logger.add(sys.stderr, level=level, format=CONSOLE_FORMAT)

    config_info = {"app_name": app_name, "log_file": "", "log_dir": "", "level": level}

    if file_output:
        log_file = log_file_path(log_root or Path.cwd(), app_name)
        log_file.parent.mkdir(parents=True, exist_ok=True)
        logger.add(
            str(log_file),
            level="DEBUG",
            rotation="10 MB",
            retention="30 days",
            compression="zip",
            encoding="utf-8",
            format=FILE_FORMAT,
            enqueue=True,
        )
        config_info["log_file"] = str(log_file)
        config_info["log_dir"] = str(log_file.parent)

    logger.debug(f"日志已配置: 控制台级别 {level}, 文件 {config_info['log_file'] or '无'}")
    return logger, config_info


def get_logger() -> object:
    """获取当前配置的logger实例"""
    return logger
