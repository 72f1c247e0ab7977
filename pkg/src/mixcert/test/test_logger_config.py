"""
测试日志配置
"""
from datetime import datetime
from pathlib import Path

from mixcert.core.logger_config import log_file_path, setup_logger


def test_log_file_path_layout():
    """logs/<app>/<日期>/<小时>/<分秒>.log"""
    path = log_file_path(Path("/tmp/root"), "mixcert", datetime(2024, 3, 5, 7, 8, 9))
    assert path == Path("/tmp/root/logs/mixcert/2024-03-05/07/0809.log")


def test_setup_logger_without_file(monkeypatch):
    monkeypatch.setenv("MIXCERT_LOG_LEVEL", "warning")
    _, info = setup_logger(console_output=False, file_output=False)
    assert info["level"] == "WARNING"
    assert info["log_file"] == ""
    assert info["log_dir"] == ""
