"""
工具函数模块
提供缓存、并行执行、原子写文件和数值格式化等辅助功能
"""
import os
import threading
import tempfile
from typing import Callable, Iterable, List, Optional, TypeVar
from functools import lru_cache, wraps
from concurrent.futures import ThreadPoolExecutor, as_completed

import numpy as np

from .logger_config import get_logger

logger = get_logger()

T = TypeVar("T")
R = TypeVar("R")

# 写文件锁
_write_lock = threading.Lock()


def thread_safe_cache(maxsize=128):
    """线程安全的缓存装饰器"""
    def decorator(func):
        cached_func = lru_cache(maxsize=maxsize)(func)
        lock = threading.Lock()

        @wraps(func)
        def wrapper(*args, **kwargs):
            with lock:
                return cached_func(*args, **kwargs)

        wrapper.cache_info = cached_func.cache_info
        wrapper.cache_clear = cached_func.cache_clear
        return wrapper
    return decorator


def engine_threads(default: Optional[int] = None) -> int:
    """读取引擎并行度上限

    环境变量 MIXCERT_THREADS 为 0 时表示串行执行。

    Args:
        default: 未设置环境变量时的取值，默认为 CPU 数

    Returns:
        最大工作线程数，0 表示串行
    """
    raw = os.environ.get("MIXCERT_THREADS")
    if raw is None or raw.strip() == "":
        return default if default is not None else (os.cpu_count() or 4)
    try:
        value = int(raw)
    except ValueError:
        logger.warning(f"MIXCERT_THREADS 不是整数: {raw!r}，改为串行执行")
        return 0
    return max(value, 0)


def parallel_map(func: Callable[[T], R], items: Iterable[T],
                 max_workers: Optional[int] = None) -> List[R]:
    """并行映射，结果顺序与输入一致

    Args:
        func: 纯函数
        items: 输入序列
        max_workers: 最大工作线程数，None 时读取 MIXCERT_THREADS，0 或 1 为串行

    Returns:
        与输入顺序一致的结果列表
    """
    items = list(items)
    if max_workers is None:
        max_workers = engine_threads()

    if max_workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]

    results = {}
    with ThreadPoolExecutor(max_workers=min(max_workers, len(items))) as executor:
        future_to_index = {executor.submit(func, item): idx for idx, item in enumerate(items)}
        for future in as_completed(future_to_index):
            idx = future_to_index[future]
            # 异常直接向上抛出，由调用方处理
            results[idx] = future.result()

    return [results[idx] for idx in range(len(items))]


def atomic_write_text(path: str, text: str) -> None:
    """原子写文本文件（临时文件 + 重命名）

    Args:
        path: 目标文件路径
        text: 文件内容
    """
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with _write_lock:
        fd, temp_path = tempfile.mkstemp(prefix=".mixcert_", dir=directory)
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
                f.write(text)
            os.replace(temp_path, path)
        except Exception:
            if os.path.exists(temp_path):
                os.remove(temp_path)
            raise


def format_float(value: float) -> str:
    """17 位有效数字格式化，保证双精度无损往返"""
    return format(float(value), ".17g")


def max_norm(matrix: np.ndarray) -> float:
    """逐元素最大模范数"""
    if matrix.size == 0:
        return 0.0
    return float(np.max(np.abs(matrix)))
