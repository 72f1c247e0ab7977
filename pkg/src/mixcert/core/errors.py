"""
异常定义模块
库函数只抛出这里定义的异常，由 api 层统一转换为退出码
"""
from typing import Any, Optional, Tuple


class MixcertError(Exception):
    """所有 mixcert 异常的基类"""


class InvalidInputError(MixcertError):
    """输入不合法：元素与群不匹配、维度不一致、参数越界等"""


class UnsupportedOperationError(MixcertError):
    """当前群类型不支持该操作（例如对欧氏群做词分解）"""


class ConstructionError(MixcertError):
    """发散网构造失败（长度不严格递增或首项长度为0）"""


class AdapterRejectedError(MixcertError):
    """伪度量适配器在抽样检查中违反长度公理"""

    def __init__(self, message: str, axiom: str, witness: Optional[Tuple[Any, ...]] = None):
        super().__init__(message)
        self.axiom = axiom
        self.witness = witness


class SingularResolventError(MixcertError):
    """z 落在谱上，预解式不存在"""


class CommutationError(MixcertError):
    """生成元族不两两对易"""

    def __init__(self, message: str, pair: Tuple[int, int], defect: float):
        super().__init__(message)
        self.pair = pair
        self.defect = defect


class OutOfCoreError(MixcertError):
    """探针不在安全核内，截断会破坏闭式结果"""


class InfeasibleError(MixcertError):
    """截断半径过小"""

    def __init__(self, message: str, minimal_radius: float):
        super().__init__(message)
        self.minimal_radius = minimal_radius


class TooFewSamplesError(MixcertError):
    """样本数不足以判断收敛"""


class DegenerateProbeError(MixcertError):
    """探针组线性相关"""


class MissingLimitDataError(MixcertError):
    """缺少极限估计数据"""


class DigestMismatchError(MixcertError):
    """输入来自不同的场景"""


class NumericalGuardError(MixcertError):
    """数值保护触发（重构残差、厄米性、交叉校验失败）"""


class ConfigError(MixcertError):
    """场景配置错误，block 指出出错的配置块"""

    def __init__(self, block: str, message: str):
        super().__init__(f"[{block}] {message}")
        self.block = block
