"""
配置管理模块
读取并校验 TOML 场景文件；所有错误都以 ConfigError 报告出错的配置块
"""
import hashlib
import json
import math
import numbers
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError, MixcertError
from .group_core import (
    DivergentNet,
    GroupElement,
    GroupSpec,
    LengthFunction,
    ProperFunction,
    make_net,
)
from .logger_config import get_logger

logger = get_logger()

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"

BLOCKS = ("group", "length", "net", "representation", "conjugate", "probes", "tolerances")

DEFAULT_TOLERANCES: Dict[str, Any] = {
    "eps_conv": 1e-8,
    "k": 3,
    "eps_ker": 1e-6,
    "eps_mix": 1e-8,
    "eps_witness": 1e-3,
    "nodes": 32,
    "richardson": False,
}

REPRESENTATION_TYPES = ("regular", "matrix", "flow")
REGULAR_CONJUGATES = ("length", "position")
MATRIX_CONJUGATES = ("random", "diagonal", "explicit")
REGULAR_PROBES = ("delta", "ball", "random")
MATRIX_PROBES = ("eigen", "random")


def shipped_scenarios() -> List[Path]:
    """随包发布的场景文件"""
    return sorted(SCENARIO_DIR.glob("*.toml"))


def shipped_scenario(name: str) -> Path:
    path = SCENARIO_DIR / f"{name}.toml"
    if not path.exists():
        raise ConfigError("file", f"没有名为 {name} 的内置场景")
    return path


class ScenarioConfig:
    """场景配置管理器

    配置文件由 group / length / net / representation / conjugate / probes / tolerances
    七个块和顶层 name 组成；tolerances 缺省项取 DEFAULT_TOLERANCES。
    """

    def __init__(self, data: Dict[str, Any], source: str = "<memory>"):
        """初始化并校验配置

        Args:
            data: 解析后的 TOML 数据
            source: 来源（文件路径），只用于日志

        Raises:
            ConfigError: 任何配置块不合法
        """
        if not isinstance(data, dict):
            raise ConfigError("file", "配置顶层必须是表")
        self.data = data
        self.source = source
        self._net: Optional[DivergentNet] = None
        self._validate()

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ScenarioConfig":
        """从文件加载配置"""
        path = Path(path)
        try:
            raw = path.read_bytes()
        except OSError as e:
            raise ConfigError("file", f"无法读取配置文件 {path}: {e}") from e
        return cls.from_string(raw.decode("utf-8"), str(path))

    @classmethod
    def from_string(cls, text: str, source: str = "<memory>") -> "ScenarioConfig":
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as e:
            raise ConfigError("file", f"TOML 解析失败: {e}") from e
        return cls(data, source)

    # 读取辅助

    def block(self, name: str) -> Dict[str, Any]:
        value = self.data.get(name)
        if value is None:
            if name == "tolerances":
                return {}
            raise ConfigError(name, "缺少配置块")
        if not isinstance(value, dict):
            raise ConfigError(name, "配置块必须是表")
        return value

    def read(self, block: str, key: str, default: Any = None, required: bool = False) -> Any:
        """读取配置值

        Args:
            block: 配置块
            key: 配置键
            default: 缺省值
            required: 缺少时是否报错
        """
        table = self.block(block)
        if key not in table:
            if required:
                raise ConfigError(block, f"缺少 {key}")
            return default
        return table[key]

    def read_int(self, block: str, key: str, default: Optional[int] = None,
                 minimum: Optional[int] = None) -> int:
        value = self.read(block, key, default, required=default is None)
        if isinstance(value, bool) or not isinstance(value, numbers.Integral):
            raise ConfigError(block, f"{key} 必须是整数: {value!r}")
        if minimum is not None and value < minimum:
            raise ConfigError(block, f"{key} 不能小于 {minimum}: {value}")
        return int(value)

    def read_float(self, block: str, key: str, default: Optional[float] = None,
                   positive: bool = False) -> float:
        value = self.read(block, key, default, required=default is None)
        if isinstance(value, bool) or not isinstance(value, numbers.Real):
            raise ConfigError(block, f"{key} 必须是数: {value!r}")
        value = float(value)
        if not math.isfinite(value) or (positive and not value > 0):
            raise ConfigError(block, f"{key} 必须是{'正' if positive else '有限'}数: {value}")
        return value

    def read_choice(self, block: str, key: str, choices, default: Optional[str] = None) -> str:
        value = self.read(block, key, default, required=default is None)
        if value not in choices:
            raise ConfigError(block, f"{key} = {value!r} 不在 {list(choices)} 中")
        return value

    def read_array(self, block: str, key: str, shape: Tuple[int, ...],
                   default: Optional[np.ndarray] = None) -> np.ndarray:
        """读取实数数组并检查形状

        Args:
            block: 配置块
            key: 配置键
            shape: 期望的形状，例如 (dim,) 或 (dim, dim)
            default: 缺省数组，为 None 时该键必需

        Raises:
            ConfigError: 非数值元素、不规则嵌套、形状不符或含非有限值
        """
        value = self.read(block, key, required=default is None)
        if value is None:
            return np.asarray(default, dtype=float)
        if not _all_real(value):
            raise ConfigError(block, f"{key} 只能包含实数: {value!r}")
        try:
            array = np.asarray(value, dtype=float)
        except (TypeError, ValueError) as e:
            raise ConfigError(block, f"{key} 不是规则的实数数组: {e}") from e
        if array.shape != tuple(shape):
            raise ConfigError(block, f"{key} 的形状 {array.shape} 应为 {tuple(shape)}")
        if not np.all(np.isfinite(array)):
            raise ConfigError(block, f"{key} 含有非有限值")
        return array

    def explicit_conjugate(self, dim: int) -> np.ndarray:
        """[conjugate] type = "explicit" 的厄米矩阵 real + i·imag"""
        real = self.read_array("conjugate", "real", (dim, dim))
        imag = self.read_array("conjugate", "imag", (dim, dim), default=np.zeros((dim, dim)))
        matrix = real + 1j * imag
        if np.max(np.abs(matrix - matrix.conj().T)) > 1e-12:
            raise ConfigError("conjugate", "显式矩阵不是厄米矩阵")
        return matrix

    # 配置项

    @property
    def name(self) -> str:
        name = self.data.get("name", Path(self.source).stem)
        if not isinstance(name, str) or not name:
            raise ConfigError("name", f"name 必须是非空字符串: {name!r}")
        return name

    @property
    def representation_type(self) -> str:
        return self.read_choice("representation", "type", REPRESENTATION_TYPES)

    @property
    def tolerances(self) -> Dict[str, Any]:
        table = self.block("tolerances")
        unknown = sorted(set(table) - set(DEFAULT_TOLERANCES))
        if unknown:
            raise ConfigError("tolerances", f"未知的键: {unknown}")
        out = dict(DEFAULT_TOLERANCES)
        for key in ("eps_conv", "eps_ker", "eps_mix", "eps_witness"):
            out[key] = self.read_float("tolerances", key, DEFAULT_TOLERANCES[key], positive=True)
        out["k"] = self.read_int("tolerances", "k", DEFAULT_TOLERANCES["k"], minimum=1)
        out["nodes"] = self.read_int("tolerances", "nodes", DEFAULT_TOLERANCES["nodes"], minimum=1)
        richardson = self.read("tolerances", "richardson", DEFAULT_TOLERANCES["richardson"])
        if not isinstance(richardson, bool):
            raise ConfigError("tolerances", f"richardson 必须是布尔值: {richardson!r}")
        out["richardson"] = richardson
        return out

    def group_spec(self) -> GroupSpec:
        kind = self.read_choice("group", "kind", ("lattice", "free", "euclidean"))
        dim = self.read_int("group", "dim", minimum=1)
        try:
            return getattr(GroupSpec, kind)(dim)
        except MixcertError as e:
            raise ConfigError("group", str(e)) from e

    def length_function(self) -> LengthFunction:
        group = self.group_spec()
        expected = "word" if group.is_discrete else "euclidean"
        base = self.read_choice("length", "base", ("word", "euclidean"), expected)
        if base != expected:
            raise ConfigError("length", f"{group.label} 的基长度应为 {expected}")
        post = self.read_choice("length", "post", ("identity", "sqrt1p", "power"), "identity")
        power = self.read_float("length", "power", 1.0, positive=True)
        try:
            return LengthFunction(group, base, ProperFunction(post, power))
        except MixcertError as e:
            raise ConfigError("length", str(e)) from e

    def parse_element(self, block: str, value) -> GroupElement:
        try:
            return self.group_spec().parse_element(value)
        except MixcertError as e:
            raise ConfigError(block, str(e)) from e

    def net(self) -> DivergentNet:
        """按 net 块构造发散网（缓存）"""
        if self._net is None:
            group = self.group_spec()
            ell = self.length_function()
            strategy = self.read_choice("net", "strategy", ("ray", "diagonal", "custom"))
            count = self.read_int("net", "count", minimum=2)
            direction, elements = None, None
            if strategy == "ray":
                direction = self.parse_element("net", self.read("net", "direction", required=True))
            elif strategy == "custom":
                raw = self.read("net", "elements", required=True)
                if not isinstance(raw, list):
                    raise ConfigError("net", "elements 必须是列表")
                elements = [self.parse_element("net", v) for v in raw]
            try:
                self._net = make_net(group, ell, strategy, count, direction, elements)
            except MixcertError as e:
                raise ConfigError("net", str(e)) from e
        return self._net

    def probe_radius(self) -> int:
        """正则场景中探针的最大支撑半径"""
        kind = self.read_choice("probes", "type", REGULAR_PROBES)
        ell = self.length_function()
        if kind == "delta":
            if "elements" in self.block("probes"):
                raw = self.read("probes", "elements")
                if not isinstance(raw, list) or not raw:
                    raise ConfigError("probes", "elements 必须是非空列表")
                return max(ell.base(self.parse_element("probes", v)) for v in raw)
            return self.read_int("probes", "radius", minimum=0)
        if kind == "ball":
            radii = self.read("probes", "radii", required=True)
            if (not isinstance(radii, list) or not radii
                    or not all(isinstance(r, int) and not isinstance(r, bool) and r >= 0 for r in radii)):
                raise ConfigError("probes", f"radii 必须是非负整数列表: {radii!r}")
            return max(radii)
        self.read_int("probes", "count", minimum=1)
        return self.read_int("probes", "radius", minimum=0)

    def digest(self) -> str:
        """配置的规范 JSON 的 sha256，前 16 位十六进制"""
        canonical = json.dumps(self.data, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]

    # 校验

    def _validate(self) -> None:
        for name in BLOCKS:
            self.block(name)
        unknown = sorted(set(self.data) - set(BLOCKS) - {"name", "description"})
        if unknown:
            raise ConfigError("file", f"未知的配置块: {unknown}")
        _ = self.name
        _ = self.tolerances
        group = self.group_spec()
        self.length_function()
        net = self.net()
        rep = self.representation_type

        if rep == "regular":
            self._validate_regular(group, net)
        else:
            self._validate_finite(rep, group)
        logger.debug(f"配置 {self.source} 校验通过（{rep}, {group.label}）")

    def _validate_regular(self, group: GroupSpec, net: DivergentNet) -> None:
        if not group.is_discrete:
            raise ConfigError("representation", "正则表示需要离散群")
        radius = self.read_int("representation", "radius", minimum=0)
        conj = self.read_choice("conjugate", "type", REGULAR_CONJUGATES)
        if conj == "position" and not (group.kind.value == "lattice" and group.dim == 1):
            raise ConfigError("conjugate", "position 只定义在 Z 上")
        needed = net.max_base_length + self.probe_radius()
        if radius < needed:
            raise ConfigError(
                "representation",
                f"截断半径 R = {radius} 不满足安全核条件，至少需要 {needed}"
                f"（网的最大长度 {net.max_base_length} + 探针半径 {self.probe_radius()}）")

    def _validate_finite(self, rep: str, group: GroupSpec) -> None:
        if rep == "matrix" and not (group.kind.value == "lattice" and group.dim == 1):
            raise ConfigError("representation", "matrix 表示只定义在 Z 上")
        if rep == "flow" and group.kind.value != "euclidean":
            raise ConfigError("representation", "flow 表示需要欧氏群 R^d")
        dim = self.read_int("representation", "dim", minimum=1)
        self.read_int("representation", "seed", 0, minimum=0)
        if rep == "flow" and self.read("representation", "spectra") is not None:
            self.read_array("representation", "spectra", (group.dim, dim))
        conj = self.read_choice("conjugate", "type", MATRIX_CONJUGATES)
        if conj == "random":
            self.read_float("conjugate", "norm", 1.0, positive=True)
            self.read_int("conjugate", "seed", 0, minimum=0)
        elif conj == "diagonal":
            self.read_array("conjugate", "values", (dim,))
        else:
            self.explicit_conjugate(dim)
        probes = self.read_choice("probes", "type", MATRIX_PROBES)
        if probes == "random":
            self.read_int("probes", "count", minimum=1)
            self.read_int("probes", "seed", 0, minimum=0)


def _all_real(value: Any) -> bool:
    if isinstance(value, list):
        return all(_all_real(v) for v in value)
    return isinstance(value, numbers.Real) and not isinstance(value, bool)
