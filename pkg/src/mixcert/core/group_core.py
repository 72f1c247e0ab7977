"""
群与长度函数模块
定义具体的群（整数格 Z^d、自由群 F_r、欧氏群 R^d）、带可检验公理的真长度函数，
以及发散网的生成器
"""
import math
import numbers
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    AdapterRejectedError,
    ConstructionError,
    InvalidInputError,
    UnsupportedOperationError,
)
from .logger_config import get_logger
from .utils import thread_safe_cache

logger = get_logger()

# 群元素统一用元组表示：
#   整数格 -> d 个整数；自由群 -> 约化词（带符号的生成元编号，1 起）；欧氏群 -> d 个浮点数
GroupElement = Tuple

# 自由群生成元的字母表，大写表示逆元
_ALPHABET = "abcdefghijklmnopqrstuvwxyz"


class GroupKind(str, Enum):
    """群的种类"""
    LATTICE = "lattice"
    FREE = "free"
    EUCLIDEAN = "euclidean"


@dataclass(frozen=True)
class GroupSpec:
    """具体群的描述

    Attributes:
        kind: 群的种类
        dim: 整数格/欧氏群的维数 d，或自由群的秩 r
    """
    kind: GroupKind
    dim: int

    def __post_init__(self):
        object.__setattr__(self, "kind", GroupKind(self.kind))
        if not isinstance(self.dim, numbers.Integral) or self.dim < 1:
            raise InvalidInputError(f"群的维数/秩必须是正整数: {self.dim!r}")
        if self.kind is GroupKind.FREE and self.dim > len(_ALPHABET):
            raise InvalidInputError(f"自由群的秩最多为 {len(_ALPHABET)}: {self.dim}")

    @classmethod
    def lattice(cls, d: int) -> "GroupSpec":
        return cls(GroupKind.LATTICE, d)

    @classmethod
    def free(cls, r: int) -> "GroupSpec":
        return cls(GroupKind.FREE, r)

    @classmethod
    def euclidean(cls, d: int) -> "GroupSpec":
        return cls(GroupKind.EUCLIDEAN, d)

    @property
    def is_discrete(self) -> bool:
        return self.kind is not GroupKind.EUCLIDEAN

    @property
    def label(self) -> str:
        """简短名称，例如 Z^2、F_2、R^1"""
        if self.kind is GroupKind.LATTICE:
            return f"Z^{self.dim}"
        if self.kind is GroupKind.FREE:
            return f"F_{self.dim}"
        return f"R^{self.dim}"

    def identity(self) -> GroupElement:
        if self.kind is GroupKind.LATTICE:
            return (0,) * self.dim
        if self.kind is GroupKind.FREE:
            return ()
        return (0.0,) * self.dim

    def generators(self) -> Tuple[GroupElement, ...]:
        """标准生成元 Y（仅离散群）"""
        if self.kind is GroupKind.LATTICE:
            return tuple(
                tuple(1 if k == i else 0 for k in range(self.dim)) for i in range(self.dim)
            )
        if self.kind is GroupKind.FREE:
            return tuple((i + 1,) for i in range(self.dim))
        return ()

    def contains(self, x) -> bool:
        try:
            self.validate(x)
        except InvalidInputError:
            return False
        return True

    def validate(self, x) -> GroupElement:
        """检查元素属于本群并返回规范形式

        Raises:
            InvalidInputError: 元素与群不匹配
        """
        if not isinstance(x, (tuple, list)):
            raise InvalidInputError(f"{self.label} 的元素必须是元组: {x!r}")
        x = tuple(x)
        if self.kind is GroupKind.FREE:
            for letter in x:
                if (not isinstance(letter, numbers.Integral) or isinstance(letter, bool)
                        or letter == 0 or abs(letter) > self.dim):
                    raise InvalidInputError(f"{self.label} 中的非法字母: {letter!r}")
            for left, right in zip(x, x[1:]):
                if left == -right:
                    raise InvalidInputError(f"自由群的词未约化: {self.format_element(x)}")
            return tuple(int(letter) for letter in x)

        if len(x) != self.dim:
            raise InvalidInputError(f"{self.label} 的元素需要 {self.dim} 个分量: {x!r}")
        if self.kind is GroupKind.LATTICE:
            for n in x:
                if not isinstance(n, numbers.Integral) or isinstance(n, bool):
                    raise InvalidInputError(f"{self.label} 的分量必须是整数: {x!r}")
            return tuple(int(n) for n in x)
        for t in x:
            if not isinstance(t, numbers.Real) or isinstance(t, bool) or not math.isfinite(t):
                raise InvalidInputError(f"{self.label} 的分量必须是有限实数: {x!r}")
        return tuple(float(t) for t in x)

    def inverse(self, x: GroupElement) -> GroupElement:
        if self.kind is GroupKind.FREE:
            return tuple(-letter for letter in reversed(x))
        return tuple(-n for n in x)

    def product(self, x: GroupElement, y: GroupElement) -> GroupElement:
        if self.kind is GroupKind.FREE:
            word = list(x)
            for letter in y:
                if word and word[-1] == -letter:
                    word.pop()
                else:
                    word.append(letter)
            return tuple(word)
        return tuple(a + b for a, b in zip(x, y))

    def power(self, x: GroupElement, n: int) -> GroupElement:
        """x 的 n 次幂（n 可为负）"""
        if self.kind is not GroupKind.FREE:
            return tuple(n * c for c in x)
        base = x if n >= 0 else self.inverse(x)
        result = self.identity()
        for _ in range(abs(n)):
            result = self.product(result, base)
        return result

    def format_element(self, x: GroupElement, sep: str = ",") -> str:
        """元素的文本形式：(3,-2)、aB、e"""
        if self.kind is GroupKind.FREE:
            if not x:
                return "e"
            return "".join(
                _ALPHABET[letter - 1] if letter > 0 else _ALPHABET[-letter - 1].upper()
                for letter in x
            )
        if self.kind is GroupKind.LATTICE:
            return "(" + sep.join(str(n) for n in x) + ")"
        return "(" + sep.join(repr(float(t)) for t in x) + ")"

    def parse_element(self, value) -> GroupElement:
        """从配置值解析元素

        整数格/欧氏群接受数字列表（d=1 时也接受单个数字）；
        自由群接受字符串，小写为生成元，大写为其逆，'e' 为单位元。
        """
        if self.kind is GroupKind.FREE:
            if not isinstance(value, str):
                raise InvalidInputError(f"{self.label} 的元素需写成字符串: {value!r}")
            text = value.strip()
            if text in ("", "e"):
                return ()
            word = []
            for char in text:
                lower = char.lower()
                if lower not in _ALPHABET[:self.dim]:
                    raise InvalidInputError(f"{self.label} 中的非法字母: {char!r}")
                letter = _ALPHABET.index(lower) + 1
                word.append(letter if char.islower() else -letter)
            return reduce_word(word)

        if isinstance(value, numbers.Real) and not isinstance(value, bool) and self.dim == 1:
            value = [value]
        if not isinstance(value, (list, tuple)):
            raise InvalidInputError(f"{self.label} 的元素需写成数字列表: {value!r}")
        return self.validate(tuple(value))


def reduce_word(word: Sequence[int]) -> GroupElement:
    """约化任意自由群词（消去相邻的 g g^-1）"""
    reduced: List[int] = []
    for letter in word:
        if reduced and reduced[-1] == -letter:
            reduced.pop()
        else:
            reduced.append(int(letter))
    return tuple(reduced)


@dataclass(frozen=True)
class ProperFunction:
    """真函数 f: R+ -> R+ 的目录项，只用作网的归一化分母

    Attributes:
        name: identity | sqrt1p（t -> sqrt(1+t^2)-1）| power（t -> t^p）
        power: power 的指数 p > 0
    """
    name: str = "identity"
    power: float = 1.0

    def __post_init__(self):
        if self.name not in ("identity", "sqrt1p", "power"):
            raise InvalidInputError(f"未知的真函数: {self.name!r}")
        if self.name == "power" and not self.power > 0:
            raise InvalidInputError(f"power 的指数必须为正: {self.power!r}")

    @property
    def is_identity(self) -> bool:
        return self.name == "identity" or (self.name == "power" and self.power == 1.0)

    def __call__(self, t):
        if self.name == "identity":
            return t
        if self.name == "sqrt1p":
            return math.sqrt(1.0 + float(t) ** 2) - 1.0
        return float(t) ** self.power

    def describe(self) -> str:
        if self.name == "power":
            return f"t^{self.power:g}"
        if self.name == "sqrt1p":
            return "sqrt(1+t^2)-1"
        return "id"


IDENTITY_FUNCTION = ProperFunction()


@dataclass(frozen=True)
class LengthFunction:
    """长度函数 l = f ∘ base

    Attributes:
        group: 所属群
        base_kind: word（离散群的字长）| euclidean（2-范数）| pseudometric（l(x)=d(e,x)）
        post: 后复合的真函数，默认恒等
        metric: 伪度量 d(x, y)，仅 pseudometric 使用
    """
    group: GroupSpec
    base_kind: str = "word"
    post: ProperFunction = IDENTITY_FUNCTION
    metric: Optional[Callable[[GroupElement, GroupElement], float]] = field(
        default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.base_kind == "word" and not self.group.is_discrete:
            raise InvalidInputError(f"{self.group.label} 没有字长，请使用 euclidean")
        if self.base_kind == "euclidean" and self.group.is_discrete:
            raise InvalidInputError(f"{self.group.label} 是离散群，请使用 word")
        if self.base_kind == "pseudometric" and self.metric is None:
            raise InvalidInputError("pseudometric 长度需要提供度量函数")
        if self.base_kind not in ("word", "euclidean", "pseudometric"):
            raise InvalidInputError(f"未知的长度类型: {self.base_kind!r}")

    @classmethod
    def standard(cls, group: GroupSpec, post: Optional[ProperFunction] = None) -> "LengthFunction":
        """离散群取字长，欧氏群取 2-范数"""
        base_kind = "word" if group.is_discrete else "euclidean"
        return cls(group, base_kind, post or IDENTITY_FUNCTION)

    @property
    def is_exact(self) -> bool:
        """整数精确算术（字长且无后复合）"""
        return self.base_kind == "word" and self.post.is_identity

    @property
    def is_composed(self) -> bool:
        return not self.post.is_identity

    def base(self, x: GroupElement):
        """未后复合的基长度"""
        if self.base_kind == "word":
            if self.group.kind is GroupKind.FREE:
                return len(x)
            return sum(abs(n) for n in x)
        if self.base_kind == "euclidean":
            return math.hypot(*x)
        return self.metric(self.group.identity(), x)

    def __call__(self, x: GroupElement):
        value = self.base(x)
        if self.post.is_identity:
            return value
        return self.post(value)

    def describe(self) -> str:
        text = self.base_kind
        if self.is_composed:
            text += f" ∘ {self.post.describe()}"
        return text


def length(ell: LengthFunction, x: GroupElement):
    """计算 l(x)

    Args:
        ell: 长度函数
        x: 群元素

    Returns:
        非负实数（字长无后复合时为整数）

    Raises:
        InvalidInputError: 元素不属于长度函数的群
    """
    x = ell.group.validate(x)
    return ell(x)


@dataclass(frozen=True)
class AxiomReport:
    """长度公理 (L1)-(L4) 的抽样检查结果"""
    sample_count: int
    tolerance: float
    l1_violation: float
    l2_violation: float
    l3_violation: float
    l3_min_slack: float
    l2_witness: Optional[Tuple[GroupElement, ...]]
    l3_witness: Optional[Tuple[GroupElement, GroupElement]]
    ball_sizes: Dict[int, Optional[int]]
    length_like_only: bool

    @property
    def axioms_hold(self) -> bool:
        return (self.l1_violation <= self.tolerance
                and self.l2_violation <= self.tolerance
                and self.l3_violation <= self.tolerance)

    @property
    def proper(self) -> bool:
        """(L4) 见证：每个球在枚举窗口内都是有限的"""
        return all(size is not None for size in self.ball_sizes.values())

    @property
    def clean(self) -> bool:
        return self.axioms_hold and self.proper


def check_length_axioms(ell: LengthFunction,
                        samples: Sequence[Tuple[GroupElement, GroupElement]],
                        r_max: int = 4,
                        window: Optional[int] = None) -> AxiomReport:
    """抽样检查 (L1)-(L3)，离散群另给出球大小作为 (L4) 见证

    Args:
        ell: 长度函数
        samples: 元素对 (x, y) 的序列
        r_max: 球大小表的最大半径
        window: 枚举窗口（字长半径），默认 r_max + 2

    Returns:
        公理检查报告
    """
    if not samples:
        raise InvalidInputError("样本不能为空")

    group = ell.group
    tolerance = 0.0 if ell.is_exact else 1e-12
    e = group.identity()

    l1 = abs(ell(e))
    l2, l3, min_slack = 0.0, 0.0, math.inf
    l2_witness, l3_witness = None, None

    for x, y in samples:
        x = group.validate(x)
        y = group.validate(y)
        lx, ly = ell(x), ell(y)
        for z, lz in ((x, lx), (y, ly)):
            defect = abs(ell(group.inverse(z)) - lz)
            if defect > l2:
                l2, l2_witness = defect, (z,)
        slack = lx + ly - ell(group.product(x, y))
        if slack < min_slack:
            min_slack = slack
        if -slack > l3:
            l3, l3_witness = -slack, (x, y)

    ball_sizes: Dict[int, Optional[int]] = {}
    if group.is_discrete:
        window = window if window is not None else r_max + 2
        for radius in range(1, r_max + 1):
            ball_sizes[radius] = ball_size_witness(ell, radius, window)

    length_like_only = ell.is_composed and max(l1, l2, l3) > tolerance
    if length_like_only:
        logger.warning(f"后复合 {ell.post.describe()} 破坏了长度公理，只能作为归一化分母使用")

    report = AxiomReport(
        sample_count=len(samples),
        tolerance=tolerance,
        l1_violation=float(l1),
        l2_violation=float(l2),
        l3_violation=float(l3),
        l3_min_slack=float(min_slack),
        l2_witness=l2_witness,
        l3_witness=l3_witness,
        ball_sizes=ball_sizes,
        length_like_only=length_like_only,
    )
    logger.debug(f"{group.label} {ell.describe()} 公理检查: L1={l1} L2={l2} L3={l3} 球={ball_sizes}")
    return report


def ball_size_witness(ell: LengthFunction, radius: float, window: int) -> Optional[int]:
    """在字长窗口内统计 {l <= radius} 的元素个数

    若窗口边界球面上仍有元素满足 l <= radius，则无法证明球有限，返回 None。
    """
    if not ell.group.is_discrete:
        raise UnsupportedOperationError(f"{ell.group.label} 不是离散群，无法枚举球")
    word = LengthFunction.standard(ell.group)
    count = 0
    for x in enumerate_ball(ell.group, window):
        if ell(x) <= radius:
            if word(x) == window:
                return None
            count += 1
    return count


@thread_safe_cache(maxsize=32)
def enumerate_ball(group: GroupSpec, radius: int) -> Tuple[GroupElement, ...]:
    """按（字长, 元素）的确定顺序枚举字长球 {x : |x| <= radius}

    Args:
        group: 离散群
        radius: 非负整数半径

    Returns:
        元素元组
    """
    if not group.is_discrete:
        raise UnsupportedOperationError(f"{group.label} 不是离散群，无法枚举球")
    radius = int(radius)
    if radius < 0:
        return ()

    if group.kind is GroupKind.LATTICE:
        def rec(dim: int, budget: int):
            if dim == 0:
                yield ()
                return
            for n in range(-budget, budget + 1):
                for rest in rec(dim - 1, budget - abs(n)):
                    yield (n,) + rest
        elements = list(rec(group.dim, radius))
        elements.sort(key=lambda x: (sum(abs(n) for n in x), x))
        return tuple(elements)

    letters = []
    for k in range(1, group.dim + 1):
        letters.extend((k, -k))
    elements = [()]
    sphere = [()]
    for _ in range(radius):
        next_sphere = []
        for word in sphere:
            last = word[-1] if word else 0
            for letter in letters:
                if letter != -last:
                    next_sphere.append(word + (letter,))
        elements.extend(next_sphere)
        sphere = next_sphere
    return tuple(elements)


def word_decompose(spec: GroupSpec, x: GroupElement) -> List[Tuple[int, int]]:
    """把 x 写成生成元的乘积 y_1^{m_1}...y_n^{m_n}，m_k = ±1

    Args:
        spec: 离散群
        x: 群元素

    Returns:
        (生成元下标（0 起）, 指数 ±1) 的列表，长度等于 x 的字长
    """
    if not spec.is_discrete:
        raise UnsupportedOperationError(f"{spec.label} 不支持词分解")
    x = spec.validate(x)
    if spec.kind is GroupKind.FREE:
        return [(abs(letter) - 1, 1 if letter > 0 else -1) for letter in x]
    word = []
    for k, n in enumerate(x):
        word.extend([(k, 1 if n > 0 else -1)] * abs(n))
    return word


def compose_word(spec: GroupSpec, word: Sequence[Tuple[int, int]]) -> GroupElement:
    """把生成元词乘回群元素"""
    gens = spec.generators()
    result = spec.identity()
    for index, exponent in word:
        g = gens[index] if exponent > 0 else spec.inverse(gens[index])
        result = spec.product(result, g)
    return result


@dataclass(frozen=True)
class DivergentNet:
    """发散网的有限替身：长度严格递增的元素序列

    Attributes:
        group: 所属群
        elements: x_1, ..., x_J
        base_lengths: 基长度 l(x_j)，用于安全核计算
        lengths: 归一化分母 (f∘l)(x_j)
        strategy: ray | diagonal | custom
    """
    group: GroupSpec
    elements: Tuple[GroupElement, ...]
    base_lengths: Tuple[float, ...]
    lengths: Tuple[float, ...]
    strategy: str = "custom"

    def __post_init__(self):
        if len(self.elements) < 2:
            raise InvalidInputError("发散网至少需要 2 个点")
        if not self.lengths[0] > 0:
            raise ConstructionError(f"网的首项长度必须为正: {self.lengths[0]}")
        for j in range(1, len(self.lengths)):
            if not self.lengths[j] > self.lengths[j - 1]:
                raise ConstructionError(
                    f"网的长度不严格递增: l(x_{j}) = {self.lengths[j - 1]} >= "
                    f"l(x_{j + 1}) = {self.lengths[j]}")

    @classmethod
    def build(cls, ell: LengthFunction, elements: Sequence[GroupElement],
              strategy: str = "custom") -> "DivergentNet":
        elements = tuple(ell.group.validate(x) for x in elements)
        return cls(
            group=ell.group,
            elements=elements,
            base_lengths=tuple(ell.base(x) for x in elements),
            lengths=tuple(ell(x) for x in elements),
            strategy=strategy,
        )

    def __len__(self) -> int:
        return len(self.elements)

    @property
    def max_base_length(self):
        return max(self.base_lengths)


def make_net(spec: GroupSpec, ell: LengthFunction, strategy: str, count: int,
             direction: Optional[GroupElement] = None,
             elements: Optional[Sequence[GroupElement]] = None) -> DivergentNet:
    """生成发散网

    Args:
        spec: 群
        ell: 长度函数（后复合只影响归一化分母）
        strategy: ray（x_j = j·v）| diagonal（沿 (1,...,1) 或 a_1...a_r）| custom
        count: 网点个数，至少为 2
        direction: ray 的方向 v
        elements: custom 的元素列表

    Returns:
        发散网
    """
    if ell.group != spec:
        raise InvalidInputError(f"长度函数属于 {ell.group.label}，与 {spec.label} 不一致")
    if not isinstance(count, numbers.Integral) or count < 2:
        raise InvalidInputError(f"网点个数至少为 2: {count!r}")

    if strategy == "custom":
        if elements is None:
            raise InvalidInputError("custom 网需要 elements")
        points = list(elements)[:count]
        if len(points) < count:
            raise InvalidInputError(f"custom 网只提供了 {len(points)} 个元素，需要 {count} 个")
    else:
        if strategy == "diagonal":
            if spec.kind is GroupKind.FREE:
                direction = tuple(range(1, spec.dim + 1))
            elif spec.kind is GroupKind.LATTICE:
                direction = (1,) * spec.dim
            else:
                direction = (1.0,) * spec.dim
        elif strategy != "ray":
            raise InvalidInputError(f"未知的网策略: {strategy!r}")
        if direction is None:
            raise InvalidInputError("ray 网需要方向 direction")
        direction = spec.validate(direction)
        points = [spec.power(direction, j) for j in range(1, count + 1)]

    net = DivergentNet.build(ell, points, strategy)
    logger.debug(f"{spec.label} 上的 {strategy} 网: 长度 {list(net.lengths)}")
    return net


def sample_elements(spec: GroupSpec, count: int, radius: int,
                    rng: np.random.Generator) -> List[GroupElement]:
    """随机抽取群元素（可复现）"""
    out = []
    for _ in range(count):
        if spec.kind is GroupKind.LATTICE:
            out.append(tuple(int(n) for n in rng.integers(-radius, radius + 1, size=spec.dim)))
        elif spec.kind is GroupKind.EUCLIDEAN:
            out.append(tuple(float(t) for t in rng.uniform(-radius, radius, size=spec.dim)))
        else:
            size = int(rng.integers(0, radius + 1))
            word: List[int] = []
            while len(word) < size:
                letter = int(rng.integers(1, spec.dim + 1)) * (1 if rng.random() < 0.5 else -1)
                if word and word[-1] == -letter:
                    continue
                word.append(letter)
            out.append(tuple(word))
    return out


def sample_pairs(spec: GroupSpec, count: int, radius: int = 8,
                 seed: int = 0) -> List[Tuple[GroupElement, GroupElement]]:
    """随机抽取元素对"""
    rng = np.random.default_rng(seed)
    xs = sample_elements(spec, count, radius, rng)
    ys = sample_elements(spec, count, radius, rng)
    return list(zip(xs, ys))


def length_from_pseudometric(d: Callable[[GroupElement, GroupElement], float],
                             e: GroupElement,
                             group: GroupSpec,
                             samples: Optional[Sequence[Tuple[GroupElement, GroupElement]]] = None,
                             sample_count: int = 200,
                             seed: int = 0,
                             r_max: int = 3) -> LengthFunction:
    """由左不变伪度量构造长度函数 l(x) := d(e, x)

    调用方声明 d 左不变且真；这里对抽样检查 (L1)-(L3)，离散群另检查 (L4) 见证，
    任何违反都会被拒绝而不是默默接受。

    Raises:
        AdapterRejectedError: 抽样发现公理违反，附带见证
    """
    e = group.validate(e)
    if e != group.identity():
        raise InvalidInputError(f"e 必须是单位元: {e!r}")
    ell = LengthFunction(group, "pseudometric", IDENTITY_FUNCTION, metric=d)
    if samples is None:
        samples = sample_pairs(group, sample_count, seed=seed)
    report = check_length_axioms(ell, samples, r_max=r_max)

    tolerance = 1e-12
    if report.l1_violation > tolerance:
        raise AdapterRejectedError(f"(L1) 违反: l(e) = {report.l1_violation}", "L1", (e,))
    if report.l2_violation > tolerance:
        raise AdapterRejectedError(f"(L2) 违反: 偏差 {report.l2_violation}", "L2", report.l2_witness)
    if report.l3_violation > tolerance:
        raise AdapterRejectedError(f"(L3) 违反: 超出 {report.l3_violation}", "L3", report.l3_witness)
    if not report.proper:
        bad = min(r for r, size in report.ball_sizes.items() if size is None)
        raise AdapterRejectedError(f"(L4) 违反: 半径 {bad} 的球不是有限的", "L4", (bad,))
    logger.info(f"伪度量适配器通过检查（{report.sample_count} 对样本）")
    return ell
