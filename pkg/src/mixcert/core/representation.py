"""
表示模块
具体的酉表示与共轭算子 A：
1. 群球上截断的左正则表示（稀疏系数表，不构造稠密矩阵）
2. 有限维矩阵表示 N -> U_0^N
3. 由对易厄米生成元给出的 R^d 流
"""
import math
import numbers
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass
from types import MappingProxyType
from typing import Dict, Mapping, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import (
    InfeasibleError,
    InvalidInputError,
    NumericalGuardError,
    OutOfCoreError,
)
from .group_core import (
    DivergentNet,
    GroupElement,
    GroupKind,
    GroupSpec,
    LengthFunction,
    enumerate_ball,
)
from .logger_config import get_logger
from .operator_core import Operator, check_commuting, unitary_exp
from .utils import max_norm

logger = get_logger()


class ProbeVector:
    """正则空间中的紧支撑向量（稀疏系数表 g -> φ(g)）

    只能通过 RegularSpace.vector 及其派生方法构造，保证支撑落在截断球内。
    """

    __slots__ = ("space", "coeffs", "radius", "label")

    def __init__(self, space: "RegularSpace", coeffs: Mapping[GroupElement, complex],
                 radius, label: str = ""):
        self.space = space
        self.coeffs = MappingProxyType(dict(coeffs))
        self.radius = radius
        self.label = label

    def __repr__(self) -> str:
        return f"ProbeVector(label={self.label!r}, support={len(self.coeffs)}, radius={self.radius})"

    def __getitem__(self, g: GroupElement) -> complex:
        return self.coeffs.get(g, 0)

    def __len__(self) -> int:
        return len(self.coeffs)

    @property
    def support(self) -> Tuple[GroupElement, ...]:
        return tuple(self.coeffs)

    def norm(self) -> float:
        return math.sqrt(sum(abs(c) ** 2 for c in self.coeffs.values()))

    def inner(self, other: "ProbeVector") -> complex:
        """<self, other>，第一个参数共轭线性"""
        small, large = (self, other) if len(self) <= len(other) else (other, self)
        total = 0j
        for g, c in small.coeffs.items():
            if g in large.coeffs:
                total += (c.conjugate() * large.coeffs[g] if small is self
                          else large.coeffs[g].conjugate() * c)
        return total

    def _combine(self, other: "ProbeVector", sign: int) -> "ProbeVector":
        if other.space is not self.space:
            raise InvalidInputError("向量属于不同的正则空间")
        merged: Dict[GroupElement, complex] = dict(self.coeffs)
        for g, c in other.coeffs.items():
            merged[g] = merged.get(g, 0) + sign * c
        return self.space.vector(merged)

    def __add__(self, other: "ProbeVector") -> "ProbeVector":
        return self._combine(other, 1)

    def __sub__(self, other: "ProbeVector") -> "ProbeVector":
        return self._combine(other, -1)

    def __mul__(self, factor) -> "ProbeVector":
        return self.space.vector({g: factor * c for g, c in self.coeffs.items()}, self.label)

    __rmul__ = __mul__

    def __truediv__(self, factor) -> "ProbeVector":
        return self.space.vector({g: c / factor for g, c in self.coeffs.items()}, self.label)


class RegularSpace:
    """截断的 l^2(X)：基为字长球 {l <= R}（计数测度）"""

    def __init__(self, group: GroupSpec, length: LengthFunction, radius: int):
        """初始化正则空间

        Args:
            group: 离散群
            length: 字长函数（后复合不参与 A 与截断）
            radius: 截断半径 R
        """
        if not group.is_discrete:
            raise InvalidInputError(f"正则表示只实现离散群: {group.label}")
        if length.group != group or length.base_kind != "word":
            raise InvalidInputError("正则空间需要同一群上的字长函数")
        if not isinstance(radius, numbers.Integral) or radius < 0:
            raise InvalidInputError(f"截断半径必须是非负整数: {radius!r}")
        self.group = group
        self.length = length
        self.radius = int(radius)
        self.basis: Tuple[GroupElement, ...] = enumerate_ball(group, self.radius)
        self.index: Dict[GroupElement, int] = {g: k for k, g in enumerate(self.basis)}
        logger.debug(f"{group.label} 正则空间: R = {radius}, 维数 {len(self.basis)}")

    def __repr__(self) -> str:
        return f"RegularSpace({self.group.label}, R={self.radius}, dim={len(self.basis)})"

    @property
    def dim(self) -> int:
        return len(self.basis)

    def ell(self, g: GroupElement) -> int:
        """基长度（字长，整数）"""
        return self.length.base(g)

    def contains(self, g: GroupElement) -> bool:
        return self.ell(g) <= self.radius

    def vector(self, coeffs: Mapping[GroupElement, complex], label: str = "") -> ProbeVector:
        """由系数表构造向量，精确为 0 的系数被丢弃

        Raises:
            InvalidInputError: 支撑超出截断球
        """
        clean = {}
        radius = 0
        for g, c in coeffs.items():
            if c == 0:
                continue
            g = self.group.validate(g)
            lg = self.ell(g)
            if lg > self.radius:
                raise InvalidInputError(
                    f"支撑元素 {self.group.format_element(g)} 超出截断球 R = {self.radius}")
            clean[g] = c
            radius = max(radius, lg)
        return ProbeVector(self, clean, radius, label)

    def delta(self, g: GroupElement, label: str = "") -> ProbeVector:
        g = self.group.validate(g)
        text = self.group.format_element(g, ";").strip("()")
        return self.vector({g: 1.0}, label or f"delta[{text}]")

    def ball_indicator(self, r: int, label: str = "") -> ProbeVector:
        """球 {l <= r} 的归一化示性函数"""
        members = [g for g in self.basis if self.ell(g) <= r]
        weight = 1.0 / math.sqrt(len(members))
        return self.vector({g: weight for g in members}, label or f"ball[r={r}]")

    def random_vector(self, rng: np.random.Generator, r: int, label: str = "") -> ProbeVector:
        """支撑在 {l <= r} 上的随机单位向量"""
        members = [g for g in self.basis if self.ell(g) <= r]
        values = rng.normal(size=len(members)) + 1j * rng.normal(size=len(members))
        values = values / np.linalg.norm(values)
        return self.vector({g: complex(v) for g, v in zip(members, values)}, label)

    def to_dense(self, phi: ProbeVector) -> np.ndarray:
        out = np.zeros(self.dim, dtype=complex)
        for g, c in phi.coeffs.items():
            out[self.index[g]] = c
        return out


class Translation(NamedTuple):
    """左平移的结果及被截断丢弃的质量 ||·||^2"""
    vector: ProbeVector
    lost_mass: float


def regular_apply(space: RegularSpace, x: GroupElement, phi: ProbeVector) -> Translation:
    """左正则作用 (U(x)φ)(g) = φ(x^{-1} g)

    支撑被左乘 x 平移；离开截断球的系数被丢弃并报告丢失质量。
    在安全核内（r_φ + l(x) <= R）不会丢失质量。
    """
    x = space.group.validate(x)
    moved: Dict[GroupElement, complex] = {}
    lost = 0.0
    for h, c in phi.coeffs.items():
        g = space.group.product(x, h)
        if space.contains(g):
            moved[g] = c
        else:
            lost += abs(c) ** 2
    if lost > 0:
        logger.debug(f"平移 {space.group.format_element(x)} 丢失质量 {lost:.6g}")
    return Translation(space.vector(moved, phi.label), lost)


class DiagonalMultiplier:
    """对角乘子 φ -> a(·)φ，厄米

    kind = length 时 a = l；kind = position 时 a(n) = n（仅 Z）。
    """

    def __init__(self, space: RegularSpace, kind: str = "length"):
        if kind not in ("length", "position"):
            raise InvalidInputError(f"未知的乘子类型: {kind!r}")
        if kind == "position" and not (space.group.kind is GroupKind.LATTICE and space.group.dim == 1):
            raise InvalidInputError("position 乘子只定义在 Z 上")
        self.space = space
        self.kind = kind

    def weight(self, g: GroupElement):
        if self.kind == "length":
            return self.space.ell(g)
        return g[0]

    def apply(self, phi: ProbeVector) -> ProbeVector:
        return self.space.vector({g: self.weight(g) * c for g, c in phi.coeffs.items()}, phi.label)

    __call__ = apply

    def bound(self) -> float:
        """球上 |a| 的上界"""
        return float(self.space.radius)


def length_multiplier(space: RegularSpace) -> DiagonalMultiplier:
    """A φ := l(·) φ"""
    return DiagonalMultiplier(space, "length")


def position_multiplier(space: RegularSpace) -> DiagonalMultiplier:
    """A φ := n φ（Z 上的位置算子）"""
    return DiagonalMultiplier(space, "position")


def _require_safe_core(space: RegularSpace, x: GroupElement, phi: ProbeVector) -> None:
    reach = phi.radius + space.ell(x)
    if reach > space.radius:
        raise OutOfCoreError(
            f"探针 {phi.label or '?'} 不在安全核内: r_φ + l(x) = {reach} > R = {space.radius}")


def regular_commutator(space: RegularSpace, x: GroupElement, phi: ProbeVector,
                       multiplier: Optional[DiagonalMultiplier] = None) -> ProbeVector:
    """闭式 [A, U(x)]U(x)^{-1} φ = (a(·) - a(x^{-1}·)) φ

    Raises:
        OutOfCoreError: r_φ + l(x) > R
    """
    x = space.group.validate(x)
    _require_safe_core(space, x, phi)
    multiplier = multiplier or length_multiplier(space)
    x_inv = space.group.inverse(x)
    out = {}
    for g, c in phi.coeffs.items():
        factor = multiplier.weight(g) - multiplier.weight(space.group.product(x_inv, g))
        out[g] = factor * c
    return space.vector(out, phi.label)


def regular_commutator_by_actions(space: RegularSpace, x: GroupElement, phi: ProbeVector,
                                  multiplier: Optional[DiagonalMultiplier] = None) -> ProbeVector:
    """通过作用计算 Aφ - U(x) A U(x)^{-1} φ，用于交叉校验闭式"""
    x = space.group.validate(x)
    _require_safe_core(space, x, phi)
    multiplier = multiplier or length_multiplier(space)
    pulled = regular_apply(space, space.group.inverse(x), phi)
    pushed = regular_apply(space, x, multiplier.apply(pulled.vector))
    if pulled.lost_mass or pushed.lost_mass:
        raise NumericalGuardError("安全核内的平移不应丢失质量")
    return multiplier.apply(phi) - pushed.vector


def safe_core_radius(net: DivergentNet, radius: float) -> float:
    """r_max = R - max_j l(x_j)：支撑半径不超过 r_max 的探针沿整个网都不会被截断

    Raises:
        InfeasibleError: R < max_j l(x_j)
    """
    reach = net.max_base_length
    if radius < reach:
        raise InfeasibleError(f"截断半径 R = {radius} 太小，至少需要 {reach}", reach)
    return radius - reach


def _unitary_power(u0: Operator, n: int) -> Operator:
    if n == 0:
        return Operator.identity(u0.dim, u0.basis)
    base = u0.matrix if n > 0 else u0.matrix.conj().T
    matrix = np.linalg.matrix_power(base, abs(n))
    drift = max_norm(matrix.conj().T @ matrix - np.eye(u0.dim))
    if drift > 1e-13:
        # 大指数下舍入累积，用极分解投影回酉群
        logger.debug(f"U_0^{n} 投影回酉群前 ||U*U - I||_max = {drift:.3e}")
        u, _, wh = np.linalg.svd(matrix)
        matrix = u @ wh
    return Operator(matrix, unitary=True, basis=u0.basis)


def matrix_rep(source: Union[Operator, Sequence[Operator], "FlowScenario"],
               x) -> Operator:
    """有限维表示在 x 处的值

    Args:
        source: Z 上的酉算子 U_0；Z^d 上两两对易的酉算子组；或 R^d 流
        x: 整数、整数元组或实向量

    Returns:
        Z: U_0^N（负幂用共轭转置）；Z^d: ΠU_k^{n_k}；R^d: e^{-i x·H}
    """
    if isinstance(source, FlowScenario):
        return source.unitary(x)
    if isinstance(source, Operator):
        if not source.unitary:
            raise InvalidInputError("U_0 必须是酉算子")
        n = x[0] if isinstance(x, (tuple, list)) else x
        if isinstance(x, (tuple, list)) and len(x) != 1:
            raise InvalidInputError(f"Z 的元素只有一个分量: {x!r}")
        if not isinstance(n, numbers.Integral):
            raise InvalidInputError(f"Z 的元素必须是整数: {x!r}")
        return _unitary_power(source, int(n))

    unitaries = list(source)
    if len(unitaries) != len(x):
        raise InvalidInputError(f"生成元个数 {len(unitaries)} 与元素维数 {len(x)} 不一致")
    result = Operator.identity(unitaries[0].dim, unitaries[0].basis)
    for u, n in zip(unitaries, x):
        result = result @ _unitary_power(u, int(n))
    return Operator(result.matrix, unitary=True, basis=result.basis)


def rep_from_word(unitaries: Sequence[Operator], word: Sequence[Tuple[int, int]]) -> Operator:
    """按词 y_1^{m_1}...y_n^{m_n} 逐个相乘 U(y_k)^{m_k}"""
    if not unitaries:
        raise InvalidInputError("至少需要一个生成元")
    matrix = np.eye(unitaries[0].dim, dtype=complex)
    for index, exponent in word:
        u = unitaries[index].matrix
        matrix = matrix @ (u if exponent > 0 else u.conj().T)
    return Operator(matrix, unitary=True, basis=unitaries[0].basis)


def coefficient(phi, x, psi, representation=None) -> complex:
    """矩阵系数 <φ, U(x)ψ>（第一个参数共轭线性）

    正则空间上通过支撑重叠精确计算；矩阵表示需要给出 representation。
    """
    if isinstance(phi, ProbeVector):
        if not isinstance(psi, ProbeVector) or psi.space is not phi.space:
            raise InvalidInputError("φ 与 ψ 不在同一正则空间")
        group = phi.space.group
        x = group.validate(x)
        total = 0j
        for h, c in psi.coeffs.items():
            g = group.product(x, h)
            if g in phi.coeffs:
                total += phi.coeffs[g].conjugate() * c
        return total
    if representation is None:
        raise InvalidInputError("矩阵表示的系数需要给出 representation")
    u = matrix_rep(representation, x)
    phi = np.asarray(phi, dtype=complex)
    psi = np.asarray(psi, dtype=complex)
    if phi.shape != psi.shape or phi.shape != (u.dim,):
        raise InvalidInputError("φ、ψ 与表示空间维数不一致")
    return complex(np.vdot(phi, u.matrix @ psi))


@dataclass(frozen=True)
class Probe:
    """带编号的探针向量"""
    probe_id: str
    vector: object


class Scenario(ABC):
    """极限引擎与验证器看到的场景接口

    子类给出 U(x_j) 的作用、A 的作用和未归一化的 [A, U(x_j)]U(x_j)^{-1}。
    """

    def __init__(self, name: str, net: DivergentNet, digest: str = ""):
        self.name = name
        self.net = net
        self.digest = digest or name

    @property
    @abstractmethod
    def family(self) -> str:
        """regular | matrix | flow"""

    @property
    def finite_dimensional(self) -> bool:
        return self.family != "regular"

    def normalizer(self, j: int) -> float:
        """第 j 个网点的归一化分母 (f∘l)(x_j)，j 从 0 开始"""
        return self.net.lengths[j]

    @abstractmethod
    def unitary_apply(self, j: int, vector):
        """U(x_j) vector"""

    @abstractmethod
    def conjugate_apply(self, vector):
        """A vector"""

    @abstractmethod
    def commutator_apply(self, j: int, vector):
        """[A, U(x_j)]U(x_j)^{-1} vector"""

    @abstractmethod
    def inner(self, a, b) -> complex:
        """<a, b>"""

    @abstractmethod
    def frame(self, vectors: Sequence) -> np.ndarray:
        """把向量放进公共坐标系，返回以列排列的矩阵"""

    def norm(self, vector) -> float:
        return math.sqrt(max(self.inner(vector, vector).real, 0.0))

    def coefficient(self, phi, j: int, psi) -> complex:
        return self.inner(phi, self.unitary_apply(j, psi))

    def boundary_loss(self, j: int, vector) -> float:
        """U(x_j) 作用时被截断丢弃的质量；有限维场景恒为 0"""
        return 0.0


class RegularScenario(Scenario):
    """离散群的截断左正则表示 + 对角共轭算子"""

    def __init__(self, name: str, space: RegularSpace, multiplier: DiagonalMultiplier,
                 net: DivergentNet, digest: str = "", cross_check: bool = True):
        if net.group != space.group:
            raise InvalidInputError("网与正则空间不在同一个群上")
        super().__init__(name, net, digest)
        self.space = space
        self.multiplier = multiplier
        self.cross_check = cross_check

    @property
    def family(self) -> str:
        return "regular"

    def unitary_apply(self, j: int, vector: ProbeVector) -> ProbeVector:
        return regular_apply(self.space, self.net.elements[j], vector).vector

    def boundary_loss(self, j: int, vector: ProbeVector) -> float:
        return regular_apply(self.space, self.net.elements[j], vector).lost_mass

    def conjugate_apply(self, vector: ProbeVector) -> ProbeVector:
        return self.multiplier.apply(vector)

    def commutator_apply(self, j: int, vector: ProbeVector) -> ProbeVector:
        x = self.net.elements[j]
        closed = regular_commutator(self.space, x, vector, self.multiplier)
        if self.cross_check:
            by_actions = regular_commutator_by_actions(self.space, x, vector, self.multiplier)
            defect = (closed - by_actions).norm()
            if defect > 1e-12 * max(1.0, vector.norm()):
                logger.warning(f"闭式与作用计算不一致: {defect:.3e}")
                raise NumericalGuardError(f"正则交换子交叉校验失败: {defect:.3e}")
        return closed

    def inner(self, a: ProbeVector, b: ProbeVector) -> complex:
        return a.inner(b)

    def coefficient(self, phi: ProbeVector, j: int, psi: ProbeVector) -> complex:
        return coefficient(phi, self.net.elements[j], psi)

    def frame(self, vectors: Sequence[ProbeVector]) -> np.ndarray:
        support = sorted({g for v in vectors for g in v.coeffs}, key=self.space.index.__getitem__)
        row = {g: k for k, g in enumerate(support)}
        out = np.zeros((len(support), len(vectors)), dtype=complex)
        for col, v in enumerate(vectors):
            for g, c in v.coeffs.items():
                out[row[g], col] = c
        return out


class _MatrixScenarioBase(Scenario):
    """有限维场景：U(x_j) 按 j 缓存"""

    def __init__(self, name: str, net: DivergentNet, conjugate: Operator, digest: str = ""):
        super().__init__(name, net, digest)
        if not conjugate.hermitian:
            raise InvalidInputError("共轭算子 A 必须是厄米算子")
        self.conjugate = conjugate
        self._unitaries: Dict[int, Operator] = {}
        self._cache_lock = threading.Lock()

    @property
    def dim(self) -> int:
        return self.conjugate.dim

    @abstractmethod
    def _compute_unitary(self, x) -> Operator:
        """U(x)"""

    def unitary_at(self, j: int) -> Operator:
        with self._cache_lock:
            if j not in self._unitaries:
                self._unitaries[j] = self._compute_unitary(self.net.elements[j])
            return self._unitaries[j]

    def unitary_apply(self, j: int, vector: np.ndarray) -> np.ndarray:
        return self.unitary_at(j).apply(vector)

    def conjugate_apply(self, vector: np.ndarray) -> np.ndarray:
        return self.conjugate_operator().apply(vector)

    def conjugate_operator(self) -> Operator:
        return self.conjugate

    def commutator_apply(self, j: int, vector: np.ndarray) -> np.ndarray:
        u = self.unitary_at(j).matrix
        a = self.conjugate_operator().matrix
        vector = np.asarray(vector, dtype=complex)
        return a @ vector - u @ (a @ (u.conj().T @ vector))

    def inner(self, a: np.ndarray, b: np.ndarray) -> complex:
        return complex(np.vdot(a, b))

    def frame(self, vectors: Sequence[np.ndarray]) -> np.ndarray:
        return np.column_stack([np.asarray(v, dtype=complex) for v in vectors])


class LatticeMatrixScenario(_MatrixScenarioBase):
    """Z 上的有限维表示 N -> U_0^N 与厄米共轭算子 A"""

    def __init__(self, name: str, u0: Operator, conjugate: Operator, net: DivergentNet,
                 digest: str = ""):
        if net.group.kind is not GroupKind.LATTICE or net.group.dim != 1:
            raise InvalidInputError("矩阵表示场景的网必须在 Z 上")
        if not u0.unitary or u0.dim != conjugate.dim:
            raise InvalidInputError("U_0 必须是与 A 同维的酉算子")
        super().__init__(name, net, conjugate, digest)
        self.u0 = u0

    @property
    def family(self) -> str:
        return "matrix"

    def _compute_unitary(self, x) -> Operator:
        return matrix_rep(self.u0, x)


class FlowScenario(_MatrixScenarioBase):
    """R^d 流 U(x) = e^{-i x·H}，生成元两两对易

    判据作用在 Ã = Π(H) A Π(H)* 上，对应的 D_j 与积分形式一致。
    """

    def __init__(self, name: str, generators: Sequence[Operator], conjugate: Operator,
                 net: DivergentNet, digest: str = ""):
        generators = tuple(generators)
        if net.group.kind is not GroupKind.EUCLIDEAN or net.group.dim != len(generators):
            raise InvalidInputError(f"流的网必须在 R^{len(generators)} 上")
        for h in generators:
            if not h.hermitian or h.dim != conjugate.dim:
                raise InvalidInputError("生成元必须是与 A 同维的厄米算子")
        check_commuting(generators)
        super().__init__(name, net, conjugate, digest)
        self.generators = generators
        self._atilde: Optional[Operator] = None

    @property
    def family(self) -> str:
        return "flow"

    @property
    def d(self) -> int:
        return len(self.generators)

    def x_dot_h(self, x) -> Operator:
        """x·H = Σ x_k H_k"""
        if len(x) != self.d:
            raise InvalidInputError(f"x 需要 {self.d} 个分量")
        matrix = sum(float(xk) * h.matrix for xk, h in zip(x, self.generators))
        return Operator.from_hermitian(matrix, basis=self.conjugate.basis)

    def unitary(self, x) -> Operator:
        return unitary_exp(self.x_dot_h(x), 1.0)

    def _compute_unitary(self, x) -> Operator:
        return self.unitary(x)

    def conjugate_operator(self) -> Operator:
        with self._cache_lock:
            if self._atilde is None:
                from .limit_engine import build_atilde
                self._atilde = build_atilde(self)
            return self._atilde
