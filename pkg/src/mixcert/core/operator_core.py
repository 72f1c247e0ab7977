"""
算子核心模块
桌面规模的复线性代数：厄米/酉算子、交换子、预解式、算子指数，以及 C^1(A) 恒等式检查

所有算子函数都经由同一个谱分解例程（带重构残差保护），不使用级数或 Padé 近似。
"""
import threading
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy import linalg

from .errors import (
    CommutationError,
    InvalidInputError,
    NumericalGuardError,
    SingularResolventError,
)
from .logger_config import get_logger
from .utils import max_norm

logger = get_logger()

FLAG_TOLERANCE = 1e-12
COMMUTATION_TOLERANCE = 1e-10


@dataclass(frozen=True)
class SpectralDecomposition:
    """厄米算子的谱分解 A = V diag(λ) V*

    Attributes:
        eigenvalues: 升序实特征值
        eigenvectors: 列为正交归一特征向量
    """
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def apply_function(self, func: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """计算 f(A) = V diag(f(λ)) V*"""
        v = self.eigenvectors
        return (v * func(self.eigenvalues)) @ v.conj().T


@dataclass(frozen=True, eq=False)
class Operator:
    """有限维算子

    Attributes:
        matrix: n×n 复矩阵（只读）
        hermitian: 构造时声明的厄米标志
        unitary: 构造时声明的酉标志
        basis: 场景空间的基标签
    """
    matrix: np.ndarray
    hermitian: bool = False
    unitary: bool = False
    basis: str = ""
    _spectral: List = field(default_factory=list, init=False, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvalidInputError(f"算子必须是方阵: 形状 {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        if self.hermitian:
            defect = max_norm(m - m.conj().T)
            if defect > FLAG_TOLERANCE:
                raise InvalidInputError(f"厄米标志不成立: ||A - A*||_max = {defect:.3e}")
        if self.unitary:
            defect = max_norm(m.conj().T @ m - np.eye(m.shape[0]))
            if defect > FLAG_TOLERANCE:
                raise InvalidInputError(f"酉标志不成立: ||U*U - I||_max = {defect:.3e}")

    @classmethod
    def identity(cls, n: int, basis: str = "") -> "Operator":
        return cls(np.eye(n), hermitian=True, unitary=True, basis=basis)

    @classmethod
    def zeros(cls, n: int, basis: str = "") -> "Operator":
        return cls(np.zeros((n, n)), hermitian=True, basis=basis)

    @classmethod
    def from_hermitian(cls, matrix, basis: str = "", symmetrize: bool = True) -> "Operator":
        """构造厄米算子；symmetrize 时先取 (M + M*)/2 消除舍入误差"""
        m = np.array(matrix, dtype=complex)
        if symmetrize:
            m = (m + m.conj().T) / 2
        return cls(m, hermitian=True, basis=basis)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def adjoint(self) -> "Operator":
        return Operator(self.matrix.conj().T, self.hermitian, self.unitary, self.basis)

    def apply(self, vector: np.ndarray) -> np.ndarray:
        vector = np.asarray(vector, dtype=complex)
        if vector.shape != (self.dim,):
            raise InvalidInputError(f"向量维数 {vector.shape} 与算子维数 {self.dim} 不一致")
        return self.matrix @ vector

    def max_norm(self) -> float:
        return max_norm(self.matrix)

    def norm(self) -> float:
        """谱范数"""
        if self.dim == 0:
            return 0.0
        return float(np.linalg.norm(self.matrix, 2))

    def spectral(self) -> SpectralDecomposition:
        """带缓存的谱分解（仅厄米算子）"""
        if not self.hermitian:
            raise InvalidInputError("只能对厄米算子做谱分解")
        with self._lock:
            if not self._spectral:
                self._spectral.append(spectral_decompose(self.matrix))
            return self._spectral[0]

    def __matmul__(self, other: "Operator") -> "Operator":
        _check_dims(self, other)
        return Operator(self.matrix @ other.matrix, basis=self.basis)

    def __add__(self, other: "Operator") -> "Operator":
        _check_dims(self, other)
        return Operator(self.matrix + other.matrix, basis=self.basis)

    def __sub__(self, other: "Operator") -> "Operator":
        _check_dims(self, other)
        return Operator(self.matrix - other.matrix, basis=self.basis)

    def scale(self, factor: complex) -> "Operator":
        return Operator(factor * self.matrix, basis=self.basis)


def _check_dims(a: Operator, b: Operator) -> None:
    if a.dim != b.dim:
        raise InvalidInputError(f"维数不一致: {a.dim} vs {b.dim}")


def spectral_decompose(matrix: np.ndarray) -> SpectralDecomposition:
    """厄米矩阵的谱分解，检查重构残差与正交性

    Raises:
        NumericalGuardError: 残差超过 n·1e-12（按 max(1, ||A||_max) 缩放）
    """
    n = matrix.shape[0]
    if n == 0:
        return SpectralDecomposition(np.zeros(0), np.zeros((0, 0), dtype=complex))
    eigenvalues, eigenvectors = linalg.eigh(matrix)
    scale = max(1.0, max_norm(matrix))
    residual = max_norm(matrix - (eigenvectors * eigenvalues) @ eigenvectors.conj().T)
    orthogonality = max_norm(eigenvectors.conj().T @ eigenvectors - np.eye(n))
    if residual > n * 1e-12 * scale or orthogonality > max(n, 1) * 1e-12:
        logger.warning(f"谱分解残差过大: 重构 {residual:.3e}，正交 {orthogonality:.3e}")
        raise NumericalGuardError(f"谱分解残差过大: {residual:.3e}")
    return SpectralDecomposition(eigenvalues, eigenvectors)


def _require_hermitian(op: Operator, name: str) -> None:
    if not op.hermitian:
        raise InvalidInputError(f"{name} 必须是厄米算子")


def commutator(a: Operator, s: Operator) -> Operator:
    """[A, S] = AS - SA"""
    _check_dims(a, s)
    return Operator(a.matrix @ s.matrix - s.matrix @ a.matrix, basis=a.basis)


def conjugation_flow(s: Operator, a: Operator, t: float) -> Operator:
    """共轭流 e^{-itA} S e^{itA}

    Args:
        s: 有界算子
        a: 厄米算子
        t: 实参数

    Returns:
        共轭后的算子，保留 S 的酉标志
    """
    _require_hermitian(a, "A")
    _check_dims(a, s)
    if t == 0:
        return s
    spec = a.spectral()
    v = spec.eigenvectors
    phases = np.exp(-1j * t * spec.eigenvalues)
    # 在 A 的本征基下：(e^{-itA} S e^{itA})_{ab} = e^{-it(λ_a-λ_b)} S_ab
    s_hat = v.conj().T @ s.matrix @ v
    rotated = v @ (np.outer(phases, phases.conj()) * s_hat) @ v.conj().T
    if s.unitary:
        # 舍入可能让酉标志检查失败，用极分解投影回酉群
        drift = max_norm(rotated.conj().T @ rotated - np.eye(s.dim))
        logger.debug(f"共轭流 t = {t} 投影回酉群前 ||U*U - I||_max = {drift:.3e}")
        u, _, wh = np.linalg.svd(rotated)
        rotated = u @ wh
    if s.hermitian:
        rotated = (rotated + rotated.conj().T) / 2
    return Operator(rotated, hermitian=s.hermitian, unitary=s.unitary, basis=s.basis)


def a_epsilon(a: Operator, epsilon: float) -> Operator:
    """A_ε := (iε)^{-1}(e^{iεA} - 1)，只在 ε→0 的极限下厄米"""
    _require_hermitian(a, "A")
    if epsilon == 0:
        raise InvalidInputError("ε 不能为 0")
    spec = a.spectral()
    matrix = spec.apply_function(lambda lam: np.expm1(1j * epsilon * lam) / (1j * epsilon))
    return Operator(matrix, basis=a.basis)


@dataclass(frozen=True)
class Com1Report:
    """s-lim [iS, A_ε] = [iS, A] 的残差表"""
    epsilons: tuple
    residuals: tuple
    constant: float
    spread: float

    @property
    def ratios(self) -> tuple:
        return tuple(r / e for r, e in zip(self.residuals, self.epsilons))

    @property
    def passed(self) -> bool:
        # 残差全为零（S 与 A 对易）时平凡通过
        if max(self.residuals) <= 1e-14:
            return True
        return all(r <= 2 * self.constant * e + 1e-14
                   for r, e in zip(self.residuals, self.epsilons)) and self.spread <= 2.0


def check_com1(s: Operator, a: Operator, epsilons: Sequence[float]) -> Com1Report:
    """检查 r(ε) = ||[iS, A_ε] - [iS, A]||_max = O(ε)

    常数 C 由最大的两个 ε 估计；spread 为 r(ε)/ε 的最大最小比。
    """
    _require_hermitian(a, "A")
    epsilons = tuple(float(e) for e in epsilons)
    if len(epsilons) < 2 or any(e <= 0 for e in epsilons):
        raise InvalidInputError("ε 列表至少两个正数")
    if any(epsilons[k + 1] >= epsilons[k] for k in range(len(epsilons) - 1)):
        raise InvalidInputError("ε 列表必须严格递减")

    i_s = s.scale(1j)
    target = commutator(i_s, a).matrix
    residuals = tuple(
        max_norm(commutator(i_s, a_epsilon(a, e)).matrix - target) for e in epsilons
    )
    ratios = [r / e for r, e in zip(residuals, epsilons)]
    constant = max(ratios[0], ratios[1])
    positive = [q for q in ratios if q > 0]
    spread = max(positive) / min(positive) if positive else 1.0
    logger.debug(f"check_com1: 残差 {residuals}, C = {constant:.4g}, 比值跨度 {spread:.3f}")
    return Com1Report(epsilons, residuals, constant, spread)


def resolvent(h: Operator, z: complex) -> Operator:
    """(H - z)^{-1}，经由谱分解

    Raises:
        SingularResolventError: z 为实数且距某个特征值不超过 1e-12
    """
    _require_hermitian(h, "H")
    spec = h.spectral()
    z = complex(z)
    gaps = spec.eigenvalues - z
    if z.imag == 0 and spec.eigenvalues.size and np.min(np.abs(gaps)) <= 1e-12:
        raise SingularResolventError(f"z = {z} 落在 H 的谱上")
    return Operator(spec.apply_function(lambda lam: 1.0 / (lam - z)), basis=h.basis)


def check_com2(h: Operator, a: Operator, z: complex) -> float:
    """恒等式 [(H-z)^{-1}, A] = -(H-z)^{-1}[H, A](H-z)^{-1} 的残差"""
    _require_hermitian(a, "A")
    r = resolvent(h, z)
    lhs = commutator(r, a).matrix
    rhs = -(r.matrix @ commutator(h, a).matrix @ r.matrix)
    return max_norm(lhs - rhs)


def check_commuting(hs: Sequence[Operator], tolerance: float = COMMUTATION_TOLERANCE) -> None:
    """检查生成元族两两对易

    Raises:
        CommutationError: 给出违反的下标对
    """
    for k in range(len(hs)):
        for l in range(k + 1, len(hs)):
            defect = commutator(hs[k], hs[l]).max_norm()
            if defect > tolerance:
                logger.warning(f"H_{k + 1} 与 H_{l + 1} 不对易: {defect:.3e}")
                raise CommutationError(
                    f"H_{k + 1} 与 H_{l + 1} 不对易: ||[H_k, H_l]||_max = {defect:.3e}",
                    (k, l), defect)


def pi_of_h(hs: Sequence[Operator]) -> Operator:
    """Π(H) := (H_1 + i)^{-1} ... (H_d + i)^{-1}

    Π(H)* 通过 .adjoint() 取得，不再单独计算预解式。
    """
    if not hs:
        raise InvalidInputError("至少需要一个生成元")
    for h in hs:
        _require_hermitian(h, "H_k")
    check_commuting(hs)
    product = np.eye(hs[0].dim, dtype=complex)
    for h in hs:
        product = product @ resolvent(h, -1j).matrix
    return Operator(product, basis=hs[0].basis)


def unitary_exp(h: Operator, t: float) -> Operator:
    """e^{-itH}"""
    _require_hermitian(h, "H")
    spec = h.spectral()
    matrix = spec.apply_function(lambda lam: np.exp(-1j * t * lam))
    return Operator(matrix, unitary=True, basis=h.basis)


def random_hermitian(n: int, rng: np.random.Generator, norm: Optional[float] = 1.0) -> Operator:
    """随机厄米算子（GUE 型），norm 不为 None 时归一化到给定谱范数"""
    g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    m = (g + g.conj().T) / 2
    if norm is not None and n > 0:
        m = m * (norm / np.linalg.norm(m, 2))
    return Operator.from_hermitian(m)


def random_unitary(n: int, rng: np.random.Generator) -> Operator:
    """随机酉算子 e^{-iK}，K 为随机厄米"""
    k = random_hermitian(n, rng, norm=np.pi)
    return unitary_exp(k, 1.0)


def commuting_family_in_basis(q: np.ndarray, spectra: Sequence[Sequence[float]]) -> List[Operator]:
    """H_k = Q diag(λ_k) Q*，Q 的列为公共特征向量"""
    q = np.asarray(q, dtype=complex)
    family = []
    for lam in spectra:
        lam = np.asarray(lam, dtype=float)
        if lam.shape != (q.shape[1],):
            raise InvalidInputError(f"特征值个数 {lam.shape} 与基的维数 {q.shape[1]} 不一致")
        family.append(Operator.from_hermitian((q * lam) @ q.conj().T))
    return family


def random_commuting_family(n: int, d: int, rng: np.random.Generator,
                            spectra: Optional[Sequence[Sequence[float]]] = None) -> List[Operator]:
    """在同一随机正交基下对角的 d 个厄米算子

    Args:
        n: 维数
        d: 生成元个数
        rng: 随机数发生器
        spectra: 每个生成元的特征值；默认在 [-1, 1] 中均匀抽取
    """
    q = random_unitary(n, rng).matrix
    if spectra is None:
        spectra = [rng.uniform(-1.0, 1.0, size=n) for _ in range(d)]
    elif len(spectra) != d:
        raise InvalidInputError(f"需要 {d} 组特征值，给出了 {len(spectra)} 组")
    return commuting_family_in_basis(q, spectra)
