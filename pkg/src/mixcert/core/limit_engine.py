"""
极限引擎模块
计算 D_j 的几种形式（直接、Cesàro、积分），沿网估计强极限 D，并校验各形式之间的代数恒等式
"""
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import (
    DigestMismatchError,
    InvalidInputError,
    NumericalGuardError,
    TooFewSamplesError,
)
from .logger_config import get_logger
from .operator_core import Operator, commutator, pi_of_h, resolvent, unitary_exp
from .representation import FlowScenario, Probe, ProbeVector, Scenario, matrix_rep
from .utils import max_norm, parallel_map, thread_safe_cache

logger = get_logger()

DEFAULT_NODES = 32
HERMITIAN_FORM_TOLERANCE = 1e-10


def vector_norm(vector) -> float:
    if isinstance(vector, ProbeVector):
        return vector.norm()
    return float(np.linalg.norm(vector))


@thread_safe_cache(maxsize=32)
def gauss_legendre_unit(nodes: int) -> Tuple[np.ndarray, np.ndarray]:
    """[0, 1] 上的 Gauss-Legendre 节点与权重"""
    if nodes < 1:
        raise InvalidInputError(f"求积节点数必须为正: {nodes}")
    x, w = leggauss(nodes)
    s = (x + 1.0) / 2.0
    s.setflags(write=False)
    w = w / 2.0
    w.setflags(write=False)
    return s, w


@dataclass(frozen=True)
class DjSample:
    """网点 j（从 0 开始）处 D_j 作用在各探针上的结果

    Attributes:
        j: 网下标
        ell: 归一化分母 (f∘l)(x_j)
        vectors: 与探针顺序一致的 D_jφ_k
        digest: 场景摘要
    """
    j: int
    ell: float
    vectors: Tuple
    digest: str = ""


def d_direct(scenario: Scenario, j: int, phi):
    """D_jφ = l(x_j)^{-1}(Aφ - U(x_j)AU(x_j)^{-1}φ)

    正则场景使用闭式乘子并与按作用计算的结果交叉校验；流场景的 A 为 Ã。

    Raises:
        OutOfCoreError: 探针不在安全核内
        InvalidInputError: l(x_j) = 0
    """
    ell = scenario.normalizer(j)
    if ell == 0:
        raise InvalidInputError(f"网点 {j} 的长度为 0，无法归一化")
    return scenario.commutator_apply(j, phi) / ell


def hermitian_form_defect(scenario: Scenario, probes: Sequence, images: Sequence) -> float:
    """max |<φ_a, D_jφ_b> - conj(<φ_b, D_jφ_a>)|"""
    defect = 0.0
    for a, phi_a in enumerate(probes):
        for b in range(a, len(probes)):
            ab = scenario.inner(phi_a, images[b])
            ba = scenario.inner(probes[b], images[a])
            defect = max(defect, abs(ab - ba.conjugate()))
    return defect


def sample_net(scenario: Scenario, probes: Sequence[Probe],
               max_workers: Optional[int] = None,
               check_hermitian: bool = True) -> List[DjSample]:
    """沿整个网计算 D_jφ_k

    各网点之间相互独立，可以并行计算；结果顺序与网的顺序一致。

    Args:
        scenario: 场景
        probes: 探针
        max_workers: 最大线程数，None 时读取 MIXCERT_THREADS
        check_hermitian: 是否校验 D_j 在探针上的厄米形式

    Returns:
        每个网点一个 DjSample
    """
    vectors = [p.vector for p in probes]

    def one(j: int) -> DjSample:
        images = tuple(d_direct(scenario, j, v) for v in vectors)
        if check_hermitian:
            defect = hermitian_form_defect(scenario, vectors, images)
            scale = max([1.0] + [vector_norm(v) for v in images])
            if defect > HERMITIAN_FORM_TOLERANCE * scale:
                logger.warning(f"D_{j + 1} 在探针上不是厄米形式: {defect:.3e}")
                raise NumericalGuardError(f"D_{j + 1} 厄米形式偏差 {defect:.3e}")
        logger.debug(f"D_{j + 1} 计算完成 (l = {scenario.normalizer(j)})")
        return DjSample(j, scenario.normalizer(j), images, scenario.digest)

    logger.info(f"场景 {scenario.name}: 在 {len(scenario.net)} 个网点上计算 {len(vectors)} 个探针")
    return parallel_map(one, range(len(scenario.net)), max_workers)


def d1_discrete(u: Operator, a: Operator, n: int, phi: np.ndarray) -> np.ndarray:
    """N^{-1}[A, U^N]U^{-N}φ"""
    if n == 0:
        raise InvalidInputError("N 不能为 0")
    un = matrix_rep(u, n).matrix
    phi = np.asarray(phi, dtype=complex)
    return (a.matrix @ phi - un @ (a.matrix @ (un.conj().T @ phi))) / n


def d2_continuous(h: Operator, a: Operator, t: float, phi: np.ndarray) -> np.ndarray:
    """t^{-1}[A, e^{-itH}]e^{itH}φ"""
    if t == 0:
        raise InvalidInputError("t 不能为 0")
    v = unitary_exp(h, t).matrix
    phi = np.asarray(phi, dtype=complex)
    return (a.matrix @ phi - v @ (a.matrix @ (v.conj().T @ phi))) / t


def cesaro_form(u: Operator, a: Operator, n: int, phi: np.ndarray) -> np.ndarray:
    """Cesàro 平均 (1/N) Σ_{n<N} U^n([A,U]U^{-1})U^{-n} φ，逐项求和"""
    if n < 1:
        raise InvalidInputError(f"N 必须为正整数: {n}")
    if not u.unitary or not a.hermitian:
        raise InvalidInputError("需要酉算子 U 与厄米算子 A")
    um = u.matrix
    term = commutator(a, u).matrix @ um.conj().T
    total = np.zeros_like(term)
    for _ in range(n):
        total += term
        term = um @ term @ um.conj().T
    return (total @ np.asarray(phi, dtype=complex)) / n


def build_atilde(flow: FlowScenario) -> Operator:
    """Ã = Π(H) A Π(H)*

    Raises:
        CommutationError: 生成元不对易
        NumericalGuardError: 结果的厄米偏差超过 1e-10
    """
    pi = pi_of_h(flow.generators).matrix
    m = pi @ flow.conjugate.matrix @ pi.conj().T
    defect = max_norm(m - m.conj().T)
    if defect > HERMITIAN_FORM_TOLERANCE:
        logger.warning(f"Ã 的厄米偏差 {defect:.3e}")
        raise NumericalGuardError(f"Ã 不是厄米算子: 偏差 {defect:.3e}")
    return Operator.from_hermitian(m, basis=flow.conjugate.basis)


def _flow_setup(flow: FlowScenario, x, length: Optional[float]):
    x = tuple(float(v) for v in x)
    ell = math.hypot(*x) if length is None else float(length)
    if ell <= 0:
        raise InvalidInputError(f"l(x) 必须为正: x = {x}")
    xh = flow.x_dot_h(x)
    spec = xh.spectral()
    pi = pi_of_h(flow.generators).matrix
    commut = 1j * commutator(xh, flow.conjugate).matrix
    b = pi @ commut @ pi.conj().T
    v = spec.eigenvectors
    return ell, spec.eigenvalues, v, v.conj().T @ b @ v


def integral_operator(flow: FlowScenario, x, nodes: int = DEFAULT_NODES,
                      length: Optional[float] = None) -> Operator:
    """积分形式的 D_j 算子（Gauss-Legendre 求积）

    l(x)^{-1} ∫_0^1 e^{-is(x·H)} Π[i(x·H), A]Π* e^{is(x·H)} ds，
    在 x·H 的特征基中逐节点累加。
    """
    ell, lam, v, b_hat = _flow_setup(flow, x, length)
    s, w = gauss_legendre_unit(nodes)
    delta = lam[:, None] - lam[None, :]
    weights = np.zeros_like(b_hat)
    for sk, wk in zip(s, w):
        weights += wk * np.exp(-1j * sk * delta)
    return Operator(v @ (b_hat * weights) @ v.conj().T / ell, basis=flow.conjugate.basis)


def integral_form(flow: FlowScenario, x, phi: np.ndarray, nodes: int = DEFAULT_NODES,
                  length: Optional[float] = None) -> np.ndarray:
    """积分形式作用在 φ 上"""
    return integral_operator(flow, x, nodes, length).apply(phi)


def integral_form_closed(flow: FlowScenario, x, phi: np.ndarray,
                         length: Optional[float] = None) -> np.ndarray:
    """积分形式的精确值：特征基中权重 (1 - e^{-iΔ})/(iΔ)，Δ = 0 时为 1"""
    ell, lam, v, b_hat = _flow_setup(flow, x, length)
    delta = lam[:, None] - lam[None, :]
    safe = np.where(delta == 0, 1.0, delta)
    weights = np.where(delta == 0, 1.0 + 0j, -np.expm1(-1j * safe) / (1j * safe))
    matrix = v @ (b_hat * weights) @ v.conj().T / ell
    return matrix @ np.asarray(phi, dtype=complex)


def resolvent_d1_form(h: Operator, a: Operator, t: float, phi: np.ndarray,
                      nodes: int = DEFAULT_NODES) -> np.ndarray:
    """d = 1 的形式 t^{-1} ∫_0^t e^{-isH}(H+i)^{-1}[iH,A](H-i)^{-1}e^{isH}φ ds

    逐节点直接计算 e^{-isH}，与 integral_form 走不同的路径。
    """
    if t == 0:
        raise InvalidInputError("t 不能为 0")
    r = resolvent(h, -1j).matrix
    inner = r @ (1j * commutator(h, a).matrix) @ r.conj().T
    phi = np.asarray(phi, dtype=complex)
    s, w = gauss_legendre_unit(nodes)
    total = np.zeros(h.dim, dtype=complex)
    for sk, wk in zip(s, w):
        e = unitary_exp(h, sk * t).matrix
        total += wk * (e @ (inner @ (e.conj().T @ phi)))
    # (1/t)·t·Σ w_k f(t s_k)
    return total


def check_atilde_identity(flow: FlowScenario, x, nodes: int = DEFAULT_NODES,
                          length: Optional[float] = None) -> float:
    """‖[Ã, U(x)] - l(x)·D^{int}·U(x)‖_max"""
    ell = math.hypot(*[float(v) for v in x]) if length is None else float(length)
    atilde = build_atilde(flow)
    u = flow.unitary(x)
    d_int = integral_operator(flow, x, nodes, ell)
    lhs = commutator(atilde, u).matrix
    rhs = ell * d_int.matrix @ u.matrix
    residual = max_norm(lhs - rhs)
    logger.debug(f"Ã 恒等式残差 (nodes = {nodes}): {residual:.3e}")
    return residual


@dataclass(frozen=True)
class LimitEstimate:
    """强极限 D 在探针上的估计

    Attributes:
        probe_ids: 探针编号
        ells: 各网点的归一化分母
        limits: 极限向量 Dφ_k
        residuals: residuals[k][j] = ‖D_jφ_k - Dφ_k‖（证书界中的经验替代项）
        tail_residuals: 收敛判定所用尾部残差（Richardson 时针对外推序列）
        converged_flags: 每个探针的收敛标志
        eps_conv: 收敛阈值
        k: 尾部长度
        richardson: 是否使用 1/l 外推
        digest: 场景摘要
    """
    probe_ids: Tuple[str, ...]
    ells: Tuple[float, ...]
    limits: Tuple
    residuals: Tuple[Tuple[float, ...], ...]
    tail_residuals: Tuple[Tuple[float, ...], ...]
    converged_flags: Tuple[bool, ...]
    eps_conv: float
    k: int
    richardson: bool
    digest: str = ""

    @property
    def converged(self) -> bool:
        return all(self.converged_flags)

    def index_of(self, probe_id: str) -> int:
        try:
            return self.probe_ids.index(probe_id)
        except ValueError:
            raise KeyError(probe_id) from None

    def residual(self, probe_id: str, j: int) -> float:
        return self.residuals[self.index_of(probe_id)][j]

    def limit(self, probe_id: str):
        return self.limits[self.index_of(probe_id)]


def richardson_sequence(ells: Sequence[float], values: Sequence) -> List:
    """E_j = (l_j S_j - l_{j-1} S_{j-1}) / (l_j - l_{j-1})，消去 1/l 项"""
    out = []
    for j in range(1, len(values)):
        out.append((ells[j] * values[j] - ells[j - 1] * values[j - 1]) / (ells[j] - ells[j - 1]))
    return out


def estimate_limit(samples: Sequence[DjSample], eps_conv: float = 1e-8, k: int = 3,
                   richardson: bool = False,
                   probe_ids: Optional[Sequence[str]] = None) -> LimitEstimate:
    """估计强极限 Dφ（逐探针，不是算子范数）

    收敛规则：最后一项之前的 k 个点相对最后一项的残差都不超过 eps_conv。

    Raises:
        TooFewSamplesError: 样本数不足 k + 1（Richardson 时为 k + 2）
        DigestMismatchError: 样本来自不同场景
    """
    if k < 1:
        raise InvalidInputError(f"尾部长度 k 必须为正: {k}")
    needed = k + 2 if richardson else k + 1
    if len(samples) < needed:
        raise TooFewSamplesError(f"需要至少 {needed} 个样本，只有 {len(samples)} 个")
    digests = {s.digest for s in samples}
    if len(digests) != 1:
        raise DigestMismatchError(f"样本来自不同场景: {sorted(digests)}")

    samples = sorted(samples, key=lambda s: s.j)
    ells = tuple(s.ell for s in samples)
    count = len(samples[0].vectors)
    if any(len(s.vectors) != count for s in samples):
        raise InvalidInputError("各网点的探针个数不一致")
    ids = tuple(probe_ids) if probe_ids is not None else tuple(f"p{m}" for m in range(count))
    if len(ids) != count:
        raise InvalidInputError(f"探针编号个数 {len(ids)} 与样本向量个数 {count} 不一致")

    limits, residuals, tails, flags = [], [], [], []
    for m in range(count):
        raw = [s.vectors[m] for s in samples]
        sequence = richardson_sequence(ells, raw) if richardson else raw
        last = sequence[-1]
        tail = tuple(vector_norm(v - last) for v in sequence[-k - 1:-1])
        limits.append(last)
        residuals.append(tuple(vector_norm(v - last) for v in raw))
        tails.append(tail)
        flags.append(all(r <= eps_conv for r in tail))

    estimate = LimitEstimate(ids, ells, tuple(limits), tuple(residuals), tuple(tails),
                             tuple(flags), eps_conv, k, richardson, samples[0].digest)
    if estimate.converged:
        logger.info(f"D 在 {count} 个探针上收敛（k = {k}, ε = {eps_conv:g}）")
    else:
        bad = [ids[m] for m in range(count) if not flags[m]]
        logger.warning(f"{len(bad)} 个探针未收敛: {bad[:5]}")
    return estimate
