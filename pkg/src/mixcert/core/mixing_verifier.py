"""
混合验证模块
在探针张成的子空间上压缩 D，划分 ker(D) 与 ker(D)^⊥，测量矩阵系数衰减并给出经验证书界
"""
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from .errors import (
    DegenerateProbeError,
    DigestMismatchError,
    InvalidInputError,
    MissingLimitDataError,
    NumericalGuardError,
)
from .limit_engine import LimitEstimate, vector_norm
from .logger_config import get_logger
from .representation import Probe, Scenario
from .utils import max_norm, parallel_map

logger = get_logger()

INDEPENDENCE_TOLERANCE = 1e-10
HERMITIAN_TOLERANCE = 1e-10
KERNEL_WEIGHT_TOLERANCE = 1e-8
SPECTRUM_LINE_TOLERANCE = 1e-9


class Verdict(str, Enum):
    MIXING = "mixing-along-net"
    NO_CONCLUSION = "no-conclusion"
    WITNESS = "non-mixing-witness"


@dataclass(frozen=True)
class CompressedD:
    """D 在探针张成空间上的有限秩压缩

    Attributes:
        probe_ids: 探针编号
        q: 正交化后的探针基（列）
        r: 上三角因子，归一化探针 = q @ r
        matrix: M_ab = <q_a, D q_b>
        eigenvalues: M 的升序特征值
        eigenvectors: M 的特征向量（列）
        eps_ker: 核阈值
        kernel_indices: |λ| <= eps_ker 的下标
        cokernel_indices: 其余下标
        kernel_weights: 每个归一化探针在 ker(D) 上的投影范数
        digest: 场景摘要
    """
    probe_ids: Tuple[str, ...]
    q: np.ndarray
    r: np.ndarray
    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    eps_ker: float
    kernel_indices: Tuple[int, ...]
    cokernel_indices: Tuple[int, ...]
    kernel_weights: Tuple[float, ...]
    digest: str = ""

    @property
    def span_dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def kernel_dim(self) -> int:
        return len(self.kernel_indices)

    def kernel_weight(self, probe_id: str) -> float:
        return self.kernel_weights[self.probe_ids.index(probe_id)]


def compress_D(scenario: Scenario, probes: Sequence[Probe], estimate: LimitEstimate,
               eps_ker: float = 1e-6) -> CompressedD:
    """在探针张成空间上组装 D

    Raises:
        DegenerateProbeError: 探针归一化后线性相关（|R_kk| <= 1e-10）
        NumericalGuardError: M 的厄米偏差超过 1e-10
        DigestMismatchError: 极限估计来自其他场景
    """
    if estimate.digest != scenario.digest:
        raise DigestMismatchError(f"极限估计摘要 {estimate.digest} 与场景 {scenario.digest} 不一致")
    if len(probes) != len(estimate.limits):
        raise InvalidInputError(f"探针个数 {len(probes)} 与极限向量个数 {len(estimate.limits)} 不一致")
    if not probes:
        raise DegenerateProbeError("探针组为空")

    vectors = [p.vector for p in probes]
    frame = scenario.frame(list(vectors) + list(estimate.limits))
    count = len(vectors)
    phi, d_phi = frame[:, :count], frame[:, count:]
    norms = np.linalg.norm(phi, axis=0)
    if np.any(norms <= INDEPENDENCE_TOLERANCE):
        bad = [probes[m].probe_id for m in np.flatnonzero(norms <= INDEPENDENCE_TOLERANCE)]
        raise DegenerateProbeError(f"零探针: {bad}")
    if phi.shape[0] < count:
        raise DegenerateProbeError(f"{count} 个探针落在 {phi.shape[0]} 维空间中，必然线性相关")

    q, r = linalg.qr(phi / norms, mode="economic")
    diag = np.abs(np.diag(r))
    if np.any(diag <= INDEPENDENCE_TOLERANCE):
        bad = [probes[m].probe_id for m in np.flatnonzero(diag <= INDEPENDENCE_TOLERANCE)]
        raise DegenerateProbeError(f"探针线性相关: {bad}")

    r_inv = linalg.solve_triangular(r, np.eye(count, dtype=complex))
    m = q.conj().T @ (d_phi / norms) @ r_inv
    defect = max_norm(m - m.conj().T)
    if defect > HERMITIAN_TOLERANCE * max(1.0, max_norm(m)):
        logger.warning(f"压缩矩阵 M 不是厄米矩阵: 偏差 {defect:.3e}")
        raise NumericalGuardError(f"压缩矩阵厄米偏差 {defect:.3e}")
    m = (m + m.conj().T) / 2
    eigenvalues, eigenvectors = linalg.eigh(m)

    kernel = tuple(int(i) for i in np.flatnonzero(np.abs(eigenvalues) <= eps_ker))
    cokernel = tuple(i for i in range(count) if i not in kernel)
    w_ker = eigenvectors[:, list(kernel)]
    weights = tuple(float(np.linalg.norm(w_ker.conj().T @ r[:, a])) for a in range(count))

    logger.info(f"压缩 D: 子空间维数 {count}, 核维数 {len(kernel)}, "
                f"特征值范围 [{eigenvalues[0]:.6g}, {eigenvalues[-1]:.6g}]")
    return CompressedD(
        probe_ids=tuple(p.probe_id for p in probes),
        q=q, r=r, matrix=m,
        eigenvalues=eigenvalues, eigenvectors=eigenvectors,
        eps_ker=eps_ker, kernel_indices=kernel, cokernel_indices=cokernel,
        kernel_weights=weights, digest=scenario.digest,
    )


@dataclass(frozen=True)
class DecayRow:
    """衰减表的一行，j 从 0 开始"""
    j: int
    ell: float
    coeff_abs: float
    bound: Optional[float] = None
    measured: Optional[float] = None
    residual: Optional[float] = None


def decay_table(scenario: Scenario, phi, psi) -> List[DecayRow]:
    """沿网的 |<φ, U(x_j)ψ>|，按网的顺序"""
    return [DecayRow(j, scenario.normalizer(j), abs(scenario.coefficient(phi, j, psi)))
            for j in range(len(scenario.net))]


def _bound(residual: float, phi_norm: float, a_phi: float,
           psi_norm: float, a_psi: float, ell: float) -> float:
    return residual * psi_norm + (a_phi * psi_norm + phi_norm * a_psi) / ell


def certified_bound(scenario: Scenario, phi_tilde: Probe, psi, j: int,
                    limit_data: Optional[LimitEstimate]) -> float:
    """经验证书界

    ‖(D - D_j)φ̃‖‖ψ‖ + l_j^{-1}(‖Aφ̃‖‖ψ‖ + ‖φ̃‖‖Aψ‖)，
    第一项取极限估计的残差作为替代，结果标记为 empirically certified。

    Raises:
        MissingLimitDataError: 没有 φ̃ 在网点 j 的残差
    """
    if limit_data is None:
        raise MissingLimitDataError("没有极限估计数据")
    try:
        residual = limit_data.residual(phi_tilde.probe_id, j)
    except (KeyError, IndexError):
        raise MissingLimitDataError(
            f"没有探针 {phi_tilde.probe_id} 在网点 {j} 的残差") from None
    psi_vector = psi.vector if isinstance(psi, Probe) else psi
    phi_vector = phi_tilde.vector
    return _bound(
        residual,
        vector_norm(phi_vector),
        vector_norm(scenario.conjugate_apply(phi_vector)),
        vector_norm(psi_vector),
        vector_norm(scenario.conjugate_apply(psi_vector)),
        scenario.normalizer(j),
    )


@dataclass(frozen=True)
class PairVerdict:
    """一对探针 (φ, ψ) 的判定"""
    phi_id: str
    psi_id: str
    verdict: Verdict
    tail_max: float
    tail_min: float
    kernel_weight: float
    consistent: Optional[bool]
    rows: Tuple[DecayRow, ...]


@dataclass(frozen=True)
class MixingReport:
    """验证报告

    Attributes:
        digest: 场景摘要
        scenario_name: 场景名称
        ells: 网的归一化分母
        converged: D 是否在所有探针上收敛
        eigenvalues: 压缩 D 的特征值
        span_dim: 探针张成空间维数
        kernel_dim: ker(D) 在探针空间中的维数
        pairs: 每对探针的判定
        overall: 总体判定
        boundary_loss: 平移时被截断丢弃的最大质量
        bound_violations: 经验证书界被测量值超过的行数
        tolerances: 判定阈值
    """
    digest: str
    scenario_name: str
    ells: Tuple[float, ...]
    converged: bool
    eigenvalues: Tuple[float, ...]
    span_dim: int
    kernel_dim: int
    pairs: Tuple[PairVerdict, ...]
    overall: Verdict
    boundary_loss: float
    bound_violations: int
    tolerances: Dict[str, float]

    def counts(self) -> Dict[str, int]:
        out = {v.value: 0 for v in Verdict}
        for pair in self.pairs:
            out[pair.verdict.value] += 1
        return out

    def spectrum_center(self) -> Optional[Tuple[int, float]]:
        """若所有特征值都在某个 c ∈ {-1, 0, 1} 的 1e-9 邻域内，返回 (c, 最大偏差)"""
        if not self.eigenvalues:
            return None
        for c in (-1, 0, 1):
            deviation = max(abs(lam - c) for lam in self.eigenvalues)
            if deviation <= SPECTRUM_LINE_TOLERANCE:
                return c, deviation
        return None


def _classify(converged: bool, tail: Sequence[float], kernel_weight: float,
              eps_mix: float, eps_witness: float) -> Tuple[Verdict, Optional[bool]]:
    if not converged:
        return Verdict.NO_CONCLUSION, None
    if kernel_weight <= KERNEL_WEIGHT_TOLERANCE and max(tail) <= eps_mix:
        return Verdict.MIXING, None
    if min(tail) >= eps_witness:
        return Verdict.WITNESS, kernel_weight > KERNEL_WEIGHT_TOLERANCE
    return Verdict.NO_CONCLUSION, None


def verdict(scenario: Scenario, probes: Sequence[Probe], estimate: LimitEstimate,
            compressed: CompressedD, eps_mix: float = 1e-8, eps_witness: float = 1e-3,
            pairs: Optional[Sequence[Tuple[int, int]]] = None,
            max_workers: Optional[int] = None) -> MixingReport:
    """逐对判定并组装报告

    尾部为网的最后 k 个点（k 取自极限估计）。判定规则：
    D 未收敛时无结论；φ 在 ker(D) 上的权重不超过 1e-8 且尾部系数都不超过 eps_mix 时沿网混合；
    尾部系数都不小于 eps_witness 时为非混合见证，并记录 φ 是否确有核分量；其余无结论。

    Raises:
        DigestMismatchError: 输入来自不同场景
    """
    digests = {scenario.digest, estimate.digest, compressed.digest}
    if len(digests) != 1:
        raise DigestMismatchError(f"输入来自不同场景: {sorted(digests)}")
    ids = tuple(p.probe_id for p in probes)
    if ids != estimate.probe_ids or ids != compressed.probe_ids:
        raise InvalidInputError("探针与极限估计、压缩矩阵的顺序不一致")

    if pairs is None:
        pairs = [(a, b) for a in range(len(probes)) for b in range(len(probes))]
    net_size = len(scenario.net)
    k = min(estimate.k, net_size)

    vectors = [p.vector for p in probes]
    norms = [vector_norm(v) for v in vectors]
    a_norms = [vector_norm(scenario.conjugate_apply(v)) for v in vectors]
    ells = [scenario.normalizer(j) for j in range(net_size)]

    def one(pair: Tuple[int, int]) -> Tuple[PairVerdict, int]:
        a, b = pair
        rows = []
        violations = 0
        for j in range(net_size):
            coeff = abs(scenario.coefficient(vectors[a], j, vectors[b]))
            measured = abs(scenario.coefficient(estimate.limits[a], j, vectors[b]))
            residual = estimate.residuals[a][j]
            bound = _bound(residual, norms[a], a_norms[a], norms[b], a_norms[b], ells[j])
            if measured > bound * (1 + 1e-12) + 1e-15:
                violations += 1
            rows.append(DecayRow(j, ells[j], coeff, bound, measured, residual))
        tail = [row.coeff_abs for row in rows[-k:]]
        weight = compressed.kernel_weights[a]
        label, consistent = _classify(estimate.converged, tail, weight, eps_mix, eps_witness)
        return PairVerdict(ids[a], ids[b], label, max(tail), min(tail), weight,
                           consistent, tuple(rows)), violations

    results = parallel_map(one, pairs, max_workers)
    pair_verdicts = tuple(r[0] for r in results)
    violations = sum(r[1] for r in results)
    if violations:
        logger.warning(f"{violations} 行测量值超过经验证书界（残差替代项不精确）")

    labels = {p.verdict for p in pair_verdicts}
    if pair_verdicts and labels == {Verdict.MIXING}:
        overall = Verdict.MIXING
    elif Verdict.WITNESS in labels:
        overall = Verdict.WITNESS
    else:
        overall = Verdict.NO_CONCLUSION

    loss = 0.0
    if scenario.family == "regular":
        loss = max(scenario.boundary_loss(j, v) for j in range(net_size) for v in vectors)
        if loss > 0:
            logger.warning(f"平移时丢失质量 {loss:.6g}，探针不在安全核内")

    report = MixingReport(
        digest=scenario.digest,
        scenario_name=scenario.name,
        ells=tuple(ells),
        converged=estimate.converged,
        eigenvalues=tuple(float(v) for v in compressed.eigenvalues),
        span_dim=compressed.span_dim,
        kernel_dim=compressed.kernel_dim,
        pairs=pair_verdicts,
        overall=overall,
        boundary_loss=loss,
        bound_violations=violations,
        tolerances={
            "eps_conv": estimate.eps_conv,
            "eps_ker": compressed.eps_ker,
            "eps_mix": eps_mix,
            "eps_witness": eps_witness,
        },
    )
    logger.info(f"场景 {scenario.name} 总体判定: {overall.value}")
    return report
