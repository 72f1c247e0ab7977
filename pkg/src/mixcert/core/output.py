"""
输出模块
写出 dj_samples.csv、spectrum.csv、decay.csv、diagnostics.csv 与 report.txt

所有浮点数使用 17 位有效数字；文件内容只依赖配置与种子，不含时间戳。
"""
import csv
import io
import os
from typing import Dict, Iterable, List, Optional, Sequence

from .limit_engine import LimitEstimate
from .logger_config import get_logger
from .mixing_verifier import CompressedD, MixingReport
from .scenario import ScenarioBundle
from .utils import atomic_write_text, format_float

logger = get_logger()

DJ_COLUMNS = ("j", "ell", "probe_id", "residual")
SPECTRUM_COLUMNS = ("index", "eigenvalue")
DECAY_COLUMNS = ("j", "ell", "phi_id", "psi_id", "coeff_abs", "certified_bound")
DIAGNOSTICS_COLUMNS = ("key", "value")


def _csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_float(v) if isinstance(v, float) else v for v in row])
    return buffer.getvalue()


def dj_samples_csv(estimate: LimitEstimate) -> str:
    """每个网点、每个探针的 ‖D_jφ - Dφ‖"""
    rows = []
    for j, ell in enumerate(estimate.ells):
        for k, probe_id in enumerate(estimate.probe_ids):
            rows.append((j + 1, float(ell), probe_id, float(estimate.residuals[k][j])))
    return _csv_text(DJ_COLUMNS, rows)


def spectrum_csv(compressed: CompressedD) -> str:
    rows = [(i, float(lam)) for i, lam in enumerate(compressed.eigenvalues)]
    return _csv_text(SPECTRUM_COLUMNS, rows)


def decay_csv(report: MixingReport) -> str:
    rows = []
    for pair in report.pairs:
        for row in pair.rows:
            rows.append((row.j + 1, float(row.ell), pair.phi_id, pair.psi_id,
                         float(row.coeff_abs), float(row.bound)))
    return _csv_text(DECAY_COLUMNS, rows)


def diagnostics_csv(report: MixingReport, quadrature_residual: Optional[float] = None) -> str:
    """report.txt 中不属于任何逐行表的标量，未计算的项留空"""
    rows = [
        ("span_dim", report.span_dim),
        ("kernel_dim", report.kernel_dim),
        ("bound_violations", report.bound_violations),
        ("boundary_loss", float(report.boundary_loss)),
        ("quadrature_residual", "" if quadrature_residual is None else float(quadrature_residual)),
        ("overall", report.overall.value),
    ]
    return _csv_text(DIAGNOSTICS_COLUMNS, rows)


def report_text(bundle: ScenarioBundle, estimate: LimitEstimate,
                compressed: CompressedD, report: MixingReport,
                quadrature_residual: Optional[float] = None) -> str:
    """人类可读的报告"""
    scenario = bundle.scenario
    net = scenario.net
    tol = bundle.tolerances
    lines: List[str] = [
        "mixcert 报告",
        f"场景: {scenario.name}",
        f"摘要: {report.digest}",
        f"表示: {scenario.family}",
        f"群: {net.group.label}",
        f"网: {net.strategy}, J = {len(net)}, ell = {format_float(net.lengths[0])} .. "
        f"{format_float(net.lengths[-1])}",
        f"探针数: {len(bundle.probes)}",
        f"探针张成空间维数: {report.span_dim}",
        f"D 收敛: {'是' if report.converged else '否'} "
        f"(eps_conv = {format_float(tol['eps_conv'])}, k = {tol['k']}, "
        f"richardson = {'on' if tol['richardson'] else 'off'})",
        "收敛规则: 尾部残差低于阈值（经验规则，强极限没有给定收敛速率）",
    ]
    if compressed.eigenvalues.size:
        lines.append(f"谱: min = {format_float(compressed.eigenvalues[0])}, "
                     f"max = {format_float(compressed.eigenvalues[-1])}")
    center = report.spectrum_center()
    if center is not None:
        c, deviation = center
        lines.append(f"D ≈ {c} (max |lambda - ({c})| = {format_float(deviation)})")
    lines += [
        f"ker(D) 维数: {report.kernel_dim} (eps_ker = {format_float(tol['eps_ker'])})",
        "证书界: empirically certified "
        "(第一项为残差替代 ‖D_jφ - Dφ‖，见 dj_samples.csv 的 residual 列)",
        f"证书界被测量值超过的行数: {report.bound_violations}",
        f"截断丢失质量: {format_float(report.boundary_loss)}",
    ]
    if quadrature_residual is not None:
        lines.append(f"积分形式校验残差: {format_float(quadrature_residual)} (nodes = {tol['nodes']})")
    counts: Dict[str, int] = report.counts()
    lines.append("判定统计: " + ", ".join(f"{k} {v}" for k, v in counts.items()))
    inconsistent = [p for p in report.pairs if p.consistent is False]
    if inconsistent:
        lines.append(f"与核分量不一致的见证: {len(inconsistent)}")
    lines.append(f"总体判定: {report.overall.value}")
    return "\n".join(lines) + "\n"


def write_outputs(out_dir: str, bundle: ScenarioBundle, estimate: LimitEstimate,
                  compressed: CompressedD, report: MixingReport,
                  quadrature_residual: Optional[float] = None) -> Dict[str, str]:
    """原子地写出全部结果文件

    Returns:
        文件名到路径的映射
    """
    os.makedirs(out_dir, exist_ok=True)
    files = {
        "dj_samples.csv": dj_samples_csv(estimate),
        "spectrum.csv": spectrum_csv(compressed),
        "decay.csv": decay_csv(report),
        "diagnostics.csv": diagnostics_csv(report, quadrature_residual),
        "report.txt": report_text(bundle, estimate, compressed, report, quadrature_residual),
    }
    paths = {}
    for name, text in files.items():
        path = os.path.join(out_dir, name)
        atomic_write_text(path, text)
        paths[name] = path
        logger.debug(f"已写出 {path}")
    logger.info(f"结果已写入 {out_dir}")
    return paths
