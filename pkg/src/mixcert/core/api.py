"""
外部API模块
提供便捷的API函数供外部调用，并把库异常统一转换为退出码
"""
import re
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
from rich import box
from rich.console import Console
from rich.table import Table

from .config import ScenarioConfig
from .errors import (
    AdapterRejectedError,
    ConfigError,
    DegenerateProbeError,
    InfeasibleError,
    InvalidInputError,
    MixcertError,
    TooFewSamplesError,
)
from .group_core import (
    GroupSpec,
    LengthFunction,
    check_length_axioms,
    length_from_pseudometric,
    make_net,
    sample_pairs,
)
from .limit_engine import (
    LimitEstimate,
    build_atilde,
    cesaro_form,
    check_atilde_identity,
    d_direct,
    estimate_limit,
    integral_form,
    integral_form_closed,
    resolvent_d1_form,
    sample_net,
)
from .logger_config import get_logger
from .mixing_verifier import CompressedD, MixingReport, compress_D, verdict
from .operator_core import (
    check_com1,
    check_com2,
    commuting_family_in_basis,
    random_hermitian,
    random_unitary,
)
from .output import write_outputs
from .representation import FlowScenario, LatticeMatrixScenario
from .scenario import ScenarioBundle, build_scenario
from .utils import max_norm

logger = get_logger()

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

MAX_IDENTITY_DIM = 64
COM1_EPSILONS = (1e-1, 1e-2, 1e-3, 1e-4)


@dataclass(frozen=True)
class CertifyResult:
    """一次完整认证的全部中间结果"""
    bundle: ScenarioBundle
    estimate: LimitEstimate
    compressed: CompressedD
    report: MixingReport
    quadrature_residual: Optional[float] = None


def _flow_quadrature_check(flow: FlowScenario, nodes: int) -> float:
    """在网方向的单位点上检查 [Ã, U] = l·D^{int}·U"""
    x0 = flow.net.elements[0]
    scale = float(flow.net.base_lengths[0])
    unit = tuple(float(v) / scale for v in x0)
    residual = check_atilde_identity(flow, unit, nodes)
    logger.info(f"积分形式校验 (nodes = {nodes}): 残差 {residual:.3e}")
    return residual


def certify(config: Union[str, Path, ScenarioConfig],
            max_workers: Optional[int] = None) -> CertifyResult:
    """便捷函数：沿网估计 D、压缩并判定

    Args:
        config: 配置文件路径或已加载的配置
        max_workers: 最大线程数，None 时读取 MIXCERT_THREADS

    Returns:
        认证结果
    """
    if not isinstance(config, ScenarioConfig):
        config = ScenarioConfig.load(config)
    bundle = build_scenario(config)
    tol = bundle.tolerances
    samples = sample_net(bundle.scenario, bundle.probes, max_workers)
    estimate = estimate_limit(samples, tol["eps_conv"], tol["k"], tol["richardson"],
                              [p.probe_id for p in bundle.probes])
    compressed = compress_D(bundle.scenario, bundle.probes, estimate, tol["eps_ker"])
    report = verdict(bundle.scenario, bundle.probes, estimate, compressed,
                     tol["eps_mix"], tol["eps_witness"], max_workers=max_workers)
    quadrature = None
    if isinstance(bundle.scenario, FlowScenario):
        quadrature = _flow_quadrature_check(bundle.scenario, tol["nodes"])
    return CertifyResult(bundle, estimate, compressed, report, quadrature)


def run_certify(config_path: Union[str, Path], out_dir: Union[str, Path],
                max_workers: Optional[int] = None,
                console: Optional[Console] = None) -> int:
    """运行 certify 子命令

    Returns:
        0 判定完成（任意判定）；2 配置错误；3 数值保护触发
    """
    console = console or Console()
    try:
        result = certify(config_path, max_workers)
        write_outputs(str(out_dir), result.bundle, result.estimate, result.compressed, result.report,
                      result.quadrature_residual)
    except ConfigError as e:
        logger.error(f"配置错误: {e}")
        return EXIT_CONFIG
    except (TooFewSamplesError, DegenerateProbeError, InfeasibleError) as e:
        # 网太短或探针退化同样是配置问题
        logger.error(f"配置错误: {e}")
        return EXIT_CONFIG
    except MixcertError as e:
        logger.error(f"数值保护触发: {e}")
        return EXIT_NUMERICAL

    report = result.report
    table = Table(title=f"{report.scenario_name} [{report.digest}]", box=box.SIMPLE)
    table.add_column("判定")
    table.add_column("探针对数", justify="right")
    for label, count in report.counts().items():
        table.add_row(label, str(count))
    console.print(table)
    console.print(f"总体判定: [bold]{report.overall.value}[/bold]")
    return EXIT_OK


@dataclass(frozen=True)
class IdentityResult:
    """单个恒等式的检查结果"""
    name: str
    residual: float
    tolerance: float
    passed: bool
    detail: str = ""


def _identity_com1(rng: np.random.Generator, n: int) -> IdentityResult:
    s = random_hermitian(n, rng)
    a = random_hermitian(n, rng)
    report = check_com1(s, a, COM1_EPSILONS)
    return IdentityResult("com1: [iS, A_eps] -> [iS, A]", max(report.residuals), 2.0,
                          report.passed, f"C = {report.constant:.4g}, spread = {report.spread:.3f}")


def _identity_com2(rng: np.random.Generator, n: int) -> IdentityResult:
    residual = 0.0
    for _ in range(5):
        h = random_hermitian(n, rng)
        a = random_hermitian(n, rng)
        residual = max(residual, check_com2(h, a, 0.3 + 1.0j))
    return IdentityResult("com2: [R(z), A] = -R(z)[H, A]R(z)", residual, 1e-10, residual <= 1e-10)


def _identity_cesaro(rng: np.random.Generator, n: int) -> IdentityResult:
    group = GroupSpec.lattice(1)
    ell = LengthFunction.standard(group)
    net = make_net(group, ell, "ray", 32, direction=(1,))
    residual = 0.0
    for _ in range(20):
        dim = int(rng.integers(1, n + 1))
        u = random_unitary(dim, rng)
        a = random_hermitian(dim, rng)
        scenario = LatticeMatrixScenario("cesaro", u, a, net)
        big_n = int(rng.integers(1, 33))
        phi = rng.normal(size=dim) + 1j * rng.normal(size=dim)
        phi /= np.linalg.norm(phi)
        lhs = cesaro_form(u, a, big_n, phi)
        rhs = d_direct(scenario, big_n - 1, phi)
        residual = max(residual, float(np.max(np.abs(lhs - rhs))))
    return IdentityResult("cesaro: (1/N) sum U^n C U^-n = D_N", residual, 1e-12, residual <= 1e-12)


def _flow(n: int, rng: np.random.Generator, x, spectra) -> FlowScenario:
    group = GroupSpec.euclidean(len(x))
    net = make_net(group, LengthFunction.standard(group), "ray", 2, direction=x)
    q = random_unitary(n, rng).matrix
    return FlowScenario("identities", commuting_family_in_basis(q, spectra),
                        random_hermitian(n, rng), net)


def _identity_atilde(rng: np.random.Generator, n: int) -> List[IdentityResult]:
    x = (20.0, 25.0)
    grid = np.linspace(-1.0, 1.0, n)
    flow = _flow(n, rng, x, [grid, grid])
    atilde = build_atilde(flow).matrix
    hermitian = max_norm(atilde - atilde.conj().T)
    res32 = check_atilde_identity(flow, x, 32)
    res64 = check_atilde_identity(flow, x, 64)
    floor = 1e-12 * max(1.0, float(np.max(np.abs(atilde))) * np.hypot(*x))
    doubling_ok = res64 <= max(res32, floor) and res64 <= 1e-8
    return [
        IdentityResult("atilde hermitian", hermitian, 1e-10, hermitian <= 1e-10),
        IdentityResult("atilde: [A~, U] = l D U (64 nodes)", res64, 1e-8, doubling_ok,
                       f"32 nodes: {res32:.3e}"),
    ]


def _identity_resolvent(rng: np.random.Generator, n: int) -> List[IdentityResult]:
    t = 1.7
    flow = _flow(n, rng, (t,), [rng.uniform(-1.0, 1.0, size=n)])
    h, a = flow.generators[0], flow.conjugate
    phi = rng.normal(size=n) + 1j * rng.normal(size=n)
    quad = integral_form(flow, (t,), phi)
    by_resolvent = resolvent_d1_form(h, a, t, phi)
    closed = integral_form_closed(flow, (t,), phi)
    r1 = float(np.max(np.abs(quad - by_resolvent)))
    r2 = float(np.max(np.abs(quad - closed)))
    return [
        IdentityResult("d = 1 integral form = resolvent form", r1, 1e-10, r1 <= 1e-10),
        IdentityResult("quadrature = eigenbasis closed form", r2, 1e-10, r2 <= 1e-10),
    ]


def identity_suite(seed: int = 0, max_dim: int = 16) -> List[IdentityResult]:
    """运行全部代数恒等式检查（不做退出码转换）"""
    if not 1 <= max_dim <= MAX_IDENTITY_DIM:
        raise InvalidInputError(f"维数上限必须在 1..{MAX_IDENTITY_DIM} 之间: {max_dim}")
    n = min(max_dim, 16)
    rng = np.random.default_rng(seed)
    results = [
        _identity_com1(rng, n),
        _identity_com2(rng, n),
        _identity_cesaro(rng, n),
    ]
    results += _identity_atilde(rng, n)
    results += _identity_resolvent(rng, n)
    return results


def run_identity_checks(seed: int = 0, max_dim: int = 16,
                        console: Optional[Console] = None) -> int:
    """运行 identities 子命令

    Returns:
        0 全部通过；1 有恒等式失败；2 维数上限超过 64
    """
    console = console or Console()
    if not 1 <= max_dim <= MAX_IDENTITY_DIM:
        logger.error(f"维数上限必须在 1..{MAX_IDENTITY_DIM} 之间: {max_dim}")
        return EXIT_CONFIG
    try:
        results = identity_suite(seed, max_dim)
    except MixcertError as e:
        logger.error(f"恒等式检查出错: {e}")
        return EXIT_FAILED

    table = Table(title=f"恒等式检查 (seed = {seed}, max_dim = {max_dim})", box=box.SIMPLE)
    for column in ("恒等式", "残差", "容差", "结果", "备注"):
        table.add_column(column)
    for r in results:
        status = "[green]PASS[/green]" if r.passed else "[red]FAIL[/red]"
        table.add_row(r.name, f"{r.residual:.3e}", f"{r.tolerance:.0e}", status, r.detail)
    console.print(table)

    failed = [r.name for r in results if not r.passed]
    if failed:
        logger.error(f"恒等式失败: {failed}")
        return EXIT_FAILED
    logger.info("全部恒等式通过")
    return EXIT_OK


_KIND_PATTERN = re.compile(r"^([zfr])(\d+)$")


def parse_group_kind(kind: str) -> GroupSpec:
    """z<d> → Z^d，f<r> → F_r，r<d> → R^d

    Raises:
        ConfigError: 不支持的群类型
    """
    match = _KIND_PATTERN.match(kind.strip().lower())
    if not match or int(match.group(2)) < 1:
        raise ConfigError("group", f"不支持的群类型: {kind!r}（可用 z<d>、f<r>、r<d>、const）")
    factory = {"z": GroupSpec.lattice, "f": GroupSpec.free, "r": GroupSpec.euclidean}
    return factory[match.group(1)](int(match.group(2)))


def run_axioms(kind: str, samples: int = 1000, seed: int = 0,
               console: Optional[Console] = None) -> int:
    """运行 axioms 子命令

    kind = const 时检查 Z^2 上的常数伪度量适配器（预期被 (L4) 拒绝）。

    Returns:
        0 无违反；1 有违反；2 不支持的群类型
    """
    console = console or Console()
    if samples < 1:
        logger.error(f"样本数必须为正: {samples}")
        return EXIT_CONFIG

    if kind.strip().lower() == "const":
        group = GroupSpec.lattice(2)
        try:
            length_from_pseudometric(lambda x, y: 0.0, group.identity(), group,
                                     sample_count=samples, seed=seed)
        except AdapterRejectedError as e:
            console.print(f"[red]({e.axiom}) 违反[/red]: {e} 见证 = {e.witness}")
            logger.error(f"伪度量适配器被拒绝: {e}")
            return EXIT_FAILED
        console.print("常数伪度量意外通过了检查")
        return EXIT_OK

    try:
        group = parse_group_kind(kind)
    except ConfigError as e:
        logger.error(str(e))
        return EXIT_CONFIG

    ell = LengthFunction.standard(group)
    report = check_length_axioms(ell, sample_pairs(group, samples, seed=seed))

    table = Table(title=f"{group.label} 长度公理 ({report.sample_count} 对样本, seed = {seed})",
                  box=box.SIMPLE)
    table.add_column("公理")
    table.add_column("最大违反", justify="right")
    table.add_row("L1", f"{report.l1_violation:g}")
    table.add_row("L2", f"{report.l2_violation:g}")
    table.add_row("L3", f"{report.l3_violation:g}")
    console.print(table)

    if report.ball_sizes:
        balls = Table(title="球大小 (L4 见证)", box=box.SIMPLE)
        balls.add_column("R", justify="right")
        balls.add_column("|{l <= R}|", justify="right")
        for radius, size in report.ball_sizes.items():
            balls.add_row(str(radius), "无限" if size is None else str(size))
        console.print(balls)

    if not report.clean:
        logger.error(f"{group.label} 长度公理检查失败")
        return EXIT_FAILED
    logger.info(f"{group.label} 长度公理检查通过")
    return EXIT_OK
