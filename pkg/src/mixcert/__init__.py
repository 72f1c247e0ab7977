"""
mixcert
基于交换子判据的强混合数值认证工具包

对群 X 的酉表示 U 与共轭算子 A，沿发散网计算
D_j = l(x_j)^{-1}[A, U(x_j)]U(x_j)^{-1}，估计强极限 D，
并在探针张成的 ker(D)^⊥ 上认证矩阵系数 <φ, U(x_j)ψ> 的衰减。

提供以下功能：
1. 离散群 Z^d、F_r 与 R^d 的长度函数、公理检查与发散网
2. 截断左正则表示、有限维矩阵表示与 R^d 流
3. D_j 的直接、Cesàro 与积分形式及其代数恒等式
4. D 的压缩、核划分、经验证书界与逐对判定
5. 场景配置 (TOML) 驱动的命令行工具

主要API:
- certify: 按场景配置完成一次认证
- run_certify / run_identity_checks / run_axioms: 命令行子命令
"""

from mixcert.core.api import (
    CertifyResult,
    certify,
    identity_suite,
    run_axioms,
    run_certify,
    run_identity_checks,
)
from mixcert.core.config import ScenarioConfig, shipped_scenario, shipped_scenarios
from mixcert.core.errors import ConfigError, MixcertError
from mixcert.core.group_core import (
    DivergentNet,
    GroupSpec,
    LengthFunction,
    ProperFunction,
    check_length_axioms,
    length,
    make_net,
)
from mixcert.core.limit_engine import (
    LimitEstimate,
    build_atilde,
    cesaro_form,
    d_direct,
    estimate_limit,
    integral_form,
    sample_net,
)
from mixcert.core.logger_config import get_logger, setup_logger
from mixcert.core.mixing_verifier import (
    CompressedD,
    MixingReport,
    Verdict,
    certified_bound,
    compress_D,
    decay_table,
    verdict,
)
from mixcert.core.operator_core import Operator
from mixcert.core.representation import (
    FlowScenario,
    LatticeMatrixScenario,
    Probe,
    ProbeVector,
    RegularScenario,
    RegularSpace,
    coefficient,
    matrix_rep,
    regular_apply,
    regular_commutator,
)
from mixcert.core.scenario import build_scenario

# 版本信息
__version__ = "1.0.0"
__description__ = "基于交换子判据的强混合数值认证工具"

# 主要导出的API
__all__ = [
    # API functions
    "certify",
    "run_certify",
    "run_identity_checks",
    "run_axioms",
    "identity_suite",
    "CertifyResult",

    # Configuration
    "ScenarioConfig",
    "shipped_scenario",
    "shipped_scenarios",
    "build_scenario",

    # Groups and lengths
    "GroupSpec",
    "LengthFunction",
    "ProperFunction",
    "DivergentNet",
    "length",
    "make_net",
    "check_length_axioms",

    # Representations
    "Operator",
    "RegularSpace",
    "ProbeVector",
    "Probe",
    "RegularScenario",
    "LatticeMatrixScenario",
    "FlowScenario",
    "regular_apply",
    "regular_commutator",
    "matrix_rep",
    "coefficient",

    # Engine and verifier
    "sample_net",
    "d_direct",
    "cesaro_form",
    "integral_form",
    "build_atilde",
    "estimate_limit",
    "LimitEstimate",
    "compress_D",
    "CompressedD",
    "decay_table",
    "certified_bound",
    "verdict",
    "MixingReport",
    "Verdict",

    # Errors and logging
    "MixcertError",
    "ConfigError",
    "setup_logger",
    "get_logger",
]
