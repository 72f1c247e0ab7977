"""
场景构建模块
把校验过的 ScenarioConfig 转换为场景对象与探针组
"""
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .config import ScenarioConfig
from .errors import ConfigError, MixcertError
from .logger_config import get_logger
from .operator_core import (
    Operator,
    commuting_family_in_basis,
    random_hermitian,
    random_unitary,
)
from .representation import (
    DiagonalMultiplier,
    FlowScenario,
    LatticeMatrixScenario,
    Probe,
    RegularScenario,
    RegularSpace,
    Scenario,
)

logger = get_logger()


@dataclass(frozen=True)
class ScenarioBundle:
    """场景、探针与判定阈值"""
    config: ScenarioConfig
    scenario: Scenario
    probes: Tuple[Probe, ...]
    tolerances: dict

    @property
    def digest(self) -> str:
        return self.scenario.digest


def build_scenario(config: ScenarioConfig) -> ScenarioBundle:
    """按配置构造场景

    Raises:
        ConfigError: 配置内容无法构造出合法的场景对象
    """
    rep = config.representation_type
    try:
        if rep == "regular":
            scenario, probes = _build_regular(config)
        else:
            scenario, probes = _build_finite(config, rep)
    except ConfigError:
        raise
    except MixcertError as e:
        raise ConfigError("representation", str(e)) from e
    logger.info(f"场景 {scenario.name} [{scenario.digest}]: {rep}, {len(probes)} 个探针, "
                f"{len(scenario.net)} 个网点")
    return ScenarioBundle(config, scenario, tuple(probes), config.tolerances)


def _build_regular(config: ScenarioConfig) -> Tuple[Scenario, List[Probe]]:
    group = config.group_spec()
    ell = config.length_function()
    space = RegularSpace(group, ell, config.read_int("representation", "radius"))
    multiplier = DiagonalMultiplier(space, config.read("conjugate", "type"))
    scenario = RegularScenario(config.name, space, multiplier, config.net(), config.digest())

    kind = config.read("probes", "type")
    probes: List[Probe] = []
    if kind == "delta":
        if "elements" in config.block("probes"):
            elements = [config.parse_element("probes", v) for v in config.read("probes", "elements")]
        else:
            radius = config.read_int("probes", "radius")
            elements = [g for g in space.basis if space.ell(g) <= radius]
        for g in elements:
            v = space.delta(g)
            probes.append(Probe(v.label, v))
    elif kind == "ball":
        for r in config.read("probes", "radii"):
            v = space.ball_indicator(r)
            probes.append(Probe(v.label, v))
    else:
        rng = np.random.default_rng(config.read_int("probes", "seed", 0, minimum=0))
        radius = config.read_int("probes", "radius")
        for m in range(config.read_int("probes", "count")):
            probes.append(Probe(f"rand[{m}]", space.random_vector(rng, radius, f"rand[{m}]")))

    ids = [p.probe_id for p in probes]
    if len(set(ids)) != len(ids):
        raise ConfigError("probes", "探针编号重复")
    return scenario, probes


def _conjugate_operator(config: ScenarioConfig, dim: int) -> Operator:
    kind = config.read("conjugate", "type")
    if kind == "random":
        rng = np.random.default_rng(config.read_int("conjugate", "seed", 0))
        return random_hermitian(dim, rng, norm=config.read_float("conjugate", "norm", 1.0))
    if kind == "diagonal":
        return Operator.from_hermitian(np.diag(config.read_array("conjugate", "values", (dim,))))
    return Operator.from_hermitian(config.explicit_conjugate(dim))


def _build_finite(config: ScenarioConfig, rep: str) -> Tuple[Scenario, List[Probe]]:
    dim = config.read_int("representation", "dim")
    rng = np.random.default_rng(config.read_int("representation", "seed", 0))
    conjugate = _conjugate_operator(config, dim)
    q = random_unitary(dim, rng).matrix

    scenario: Scenario
    if rep == "matrix":
        theta = rng.uniform(0.0, 2.0 * np.pi, size=dim)
        u0 = Operator((q * np.exp(1j * theta)) @ q.conj().T, unitary=True)
        scenario = LatticeMatrixScenario(config.name, u0, conjugate, config.net(), config.digest())
    else:
        d = config.group_spec().dim
        if config.read("representation", "spectra") is None:
            spectra = [rng.uniform(-1.0, 1.0, size=dim) for _ in range(d)]
        else:
            spectra = list(config.read_array("representation", "spectra", (d, dim)))
        generators = commuting_family_in_basis(q, spectra)
        scenario = FlowScenario(config.name, generators, conjugate, config.net(), config.digest())

    probes: List[Probe] = []
    if config.read("probes", "type") == "eigen":
        count = _eigen_probe_count(config, dim)
        for m in range(count):
            probes.append(Probe(f"eig[{m}]", q[:, m].copy()))
    else:
        prng = np.random.default_rng(config.read_int("probes", "seed", 0))
        for m in range(config.read_int("probes", "count")):
            v = prng.normal(size=dim) + 1j * prng.normal(size=dim)
            probes.append(Probe(f"rand[{m}]", v / np.linalg.norm(v)))
    return scenario, probes


def _eigen_probe_count(config: ScenarioConfig, dim: int) -> int:
    count: Optional[int] = config.read("probes", "count")
    if count is None:
        return dim
    count = config.read_int("probes", "count", minimum=1)
    if count > dim:
        raise ConfigError("probes", f"特征向量探针最多 {dim} 个: {count}")
    return count
