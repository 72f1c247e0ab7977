"""
测试外部API：内置场景、退出码与输出文件
"""
import io

import numpy as np
import pytest
from rich.console import Console

from mixcert.__main__ import main
from mixcert.core.api import (
    EXIT_CONFIG,
    EXIT_FAILED,
    EXIT_OK,
    certify,
    identity_suite,
    parse_group_kind,
    run_axioms,
    run_certify,
    run_identity_checks,
)
from mixcert.core.config import ScenarioConfig, shipped_scenario, shipped_scenarios
from mixcert.core.errors import ConfigError, InvalidInputError
from mixcert.core.mixing_verifier import Verdict
from mixcert.core.output import report_text

MINIMAL_REGULAR = """
name = "minimal"

[group]
kind = "lattice"
dim = 1

[length]
base = "word"

[net]
strategy = "ray"
direction = [1]
count = 8

[representation]
type = "regular"
radius = {radius}

[conjugate]
type = "position"

[probes]
type = "delta"
radius = 2
"""


def quiet_console():
    return Console(file=io.StringIO(), width=120)


def test_shipped_scenarios_are_valid():
    names = {path.stem for path in shipped_scenarios()}
    assert {"z2_regular", "f2_regular", "z_shift", "finite_dim", "flow_d1", "flow_d2"} <= names
    for path in shipped_scenarios():
        config = ScenarioConfig.load(path)
        assert len(config.digest()) == 16
    with pytest.raises(ConfigError):
        shipped_scenario("missing")


def test_z2_regular_is_mixing():
    """Z^2 字长乘子：D = -1，所有探针对沿网混合"""
    result = certify(shipped_scenario("z2_regular"), max_workers=1)
    report = result.report
    assert result.estimate.converged
    assert report.overall is Verdict.MIXING
    assert all(abs(lam + 1) <= 1e-9 for lam in report.eigenvalues)
    assert report.boundary_loss == 0
    text = report_text(result.bundle, result.estimate, result.compressed, report)
    assert "D ≈ -1" in text
    assert "empirically certified" in text


def test_f2_regular_is_mixing():
    result = certify(shipped_scenario("f2_regular"))
    assert result.report.overall is Verdict.MIXING
    np.testing.assert_allclose(result.compressed.eigenvalues, -1.0, atol=1e-9)


def test_z_shift_has_identity_limit():
    result = certify(shipped_scenario("z_shift"))
    assert result.report.overall is Verdict.MIXING
    center, _ = result.report.spectrum_center()
    assert center == 1
    assert result.report.bound_violations == 0


def test_finite_dimensional_witness():
    """有限维表示：D = 0，特征向量探针给出非混合见证"""
    result = certify(shipped_scenario("finite_dim"))
    report = result.report
    assert report.overall is Verdict.WITNESS
    assert min(result.compressed.kernel_weights) >= 1 - 1e-6
    a_norm = result.bundle.scenario.conjugate.norm()
    ell_last = result.bundle.scenario.net.lengths[-1]
    assert max(abs(lam) for lam in report.eigenvalues) <= 2 * a_norm / ell_last
    assert result.quadrature_residual is None


@pytest.mark.parametrize("name", ["flow_d1", "flow_d2"])
def test_flow_witness(name):
    result = certify(shipped_scenario(name))
    assert result.report.overall is Verdict.WITNESS
    assert result.report.kernel_dim == result.report.span_dim
    assert result.quadrature_residual is not None
    assert result.quadrature_residual <= 1e-8


def test_missing_group_block(tmp_path):
    text = MINIMAL_REGULAR.format(radius=24).replace('[group]\nkind = "lattice"\ndim = 1\n', "")
    with pytest.raises(ConfigError) as info:
        ScenarioConfig.from_string(text)
    assert info.value.block == "group"
    assert "group" in str(info.value)

    path = tmp_path / "broken.toml"
    path.write_text(text, encoding="utf-8")
    assert run_certify(path, tmp_path / "out", console=quiet_console()) == EXIT_CONFIG
    assert not (tmp_path / "out" / "report.txt").exists()


def test_safe_core_violation_is_config_error(tmp_path):
    """R 小于网的最大长度加探针半径时配置无效"""
    with pytest.raises(ConfigError) as info:
        ScenarioConfig.from_string(MINIMAL_REGULAR.format(radius=9))
    assert info.value.block == "representation"
    ScenarioConfig.from_string(MINIMAL_REGULAR.format(radius=10))


def test_unknown_tolerance_key():
    text = MINIMAL_REGULAR.format(radius=24) + "\n[tolerances]\nepsilon = 1.0\n"
    with pytest.raises(ConfigError) as info:
        ScenarioConfig.from_string(text)
    assert info.value.block == "tolerances"


def test_too_short_net_is_config_error(tmp_path):
    text = MINIMAL_REGULAR.format(radius=24).replace("count = 8", "count = 3")
    path = tmp_path / "short.toml"
    path.write_text(text, encoding="utf-8")
    assert run_certify(path, tmp_path / "out", console=quiet_console()) == EXIT_CONFIG


MINIMAL_FINITE = """
name = "finite"

[group]
kind = "{kind}"
dim = 1

[length]
base = "{base}"

[net]
strategy = "ray"
direction = [1000]
count = 6

[representation]
type = "{rep}"
dim = 2
{extra}

[conjugate]
{conjugate}

[probes]
type = "eigen"
"""


def finite_config(conjugate, rep="matrix", extra=""):
    kind, base = ("lattice", "word") if rep == "matrix" else ("euclidean", "euclidean")
    return MINIMAL_FINITE.format(kind=kind, base=base, rep=rep, extra=extra, conjugate=conjugate)


@pytest.mark.parametrize("conjugate", [
    'type = "explicit"\nreal = [[1.0, 0.0], [0.0]]',
    'type = "explicit"\nreal = [[1.0, 0.0], [0.0, 2.0]]\nimag = [[0, 0, 0]]',
    'type = "explicit"\nreal = [[1.0, "x"], [0.0, 2.0]]',
    'type = "explicit"\nreal = [[1.0, 1.0], [0.0, 2.0]]',
    'type = "diagonal"\nvalues = ["a", "b"]',
    'type = "diagonal"\nvalues = [1.0, 2.0, 3.0]',
    'type = "diagonal"\nvalues = [true, false]',
])
def test_malformed_conjugate_is_config_error(tmp_path, conjugate):
    """畸形的显式矩阵或对角值报告 [conjugate] 错误，退出码为 2"""
    text = finite_config(conjugate)
    with pytest.raises(ConfigError) as info:
        ScenarioConfig.from_string(text)
    assert info.value.block == "conjugate"

    path = tmp_path / "conjugate.toml"
    path.write_text(text, encoding="utf-8")
    assert run_certify(path, tmp_path / "out", console=quiet_console()) == EXIT_CONFIG
    assert not (tmp_path / "out" / "report.txt").exists()


@pytest.mark.parametrize("spectra", [
    "spectra = [[0.5]]",
    "spectra = [[0.5, 0.25], [0.1, 0.2]]",
    'spectra = [[0.5, "z"]]',
    "spectra = [0.5, 0.25]",
])
def test_malformed_spectra_is_config_error(tmp_path, spectra):
    text = finite_config('type = "diagonal"\nvalues = [1.0, -1.0]', rep="flow", extra=spectra)
    with pytest.raises(ConfigError) as info:
        ScenarioConfig.from_string(text)
    assert info.value.block == "representation"

    path = tmp_path / "spectra.toml"
    path.write_text(text, encoding="utf-8")
    assert run_certify(path, tmp_path / "out", console=quiet_console()) == EXIT_CONFIG


def test_well_formed_finite_configs_are_accepted():
    ScenarioConfig.from_string(finite_config('type = "explicit"\nreal = [[1.0, 0.5], [0.5, 2.0]]\n'
                                             'imag = [[0.0, 1.0], [-1.0, 0.0]]'))
    ScenarioConfig.from_string(finite_config('type = "diagonal"\nvalues = [1, -1]', rep="flow",
                                             extra="spectra = [[0.5, -0.25]]"))


def test_certify_outputs_are_deterministic(tmp_path):
    config = shipped_scenario("z_shift")
    for sub in ("a", "b"):
        assert run_certify(config, tmp_path / sub, console=quiet_console()) == EXIT_OK
    for name in ("dj_samples.csv", "spectrum.csv", "decay.csv", "diagnostics.csv", "report.txt"):
        first = (tmp_path / "a" / name).read_bytes()
        assert first == (tmp_path / "b" / name).read_bytes()
    header = (tmp_path / "a" / "decay.csv").read_text(encoding="utf-8").splitlines()[0]
    assert header == "j,ell,phi_id,psi_id,coeff_abs,certified_bound"
    first_row = (tmp_path / "a" / "dj_samples.csv").read_text(encoding="utf-8").splitlines()[1]
    assert first_row.startswith("1,")
    diagnostics = (tmp_path / "a" / "diagnostics.csv").read_text(encoding="utf-8").splitlines()
    assert diagnostics[0] == "key,value"
    assert dict(line.split(",", 1) for line in diagnostics[1:]) == {
        "span_dim": "9",
        "kernel_dim": "0",
        "bound_violations": "0",
        "boundary_loss": "0",
        "quadrature_residual": "",
        "overall": "mixing-along-net",
    }


def test_flow_diagnostics_carry_quadrature_residual(tmp_path):
    assert run_certify(shipped_scenario("flow_d1"), tmp_path, console=quiet_console()) == EXIT_OK
    lines = (tmp_path / "diagnostics.csv").read_text(encoding="utf-8").splitlines()[1:]
    diagnostics = dict(line.split(",", 1) for line in lines)
    assert 0 <= float(diagnostics["quadrature_residual"]) <= 1e-8
    assert diagnostics["overall"] == "non-mixing-witness"
    assert int(diagnostics["kernel_dim"]) == int(diagnostics["span_dim"]) == 6
    report = (tmp_path / "report.txt").read_text(encoding="utf-8")
    assert diagnostics["quadrature_residual"] in report


def test_identity_checks_pass():
    results = identity_suite(seed=0, max_dim=16)
    failed = [r.name for r in results if not r.passed]
    assert failed == []
    assert run_identity_checks(0, 16, console=quiet_console()) == EXIT_OK


@pytest.mark.parametrize("max_dim", [0, 65, 128])
def test_identity_dimension_limit(max_dim):
    assert run_identity_checks(0, max_dim, console=quiet_console()) == EXIT_CONFIG
    with pytest.raises(InvalidInputError):
        identity_suite(0, max_dim)


@pytest.mark.parametrize("kind", ["z2", "f2", "z3", "r2"])
def test_axioms_clean(kind):
    assert run_axioms(kind, samples=1000, seed=0, console=quiet_console()) == EXIT_OK


def test_axioms_constant_pseudometric_fails():
    console = quiet_console()
    assert run_axioms("const", samples=200, console=console) == EXIT_FAILED
    assert "L4" in console.file.getvalue()


def test_axioms_unsupported_kind():
    assert run_axioms("q3", console=quiet_console()) == EXIT_CONFIG
    with pytest.raises(ConfigError):
        parse_group_kind("z0")
    assert parse_group_kind("F3").label == parse_group_kind("f3").label


def test_main_entry():
    assert main(["--no-log-file", "axioms", "--group", "z2", "--samples", "100"]) == EXIT_OK
    assert main(["--no-log-file", "identities", "--max-dim", "100"]) == EXIT_CONFIG
