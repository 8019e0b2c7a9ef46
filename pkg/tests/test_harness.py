import json
import time

import numpy as np
import pytest

from passdeform.errors import ValidationError
from passdeform.harness import (
    SCENARIOS,
    ScenarioResult,
    SetupFileError,
    bundled_setup_path,
    dump_setup,
    emit_results,
    load_bundled,
    load_results,
    parse_setup,
    parse_setup_text,
    run_scenario,
)
from passdeform.harness.cli import main
from passdeform.setups import PAULI

GOOD = """\
schema: 1
name: pair
subsystems:
  - {label: a, energy_levels: [0, 1], init: {thermal: 1.0}}
  - {label: b, energy_levels: [0, 2], init: {thermal: 0.5}}
interactions:
  hop:
    kind: creation_annihilation
    pair: [a, b]
    transitions: [[0, 1]]
    coupling: 0.3
observables:
  A:
    kind: terms
    terms:
      - {coef: 2.0, ops: {a: H}}
"""


@pytest.mark.parametrize("name", sorted({f for f, _ in SCENARIOS.values()}))
def test_bundled_setups_round_trip(name, tmp_path):
    s = load_bundled(name)
    out = tmp_path / f"{name}.setup"
    dump_setup(s, out)
    again = parse_setup(out)
    assert again.hash() == s.hash()
    assert np.allclose(again.initial_state().matrix, s.initial_state().matrix, atol=0)


def test_two_four_level_setup_contents():
    s = load_bundled("two_four_level")
    c, h = s.subsystems
    assert c.energies == (0.0, 4.0, 8.0, 12.0) and h.energies == (0.0, 1.0, 2.0, 3.0)
    assert (c.beta, h.beta) == (2.0, 1.0)
    x = load_bundled("x_machine")
    assert len(x.subsystems) == 6 and x.parameters["simulated_environment_spins"] == 2


def test_malformed_populations_name_the_subsystem():
    text = GOOD.replace("{label: b, energy_levels: [0, 2], init: {thermal: 0.5}}",
                        "{label: b, energy_levels: [0, 2], init: {populations: [0.5, 0.4]}}")
    with pytest.raises(SetupFileError) as err:
        parse_setup_text(text, "bad.setup")
    assert err.value.line == 5
    assert "'b'" in str(err.value) and "bad.setup:5" in str(err.value)


@pytest.mark.parametrize("patch, line", [
    (("name: pair", "name: pair\ncolour: red"), 3),
    (("schema: 1", "schema: 2"), 1),
    (("coupling: 0.3", "coupling: 0.3\n    topology: ring"), 12),
    (("{coef: 2.0, ops: {a: H}}", "{coef: 2.0, ops: {z: H}}"), 16),
    (("{coef: 2.0, ops: {a: H}}", "{coef: 2.0, ops: {a: sq}}"), 16),
    (("pair: [a, b]", "pair: [a]"), 7),
])
def test_schema_errors_carry_line_numbers(patch, line):
    with pytest.raises(SetupFileError) as err:
        parse_setup_text(GOOD.replace(*patch))
    assert err.value.line == line


def test_yaml_syntax_error_line():
    with pytest.raises(SetupFileError) as err:
        parse_setup_text(GOOD.replace("init: {thermal: 1.0}}", "init: {thermal: 1.0}"))
    assert err.value.line is not None


def test_dimension_cap():
    subs = "\n".join(f"  - {{label: q{k}, energy_levels: [0, 1], init: {{thermal: 1.0}}}}" for k in range(13))
    with pytest.raises(SetupFileError, match="cap"):
        parse_setup_text(f"schema: 1\nsubsystems:\n{subs}\n")


def test_correlation_table_validation():
    text = GOOD + "correlations: {populations: [0.5, 0.2, 0.2]}\n"
    with pytest.raises(SetupFileError, match="correlation"):
        parse_setup_text(text)


def test_interaction_and_observable_expressions():
    s = parse_setup_text(GOOD)
    hop = s.interaction("hop").matrix
    # |0>_a|1>_b <-> |1>_a|0>_b with coupling 0.3
    assert hop[s.basis_index([0, 1]), s.basis_index([1, 0])] == pytest.approx(0.3)
    assert np.allclose(hop, hop.conj().T)
    assert np.allclose(s.observable("A").matrix, 2 * s.hamiltonian("a").matrix)
    assert np.allclose(PAULI["sz"], np.diag([1.0, -1.0]))


@pytest.mark.parametrize("name", sorted(SCENARIOS))
def test_scenarios_pass_and_are_fast(name):
    t0 = time.time()
    r = run_scenario(name, {"seed": 0})
    assert time.time() - t0 < 60
    assert r.rows and r.columns[-1] == "verdict"
    assert r.all_satisfied
    assert r.metadata["setup_hash"] and r.metadata["seed"] == 0


def test_two_four_level_columns_and_tightness():
    r = run_scenario("two_four_level", {"n_times": 11})
    assert r.columns == ("t", "q_c", "q_h", "CI_rhs", "PD_rhs", "PD_int_rhs", "mutual_information", "verdict")
    assert max(abs(a - b) for a, b in zip(r.column("q_c"), r.column("PD_int_rhs"))) < 1e-9


def test_hierarchy_demo_threshold_order():
    r = run_scenario("hierarchy_demo", {})
    thr = r.summary["thresholds"]
    assert thr["majorization"] <= thr["binary"] <= thr["truncated"] <= thr["CI"]


def test_unknown_scenario_and_generic_setup():
    with pytest.raises(ValidationError):
        run_scenario("nope")
    r = run_scenario(parse_setup_text(GOOD), {"trials": 20})
    assert r.all_satisfied and len(r.rows) == 20


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_results_are_byte_stable_and_round_trip(fmt, tmp_path):
    a = emit_results(run_scenario("erasure_bound", {"seed": 3, "trials": 40}), fmt, tmp_path / f"a.{fmt}")
    b = emit_results(run_scenario("erasure_bound", {"seed": 3, "trials": 40}), fmt, tmp_path / f"b.{fmt}")
    assert a.read_bytes() == b.read_bytes()
    c = emit_results(run_scenario("erasure_bound", {"seed": 4, "trials": 40}), fmt)
    assert c != a.read_text()
    back = load_results(a)
    orig = run_scenario("erasure_bound", {"seed": 3, "trials": 40})
    assert back.rows == orig.rows
    assert list(back.columns) == list(orig.columns)


def test_json_payload_keeps_full_precision():
    r = ScenarioResult("x", ("v", "verdict"), [[0.1 + 0.2, True], [np.float64(1 / 3), True]], {"inf": np.inf})
    back = ScenarioResult.from_dict(json.loads(emit_results(r, "json")))
    assert back.rows[0][0] == 0.1 + 0.2 and back.rows[1][0] == 1 / 3
    with pytest.raises(ValidationError):
        emit_results(r, "xml")


def test_cli_exit_codes(tmp_path, capsys):
    setup = str(bundled_setup_path("demon"))
    assert main(["run", "optimal_protocol_demo", "--format", "csv"]) == 0
    assert capsys.readouterr().out.startswith("task,mode")
    assert main(["xi", setup, "--observable", "sz_h1", "--format", "json"]) == 0
    demon = tmp_path / "demon.yaml"
    demon.write_text("schema: 1\nkind: state_replacement\nsource: [1, 1, 0, 0]\ntarget: [0, 0, 1, 1]\n")
    code = main(["threshold", setup, "--demon", str(demon), "--interaction", "all_to_all", "--time", "0.3",
                 "--bound", "ci", "--bound", "majorization", "--out", str(tmp_path)])
    assert code == 2
    assert (tmp_path / "threshold.json").exists()
    assert main(["audit", setup, "--bound", "gp:2.56", "--trials", "20"]) == 0
    assert main(["audit", setup, "--bound", "nonsense"]) == 1
    assert main(["audit", str(tmp_path / "missing.setup")]) == 1
    assert main(["run", "not_a_scenario"]) == 1
