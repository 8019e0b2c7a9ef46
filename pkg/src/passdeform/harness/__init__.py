"""Setup ingestion, scenario execution and result persistence."""
from .io import (
    ScenarioResult,
    SetupFileError,
    dump_setup,
    emit_results,
    load_results,
    parse_setup,
    parse_setup_text,
    results_to_csv,
    results_to_json,
)
from .scenarios import SCENARIOS, bundled_setup_path, load_bundled, run_scenario
