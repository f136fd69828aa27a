"""Python interface to the switched-inverter grid simulation core.

The heavy lifting lives in the compiled extension; this layer re-exports it
and adds small conveniences (JSON re-hydration, one-call runs).
"""

from __future__ import annotations

import json as _json
from typing import Any

from ._core import (
    ConfigError,
    Engine,
    Scenario,
    SimulationFault,
    load_scenario,
    parse_scenario,
    run_acceptance,
)

__all__ = [
    "ConfigError",
    "Engine",
    "Scenario",
    "SimulationFault",
    "load_scenario",
    "parse_scenario",
    "run_acceptance",
    "run",
    "headline",
]

__version__ = "0.1.0"


def headline(engine: Engine) -> dict[str, Any]:
    """Run summary of ``engine`` as a plain dictionary."""
    return _json.loads(engine.headline())


def run(scenario: str | Scenario, csv_path: str | None = None) -> dict[str, Any]:
    """Simulate a scenario (path or parsed object) to completion.

    Returns the headline summary; optionally writes the recorded capture to
    ``csv_path``.
    """
    sc = load_scenario(scenario) if isinstance(scenario, str) else scenario
    engine = Engine(sc)
    engine.run()
    if csv_path is not None:
        engine.write_csv(csv_path)
    return headline(engine)
