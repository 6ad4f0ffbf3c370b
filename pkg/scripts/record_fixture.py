"""Record a deterministic interactive-session log fixture.

Discovers a three-command operator schedule (reject a low alert, ask for
more imagery on the first permission request, confirm the re-raised one)
against the snow scenario, records the mission, verifies the log replays
byte-identically, and copies it where the console tests expect it.
"""

from __future__ import annotations

import shutil
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))

from hotlsim.gateway import replay, run_headless  # noqa: E402
from hotlsim.sim_world import load_scenario  # noqa: E402

from conftest import interactive_schedule  # noqa: E402


def main() -> None:
    scenario = load_scenario(ROOT / "scenarios" / "river_snow.scenario.json")
    schedule = interactive_schedule(scenario)
    print("schedule:", [(t, a, act.value) for t, a, act in schedule])

    out = ROOT / "scenarios" / "river_snow_session.jsonl"
    run_headless(scenario, record_path=out, schedule=schedule)
    result = replay(out)
    if not result.ok:
        raise SystemExit(f"fixture does not replay: {result}")
    print(f"recorded {result.envelopes_checked} envelopes to {out} (replay pass)")

    console_fixture = ROOT / "frontend" / "fixtures" / "river_snow_session.ndjson"
    if console_fixture.parent.exists():
        shutil.copyfile(out, console_fixture)
        print(f"copied to {console_fixture}")


if __name__ == "__main__":
    main()
