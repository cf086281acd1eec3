#!/usr/bin/env python3
"""Regenerate the pinned reference values used by tests/test_acceptance.py.

Run after changing shipped gains, model constants, or scenario files, and
paste the printed block over the REFERENCE dict in the acceptance suite.
"""

import tempfile

from quadsim.harness import run_scenario


def main() -> None:
    vals = {}
    m = run_scenario("takeoff-ge", tempfile.mkdtemp())
    vals["takeoff_ge_on_max_z"] = m["runs"]["on"]["max_z"][0]
    vals["takeoff_ge_off_max_z"] = m["runs"]["off"]["max_z"][0]
    vals["takeoff_ge_on_max_vz"] = m["runs"]["on"]["max_vz"][0]
    vals["takeoff_ge_off_max_vz"] = m["runs"]["off"]["max_vz"][0]

    m = run_scenario("downwash2", tempfile.mkdtemp())
    vals["downwash_on_min_z"] = m["runs"]["on"]["min_z"][0]
    vals["downwash_off_min_z"] = m["runs"]["off"]["min_z"][0]

    m = run_scenario("circle4", tempfile.mkdtemp())
    vals["circle4_rms_xy"] = m["runs"]["main"]["rms_xy_error"]

    print("REFERENCE = {")
    for k, v in vals.items():
        print(f'    "{k}": {v!r},')
    print("}")
    dz = vals["takeoff_ge_on_max_z"] - vals["takeoff_ge_off_max_z"]
    dvz = vals["takeoff_ge_on_max_vz"] - vals["takeoff_ge_off_max_vz"]
    dip = vals["downwash_off_min_z"] - vals["downwash_on_min_z"]
    print(f"# takeoff-ge margins: dmax_z={dz:.4f} m, dmax_vz={dvz:.4f} m/s")
    print(f"# downwash dip: {dip * 100:.2f} cm")


if __name__ == "__main__":
    main()
