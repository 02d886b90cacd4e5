#!/usr/bin/env python3
"""Smoke test for the leotfs_py extension module.

Builds expect the cdylib to exist already:

    cargo build -p leotfs-py --release

The script locates the shared library under target/, stages it under an
importable name, and exercises the main entry points.
"""

import math
import shutil
import sys
import tempfile
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parents[1]


def stage_module() -> None:
    candidates = [
        REPO_ROOT / "target" / profile / name
        for profile in ("release", "debug")
        for name in ("libleotfs_py.so", "leotfs_py.so", "libleotfs_py.dylib")
    ]
    for built in candidates:
        if built.exists():
            stage = Path(tempfile.mkdtemp(prefix="leotfs_py_"))
            shutil.copy2(built, stage / "leotfs_py.so")
            sys.path.insert(0, str(stage))
            return
    sys.exit("leotfs_py cdylib not found; run `cargo build -p leotfs-py --release` first")


def approx(a: float, b: float, tol: float) -> bool:
    return abs(a - b) <= tol


def main() -> None:
    stage_module()
    import leotfs_py as lt

    # Transmission efficiency table (paper profile, published TS lengths).
    cfg = lt.Config.paper()
    expected = {20: 0.7454, 30: 0.6948, 40: 0.6492, 50: 0.6079}
    for g, want in expected.items():
        cfg.set_non_isi_len(g)
        eff = round(lt.transmission_efficiency(cfg), 4)
        assert eff == want, f"G={g}: efficiency {eff} != {want}"

    # Link budget cases within the published tolerance.
    cases = lt.link_budget_cases()
    wants = [14.59, 13.73, 11.62]
    assert len(cases) == 3
    for (label, _zenith, snr), want in zip(cases, wants):
        assert approx(snr, want, 0.1), f"{label}: {snr:.3f} vs {want}"

    # Geometry: max Doppler over the coverage region.
    fd = lt.max_doppler()
    assert approx(fd, 178.2e3, 0.02 * 178.2e3), f"max Doppler {fd}"

    # Steering vectors are unit norm.
    v = lt.steering_vector(30.0, 45.0, 4, 4)
    norm = math.fsum(abs(z) ** 2 for z in v)
    assert approx(norm, 1.0, 1e-12), f"steering norm {norm}"

    # A deterministic noiseless trial with genie activity is error free.
    cfg = lt.Config.desk()
    cfg.set_noiseless()
    cfg.set_active_terminals(2)
    cfg.set_nlos_paths(0)
    cfg.set_los_phase_only(True)
    cfg.set_non_isi_len(40)
    cfg.validate()
    first = lt.run_trial(cfg, seed=7, trial=0, genie_activity=True)
    again = lt.run_trial(cfg, seed=7, trial=0, genie_activity=True)
    assert first.bit_errors == 0, f"bit errors {first.bit_errors}"
    assert first.activity_errors == 0
    assert first.nmse_db == again.nmse_db, "trial is not deterministic"
    assert first.identified == first.true_active
    assert first.nmse_db < -80.0, f"refined NMSE {first.nmse_db:.1f} dB"

    # Tiny sweep through the TOML interface.
    csv = lt.run_sweep_toml(
        """
profile = "desk"
seed = 9
trials = 2
workers = 1
axis = "g"
values = [20.0, 30.0]

[system]
active_terminals = 2

[noise]
mode = "snr_db"
snr_db = 15.0
"""
    )
    lines = csv.strip().splitlines()
    assert lines[0].startswith("axis_value,trials,pe,nmse_db,ber")
    assert len(lines) == 3, csv

    print("smoke test OK")
    print(f"  efficiency table reproduced: {sorted(expected.values())}")
    print(f"  link budget: {[round(c[2], 2) for c in cases]} dB")
    print(f"  max Doppler: {fd / 1e3:.1f} kHz")
    print(f"  noiseless trial: nmse {first.nmse_db:.1f} dB, {first.bit_errors} bit errors")


if __name__ == "__main__":
    main()
