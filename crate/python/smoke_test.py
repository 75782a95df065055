"""Smoke test for the qkdrate extension module.

Build first:
    cargo build -p qkdrate-py --release --features extension-module
    cp target/release/libqkdrate.so python/qkdrate.so
"""

import json
import math
import sys
from pathlib import Path

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE))

import qkdrate  # noqa: E402


def close(a, b, tol):
    return abs(a - b) <= tol


def main():
    assert qkdrate.tau(0.0) == 1.0
    assert qkdrate.tau(0.5) == 0.0
    assert close(qkdrate.collision_bound(0.05), 0.595, 1e-15)
    assert close(qkdrate.binary_entropy(0.11), qkdrate.binary_entropy(0.89), 1e-12)

    r, eve = qkdrate.final_key_length(1000, 0.0, 0.0, s=0, t=0)
    assert r == 1000 and close(eve, 1000.0 + 1.0 / math.log(2.0), 1e-9)

    quiet = qkdrate.ChannelParams(0.2, 1.0, 0.0, 0.0, 0.0)
    rate, _, p, e = qkdrate.RateModel(quiet).rate("ideal-single", 0.0)
    assert rate == 0.5 and p == 1.0 and e == 0.0

    fiber = qkdrate.ChannelParams.telecom_fiber()
    model = qkdrate.RateModel(fiber)
    chi, pdc_rate = model.optimize("pdc", 50.0)
    assert 0.0 < chi < 1.0 and pdc_rate > 0.0
    epr = model.cutoff_km("ideal-epr")
    bb84 = model.cutoff_km("ideal-single")
    assert bb84 < epr
    rates = model.sweep("ideal-epr", [0.0, 50.0, 100.0])
    assert rates[0] > rates[1] > rates[2] > 0.0

    closed = qkdrate.pdc_coefficients(0.2, 0.5)
    oracle = qkdrate.oracle_pdc_coefficients(0.2, 0.5)
    assert max(abs(x - y) for x, y in zip(closed, oracle)) < 1e-6

    passed, report = qkdrate.run_verify("multi-photon")
    assert passed and json.loads(report)["suite"] == "multi-photon"

    try:
        qkdrate.run_verify("unknown")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown suite accepted")

    config = (HERE.parent / "configs" / "fig5_swaps.json").read_text()
    csv = qkdrate.sweep_csv(config)
    assert csv.splitlines()[0].startswith("curve,abscissa,")

    print(f"ok: EPR cutoff {epr:.1f} km, BB84 cutoff {bb84:.1f} km, optimal chi at 50 km {chi:.4f}")


if __name__ == "__main__":
    main()
