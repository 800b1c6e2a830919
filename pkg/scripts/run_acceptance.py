#!/usr/bin/env python3
"""
Acceptance runner for the rearrangement toolkit
Drives app.py over the bundled fixture configs and checks exit codes and reproducibility
"""

import os
import subprocess
import sys
from datetime import datetime

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
FIXTURES = os.path.join(ROOT, "tests", "fixtures")

# (description, arguments, expected exit code)
CASES = [
    ("Rank array of 3 1 2", ["ranks", "3", "1", "2"], 0),
    ("Rank tuple back to a permutation", ["ranks", "--mode", "ranks", "1", "1", "2"], 0),
    ("Invalid permutation is rejected", ["ranks", "1", "1", "2"], 2),
    ("Exact geometry at theta=1/2, c=1/2", ["exact2", "--theta", "1/2", "--c", "1/2"], 0),
    ("Exact geometry rejects c=1", ["exact2", "--theta", "1/2", "--c", "1"], 2),
    ("Canonicalize |x - 1/2|", ["canonicalize", "--breakpoints", "0", "1/2", "1",
                                "--values", "1/2", "0", "1/2"], 0),
    ("Travellers trial dump", ["simulate", "--config", "travellers_simulate.json"], 0),
    ("Zero-length spec is rejected", ["simulate", "--config", "zero_n.json"], 2),
    ("Travellers' process passes SRI", ["sri", "--config", "travellers_sri.json"], 0),
    ("Trivial rearrangement fails SRI", ["sri", "--config", "trivial_sri.json"], 1),
    ("Missing seed is a config error", ["sri", "--config", "missing_seed.json"], 2),
    ("Too few trials is underpowered", ["sri", "--config", "travellers_sri.json", "--trials", "50"], 3),
    ("Example 4 rank 4 is uniform", ["sri", "--config", "example4_k4.json"], 0),
    ("W-shaped directing function fails", ["sri", "--config", "binary_w_shape.json"], 1),
    ("Example 3 with sublevel cells passes", ["sri", "--config", "example3_sublevel.json"], 0),
]


def resolve(args):
    """Point --config at the fixtures directory"""
    out = list(args)
    if "--config" in out:
        i = out.index("--config") + 1
        out[i] = os.path.join(FIXTURES, out[i])
    return out


def run_cli(args):
    cmd = [sys.executable, os.path.join(ROOT, "app.py")] + resolve(args)
    return subprocess.run(cmd, capture_output=True, cwd=ROOT)


def run_case(description, args, expected):
    """Run one CLI invocation and compare its exit code"""
    print(f"\n🧪 {description}")
    print(f"Command: app.py {' '.join(args)}")
    print("-" * 50)

    try:
        result = run_cli(args)
    except OSError as e:
        print(f"❌ ERROR: {e}")
        return False

    if result.returncode == expected:
        print(f"✅ SUCCESS (exit {result.returncode})")
        return True

    print(f"❌ FAILED: exit {result.returncode}, expected {expected}")
    stderr = result.stderr.decode(errors="replace")
    if stderr:
        print("Error:")
        print(stderr[:500] + "..." if len(stderr) > 500 else stderr)
    return False


def run_reproducibility(workers=("1", "4", "8")):
    """Same seed, any worker count: byte-identical reports"""
    print("\n🔁 Checking reproducibility across worker counts")
    print("=" * 50)

    outputs = {}
    for count in workers:
        result = run_cli(["sri", "--config", "travellers_sri.json", "--trials", "100000",
                          "--workers", count])
        outputs[count] = result.stdout
        print(f"workers={count}: exit {result.returncode}, {len(result.stdout)} bytes")

    if len(set(outputs.values())) == 1:
        print("✅ Reports are byte-identical")
        return True
    print("❌ Reports differ between worker counts")
    return False


def main():
    print("🚀 Rearrangement toolkit - Acceptance Runner")
    print("=" * 70)
    print(f"Started at: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")

    tests_passed = 0
    tests_total = 0

    for description, args, expected in CASES:
        tests_total += 1
        if run_case(description, args, expected):
            tests_passed += 1

    tests_total += 1
    if run_reproducibility():
        tests_passed += 1

    print("\n" + "=" * 70)
    print(f"📊 Results: {tests_passed}/{tests_total} checks passed")

    if tests_passed == tests_total:
        print("🎉 All acceptance checks passed")
    else:
        print("⚠️  Some checks failed. Check the output above for details.")
        print("Run the unit suites with: pytest tests/")

    return tests_passed == tests_total


if __name__ == "__main__":
    success = main()
    sys.exit(0 if success else 1)
