"""Development bootstrap: install crutchgait, run the fast tests and a smoke training run."""

import subprocess
import sys
import tempfile
from typing import List, Tuple


def bootstrap_steps(smoke_dir: str) -> List[Tuple[str, List[str]]]:
    """Commands run in order; the first failure stops the bootstrap."""
    python = sys.executable
    return [
        ("Installing crutchgait (editable)", [python, "-m", "pip", "install", "-e", "."]),
        ("Installing development tools", [python, "-m", "pip", "install", "-r", "requirements-dev.txt"]),
        ("Running unit tests (slow training checks skipped)",
         [python, "-m", "pytest", "tests/", "-q", "-m", "not desk and not slow"]),
        ("Training the point-mass smoke config for 5 iterations",
         [python, "-m", "crutchgait", "train", "configs/desk_point_mass.json",
          "--iterations", "5", "--out", smoke_dir]),
    ]


def main() -> int:
    print("Bootstrapping crutchgait...")
    with tempfile.TemporaryDirectory(prefix="crutchgait-smoke-") as smoke_dir:
        for number, (title, command) in enumerate(bootstrap_steps(smoke_dir), start=1):
            print(f"\n{number}. {title}...")
            try:
                subprocess.check_call(command)
            except subprocess.CalledProcessError as exc:
                print(f"✗ {title} failed (exit {exc.returncode})")
                return 1
            print("✓ done")

    print("\n✓ Environment ready")
    print("  - Full fast suite:     pytest")
    print("  - Desk-scale sweep:    pytest -m desk")
    print("  - Full-scale sweep:    crutchgait sweep configs/full_scale.json --parallel 4")
    return 0


if __name__ == "__main__":
    sys.exit(main())
