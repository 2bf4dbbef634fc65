"""Small helpers shared by the demo scripts."""

import json
from pathlib import Path

from qlmpt.harness import ExperimentConfig

CONFIGS = Path(__file__).resolve().parent / "configs"


def load_config(name, **overrides) -> ExperimentConfig:
    d = json.loads((CONFIGS / name).read_text())
    d.update(overrides)
    return ExperimentConfig.from_dict(d)


def print_rows(result, columns=("sweep", "detector", "pfa_mc", "pd_mc", "pd_theory", "ci")):
    print("  ".join(f"{c:>14}" for c in columns))
    for r in result.rows:
        vals = [getattr(r, c) for c in columns]
        print("  ".join(f"{v:>14.4f}" if isinstance(v, float) else f"{str(v):>14}" for v in vals))
