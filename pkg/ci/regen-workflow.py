#!/usr/bin/env python3
"""Expand the anchors of ci/spec.yml into .github/workflows/ci.yml.

GitHub workflow files do not support YAML anchors, so the jobs are written
against ci/spec.yml and this script resolves the aliases into plain JSON,
which is also valid YAML.
"""
import json
import sys
from pathlib import Path

try:
    import yaml
except ImportError:
    sys.exit("pyyaml is required to regenerate the workflow (pip install -r requirements.txt).")

REPO = Path(__file__).resolve().parent.parent
HEADER = "# Generated from ci/spec.yml by ci/regen-workflow.py; edit those instead.\n\n"


def load_spec(path: Path) -> dict:
    with open(path, "r", encoding="utf-8") as file:
        loader = yaml.SafeLoader(file)
        # the workflow trigger key "on" must stay a string, not become True
        loader.bool_values = {**yaml.SafeLoader.bool_values, "on": "on"}
        try:
            return loader.get_single_data()
        finally:
            loader.dispose()


def main():
    spec = load_spec(REPO / "ci" / "spec.yml")
    spec.pop(".anchors", None)

    target = REPO / ".github" / "workflows" / "ci.yml"
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "w", encoding="utf-8") as file:
        file.write(HEADER)
        json.dump(spec, file, indent=2)
        file.write("\n")


if __name__ == "__main__":
    main()
