#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Re-record a fixture: canned executions from real coverage runs, then the cassette.

usage: record.py FIXTURE_DIR --typeforge PATH
       record.py FIXTURE_DIR --check
"""
import argparse
import json
import os
import re
import shutil
import subprocess
import sys
import tempfile

CASE = re.compile(r"^# case: (\S+)$", re.M)
BLOCK = re.compile(r"```python\n(.*?)\n```", re.S)
TIMING = re.compile(r"in \d+\.\d+s")


def cases(responder):
    found = {}
    for rule in responder["rules"]:
        text = rule["response"] if isinstance(rule["response"], str) else "\n".join(rule["response"])
        for block in BLOCK.findall(text):
            m = CASE.search(block)
            if m:
                found[m.group(1)] = block
    return found


def run_case(project, source):
    with tempfile.TemporaryDirectory() as tmp:
        work = os.path.join(tmp, "project")
        shutil.copytree(project, work, ignore=shutil.ignore_patterns(".typeforge", "__pycache__"))
        test = os.path.join(work, "test_case.py")
        with open(test, "w") as fh:
            fh.write(source + "\n")
        env = dict(os.environ, PYTHONDONTWRITEBYTECODE="1")
        proc = subprocess.run(
            [sys.executable, "-m", "coverage", "run", "--branch", "--source", work, "--omit", test,
             "-m", "pytest", "-q", "-p", "no:cacheprovider", "test_case.py"],
            cwd=work, env=env, capture_output=True, text=True)
        subprocess.run([sys.executable, "-m", "coverage", "json", "-o", "cov.json"], cwd=work,
                       capture_output=True, text=True, check=True)
        with open(os.path.join(work, "cov.json")) as fh:
            raw = json.load(fh)
        files = {}
        for path, data in sorted(raw["files"].items()):
            rel = os.path.relpath(os.path.join(work, path), work).replace(os.sep, "/")
            files[rel] = {
                "executed_lines": data["executed_lines"],
                "missing_lines": data["missing_lines"],
                "executed_branches": data.get("executed_branches", []),
                "missing_branches": data.get("missing_branches", []),
            }
        out = TIMING.sub("in 0.00s", proc.stdout.replace(work, "<project>"))
        if proc.returncode == 0:
            status, report = "pass", ""
        elif proc.returncode == 1 and "AssertionError" in out:
            status, report = "fail", out
        else:
            status, report = "error", out
        return {"status": status, "error_report": report, "duration_s": 0.0,
                "coverage": {"files": files}}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("fixture")
    mode = ap.add_mutually_exclusive_group(required=True)
    mode.add_argument("--typeforge", help="typeforge binary used to record the cassette")
    mode.add_argument("--check", action="store_true", help="compare against the committed executions and exit")
    args = ap.parse_args()
    fixture = os.path.abspath(args.fixture)
    with open(os.path.join(fixture, "responder.json")) as fh:
        responder = json.load(fh)

    executions = []
    for name, source in sorted(cases(responder).items()):
        result = run_case(os.path.join(fixture, "project"), source)
        print(f"{name}: {result['status']}", file=sys.stderr)
        executions.append({"marker": "# case: " + name, "result": result})
    if args.check:
        with open(os.path.join(fixture, "executions.json")) as fh:
            committed = json.load(fh)
        if committed != {"executions": executions}:
            print(f"{fixture}: executions.json is stale", file=sys.stderr)
            sys.exit(1)
        return
    with open(os.path.join(fixture, "executions.json"), "w") as fh:
        json.dump({"executions": executions}, fh, indent=2)
        fh.write("\n")

    cassette = os.path.join(fixture, "cassette.json")
    if os.path.exists(cassette):
        os.remove(cassette)
    with tempfile.TemporaryDirectory() as out:
        subprocess.run([args.typeforge, "--config", os.path.join(fixture, "typeforge.toml"), "--record",
                        "--responder", os.path.join(fixture, "responder.json"), "--cassette", cassette,
                        "--out", out, "-q", "generate"], check=True)


if __name__ == "__main__":
    main()
