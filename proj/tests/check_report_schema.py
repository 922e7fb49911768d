#!/usr/bin/env python3
# Copyright 2026 The cmprof Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Validates `cmprof analyze --format json` output against the report schema.

usage: check_report_schema.py <cmprof binary> <schema.json>
"""

import json
import pathlib
import subprocess
import sys
import tempfile

import jsonschema

DATA = pathlib.Path(__file__).resolve().parent / "data"


def analyze(cli, trace, *flags):
    out = subprocess.run([cli, "analyze", str(trace), "--format", "json", *flags],
                         check=True, capture_output=True, text=True).stdout
    return json.loads(out)


def main():
    cli, schema_path = sys.argv[1], sys.argv[2]
    schema = json.loads(pathlib.Path(schema_path).read_text())
    validator = jsonschema.Draft202012Validator(schema)
    failures = 0

    with tempfile.TemporaryDirectory() as tmp:
        tmp = pathlib.Path(tmp)
        cases = [
            ("trace_a nmin 2", DATA / "trace_a.jsonl", ["--nmin", "2"]),
            ("trace_a default", DATA / "trace_a.jsonl", []),
            ("stack top", DATA / "stack_top.jsonl",
             ["--symbols", str(DATA / "stack_top.sym")]),
            ("stack top unsymbolized", DATA / "stack_top.jsonl", []),
        ]
        for kind, extra in [("serial", []), ("balanced", []),
                            ("convoy", ["--threads", "8", "--cpus", "4",
                                        "--parallel-ns", "50000",
                                        "--period", "2000"]),
                            ("pipeline", ["--items", "30"])]:
            prefix = tmp / kind
            subprocess.run([cli, "synth", kind, "--out", str(prefix), *extra],
                           check=True)
            cases.append((kind, prefix.with_suffix(".jsonl"),
                          ["--symbols", str(prefix.with_suffix(".sym")),
                           "--nmin", "4"]))

        docs = []
        for name, trace, flags in cases:
            doc = analyze(cli, trace, *flags)
            docs.append(doc)
            errors = list(validator.iter_errors(doc))
            status = "PASS" if not errors else "FAIL"
            print(f"{status} {name}")
            for e in errors[:5]:
                print(f"  {e.json_path}: {e.message}")
            failures += bool(errors)

    # The schema must reject structurally broken reports.
    broken = json.loads(json.dumps(docs[0]))
    del broken["summary"]["threads"]
    broken["paths"][0]["rank"] = 0
    rejected = len(list(validator.iter_errors(broken))) == 2
    print(f"{'PASS' if rejected else 'FAIL'} broken report rejected")
    failures += not rejected

    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
