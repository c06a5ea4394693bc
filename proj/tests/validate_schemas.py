#!/usr/bin/env python3
"""Run every fowler_lab subcommand and validate its JSON against schemas/."""

import json
import pathlib
import subprocess
import sys
import tempfile

import jsonschema
from referencing import Registry, Resource


def load_registry(schema_dir):
    schemas = {}
    for path in sorted(schema_dir.glob("*.schema.json")):
        doc = json.loads(path.read_text())
        schemas[path.name.removesuffix(".schema.json")] = doc
    registry = Registry().with_resources(
        (doc["$id"], Resource.from_contents(doc)) for doc in schemas.values()
    )
    return schemas, registry


def main():
    binary, schema_dir = sys.argv[1], pathlib.Path(sys.argv[2])
    schemas, registry = load_registry(schema_dir)
    failures = 0

    def validator(name):
        cls = jsonschema.validators.validator_for(schemas[name])
        cls.check_schema(schemas[name])
        return cls(schemas[name], registry=registry)

    def check(label, name, doc):
        nonlocal failures
        errors = sorted(validator(name).iter_errors(doc), key=lambda e: list(e.path))
        status = "ok" if not errors else "FAIL"
        print(f"{status:4} {label} -> {name}")
        for e in errors[:5]:
            print(f"     {'/'.join(map(str, e.path))}: {e.message[:200]}")
        failures += bool(errors)

    def run(args, expect=0, stream="stdout"):
        nonlocal failures
        proc = subprocess.run([binary, *args], capture_output=True, text=True)
        if proc.returncode != expect:
            print(f"FAIL {' '.join(args)}: exit {proc.returncode}, expected {expect}\n{proc.stderr[:400]}")
            failures += 1
            return None
        text = getattr(proc, stream)
        return json.loads(text) if text.strip() else {}

    with tempfile.TemporaryDirectory() as tmp:
        traj = str(pathlib.Path(tmp) / "t.json")
        cases = [
            (["solve-kl", "--N", "4", "--beta", "2"], "solve_kl"),
            (["solve-kl", "--N", "5", "--mu1", "1", "--mu2", "2", "--beta", "0.3"], "solve_kl"),
            (["bubble", "--N", "4", "--beta", "2"], "bubble"),
            (["cylinder", "--N", "3"], "cylinder"),
            (["cylinder", "--N", "6", "--mu1", "1", "--mu2", "2", "--beta", "0.2"], "cylinder"),
            (["integrate", "--initial", "bubble", "--t-min", "-4", "--t-max", "4", "--with-reports"],
             "trajectory"),
            (["integrate", "--mode", "signed", "--a1", "0.5", "--a2", "0.5", "--b1", "0.3", "--b2", "-0.3",
              "--t-min", "-30", "--t-max", "30"], "trajectory"),
            (["classify", "--N", "3", "--initial", "bubble", "--t-min", "-20", "--t-max", "20"], "classify"),
            (["classify", "--N", "4", "--beta", "0.5", "--initial", "cylinder"], "classify"),
            (["invariants", "--N", "3", "--initial", "cylinder"], "invariants"),
            (["shoot", "--N", "4"], "shoot"),
            (["sign-change", "--N", "4", "--runs", "5", "--seed", "2"], "experiment_report"),
            (["search-semi", "--N", "5", "--beta", "0.5", "--runs", "3"], "experiment_report"),
            (["sweep", "--N-list", "3,5", "--beta-list", "0.5,2", "--t-min", "-8", "--t-max", "8",
              "--archive-dir", str(pathlib.Path(tmp) / "runs")], "experiment_report"),
        ]
        for args, name in cases:
            doc = run(args)
            if doc is not None:
                check(" ".join(args), name, doc)

        run(["integrate", "--initial", "cylinder", "--out", traj])
        check("saved trajectory file", "trajectory", json.loads(pathlib.Path(traj).read_text()))
        for archived in sorted((pathlib.Path(tmp) / "runs").glob("*.json")):
            check(f"archived {archived.name}", "trajectory", json.loads(archived.read_text()))

        err = run(["integrate", "--N", "2", "--json-errors"], expect=1, stream="stderr")
        if err is not None:
            check("N=2 diagnostic", "error", err)
        err = run(["classify", "--input", str(pathlib.Path(tmp) / "missing.json"), "--json-errors"],
                  expect=3, stream="stderr")
        if err is not None:
            check("missing input diagnostic", "error", err)

    # The schemas must also reject: a tampered document cannot pass.
    bad = run(["cylinder"])
    if bad is not None:
        bad["params"]["N"] = 2
        bad["surprise"] = True
        if validator("cylinder").is_valid(bad):
            print("FAIL tampered cylinder document validated")
            failures += 1
        else:
            print("ok   tampered cylinder document rejected")

    print(f"{failures} schema failure(s)")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
