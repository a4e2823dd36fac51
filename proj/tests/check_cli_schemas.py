"""Runs the CLI on the shipped configs and validates every JSON it emits."""
import json
import pathlib
import subprocess
import sys

import jsonschema

binary, root = sys.argv[1], pathlib.Path(sys.argv[2])
schemas = {p.name.split(".")[0]: json.loads(p.read_text()) for p in (root / "schemas").glob("*.schema.json")}
failures = []


def check(name, instance, schema):
    try:
        jsonschema.validate(instance, schemas[schema])
    except jsonschema.ValidationError as e:
        failures.append(f"{name}: {e.message}")


def run(*args, threads="1"):
    out = subprocess.run([binary, "--threads", threads, *args], capture_output=True, text=True)
    if out.returncode != 0:
        failures.append(f"{' '.join(args)} exited {out.returncode}: {out.stderr.strip()}")
    return out.stdout


for cfg in sorted((root / "configs").glob("*.json")):
    check(cfg.name, json.loads(cfg.read_text()), "potential")

cfg = lambda name: str(root / "configs" / name)
cases = [
    ("degree", ["--config", cfg("kepler.json"), "degree", "--energy", "1"]),
    ("degree", ["--config", cfg("bump.json"), "degree", "--energy", "3"]),
    ("degree", ["--config", cfg("bump3d.json"), "degree", "--energy", "1", "--mesh", "2"]),
    ("degree", ["--config", cfg("bump.json"), "--seed", "3", "degree", "--energy", "1",
                "--method", "lagrange_projection"]),
    ("deflection", ["--config", cfg("kepler.json"), "deflect", "--energy", "0.5", "--l", "1"]),
    ("scan", ["--config", cfg("two_bumps.json"), "scan", "--energies", "1,2.5", "--grid", "8", "--random", "4"]),
    ("scan", ["--config", cfg("bump3d.json"), "scan", "--energies", "3", "--grid", "4", "--random", "2"]),
    ("hill", ["--config", cfg("two_bumps.json"), "hill", "--energy", "1", "--points"]),
    ("itinerary", ["--config", cfg("pair.json"), "itinerary", "--energy", "1", "--sequence", "1,2"]),
]
for schema, args in cases:
    text = run(*args)
    if text:
        check(" ".join(args[2:]), json.loads(text), schema)
    # byte-identical output regardless of the worker count
    if text and run(*args, threads="3") != text:
        failures.append(f"{' '.join(args)}: output depends on the thread count")

for f in failures:
    print("FAIL", f)
print(f"{len(cases)} commands, {len(failures)} failures")
sys.exit(1 if failures else 0)
